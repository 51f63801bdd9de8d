//! File-oriented workflow behind the `pide-backstep` binary: configuration
//! loading with overrides, kernel/gain synthesis, simulation, verification,
//! and deterministic CSV/JSON serialization.
//!
//! Output floats use Rust's shortest round-trip formatting, so identical
//! inputs produce byte-identical files and reloaded samples compare equal.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{parse_config, ConfigDocument, ConfigError};
use crate::feedback::{build_gain, FeedbackError, FeedbackGain};
use crate::kernel::{
    residual_report, solve_kernel, KernelError, KernelSolution, SolverOptions,
};
use crate::model::{
    eliminate_convection, reorder_dirichlet_first, Coeff1, PlantModel, TargetSpec,
};
use crate::numerics::{fit_decay_rate, NumericsError};
use crate::sim::{discretize, estimate_mu_max, simulate, Input, SimError, Trajectory};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config has no x0 block; simulation needs initial profiles")]
    MissingInitialProfile,
}

/// Command-line options shared by all subcommands.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub mu_c: Option<f64>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub open_loop: bool,
    /// Reserved; the pipeline is deterministic.
    pub seed: Option<u64>,
}

impl RunOptions {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        Self {
            config: config.into(),
            out: PathBuf::from("./out"),
            mu_c: None,
            grid: None,
            tol: None,
            t_end: None,
            dt: None,
            open_loop: false,
            seed: None,
        }
    }
}

/// Everything the subcommands need after synthesis.
pub struct Pipeline {
    pub doc: ConfigDocument,
    /// Original validated plant (may carry convection).
    pub plant_raw: PlantModel,
    /// Convection-free design plant.
    pub plant: PlantModel,
    pub weight: Vec<Coeff1>,
    pub target: TargetSpec,
    pub opts: SolverOptions,
    pub sol: KernelSolution,
    /// Gain acting on the original state (weight folded in).
    pub gain: FeedbackGain,
}

pub fn build_pipeline(run: &RunOptions) -> Result<Pipeline, CliError> {
    let doc = parse_config(&run.config)?;
    let plant_raw = doc.build_plant()?;
    let (plant, weight) = eliminate_convection(&plant_raw);
    let (plant, perm) = reorder_dirichlet_first(&plant);
    debug_assert!(perm.iter().enumerate().all(|(k, &p)| k == p));
    let mut target = doc.build_target()?;
    if let Some(mu) = run.mu_c {
        target.mu_c = mu;
    }
    let opts = SolverOptions {
        grid_n: run.grid.unwrap_or(doc.solver.grid_n),
        tol: run.tol.unwrap_or(doc.solver.tol),
        max_iter: doc.solver.max_iter,
    };
    let sol = solve_kernel(&plant, &target, opts)?;
    let gain = build_gain(&sol, &plant, &target)?.fold_weight(&weight);
    Ok(Pipeline {
        doc,
        plant_raw,
        plant,
        weight,
        target,
        opts,
        sol,
        gain,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

/// Long-format kernel table: `i,j,z,zeta,value` over the triangle nodes.
pub fn kernel_csv(sol: &KernelSolution) -> String {
    let mut out = String::from("i,j,z,zeta,value\n");
    let mm = sol.grid_n;
    for i in 0..sol.n {
        for j in 0..sol.n {
            let pair = sol.pair(i, j);
            for iz in 0..mm {
                for ic in 0..=iz {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        i + 1,
                        j + 1,
                        fmt_f(sol.z_nodes[iz]),
                        fmt_f(sol.z_nodes[ic]),
                        fmt_f(sol.k_values[pair][iz * mm + ic])
                    );
                }
            }
        }
    }
    out
}

/// Canonical kernel table: `i,j,xi,eta,value` over the in-domain sheet nodes
/// (the duplicated η = 0 row appears once per sheet).
pub fn canonical_csv(sol: &KernelSolution) -> String {
    let mut out = String::from("i,j,xi,eta,value\n");
    for i in 0..sol.n {
        for j in 0..sol.n {
            let pair = sol.pair(i, j);
            let table = &sol.g[pair];
            let mut dump = |sheet: &crate::numerics::Sheet, mask: &[bool]| {
                for ix in 0..sheet.x.n {
                    for iy in 0..sheet.y.n {
                        if mask[ix * sheet.y.n + iy] {
                            let _ = writeln!(
                                out,
                                "{},{},{},{},{}",
                                i + 1,
                                j + 1,
                                fmt_f(sheet.x.node(ix)),
                                fmt_f(sheet.y.node(iy)),
                                fmt_f(sheet.at(ix, iy))
                            );
                        }
                    }
                }
            };
            dump(&table.sheet_pos, &table.mask_pos);
            if let (Some(neg), Some(mask)) = (&table.sheet_neg, &table.mask_neg) {
                dump(neg, mask);
            }
        }
    }
    out
}

pub fn a0_tilde_csv(sol: &KernelSolution) -> String {
    let mut out = String::from("i,j,z,value\n");
    for ((i, j), row) in &sol.a0_tilde {
        for (z, v) in row.nodes().iter().zip(row.values()) {
            let _ = writeln!(out, "{},{},{},{}", i + 1, j + 1, fmt_f(*z), fmt_f(*v));
        }
    }
    out
}

fn meta_json(pipe: &Pipeline) -> String {
    let sol = &pipe.sol;
    serde_json::to_string_pretty(&serde_json::json!({
        "iterations": sol.iterations_used,
        "final_update_sup": sol.final_update_sup,
        "gamma": sol.gamma,
        "growth_M_hat": sol.growth_m_hat,
        "grid_n": sol.grid_n,
        "tol": pipe.opts.tol,
        "mu_c": sol.mu_c,
    }))
    .expect("json")
        + "\n"
}

/// Parse a kernel CSV back into records (used by the round-trip check).
pub fn read_kernel_csv(text: &str) -> Vec<(usize, usize, f64, f64, f64)> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let mut it = line.split(',');
            let i = it.next().unwrap().parse().unwrap();
            let j = it.next().unwrap().parse().unwrap();
            let z = it.next().unwrap().parse().unwrap();
            let zeta = it.next().unwrap().parse().unwrap();
            let v = it.next().unwrap().parse().unwrap();
            (i, j, z, zeta, v)
        })
        .collect()
}

pub fn cmd_kernel(run: &RunOptions) -> Result<Pipeline, CliError> {
    let pipe = build_pipeline(run)?;
    write_file(&run.out, "K.csv", &kernel_csv(&pipe.sol))?;
    write_file(&run.out, "G.csv", &canonical_csv(&pipe.sol))?;
    write_file(&run.out, "A0_tilde.csv", &a0_tilde_csv(&pipe.sol))?;
    write_file(&run.out, "meta.json", &meta_json(&pipe))?;
    Ok(pipe)
}

/// Closed-loop (or open-loop) simulation from the configured initial profile.
pub fn run_simulation(pipe: &Pipeline, run: &RunOptions) -> Result<Trajectory, CliError> {
    let x0_fns = pipe.doc.build_x0()?;
    if x0_fns.is_empty() {
        return Err(CliError::MissingInitialProfile);
    }
    let sys = discretize(&pipe.plant_raw, pipe.doc.sim.n_z)?;
    let x0: Vec<Vec<f64>> = x0_fns
        .iter()
        .map(|f| sys.z.iter().map(|&z| f(z)).collect())
        .collect();
    let t_end = run.t_end.unwrap_or(pipe.doc.sim.t_end);
    let dt = run.dt.unwrap_or(pipe.doc.sim.dt);
    let traj = if run.open_loop {
        simulate(&sys, Input::Zero, &x0, t_end, dt)?
    } else {
        let sampled = pipe.gain.sampled_on(&sys.z);
        simulate(&sys, Input::Gain(&sampled), &x0, t_end, dt)?
    };
    Ok(traj)
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,channel,z,value\n");
    for (s, t) in traj.times.iter().enumerate() {
        for (i, row) in traj.snapshots[s].iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    fmt_f(*t),
                    i + 1,
                    fmt_f(traj.z_grid[k]),
                    fmt_f(*v)
                );
            }
        }
    }
    out
}

pub fn norms_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,value\n");
    for (t, v) in traj.times.iter().zip(&traj.l2_norms) {
        let _ = writeln!(out, "{},{}", fmt_f(*t), fmt_f(*v));
    }
    out
}

pub fn control_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,channel,value\n");
    for (s, t) in traj.times.iter().enumerate() {
        for (i, u) in traj.controls[s].iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_f(*t), i + 1, fmt_f(*u));
        }
    }
    out
}

pub fn cmd_simulate(run: &RunOptions) -> Result<(), CliError> {
    let pipe = build_pipeline(run)?;
    let traj = run_simulation(&pipe, run)?;
    write_file(&run.out, "trajectory.csv", &trajectory_csv(&traj))?;
    write_file(&run.out, "norms.csv", &norms_csv(&traj))?;
    write_file(&run.out, "control.csv", &control_csv(&traj))?;
    Ok(())
}

pub fn cmd_eigs(run: &RunOptions) -> Result<f64, CliError> {
    let doc = parse_config(&run.config)?;
    let plant_raw = doc.build_plant()?;
    let (plant, _) = eliminate_convection(&plant_raw);
    let mut target = doc.build_target()?;
    if let Some(mu) = run.mu_c {
        target.mu_c = mu;
    }
    let (mu_max, per_channel) = estimate_mu_max(&plant, &target, 401)?;
    let mut out = String::from("channel,eigenvalue\n");
    for (i, v) in per_channel.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, fmt_f(*v));
    }
    write_file(&run.out, "eigs.csv", &out)?;
    println!("mu_max = {}", fmt_f(mu_max));
    Ok(mu_max)
}

/// Verification report with all residuals and closed-loop diagnostics.
pub struct VerifyOutcome {
    pub report_json: String,
    pub mu_max: f64,
    pub decay_rate: f64,
    pub reciprocity_err: f64,
}

pub fn cmd_verify(run: &RunOptions) -> Result<VerifyOutcome, CliError> {
    let pipe = build_pipeline(run)?;
    let sol = &pipe.sol;
    let res = residual_report(sol, &pipe.plant);

    // reciprocity over a fixed family of smooth profiles
    let mut reciprocity_err: f64 = 0.0;
    for s in 0..5 {
        let profile: Vec<Vec<f64>> = (0..sol.n)
            .map(|i| {
                sol.z_nodes
                    .iter()
                    .map(|&z| {
                        ((s + 1) as f64 * std::f64::consts::PI * z + 0.3 * i as f64).sin()
                            + 0.2 * z * z
                    })
                    .collect()
            })
            .collect();
        reciprocity_err = reciprocity_err.max(sol.composition_error(&profile));
    }

    let (mu_max, _) = estimate_mu_max(&pipe.plant, &pipe.target, 401)?;
    let traj = run_simulation(&pipe, run)?;
    let decay_rate = fit_decay_rate(&traj.times, &traj.l2_norms)?;

    let report = serde_json::json!({
        "pde_residual_sup": res.pde_residual_sup,
        "bc_residual_sup": res.bc_residual_sup,
        "trace_diag_err": res.trace_diag_err,
        "trace_offdiag_slope_err": res.trace_offdiag_slope_err,
        "reciprocity_err": reciprocity_err,
        "mu_max": mu_max,
        "decay_rate_fit": decay_rate,
        "iterations": sol.iterations_used,
        "growth_M_hat": sol.growth_m_hat,
    });
    let report_json = serde_json::to_string_pretty(&report).expect("json") + "\n";
    write_file(&run.out, "report.json", &report_json)?;
    println!(
        "iterations = {}, mu_max = {}, decay rate = {}, reciprocity error = {}",
        sol.iterations_used,
        fmt_f(mu_max),
        fmt_f(decay_rate),
        fmt_f(reciprocity_err)
    );
    Ok(VerifyOutcome {
        report_json,
        mu_max,
        decay_rate,
        reciprocity_err,
    })
}
