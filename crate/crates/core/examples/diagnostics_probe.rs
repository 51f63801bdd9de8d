//! Scratch probe used while calibrating tests (prints solver diagnostics).

use pide_backstep::cli::{build_pipeline, run_simulation, RunOptions};
use pide_backstep::kernel::{residual_report, solve_kernel, SolverOptions};
use pide_backstep::model::{constant, validate_plant, zero2, LeftBc, PlantDescription, TargetSpec};
use pide_backstep::numerics::fit_decay_rate;
use pide_backstep::sim::estimate_mu_max;

fn scalar_bessel_kernel(c: f64, z: f64, zeta: f64) -> f64 {
    // K = -c ζ I1(sqrt(c(z^2-ζ^2)))/sqrt(c(z^2-ζ^2)) via the power series
    let x2 = c * (z * z - zeta * zeta);
    let mut term = 0.5;
    let mut acc = 0.5;
    for k in 1..30 {
        term *= x2 / (4.0 * k as f64 * (k as f64 + 1.0)) * (k as f64 + 1.0) / (k as f64 + 1.0);
        // I1(x)/x = 1/2 Σ (x^2/4)^k / (k!(k+1)!)
        acc += term;
        let _ = k;
    }
    -c * zeta * acc
}

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_coupled_pides.json");
    let run = RunOptions::new(data);
    let t0 = std::time::Instant::now();
    let pipe = build_pipeline(&run).unwrap();
    println!(
        "demo solve: iterations={} final_sup={:.3e} gamma={:.4} m_hat={:.3} ({:?})",
        pipe.sol.iterations_used,
        pipe.sol.final_update_sup,
        pipe.sol.gamma,
        pipe.sol.growth_m_hat,
        t0.elapsed()
    );
    for rec in &pipe.sol.records {
        println!(
            "  sweep sup_g={:.3e} sup_h={:.3e} env={:.3}",
            rec.sup_g, rec.sup_h, rec.envelope_m
        );
    }

    let res = residual_report(&pipe.sol, &pipe.plant);
    println!("residuals 51: {res:?}");

    let mut run101 = run.clone();
    run101.grid = Some(101);
    let t0 = std::time::Instant::now();
    let pipe101 = build_pipeline(&run101).unwrap();
    println!(
        "grid 101: iterations={} ({:?})",
        pipe101.sol.iterations_used,
        t0.elapsed()
    );
    let res101 = residual_report(&pipe101.sol, &pipe101.plant);
    println!("residuals 101: {res101:?}");
    println!(
        "pde sup ratio 51/101 = {:.3}",
        res.pde_residual_sup / res101.pde_residual_sup
    );

    let (mu_max, per) = estimate_mu_max(&pipe.plant, &pipe.target, 401).unwrap();
    println!("mu_max = {mu_max:.4} per-channel {per:?}");

    // open loop
    let mut run_ol = run.clone();
    run_ol.open_loop = true;
    let traj = run_simulation(&pipe, &run_ol).unwrap();
    println!(
        "open loop: |x(0)|={:.4} |x(1)|={:.4}",
        traj.l2_norms[0],
        traj.l2_norms.last().unwrap()
    );
    // closed loop
    let t0 = std::time::Instant::now();
    let traj = run_simulation(&pipe, &run).unwrap();
    let rate = fit_decay_rate(&traj.times, &traj.l2_norms).unwrap();
    println!(
        "closed loop mu_c=2: |x(1)|={:.5e} rate={:.3} ({:?})",
        traj.l2_norms.last().unwrap(),
        rate,
        t0.elapsed()
    );
    let mut run8 = run.clone();
    run8.mu_c = Some(8.0);
    let pipe8 = build_pipeline(&run8).unwrap();
    let traj8 = run_simulation(&pipe8, &run8).unwrap();
    let rate8 = fit_decay_rate(&traj8.times, &traj8.l2_norms).unwrap();
    println!("closed loop mu_c=8: rate={rate8:.3}");

    // scalar closed-form comparison
    for grid_n in [51usize, 101] {
        let desc = PlantDescription {
            n: 1,
            lambda: vec![constant(1.0)],
            lambda_d1: Some(vec![constant(0.0)]),
            lambda_d2: Some(vec![constant(0.0)]),
            phi_conv: vec![constant(0.0)],
            reaction: vec![vec![constant(5.0)]],
            local_term: vec![vec![constant(0.0)]],
            nonlocal_kernel: vec![vec![zero2()]],
            left_bc: vec![LeftBc::Dirichlet],
            actuation_slope: vec![0.0],
            actuation_value: vec![vec![1.0]],
        };
        let plant = validate_plant(desc, 1e-6).unwrap();
        let target = TargetSpec::new(0.0, vec![0.0], vec![1.0]);
        let sol = solve_kernel(
            &plant,
            &target,
            SolverOptions {
                grid_n,
                tol: 1e-3,
                max_iter: 50,
            },
        )
        .unwrap();
        let mm = sol.grid_n;
        let mut sup: f64 = 0.0;
        for iz in 0..mm {
            for ic in 0..=iz {
                let z = sol.z_nodes[iz];
                let zeta = sol.z_nodes[ic];
                let want = scalar_bessel_kernel(5.0, z, zeta);
                sup = sup.max((sol.k_values[0][iz * mm + ic] - want).abs());
            }
        }
        println!("scalar bessel sup error at {grid_n}: {sup:.4e} (iters {})", sol.iterations_used);
    }
}
