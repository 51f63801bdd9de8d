//! Thin CLI over the library: kernel synthesis, simulation, verification and
//! eigenvalue estimation driven by a JSON configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pide_backstep::cli::{cmd_eigs, cmd_kernel, cmd_simulate, cmd_verify, RunOptions};

#[derive(Parser)]
#[command(
    name = "pide-backstep",
    about = "Backstepping boundary control for coupled parabolic PIDEs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "./out")]
    out: PathBuf,
    /// Override the target stability shift
    #[arg(long = "mu-c")]
    mu_c: Option<f64>,
    /// Override the kernel grid density
    #[arg(long)]
    grid: Option<usize>,
    /// Override the successive-approximation tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Override the simulation horizon
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Override the simulation step
    #[arg(long)]
    dt: Option<f64>,
    /// Reserved (the pipeline is deterministic)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the kernel equations and write K.csv, G.csv, A0_tilde.csv, meta.json
    Kernel(Common),
    /// Simulate the closed loop and write trajectory.csv, norms.csv, control.csv
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Run without feedback (u = 0)
        #[arg(long)]
        open_loop: bool,
    },
    /// Run all verification checks and write report.json
    Verify(Common),
    /// Estimate the dominant target eigenvalue; writes eigs.csv
    Eigs(Common),
}

fn to_options(c: Common, open_loop: bool) -> RunOptions {
    RunOptions {
        config: c.config,
        out: c.out,
        mu_c: c.mu_c,
        grid: c.grid,
        tol: c.tol,
        t_end: c.t_end,
        dt: c.dt,
        open_loop,
        seed: c.seed,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Kernel(c) => cmd_kernel(&to_options(c, false)).map(|_| ()),
        Command::Simulate { common, open_loop } => cmd_simulate(&to_options(common, open_loop)),
        Command::Verify(c) => cmd_verify(&to_options(c, false)).map(|_| ()),
        Command::Eigs(c) => cmd_eigs(&to_options(c, false)).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
