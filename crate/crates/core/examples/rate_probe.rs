//! Scratch probe: closed-loop decay-rate fits over different horizons.

use pide_backstep::cli::{build_pipeline, run_simulation, RunOptions};
use pide_backstep::numerics::fit_decay_rate;

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_coupled_pides.json");
    for (mu, t_end) in [(2.0f64, 1.0f64), (2.0, 2.0), (2.0, 3.0), (2.0, 4.0), (8.0, 3.0)] {
        let mut run = RunOptions::new(data);
        run.mu_c = Some(mu);
        run.t_end = Some(t_end);
        let pipe = build_pipeline(&run).unwrap();
        let traj = run_simulation(&pipe, &run).unwrap();
        let rate = fit_decay_rate(&traj.times, &traj.l2_norms).unwrap();
        println!(
            "mu_c={mu} t_end={t_end}: fitted rate {rate:.3}, final norm {:.3e}",
            traj.l2_norms.last().unwrap()
        );
    }
    // dt refinement check at the shipped settings
    let mut run = RunOptions::new(data);
    run.t_end = Some(1.0);
    let pipe = build_pipeline(&run).unwrap();
    let t1 = run_simulation(&pipe, &run).unwrap();
    run.dt = Some(5e-4);
    let t2 = run_simulation(&pipe, &run).unwrap();
    println!(
        "dt refinement: final norms {:.6e} vs {:.6e} (rel diff {:.3e})",
        t1.l2_norms.last().unwrap(),
        t2.l2_norms.last().unwrap(),
        (t1.l2_norms.last().unwrap() - t2.l2_norms.last().unwrap()).abs()
            / t1.l2_norms.last().unwrap()
    );
}
