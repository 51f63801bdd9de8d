//! Scratch probe: open-loop growth horizon of the demo plant.

use pide_backstep::cli::{build_pipeline, run_simulation, RunOptions};
use pide_backstep::sim::{discretize, simulate, Input};

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_coupled_pides.json");
    let mut run = RunOptions::new(data);
    run.open_loop = true;
    run.t_end = Some(6.0);
    let pipe = build_pipeline(&run).unwrap();
    let traj = run_simulation(&pipe, &run).unwrap();
    for k in (0..traj.times.len()).step_by(500) {
        println!("t = {:.2}: |x| = {:.5e}", traj.times[k], traj.l2_norms[k]);
    }
    let n = traj.l2_norms.len();
    let rate = (traj.l2_norms[n - 1] / traj.l2_norms[n - 1001]).ln() / 1.0;
    println!("tail growth rate ~ {rate:.4}");

    // a different initial profile with broader modal content
    let sys = discretize(&pipe.plant_raw, 102).unwrap();
    let x0: Vec<Vec<f64>> = (0..2)
        .map(|i| {
            sys.z
                .iter()
                .map(|&z| (std::f64::consts::PI * z * (1.5 + i as f64)).sin() + 0.3 * z * z)
                .collect()
        })
        .collect();
    let traj2 = simulate(&sys, Input::Zero, &x0, 6.0, 1e-3).unwrap();
    for k in (0..traj2.times.len()).step_by(1000) {
        println!("alt t = {:.2}: |x| = {:.5e}", traj2.times[k], traj2.l2_norms[k]);
    }
}
