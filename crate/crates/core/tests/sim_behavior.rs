//! Closed-loop simulation behavior: time-step refinement, trajectory
//! transforms, and target-dynamics cross-checks.

mod common;

use common::demo_config;
use pide_backstep::cli::{build_pipeline, run_simulation, RunOptions};
use pide_backstep::numerics::fit_decay_rate;
use pide_backstep::sim::{transform_trajectory, Trajectory};

fn decimate(traj: &Trajectory, every: usize) -> Trajectory {
    let keep: Vec<usize> = (0..traj.times.len()).step_by(every).collect();
    Trajectory {
        times: keep.iter().map(|&k| traj.times[k]).collect(),
        snapshots: keep.iter().map(|&k| traj.snapshots[k].clone()).collect(),
        l2_norms: keep.iter().map(|&k| traj.l2_norms[k]).collect(),
        controls: keep.iter().map(|&k| traj.controls[k].clone()).collect(),
        z_grid: traj.z_grid.clone(),
    }
}

#[test]
fn halving_dt_changes_final_norm_below_one_percent() {
    let mut run = RunOptions::new(demo_config());
    run.t_end = Some(1.0);
    let pipe = build_pipeline(&run).unwrap();
    let coarse = run_simulation(&pipe, &run).unwrap();
    run.dt = Some(5e-4);
    let fine = run_simulation(&pipe, &run).unwrap();
    let a = coarse.l2_norms.last().unwrap();
    let b = fine.l2_norms.last().unwrap();
    let rel = (a - b).abs() / a;
    assert!(rel < 1e-2, "dt refinement changed final norm by {rel:.3e}");
}

#[test]
fn closed_loop_transform_round_trip_and_target_decay() {
    let run = RunOptions::new(demo_config());
    let pipe = build_pipeline(&run).unwrap();
    let traj = decimate(&run_simulation(&pipe, &run).unwrap(), 20);

    // forward-then-inverse returns the trajectory
    let fwd = transform_trajectory(&traj, &pipe.sol, false);
    let back = transform_trajectory(&fwd, &pipe.sol, true);
    let mut sup = 0.0f64;
    let mut scale = 0.0f64;
    for (s, state) in traj.snapshots.iter().enumerate() {
        for i in 0..pipe.sol.n {
            for t in 0..traj.z_grid.len() {
                sup = sup.max((back.snapshots[s][i][t] - state[i][t]).abs());
                scale = scale.max(state[i][t].abs());
            }
        }
    }
    assert!(sup < 1e-2 * scale.max(1.0), "round trip error {sup}");

    // the transformed trajectory follows the designed cascade: its decay is
    // at least the closed-loop decay less 10%
    let rate_closed = fit_decay_rate(&traj.times, &traj.l2_norms).unwrap();
    let rate_target = fit_decay_rate(&fwd.times, &fwd.l2_norms).unwrap();
    assert!(
        rate_target >= rate_closed * 0.9,
        "target-coordinates rate {rate_target:.3} vs closed-loop {rate_closed:.3}"
    );
}

#[test]
fn higher_shift_decays_strictly_faster() {
    let mut run2 = RunOptions::new(demo_config());
    run2.t_end = Some(2.0);
    let pipe2 = build_pipeline(&run2).unwrap();
    let t2 = run_simulation(&pipe2, &run2).unwrap();

    let mut run8 = run2.clone();
    run8.mu_c = Some(8.0);
    let pipe8 = build_pipeline(&run8).unwrap();
    let t8 = run_simulation(&pipe8, &run8).unwrap();

    let r2 = fit_decay_rate(&t2.times, &t2.l2_norms).unwrap();
    let r8 = fit_decay_rate(&t8.times, &t8.l2_norms).unwrap();
    assert!(r8 > r2, "rates: shift 8 gives {r8:.3} vs shift 2 gives {r2:.3}");
}
