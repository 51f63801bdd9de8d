//! Structural and cross-route checks of the kernel solution beyond the
//! scalar oracle: coupling structure, sheet continuity, inverse composition.

mod common;

use common::{demo_config, three_state_plant, three_state_target, Lcg};
use pide_backstep::cli::{build_pipeline, RunOptions};
use pide_backstep::kernel::{solve_kernel, SolverOptions};
use pide_backstep::numerics::SideHint;

#[test]
fn three_state_coupling_is_strictly_lower_triangular_when_sorted() {
    // λ are ordered descending already, so entries exist exactly below the
    // diagonal of the coupling matrix
    let plant = three_state_plant();
    let target = three_state_target(1.0);
    let sol = solve_kernel(
        &plant,
        &target,
        SolverOptions {
            grid_n: 31,
            tol: 1e-3,
            max_iter: 60,
        },
    )
    .unwrap();
    for ((i, j), _) in &sol.a0_tilde {
        assert!(i < j, "coupling ({i},{j}) not above-diagonal in λ order");
    }
    assert_eq!(sol.a0_tilde.len(), 3);
    for k in 0..=10 {
        let z = k as f64 / 10.0;
        let a = sol.a0_tilde_matrix(z);
        for i in 0..3 {
            for j in 0..=i {
                assert_eq!(a[i][j], 0.0, "entry ({i},{j}) must be an exact zero");
            }
        }
    }
}

#[test]
fn three_state_trace_zeros() {
    let plant = three_state_plant();
    let sol = solve_kernel(
        &plant,
        &three_state_target(1.0),
        SolverOptions {
            grid_n: 31,
            tol: 1e-3,
            max_iter: 60,
        },
    )
    .unwrap();
    let mm = sol.grid_n;
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            for iz in 0..mm {
                let v = sol.k_values[sol.pair(i, j)][iz * mm + iz];
                assert!(v.abs() < 1e-9, "trace K_{i}{j}({iz}) = {v}");
            }
        }
    }
}

#[test]
fn sheets_agree_on_the_separation_curve() {
    let pipe = build_pipeline(&RunOptions::new(demo_config())).unwrap();
    let sol = &pipe.sol;
    for (i, j) in [(0usize, 1usize), (1, 0)] {
        let table = &sol.k[sol.pair(i, j)];
        let mut sup = 0.0f64;
        for iz in 0..sol.grid_n {
            let z = sol.z_nodes[iz];
            let zeta = table.curve[iz];
            if !(0.0..=z).contains(&zeta) {
                continue;
            }
            let above = table.interp2(z, zeta, SideHint::Pos).unwrap();
            let below = table.interp2(z, zeta, SideHint::Neg).unwrap();
            sup = sup.max((above - below).abs());
        }
        assert!(sup < 1e-3, "pair ({i},{j}) sheet mismatch on curve: {sup}");
    }
}

#[test]
fn forward_then_inverse_recovers_random_profiles() {
    let pipe = build_pipeline(&RunOptions::new(demo_config())).unwrap();
    let sol = &pipe.sol;
    let mut rng = Lcg(2024);
    for trial in 0..5 {
        // random smooth profile: a few low-frequency modes
        let coeff: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.next_f64() * 2.0 - 1.0,
                    rng.next_f64() * 2.0 - 1.0,
                    1.0 + 2.0 * rng.next_f64(),
                )
            })
            .collect();
        let profile: Vec<Vec<f64>> = (0..sol.n)
            .map(|i| {
                sol.z_nodes
                    .iter()
                    .map(|&z| {
                        coeff
                            .iter()
                            .map(|(a, b, w)| {
                                a * (w * std::f64::consts::PI * z + i as f64).sin()
                                    + b * (0.5 * w * z).cos()
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let err = sol.composition_error(&profile);
        assert!(err < 1e-2, "trial {trial}: composition error {err}");
    }
}

#[test]
fn growth_envelope_holds_for_every_recorded_sweep() {
    let pipe = build_pipeline(&RunOptions::new(demo_config())).unwrap();
    let sol = &pipe.sol;
    assert!(sol.growth_m_hat.is_finite() && sol.growth_m_hat > 0.0);
    for rec in &sol.records {
        assert!(rec.envelope_m <= sol.growth_m_hat + 1e-12);
        assert!(rec.envelope_m.is_finite());
    }
    // γ sits strictly inside its admissible interval
    assert!(sol.gamma > 0.0 && sol.gamma < 1.0);
}

#[test]
fn convergence_history_trends_to_zero() {
    let pipe = build_pipeline(&RunOptions::new(demo_config())).unwrap();
    let sol = &pipe.sol;
    let sup_first = sol.records[1].sup_g.max(sol.records[1].sup_h);
    let last = sol.records.last().unwrap();
    assert!(last.sup_g.max(last.sup_h) < 1e-3);
    assert!(last.sup_g.max(last.sup_h) < 1e-2 * sup_first);
}
