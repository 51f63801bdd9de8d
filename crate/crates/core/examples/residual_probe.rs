//! Scratch probe: locate where the PDE residual concentrates.

use pide_backstep::cli::{build_pipeline, RunOptions};
use pide_backstep::kernel::{solve_kernel, SolverOptions};
use pide_backstep::model::{constant, from_fn, validate_plant, zero2, LeftBc, PlantDescription,
    TargetSpec};

fn residual_map(
    sol: &pide_backstep::kernel::KernelSolution,
    plant: &pide_backstep::model::PlantModel,
) {
    let n = sol.n;
    let mm = sol.grid_n;
    let h = 1.0 / (mm - 1) as f64;
    let z = &sol.z_nodes;
    for i in 0..n {
        for j in 0..n {
            let pair = i * n + j;
            let table = &sol.k[pair];
            let mut sup = 0.0f64;
            let mut at = (0usize, 0usize);
            for iz in 1..mm - 1 {
                for ic in 1..iz {
                    let zeta = z[ic];
                    let dist = (zeta - table.curve[iz]).abs();
                    if i != j && dist < 2.0 * h {
                        continue;
                    }
                    let sheet = if zeta <= table.curve[iz] {
                        &table.sheet_pos
                    } else {
                        table.sheet_neg.as_ref().unwrap()
                    };
                    let v = sheet.at(iz, ic);
                    let dzz = (sheet.at(iz + 1, ic) - 2.0 * v + sheet.at(iz - 1, ic)) / (h * h);
                    let lam_j = |zeta: f64| (plant.lambda[j])(zeta);
                    let dcc = (lam_j(z[ic + 1]) * sheet.at(iz, ic + 1) - 2.0 * lam_j(zeta) * v
                        + lam_j(z[ic - 1]) * sheet.at(iz, ic - 1))
                        / (h * h);
                    let mut b = -(plant.nonlocal_kernel[i][j])(z[iz], zeta);
                    for k in 0..n {
                        let kik = sol.k_values[i * n + k][iz * mm + ic];
                        let mut a_kj = (plant.reaction[k][j])(zeta);
                        if k == j {
                            a_kj += sol.mu_c;
                        }
                        b += kik * a_kj;
                    }
                    let mut acc = 0.0;
                    for t in ic..=iz {
                        let mut term = 0.0;
                        for k in 0..n {
                            term += sol.k_values[i * n + k][iz * mm + t]
                                * (plant.nonlocal_kernel[k][j])(z[t], zeta);
                        }
                        acc += if t == ic || t == iz { 0.5 * term } else { term };
                    }
                    b += acc * h;
                    let r = ((plant.lambda[i])(z[iz]) * dzz - dcc - b).abs();
                    if r > sup {
                        sup = r;
                        at = (iz, ic);
                    }
                }
            }
            println!(
                "pair ({},{}): sup residual {:.4e} at z={:.3} zeta={:.3} (curve there {:.3})",
                i, j, sup, z[at.0], z[at.1], table.curve[at.0]
            );
        }
    }
}

fn main() {
    // scalar with constant coefficients: residual machinery baseline
    let plant = {
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
        validate_plant(desc, 1e-6).unwrap()
    };
    let target = TargetSpec::new(0.0, vec![0.0], vec![1.0]);
    let sol = solve_kernel(&plant, &target, SolverOptions::default()).unwrap();
    println!("— scalar constant-coefficient case —");
    residual_map(&sol, &plant);

    // scalar with varying diffusion: isolates the a/ψ/back-map chain for i=j
    let plant_v = {
        let desc = PlantDescription {
            n: 1,
            lambda: vec![from_fn(|z| {
                1.5 + z * z * (2.0 * std::f64::consts::PI * z).cos()
            })],
            lambda_d1: None,
            lambda_d2: None,
            phi_conv: vec![constant(0.0)],
            reaction: vec![vec![constant(3.0)]],
            local_term: vec![vec![constant(0.0)]],
            nonlocal_kernel: vec![vec![zero2()]],
            left_bc: vec![LeftBc::Dirichlet],
            actuation_slope: vec![0.0],
            actuation_value: vec![vec![1.0]],
        };
        validate_plant(desc, 1e-6).unwrap()
    };
    let sol_v = solve_kernel(&plant_v, &target, SolverOptions::default()).unwrap();
    println!("— scalar varying-diffusion case —");
    residual_map(&sol_v, &plant_v);
    let sol_v101 = solve_kernel(
        &plant_v,
        &target,
        SolverOptions {
            grid_n: 101,
            ..Default::default()
        },
    )
    .unwrap();
    println!("— same at grid 101 —");
    residual_map(&sol_v101, &plant_v);

    // full demo plant
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_coupled_pides.json");
    let pipe = build_pipeline(&RunOptions::new(data)).unwrap();
    println!("— demo plant 51 —");
    residual_map(&pipe.sol, &pipe.plant);

    // slope detail for pair (0,1)
    let sol = &pipe.sol;
    let mm = sol.grid_n;
    let h = 1.0 / (mm - 1) as f64;
    for pair in [(0usize, 1usize), (1, 0)] {
        let (i, j) = pair;
        let table = &sol.k[i * sol.n + j];
        let sheet = table.sheet_neg.as_ref().unwrap();
        println!("pair {pair:?} slope check:");
        for iz in (2..mm - 2).step_by(12) {
            let d_z = (-3.0 * sheet.at(iz, iz) + 4.0 * sheet.at(iz + 1, iz)
                - sheet.at(iz + 2, iz))
                / (2.0 * h);
            let z = sol.z_nodes[iz];
            let expected = (pipe.plant.reaction[i][j])(z)
                / ((pipe.plant.lambda[j])(z) - (pipe.plant.lambda[i])(z));
            println!("  z={z:.3}: slope {d_z:+.4} expected {expected:+.4}");
        }
    }
}
