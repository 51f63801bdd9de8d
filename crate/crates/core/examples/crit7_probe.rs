//! Scratch probe: criterion-style residual sequence over grid refinement.

use pide_backstep::cli::{build_pipeline, RunOptions};
use pide_backstep::kernel::KernelSolution;
use pide_backstep::model::PlantModel;

fn per_pair_sup(sol: &KernelSolution, plant: &PlantModel) -> Vec<f64> {
    let n = sol.n;
    let mm = sol.grid_n;
    let h = 1.0 / (mm - 1) as f64;
    let z = &sol.z_nodes;
    let mut out = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            let pair = i * n + j;
            let table = &sol.k[pair];
            for iz in 2..mm - 2 {
                for ic in 2..iz.saturating_sub(1) {
                    let zeta = z[ic];
                    if i != j && (zeta - table.curve[iz]).abs() < 2.0 * h {
                        continue;
                    }
                    if i != j && sol.eta_abs[pair][iz * mm + ic] < sol.eta_band[pair] {
                        continue;
                    }
                    if i != j {
                        let side = zeta > table.curve[iz];
                        let ok = [(iz + 1, ic), (iz - 1, ic), (iz, ic + 1), (iz, ic - 1)]
                            .iter()
                            .all(|&(a, b)| (z[b] > table.curve[a]) == side);
                        if !ok {
                            continue;
                        }
                    }
                    let sheet = if zeta <= table.curve[iz] {
                        &table.sheet_pos
                    } else {
                        table.sheet_neg.as_ref().unwrap()
                    };
                    let v = sheet.at(iz, ic);
                    let dzz = (sheet.at(iz + 1, ic) - 2.0 * v + sheet.at(iz - 1, ic)) / (h * h);
                    let lam = |x: f64| (plant.lambda[j])(x);
                    let dcc = (lam(z[ic + 1]) * sheet.at(iz, ic + 1) - 2.0 * lam(zeta) * v
                        + lam(z[ic - 1]) * sheet.at(iz, ic - 1))
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
                    if r > out[pair] {
                        out[pair] = r;
                        if pair == 1 && mm == 201 {
                            eprintln!("pair01 argmax: z={:.4} zeta={:.4} curve={:+.4} r={r:.3}", z[iz], zeta, table.curve[iz]);
                        }
                    }
                }
            }
        }
    }
    out
}

fn main() {
    for path in [
        concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_coupled_pides.json"),
        concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/wide_gap_probe.json"),
    ] {
        println!("config {path}:");
        for grid in [51usize, 101, 201] {
            let mut run = RunOptions::new(path);
            run.grid = Some(grid);
            let pipe = build_pipeline(&run).unwrap();
            let sup = per_pair_sup(&pipe.sol, &pipe.plant);
            println!("  grid {grid}: per-pair sup {:?}", sup.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
        }
    }
}
