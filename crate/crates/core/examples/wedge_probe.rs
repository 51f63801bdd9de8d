//! Scratch probe: curvature growth of the true kernel near the separation
//! curve and the wedge point where it meets ζ = 0.

use pide_backstep::cli::{build_pipeline, RunOptions};

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_coupled_pides.json");
    let mut run = RunOptions::new(data);
    run.grid = Some(201);
    run.tol = Some(2e-4);
    let fine = build_pipeline(&run).unwrap();
    let sol = &fine.sol;
    let plant = &fine.plant;
    let (i, j) = (0usize, 1usize);
    let pair = i * sol.n + j;
    let fm = sol.grid_n;
    let h = 1.0 / (fm - 1) as f64;
    let z: Vec<f64> = sol.z_nodes.clone();
    let table = &sol.k[pair];

    // one-sided second ζ-derivative of λ_1 K as a function of the distance to
    // the curve, along a few z rows near and away from the wedge
    for &ztest in &[0.3f64, 0.39, 0.5, 0.7, 0.9] {
        let iz = ((ztest / h).round() as usize).min(fm - 1);
        let curve = table.curve[iz];
        println!("z = {:.3}, curve = {:.4}:", z[iz], curve);
        for dist_nodes in [2usize, 4, 8, 16, 32] {
            let ic = ((curve / h).round() as usize + dist_nodes).min(iz);
            if ic + 1 > iz || ic < 1 {
                continue;
            }
            let sheet = table.sheet_neg.as_ref().unwrap();
            let lam = |x: f64| (plant.lambda[j])(x);
            let d2 = (lam(z[ic + 1]) * sheet.at(iz, ic + 1)
                - 2.0 * lam(z[ic]) * sheet.at(iz, ic)
                + lam(z[ic - 1]) * sheet.at(iz, ic - 1))
                / (h * h);
            println!(
                "  {dist_nodes:>3} nodes ({:.3}) from curve: d2(lam K) = {d2:+.3e}",
                dist_nodes as f64 * h
            );
        }
    }

    // dense dump along the hot line
    {
        let ic = ((0.05 / h).round()) as usize;
        println!("dense z-scan at zeta = 0.05 (value, d1z, d2z):");
        let kv = |a: usize, b: usize| sol.k_values[pair][a * fm + b];
        for iz in (50..=84).step_by(2) {
            let d1 = (kv(iz + 1, ic) - kv(iz - 1, ic)) / (2.0 * h);
            let d2 = (kv(iz + 1, ic) - 2.0 * kv(iz, ic) + kv(iz - 1, ic)) / (h * h);
            println!("  z={:.3}: K={:+.6e} d1={:+.4e} d2={:+.4e} (curve {:+.4})", z[iz], kv(iz, ic), d1, d2, table.curve[iz]);
        }
    }

    // and the z-direction curvature vs distance above the wedge z*
    println!("z-direction second derivative at zeta = 0.05:");
    let ic = ((0.05 / h).round()) as usize;
    for &ztest in &[0.3f64, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7] {
        let iz = ((ztest / h).round() as usize).min(fm - 2);
        let sheet = if z[ic] <= table.curve[iz] {
            &table.sheet_pos
        } else {
            table.sheet_neg.as_ref().unwrap()
        };
        let d2 = (sheet.at(iz + 1, ic) - 2.0 * sheet.at(iz, ic) + sheet.at(iz - 1, ic)) / (h * h);
        println!("  z={:.3}: d2z K = {d2:+.4e} (curve {:.4})", z[iz], table.curve[iz]);
    }
}
