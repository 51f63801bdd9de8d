//! Scratch probe: where the off-diagonal trace slope error concentrates.

use pide_backstep::cli::{build_pipeline, RunOptions};

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_coupled_pides.json");
    let pipe = build_pipeline(&RunOptions::new(data)).unwrap();
    let mut run4 = RunOptions::new(data);
    run4.grid = Some(401);
    run4.tol = Some(5e-4);
    let fine = build_pipeline(&run4).unwrap();
    let fsol = &fine.sol;
    let fm = fsol.grid_n;
    let sol = &pipe.sol;
    let plant = &pipe.plant;
    let n = sol.n;
    let mm = sol.grid_n;
    let h = 1.0 / (mm - 1) as f64;
    let z = &sol.z_nodes;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pair = i * n + j;
            let table = &sol.k[pair];
            let sheet = table.sheet_neg.as_ref().unwrap();
            println!("pair ({i},{j}):");
            for iz in 0..mm - 2 {
                if z[iz] < table.curve[iz + 2] {
                    continue;
                }
                let d_z = (-3.0 * sheet.at(iz, iz) + 4.0 * sheet.at(iz + 1, iz)
                    - sheet.at(iz + 2, iz))
                    / (2.0 * h);
                let zz = z[iz];
                let expected = (plant.reaction[i][j])(zz)
                    / ((plant.lambda[j])(zz) - (plant.lambda[i])(zz));
                let err = (d_z - expected).abs();
                if err > 0.08 {
                    let stride = (fm - 1) / (mm - 1);
                    let fsheet = fsol.k[pair].sheet_neg.as_ref().unwrap();
                    let fd_ref = (-3.0 * fsheet.at(iz * stride, iz * stride)
                        + 4.0 * fsheet.at((iz + 1) * stride, iz * stride)
                        - fsheet.at((iz + 2) * stride, iz * stride))
                        / (2.0 * h);
                    println!(
                        "  z={zz:.3}: slope {d_z:+.4} expected {expected:+.4} err {err:.3} | 401-sampled slope {fd_ref:+.4}",
                    );
                }
            }
        }
    }
}
