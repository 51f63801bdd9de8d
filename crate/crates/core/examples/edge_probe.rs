//! Scratch probe: component decomposition of the diagonal-pair residual.

use pide_backstep::cli::{build_pipeline, RunOptions};

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_coupled_pides.json");
    let mut run = RunOptions::new(data);
    run.grid = Some(201);
    let pipe = build_pipeline(&run).unwrap();
    let mut run4 = run.clone();
    run4.grid = Some(401);
    run4.tol = Some(2e-4);
    let fine = build_pipeline(&run4).unwrap();

    let sol = &pipe.sol;
    let plant = &pipe.plant;
    let n = sol.n;
    let mm = sol.grid_n;
    let fm = fine.sol.grid_n;
    let stride = (fm - 1) / (mm - 1);
    let h = 1.0 / (mm - 1) as f64;
    let z = &sol.z_nodes;
    let (i, j) = (0usize, 0usize);
    let pair = 0;

    // locate the argmax for pair (0,0)
    let mut worst = (0.0f64, 0usize, 0usize);
    let lam = |x: f64| (plant.lambda[j])(x);
    let resid = |kv: &dyn Fn(usize, usize) -> f64, iz: usize, ic: usize| -> (f64, f64, f64, f64) {
        let v = kv(iz, ic);
        let dzz = (kv(iz + 1, ic) - 2.0 * v + kv(iz - 1, ic)) / (h * h);
        let dcc = (lam(z[ic + 1]) * kv(iz, ic + 1) - 2.0 * lam(z[ic]) * v
            + lam(z[ic - 1]) * kv(iz, ic - 1))
            / (h * h);
        let mut b = -(plant.nonlocal_kernel[i][j])(z[iz], z[ic]);
        for k in 0..n {
            let kk = sol.k_values[i * n + k][iz * mm + ic];
            let mut a_kj = (plant.reaction[k][j])(z[ic]);
            if k == j {
                a_kj += sol.mu_c;
            }
            b += kk * a_kj;
        }
        let mut acc = 0.0;
        for t in ic..=iz {
            let mut term = 0.0;
            for k in 0..n {
                term += sol.k_values[i * n + k][iz * mm + t]
                    * (plant.nonlocal_kernel[k][j])(z[t], z[ic]);
            }
            acc += if t == ic || t == iz { 0.5 * term } else { term };
        }
        b += acc * h;
        ((plant.lambda[i])(z[iz]) * dzz - dcc - b, dzz, dcc, b)
    };
    let kc = |a: usize, b: usize| sol.k_values[pair][a * mm + b];
    for iz in 2..mm - 2 {
        for ic in 2..iz.saturating_sub(1) {
            let (r, _, _, _) = resid(&kc, iz, ic);
            if r.abs() > worst.0 {
                worst = (r.abs(), iz, ic);
            }
        }
    }
    let (_, iz, ic) = worst;
    println!("pair (0,0) argmax at (z={:.3}, zeta={:.3})", z[iz], z[ic]);
    let kf = |a: usize, b: usize| fine.sol.k_values[pair][(a * stride) * fm + b * stride];
    let (rc, dzz_c, dcc_c, _) = resid(&kc, iz, ic);
    let (rf, dzz_f, dcc_f, _) = resid(&kf, iz, ic);
    println!("  coarse: r={rc:+.3e} dzz={dzz_c:+.4e} dcc={dcc_c:+.4e}");
    println!("  ref   : r={rf:+.3e} dzz={dzz_f:+.4e} dcc={dcc_f:+.4e}");
    println!("  error field around argmax (1e-6):");
    for a in iz.saturating_sub(2)..=(iz + 2).min(mm - 1) {
        let row: Vec<String> = (ic.saturating_sub(2)..=(ic + 2).min(a))
            .map(|b| format!("{:+8.2}", (kc(a, b) - kf(a, b)) * 1e6))
            .collect();
        println!("    z={:.3}: {}", z[a], row.join(" "));
    }
    // canonical coordinates of the argmax
    let atlas = pide_backstep::build_atlas(plant, 801);
    let (xi, eta) = atlas.to_canonical(i, j, z[iz], z[ic]).unwrap();
    println!(
        "  canonical (xi={xi:.4}, eta={eta:.4}); right edge 2a - eta = {:.4}; xi_max = {:.4}; h_xi = {:.4}",
        2.0 * atlas.corner_a(i, j) - eta,
        atlas.xi_max(i, j),
        atlas.xi_max(i, j) / (51.0 - 1.0)
    );
}
