//! Scratch probe: pair-(0,1) residual anatomy on the demo plant.

use pide_backstep::cli::{build_pipeline, RunOptions};

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/two_coupled_pides.json");
    let run = RunOptions::new(data);
    let pipe = build_pipeline(&run).unwrap();
    let mut run201 = run.clone();
    run201.grid = Some(201);
    run201.tol = Some(2e-4);
    let fine = build_pipeline(&run201).unwrap();

    let sol = &pipe.sol;
    let ref201 = &fine.sol;
    let plant = &pipe.plant;
    let n = sol.n;
    let mm = sol.grid_n;
    let fm = ref201.grid_n;
    let stride = (fm - 1) / (mm - 1);
    for i in 0..n {
        for j in 0..n {
            let pair = i * n + j;
            let mut sup = 0.0f64;
            let mut at = (0, 0);
            for iz in 0..mm {
                for ic in 0..=iz {
                    let d = (sol.k_values[pair][iz * mm + ic]
                        - ref201.k_values[pair][(iz * stride) * fm + ic * stride])
                        .abs();
                    if d > sup {
                        sup = d;
                        at = (iz, ic);
                    }
                }
            }
            println!(
                "pair ({i},{j}): sup |K51-K201| = {sup:.4e} at (z={:.3}, zeta={:.3})",
                sol.z_nodes[at.0], sol.z_nodes[at.1]
            );
        }
    }

    // pair (0,1) residual rows, coarse vs ref-sampled
    let (i, j) = (0usize, 1usize);
    let pair = i * n + j;
    let h = 1.0 / (mm - 1) as f64;
    let z = &sol.z_nodes;
    let table = &sol.k[pair];
    let bmat = |kv: &dyn Fn(usize, usize, usize) -> f64, iz: usize, ic: usize| -> f64 {
        let zeta = z[ic];
        let mut b = -(plant.nonlocal_kernel[i][j])(z[iz], zeta);
        for k in 0..n {
            let kik = kv(i * n + k, iz, ic);
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
                term += kv(i * n + k, iz, t) * (plant.nonlocal_kernel[k][j])(z[t], zeta);
            }
            acc += if t == ic || t == iz { 0.5 * term } else { term };
        }
        b + acc * h
    };
    let coarse = |p: usize, a: usize, b: usize| sol.k_values[p][a * mm + b];
    let refv = |p: usize, a: usize, b: usize| ref201.k_values[p][(a * stride) * fm + b * stride];
    // ref-sampled residual at the fine stencil spacing h/2 (stride, 2 on 201)
    {
        let h2 = 1.0 / (fm - 1) as f64 * 2.0;
        let zf: Vec<f64> = (0..fm).map(|k| k as f64 / (fm - 1) as f64).collect();
        let kv2 = |p: usize, a: usize, b: usize| ref201.k_values[p][a * fm + b];
        let mut sup = 0.0f64;
        let mut at = (0, 0);
        for iz2 in (4..fm - 2).step_by(2) {
            for ic2 in (4..iz2.saturating_sub(2)).step_by(2) {
                let zeta = zf[ic2];
                if (zeta - ref201.k[pair].curve[iz2]).abs() < 2.0 * h2 {
                    continue;
                }
                let lam = |x: f64| (plant.lambda[j])(x);
                let v = kv2(pair, iz2, ic2);
                let dzz = (kv2(pair, iz2 + 2, ic2) - 2.0 * v + kv2(pair, iz2 - 2, ic2)) / (h2 * h2);
                let dcc = (lam(zf[ic2 + 2]) * kv2(pair, iz2, ic2 + 2) - 2.0 * lam(zeta) * v
                    + lam(zf[ic2 - 2]) * kv2(pair, iz2, ic2 - 2))
                    / (h2 * h2);
                // B from fine tables directly
                let mut b = -(plant.nonlocal_kernel[i][j])(zf[iz2], zeta);
                for k in 0..n {
                    let kik = kv2(i * n + k, iz2, ic2);
                    let mut a_kj = (plant.reaction[k][j])(zeta);
                    if k == j { a_kj += sol.mu_c; }
                    b += kik * a_kj;
                }
                let mut acc = 0.0;
                for t in (ic2..=iz2).step_by(2) {
                    let mut term = 0.0;
                    for k in 0..n {
                        term += kv2(i * n + k, iz2, t) * (plant.nonlocal_kernel[k][j])(zf[t], zeta);
                    }
                    acc += if t == ic2 || t == iz2 { 0.5 * term } else { term };
                }
                b += acc * h2;
                let r = ((plant.lambda[i])(zf[iz2]) * dzz - dcc - b).abs();
                if r > sup { sup = r; at = (iz2, ic2); }
            }
        }
        println!("pair (0,1) ref residual at h=1/100: sup {sup:.3e} at (z={:.3}, zeta={:.3})", zf[at.0], zf[at.1]);
    }
    println!("pair (0,1) rows: coarse | ref-sampled residual");
    for iz in (4..mm - 2).step_by(3) {
        let mut rc = 0.0f64;
        let mut rr = 0.0f64;
        let mut at = 0;
        for ic in 2..iz.saturating_sub(1) {
            let zeta = z[ic];
            if (zeta - table.curve[iz]).abs() < 2.0 * h {
                continue;
            }
            let lam = |x: f64| (plant.lambda[j])(x);
            let both = |kv: &dyn Fn(usize, usize, usize) -> f64| -> f64 {
                let v = kv(pair, iz, ic);
                let dzz = (kv(pair, iz + 1, ic) - 2.0 * v + kv(pair, iz - 1, ic)) / (h * h);
                let dcc = (lam(z[ic + 1]) * kv(pair, iz, ic + 1) - 2.0 * lam(zeta) * v
                    + lam(z[ic - 1]) * kv(pair, iz, ic - 1))
                    / (h * h);
                (plant.lambda[i])(z[iz]) * dzz - dcc - bmat(kv, iz, ic)
            };
            let c = both(&coarse).abs();
            if c > rc {
                rc = c;
                at = ic;
            }
            rr = rr.max(both(&refv).abs());
        }
        println!(
            "  z={:.3} curve={:.3}: coarse {rc:.3e} (at zeta={:.3}) | ref {rr:.3e}",
            z[iz], table.curve[iz], z[at]
        );
    }
}
