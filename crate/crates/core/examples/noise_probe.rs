//! Scratch probe: decompose the scalar varying-λ residual into the fine-grid
//! truth part and the coarse error-field part.

use pide_backstep::kernel::{solve_kernel, SolverOptions};
use pide_backstep::model::{constant, from_fn, validate_plant, zero2, LeftBc, PlantDescription,
    TargetSpec};

fn main() {
    let plant = {
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
    let target = TargetSpec::new(0.0, vec![0.0], vec![1.0]);
    let solve = |g: usize| {
        solve_kernel(&plant, &target, SolverOptions { grid_n: g, tol: 1e-5, max_iter: 80 })
            .unwrap()
    };
    let fine = solve(401);
    for g in [51usize, 101] {
        let sol = solve(g);
        let mm = sol.grid_n;
        let fm = fine.grid_n;
        let stride = (fm - 1) / (mm - 1);
        let h = 1.0 / (mm - 1) as f64;
        let z = &sol.z_nodes;
        let lam = |x: f64| (plant.lambda[0])(x);
        let mut worst = (0.0f64, 0, 0, 0.0, 0.0);
        for iz in 2..mm - 2 {
            for ic in 2..iz.saturating_sub(1) {
                let kc = |a: usize, b: usize| sol.k_values[0][a * mm + b];
                let kf = |a: usize, b: usize| fine.k_values[0][(a * stride) * fm + b * stride];
                let resid = |kv: &dyn Fn(usize, usize) -> f64| -> f64 {
                    let v = kv(iz, ic);
                    let dzz = (kv(iz + 1, ic) - 2.0 * v + kv(iz - 1, ic)) / (h * h);
                    let dcc = (lam(z[ic + 1]) * kv(iz, ic + 1) - 2.0 * lam(z[ic]) * v
                        + lam(z[ic - 1]) * kv(iz, ic - 1))
                        / (h * h);
                    lam(z[iz]) * dzz - dcc - 3.0 * v
                };
                let rc = resid(&kc);
                if rc.abs() > worst.0 {
                    worst = (rc.abs(), iz, ic, resid(&kf), rc - resid(&kf));
                }
            }
        }
        let (sup, iz, ic, truth, noise) = worst;
        println!(
            "grid {g}: sup {sup:.4e} at (z={:.3}, zeta={:.3}); truth part {truth:+.4e}, error part {noise:+.4e}",
            z[iz], z[ic]
        );
        // compare against naive pointwise interpolation of the canonical table
        {
            let atlas = pide_backstep::build_atlas(&plant, 801);
            let e_naive = |a: usize, b: usize| {
                let (xi, eta) = atlas.to_canonical(0, 0, z[a], z[b].min(z[a])).unwrap();
                let coef = ((plant.lambda[0])(z[a]) / (plant.lambda[0])(0.0)).powf(0.25)
                    * ((plant.lambda[0])(z[b]) / (plant.lambda[0])(0.0)).powf(0.25)
                    / (plant.lambda[0])(z[b]);
                let g = sol.g[0].interp2(xi, eta.max(0.0), pide_backstep::numerics::SideHint::Pos).unwrap();
                coef * g - fine.k_values[0][(a * stride) * fm + b * stride]
            };
            println!("  naive-interp error field (1e-5 units) around argmax:");
            for a in iz.saturating_sub(2)..=(iz + 2).min(mm - 1) {
                let row: Vec<String> = (ic.saturating_sub(2)..=(ic + 2).min(a))
                    .map(|b| format!("{:+7.2}", e_naive(a, b) * 1e5))
                    .collect();
                println!("    z={:.3}: {}", z[a], row.join(" "));
            }
        }
        // error field second differences around the argmax
        let e = |a: usize, b: usize| {
            sol.k_values[0][a * mm + b] - fine.k_values[0][(a * stride) * fm + b * stride]
        };
        println!("  error field E (1e-5 units) around argmax:");
        for a in iz.saturating_sub(2)..=(iz + 2).min(mm - 1) {
            let row: Vec<String> = (ic.saturating_sub(2)..=(ic + 2).min(a))
                .map(|b| format!("{:+7.2}", e(a, b) * 1e5))
                .collect();
            println!("    z={:.3}: {}", z[a], row.join(" "));
        }
    }
}
