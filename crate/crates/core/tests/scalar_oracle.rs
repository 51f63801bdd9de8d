//! Scalar-case oracles: an independent Picard iteration for the classical
//! constant-coefficient kernel, the closed-form Bessel-series kernel, and a
//! dense direct iteration of the inverse-kernel reciprocity relation. The
//! oracle code shares nothing with the library's solver path.

mod common;

use common::{bessel_inverse_kernel, bessel_kernel, scalar_plant, scalar_target};
use pide_backstep::kernel::{solve_kernel, SolverOptions};

/// Independent successive approximation for the scalar constant-coefficient
/// kernel in characteristic coordinates: G_ξη = (c/4) G on the triangle
/// 0 ≤ η ≤ ξ ≤ 2, G(η,η) = 0, H(ξ,0) = -c/4, iterated on a plain uniform
/// grid with running trapezoids.
struct ScalarPicard {
    n: usize,
    h: f64,
    g: Vec<f64>,
    iterations: usize,
}

impl ScalarPicard {
    /// `c` is the combined reaction + shift coefficient; the domain in
    /// (ξ, η) is [0,2] x [0,1] masked to η ≤ min(ξ, 2-ξ).
    fn solve(c: f64, n_xi: usize, tol: f64) -> Self {
        let n = n_xi;
        let h = 2.0 / (n - 1) as f64;
        let n_eta = (n - 1) / 2 + 1;
        let idx = |p: usize, q: usize| p * n_eta + q;
        let mut g = vec![0.0; n * n_eta];
        let mut h_tab = vec![0.0; n * n_eta];
        let mut dg = vec![0.0; n * n_eta];
        let mut dh = vec![0.0; n * n_eta];
        // zeroth increments
        for p in 0..n {
            for q in 0..n_eta {
                dh[idx(p, q)] = -c / 4.0;
            }
        }
        let mut iterations = 0;
        for l in 0..200 {
            for k in 0..g.len() {
                g[k] += dg[k];
                h_tab[k] += dh[k];
            }
            let sup = dg
                .iter()
                .chain(dh.iter())
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if l > 0 && sup < tol {
                iterations = l;
                break;
            }
            // ΔG'(ξ,η) = ∫_η^ξ ΔH(ξ̄,η) dξ̄ ; ΔH'(ξ,η) = (c/4)∫_0^η ΔG(ξ,η̄) dη̄
            let mut dg_next = vec![0.0; g.len()];
            let mut dh_next = vec![0.0; g.len()];
            for q in 0..n_eta {
                let eta = q as f64 * h;
                let mut acc = 0.0;
                for p in q..n {
                    let xi = p as f64 * h;
                    if xi > 2.0 - eta + 1e-12 {
                        break;
                    }
                    if p > q {
                        acc += 0.5 * (dh[idx(p - 1, q)] + dh[idx(p, q)]) * h;
                    }
                    dg_next[idx(p, q)] = acc;
                }
            }
            for p in 0..n {
                let xi = p as f64 * h;
                let q_top = ((xi.min(2.0 - xi)) / h + 1e-9).floor() as usize;
                let mut acc = 0.0;
                for q in 0..=q_top.min(n_eta - 1) {
                    if q > 0 {
                        acc += 0.5 * (dg[idx(p, q - 1)] + dg[idx(p, q)]) * h;
                    }
                    dh_next[idx(p, q)] = c / 4.0 * acc;
                }
            }
            dg = dg_next;
            dh = dh_next;
        }
        Self {
            n,
            h,
            g,
            iterations,
        }
    }

    /// Kernel value K(z,ζ) = G(z+ζ, z-ζ) via bilinear interpolation.
    fn kernel(&self, z: f64, zeta: f64) -> f64 {
        let n_eta = (self.n - 1) / 2 + 1;
        let (xi, eta) = (z + zeta, z - zeta);
        let fp = (xi / self.h).clamp(0.0, (self.n - 2) as f64);
        let fq = (eta / self.h).clamp(0.0, (n_eta - 2) as f64);
        let (p, q) = (fp.floor() as usize, fq.floor() as usize);
        let (tx, ty) = (fp - p as f64, fq - q as f64);
        let idx = |a: usize, b: usize| a * n_eta + b;
        let lo = self.g[idx(p, q)] + tx * (self.g[idx(p + 1, q)] - self.g[idx(p, q)]);
        let hi = self.g[idx(p, q + 1)] + tx * (self.g[idx(p + 1, q + 1)] - self.g[idx(p, q + 1)]);
        lo + ty * (hi - lo)
    }
}

#[test]
fn picard_oracle_matches_closed_form() {
    let c = 5.0;
    let oracle = ScalarPicard::solve(c, 201, 1e-8);
    assert!(oracle.iterations > 3);
    // interior comparison: the oracle's simple rectangular table holds zeros
    // beyond the domain edges, so cells cut by the edges are skipped
    let mut sup = 0.0f64;
    for k in 0..=20 {
        for l in 0..=k {
            let z = k as f64 / 20.0;
            let zeta = l as f64 / 20.0;
            if z + zeta > 1.9 || z - zeta > 0.9 {
                continue;
            }
            sup = sup.max((oracle.kernel(z, zeta) - bessel_kernel(c, z, zeta)).abs());
        }
    }
    assert!(sup < 2e-3, "oracle vs closed form: {sup}");
}

#[test]
fn closed_form_trace_identity() {
    // K(z,z) = -c z / 2 for λ = 1
    for k in 0..=10 {
        let z = k as f64 / 10.0;
        assert!((bessel_kernel(5.0, z, z) + 2.5 * z).abs() < 1e-12);
    }
}

fn solve_and_compare(grid_n: usize) -> (f64, usize) {
    let c = 5.0;
    let plant = scalar_plant(1.0, c);
    let sol = solve_kernel(
        &plant,
        &scalar_target(0.0),
        SolverOptions {
            grid_n,
            tol: 1e-3,
            max_iter: 50,
        },
    )
    .unwrap();
    let mm = sol.grid_n;
    let mut sup = 0.0f64;
    for iz in 0..mm {
        for ic in 0..=iz {
            let z = sol.z_nodes[iz];
            let zeta = sol.z_nodes[ic];
            sup = sup.max((sol.k_values[0][iz * mm + ic] - bessel_kernel(c, z, zeta)).abs());
        }
    }
    (sup, sol.iterations_used)
}

#[test]
fn solver_matches_closed_form_at_51() {
    let (sup, iters) = solve_and_compare(51);
    assert!(sup < 1e-2, "sup error {sup}");
    assert!(iters <= 20, "iterations {iters}");
}

#[test]
fn solver_matches_closed_form_at_101() {
    let (sup, _) = solve_and_compare(101);
    assert!(sup < 5e-3, "sup error {sup}");
}

#[test]
fn solver_matches_picard_oracle() {
    let c = 5.0;
    let plant = scalar_plant(1.0, c);
    let sol = solve_kernel(&plant, &scalar_target(0.0), SolverOptions::default()).unwrap();
    let oracle = ScalarPicard::solve(c, 401, 1e-9);
    let mm = sol.grid_n;
    let mut sup = 0.0f64;
    for iz in 0..mm {
        for ic in 0..=iz {
            let z = sol.z_nodes[iz];
            let zeta = sol.z_nodes[ic];
            if z + zeta > 1.9 || z - zeta > 0.9 {
                continue;
            }
            sup = sup.max((sol.k_values[0][iz * mm + ic] - oracle.kernel(z, zeta)).abs());
        }
    }
    assert!(sup < 1e-2, "solver vs oracle: {sup}");
}

/// Dense direct iteration of L = K + ∫ L K on a fine grid with the
/// closed-form K: the reference for the inverse kernel.
fn dense_inverse_reference(c: f64, n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    let node = |k: usize| k as f64 * h;
    let mut k_tab = vec![0.0; n * n];
    for iz in 0..n {
        for ic in 0..=iz {
            k_tab[iz * n + ic] = bessel_kernel(c, node(iz), node(ic));
        }
    }
    let mut l_tab = k_tab.clone();
    for _ in 0..100 {
        let mut next = k_tab.clone();
        let mut delta = 0.0f64;
        for iz in 0..n {
            for ic in 0..=iz {
                if iz > ic {
                    let mut acc = 0.0;
                    for t in ic..=iz {
                        let v = l_tab[iz * n + t] * k_tab[t * n + ic];
                        acc += if t == ic || t == iz { 0.5 * v } else { v };
                    }
                    next[iz * n + ic] += acc * h;
                }
                delta = delta.max((next[iz * n + ic] - l_tab[iz * n + ic]).abs());
            }
        }
        l_tab = next;
        if delta < 1e-12 {
            break;
        }
    }
    l_tab
}

#[test]
fn dense_inverse_matches_sign_flipped_series() {
    let c = 5.0;
    let n = 201;
    let l_ref = dense_inverse_reference(c, n);
    let h = 1.0 / (n - 1) as f64;
    let mut sup = 0.0f64;
    for iz in (0..n).step_by(10) {
        for ic in (0..=iz).step_by(10) {
            let expect = bessel_inverse_kernel(c, iz as f64 * h, ic as f64 * h);
            sup = sup.max((l_ref[iz * n + ic] - expect).abs());
        }
    }
    assert!(sup < 1e-3, "dense reciprocity vs series: {sup}");
}

#[test]
fn solver_inverse_matches_series() {
    let c = 5.0;
    let plant = scalar_plant(1.0, c);
    let sol = solve_kernel(&plant, &scalar_target(0.0), SolverOptions::default()).unwrap();
    let mm = sol.grid_n;
    let mut sup = 0.0f64;
    for iz in 0..mm {
        for ic in 0..=iz {
            let expect = bessel_inverse_kernel(c, sol.z_nodes[iz], sol.z_nodes[ic]);
            sup = sup.max((sol.l_values[0][iz * mm + ic] - expect).abs());
        }
    }
    assert!(sup < 1e-2, "solver inverse vs series: {sup}");
}
