//! Coordinate atlas for the kernel equations.
//!
//! Each state pair (i, j) gets a characteristic-aligned canonical frame
//! (ξ, η) reached through the per-state stretches `φ_i(z) = ∫0^z λ_i^{-1/2}`.
//! The atlas tabulates the stretches, their inverses, the lower domain
//! boundary `η_l(ξ)` with its slope, the left boundary `ξ_l(η)`, and the
//! convergence-diagnostic constants (γ, z_Δ, z_Σ).
//!
//! Conventions (`s = s_ij`):
//!
//! ```text
//! ξ = (1-s)/2 (φ_i(1)+φ_j(1)) + s (φ_i(z)+φ_j(ζ))
//! η = -(1-s)/2 (φ_i(1)-φ_j(1)) + φ_i(z) - φ_j(ζ)
//! ```
//!
//! with `s = +1` for λ_i ≥ λ_j and `s = -1` otherwise. The domain of a pair
//! is the kite `η_l(ξ) ≤ η ≤ min(ξ, 2a-ξ)` with `a` the top corner.

use crate::model::{Coeff1, PlantModel};
use crate::numerics::{cumtrapz, invert_monotone, GridFn1D, NumericsError, Result};

/// Geometry of one ordered pair's canonical domain.
struct PairTables {
    /// Lower boundary η_l over ξ (identically zero for i = j, then unused).
    eta_l: GridFn1D,
    /// Physical foot z of the lower boundary over ξ.
    z_l: GridFn1D,
    /// Inverse of η_l: ξ as a function of η on [b, 0].
    eta_l_inv: GridFn1D,
}

/// Immutable coordinate atlas; all evaluators are pure.
pub struct CoordinateAtlas {
    pub n: usize,
    lambda: Vec<Coeff1>,
    lambda0: Vec<f64>,
    phi: Vec<GridFn1D>,
    phi_inv: Vec<GridFn1D>,
    phi1: Vec<f64>,
    sign: Vec<f64>,
    pairs: Vec<Option<PairTables>>,
    pub gamma: f64,
    z_delta: Vec<f64>,
    z_sigma: Vec<f64>,
}

const REL_TOL: f64 = 1e-9;

/// Build the atlas. `n_grid` controls the stretch tabulation density; the
/// boundary tables and argmin scans use a 10x refinement.
pub fn build_atlas(plant: &PlantModel, n_grid: usize) -> CoordinateAtlas {
    let n = plant.n;
    let n_grid = n_grid.max(21);
    let fine = 10 * (n_grid - 1) + 1;

    let mut phi = Vec::with_capacity(n);
    let mut phi_inv = Vec::with_capacity(n);
    let mut phi1 = Vec::with_capacity(n);
    for i in 0..n {
        let lam = plant.lambda[i].clone();
        let tab = cumtrapz(move |z| 1.0 / lam(z).sqrt(), 0.0, 1.0, n_grid)
            .expect("stretch tabulation");
        // inverse from a refined resampling of the interpolant
        let zs: Vec<f64> = (0..fine).map(|k| k as f64 / (fine - 1) as f64).collect();
        let ps: Vec<f64> = zs.iter().map(|&z| tab.eval(z).unwrap()).collect();
        phi_inv.push(GridFn1D::new(ps, zs).expect("stretch is strictly increasing"));
        phi1.push(tab.hi_value());
        phi.push(tab);
    }

    let mut sign = vec![1.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // λ are uniformly separated, so the sign at any z is the sign everywhere
            sign[i * n + j] = if (plant.lambda[i])(0.5) >= (plant.lambda[j])(0.5) {
                1.0
            } else {
                -1.0
            };
        }
    }

    let mut z_delta = vec![0.0; n * n];
    let mut z_sigma = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut best_d = (f64::INFINITY, 0.0);
            let mut best_s = (f64::INFINITY, 0.0);
            for k in 0..fine {
                let z = k as f64 / (fine - 1) as f64;
                let (li, lj) = ((plant.lambda[i])(z), (plant.lambda[j])(z));
                if (li - lj).abs() < best_d.0 {
                    best_d = ((li - lj).abs(), z);
                }
                if li + lj < best_s.0 {
                    best_s = (li + lj, z);
                }
            }
            z_delta[i * n + j] = best_d.1;
            z_sigma[i * n + j] = best_s.1;
        }
    }

    // γ lives strictly inside (max over λ_i<λ_j of sqrt(λ_i/λ_j at z_Δ), 1);
    // it only feeds the growth diagnostic, so the midpoint is as good as any.
    let mut gamma_lo: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if sign[i * n + j] < 0.0 {
                let zd = z_delta[i * n + j];
                gamma_lo =
                    gamma_lo.max(((plant.lambda[i])(zd) / (plant.lambda[j])(zd)).sqrt());
            }
        }
    }
    let gamma = 0.5 * (gamma_lo + 1.0);

    let mut pairs: Vec<Option<PairTables>> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                pairs.push(None);
                continue;
            }
            let s = sign[i * n + j];
            let xi_max = phi1[i] + phi1[j];
            // β(z) = φ_i(z) + φ_j(z) on the refined grid
            let beta_nodes: Vec<f64> =
                (0..fine).map(|k| k as f64 / (fine - 1) as f64).collect();
            let beta_vals: Vec<f64> = beta_nodes
                .iter()
                .map(|&z| phi[i].eval(z).unwrap() + phi[j].eval(z).unwrap())
                .collect();
            let beta = GridFn1D::new(beta_nodes, beta_vals).unwrap();

            let shift = 0.5 * (1.0 - s) * xi_max;
            let off = -0.5 * (1.0 - s) * (phi1[i] - phi1[j]);
            let mut z_l_vals = Vec::with_capacity(fine);
            let mut eta_vals = Vec::with_capacity(fine);
            let xi_nodes: Vec<f64> = (0..fine)
                .map(|k| xi_max * k as f64 / (fine - 1) as f64)
                .collect();
            for &xi in &xi_nodes {
                let arg = (s * xi + shift).clamp(0.0, xi_max);
                let zl = invert_monotone(&beta, arg).expect("β is strictly increasing");
                z_l_vals.push(zl);
                eta_vals.push(off + phi[i].eval(zl).unwrap() - phi[j].eval(zl).unwrap());
            }
            // η_l is strictly decreasing for i != j; invert by reversing
            let inv_nodes: Vec<f64> = eta_vals.iter().rev().copied().collect();
            let inv_vals: Vec<f64> = xi_nodes.iter().rev().copied().collect();
            let eta_l_inv =
                GridFn1D::new(inv_nodes, inv_vals).expect("η_l strictly decreasing");
            pairs.push(Some(PairTables {
                eta_l: GridFn1D::new(xi_nodes.clone(), eta_vals).unwrap(),
                z_l: GridFn1D::new(xi_nodes, z_l_vals).unwrap(),
                eta_l_inv,
            }));
        }
    }

    CoordinateAtlas {
        n,
        lambda: plant.lambda.clone(),
        lambda0: (0..n).map(|i| (plant.lambda[i])(0.0)).collect(),
        phi,
        phi_inv,
        phi1,
        sign,
        pairs,
        gamma,
        z_delta,
        z_sigma,
    }
}

impl CoordinateAtlas {
    pub fn s(&self, i: usize, j: usize) -> f64 {
        self.sign[i * self.n + j]
    }

    pub fn phi(&self, i: usize, z: f64) -> f64 {
        self.phi[i].eval(z).expect("z in [0,1]")
    }

    pub fn phi_inv(&self, i: usize, rho: f64) -> f64 {
        let hi = self.phi1[i];
        let rho = rho.clamp(0.0, hi);
        self.phi_inv[i].eval(rho).expect("in range")
    }

    pub fn phi1(&self, i: usize) -> f64 {
        self.phi1[i]
    }

    /// ψ_i(ρ) = (λ_i(φ_i^{-1}(ρ)) / λ_i(0))^{1/4}
    pub fn psi(&self, i: usize, rho: f64) -> f64 {
        let z = self.phi_inv(i, rho);
        ((self.lambda[i])(z) / self.lambda0[i]).powf(0.25)
    }

    /// ψ_i expressed over the physical coordinate, i.e. ψ_i(φ_i(z)).
    pub fn psi_phys(&self, i: usize, z: f64) -> f64 {
        ((self.lambda[i])(z) / self.lambda0[i]).powf(0.25)
    }

    pub fn xi_max(&self, i: usize, j: usize) -> f64 {
        self.phi1[i] + self.phi1[j]
    }

    /// η of the top corner of the pair domain (the apex of Γ1).
    pub fn corner_a(&self, i: usize, j: usize) -> f64 {
        if self.s(i, j) > 0.0 {
            self.phi1[i]
        } else {
            self.phi1[j]
        }
    }

    /// Lowest η of the pair domain; 0 for i = j.
    pub fn corner_b(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.eta_lower(i, j, self.xi_max(i, j)).unwrap().0
        }
    }

    pub fn z_delta(&self, i: usize, j: usize) -> f64 {
        self.z_delta[i * self.n + j]
    }

    pub fn z_sigma(&self, i: usize, j: usize) -> f64 {
        self.z_sigma[i * self.n + j]
    }

    /// Map a physical point 0 ≤ ζ ≤ z ≤ 1 into the pair's canonical frame.
    pub fn to_canonical(&self, i: usize, j: usize, z: f64, zeta: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0 + REL_TOL).contains(&z) || zeta < -REL_TOL || zeta > z + REL_TOL {
            return Err(NumericsError::OutOfRange {
                x: zeta,
                lo: 0.0,
                hi: z,
            });
        }
        let (z, zeta) = (z.clamp(0.0, 1.0), zeta.clamp(0.0, z.clamp(0.0, 1.0)));
        let s = self.s(i, j);
        let (pi1, pj1) = (self.phi1[i], self.phi1[j]);
        let (pz, pzeta) = (self.phi(i, z), self.phi(j, zeta));
        Ok((
            0.5 * (1.0 - s) * (pi1 + pj1) + s * (pz + pzeta),
            -0.5 * (1.0 - s) * (pi1 - pj1) + pz - pzeta,
        ))
    }

    /// Inverse of [`Self::to_canonical`].
    pub fn from_canonical(&self, i: usize, j: usize, xi: f64, eta: f64) -> Result<(f64, f64)> {
        let s = self.s(i, j);
        let (pi1, pj1) = (self.phi1[i], self.phi1[j]);
        let rho = 0.5 * (s * xi + eta) + 0.5 * (1.0 - s) * pi1;
        let sigma = 0.5 * (s * xi - eta) + 0.5 * (1.0 - s) * pj1;
        let tol = REL_TOL * (1.0 + pi1.max(pj1));
        if rho < -tol || rho > pi1 + tol || sigma < -tol || sigma > pj1 + tol {
            return Err(NumericsError::OutsideDomain { a: xi, b: eta });
        }
        Ok((self.phi_inv(i, rho), self.phi_inv(j, sigma)))
    }

    /// Re-express a canonical point of pair (i, j) in the frame of pair (k, l).
    pub fn cross_canonical(
        &self,
        i: usize,
        j: usize,
        k: usize,
        l: usize,
        xi: f64,
        eta: f64,
    ) -> Result<(f64, f64)> {
        let (z, zeta) = self.from_canonical(i, j, xi, eta)?;
        self.to_canonical(k, l, z, zeta.min(z))
    }

    /// Lower boundary η_l(ξ) and its slope.
    pub fn eta_lower(&self, i: usize, j: usize, xi: f64) -> Result<(f64, f64)> {
        let xi_max = self.xi_max(i, j);
        if xi < -REL_TOL || xi > xi_max + REL_TOL {
            return Err(NumericsError::OutOfRange {
                x: xi,
                lo: 0.0,
                hi: xi_max,
            });
        }
        if i == j {
            return Ok((0.0, 0.0));
        }
        let tabs = self.pairs[i * self.n + j].as_ref().unwrap();
        let xi_c = xi.clamp(0.0, xi_max);
        let zl = tabs.z_l.eval(xi_c)?;
        let eta = tabs.eta_l.eval(xi_c)?;
        let (li, lj) = ((self.lambda[i])(zl).sqrt(), (self.lambda[j])(zl).sqrt());
        let slope = self.s(i, j) * (lj - li) / (lj + li);
        Ok((eta, slope))
    }

    /// Physical foot z of the lower boundary at ξ (where ζ = z maps onto Γ2).
    pub fn z_lower(&self, i: usize, j: usize, xi: f64) -> Result<f64> {
        if i == j {
            // Γ2 for i = j is η = 0: ξ = 2 φ_i(z)
            return Ok(self.phi_inv(i, 0.5 * xi.clamp(0.0, self.xi_max(i, j))));
        }
        let tabs = self.pairs[i * self.n + j].as_ref().unwrap();
        tabs.z_l.eval(xi.clamp(0.0, self.xi_max(i, j)))
    }

    /// Left boundary ξ_l(η): the ray ξ = η for η ≥ 0, the inverted lower
    /// boundary for η < 0.
    pub fn xi_left(&self, i: usize, j: usize, eta: f64) -> Result<f64> {
        if eta >= 0.0 {
            let a = self.corner_a(i, j);
            if eta > a + REL_TOL {
                return Err(NumericsError::OutOfRange {
                    x: eta,
                    lo: self.corner_b(i, j),
                    hi: a,
                });
            }
            return Ok(eta.min(a));
        }
        if i == j {
            return Err(NumericsError::OutOfRange {
                x: eta,
                lo: 0.0,
                hi: self.corner_a(i, i),
            });
        }
        let tabs = self.pairs[i * self.n + j].as_ref().unwrap();
        let b = self.corner_b(i, j);
        if eta < b - REL_TOL {
            return Err(NumericsError::OutOfRange {
                x: eta,
                lo: b,
                hi: self.corner_a(i, j),
            });
        }
        tabs.eta_l_inv.eval(eta.clamp(b, 0.0))
    }
}

trait HiValue {
    fn hi_value(&self) -> f64;
}

impl HiValue for GridFn1D {
    fn hi_value(&self) -> f64 {
        *self.values().last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_plants::{coupled_two_state, scalar};
    use crate::model::{constant, from_fn, validate_plant, zero2, LeftBc, PlantDescription,
        DEFAULT_EPS_SEP};
    use crate::numerics::trapz;

    fn two_constant(l1: f64, l2: f64) -> PlantModel {
        let desc = PlantDescription {
            n: 2,
            lambda: vec![constant(l1), constant(l2)],
            lambda_d1: Some(vec![constant(0.0); 2]),
            lambda_d2: Some(vec![constant(0.0); 2]),
            phi_conv: vec![constant(0.0); 2],
            reaction: vec![vec![constant(0.0); 2]; 2],
            local_term: vec![vec![constant(0.0); 2]; 2],
            nonlocal_kernel: vec![vec![zero2(), zero2()], vec![zero2(), zero2()]],
            left_bc: vec![LeftBc::Dirichlet; 2],
            actuation_slope: vec![0.0; 2],
            actuation_value: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        validate_plant(desc, DEFAULT_EPS_SEP).unwrap()
    }

    use crate::model::PlantModel;

    /// Deterministic pseudo-random stream for geometry sampling.
    struct Lcg(u64);
    impl Lcg {
        fn next_f64(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn unit_diffusion_stretch() {
        let atlas = build_atlas(&scalar(1.0, 0.0), 201);
        assert!((atlas.phi(0, 0.37) - 0.37).abs() < 1e-10);
        assert!((atlas.phi1(0) - 1.0).abs() < 1e-10);
        assert!((atlas.psi(0, 0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_diffusion_scaling() {
        let atlas = build_atlas(&scalar(4.0, 0.0), 201);
        assert!((atlas.phi(0, 1.0) - 0.5).abs() < 1e-10);
        assert!((atlas.phi(0, 0.6) - 0.3).abs() < 1e-10);
    }

    #[test]
    fn demo_stretch_matches_quadrature_oracle() {
        let plant = coupled_two_state();
        let oracle = trapz(
            |z| 1.0 / (plant.lambda[0])(z).sqrt(),
            0.0,
            1.0,
            100_000,
        );
        let atlas = build_atlas(&plant, 1001);
        assert!(
            (atlas.phi1(0) - oracle).abs() < 1e-5,
            "phi1 {} vs oracle {oracle}",
            atlas.phi1(0)
        );
    }

    #[test]
    fn canonical_corners() {
        let atlas = build_atlas(&scalar(1.0, 0.0), 201);
        let (xi, eta) = atlas.to_canonical(0, 0, 0.0, 0.0).unwrap();
        assert!(xi.abs() < 1e-12 && eta.abs() < 1e-12);
        let (xi, eta) = atlas.to_canonical(0, 0, 1.0, 0.0).unwrap();
        assert!((xi - 1.0).abs() < 1e-9 && (eta - 1.0).abs() < 1e-9);

        // λ_i < λ_j: the (1,1) corner collapses to the canonical origin
        let plant = two_constant(1.0, 4.0);
        let atlas = build_atlas(&plant, 201);
        assert_eq!(atlas.s(0, 1), -1.0);
        let (xi, eta) = atlas.to_canonical(0, 1, 1.0, 1.0).unwrap();
        assert!(xi.abs() < 1e-9 && eta.abs() < 1e-9);
    }

    #[test]
    fn inverse_map_examples() {
        let atlas = build_atlas(&scalar(1.0, 0.0), 201);
        let (z, zeta) = atlas.from_canonical(0, 0, 1.0, 1.0).unwrap();
        assert!((z - 1.0).abs() < 1e-9 && zeta.abs() < 1e-9);

        let plant = coupled_two_state();
        let atlas = build_atlas(&plant, 401);
        // pair (1,2) in 1-based terms: s = -1, the canonical origin is (z,ζ) = (1,1)
        let (z, zeta) = atlas.from_canonical(0, 1, 0.0, 0.0).unwrap();
        assert!((z - 1.0).abs() < 1e-8 && (zeta - 1.0).abs() < 1e-8);
    }

    #[test]
    fn round_trip_random_points() {
        let plant = coupled_two_state();
        let atlas = build_atlas(&plant, 401);
        let mut rng = Lcg(7);
        for i in 0..2 {
            for j in 0..2 {
                for _ in 0..100 {
                    let z = rng.next_f64();
                    let zeta = rng.next_f64() * z;
                    let (xi, eta) = atlas.to_canonical(i, j, z, zeta).unwrap();
                    let (z2, zeta2) = atlas.from_canonical(i, j, xi, eta).unwrap();
                    assert!(
                        (z - z2).abs() < 1e-9 && (zeta - zeta2).abs() < 1e-9,
                        "pair ({i},{j}) at ({z},{zeta}): got ({z2},{zeta2})"
                    );
                }
            }
        }
    }

    #[test]
    fn boundary_ray_is_diagonal_for_positive_sign() {
        let plant = coupled_two_state();
        let atlas = build_atlas(&plant, 401);
        // s = +1 pair: ζ = 0 maps onto ξ = η
        assert_eq!(atlas.s(1, 0), 1.0);
        for k in 0..20 {
            let z = k as f64 / 19.0;
            let (xi, eta) = atlas.to_canonical(1, 0, z, 0.0).unwrap();
            assert!((xi - eta).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_canonical_identity_and_round_trip() {
        let plant = coupled_two_state();
        let atlas = build_atlas(&plant, 401);
        let (xi, eta) = atlas.to_canonical(0, 1, 0.8, 0.3).unwrap();
        let (xi2, eta2) = atlas.cross_canonical(0, 1, 0, 1, xi, eta).unwrap();
        assert!((xi - xi2).abs() < 1e-10 && (eta - eta2).abs() < 1e-10);

        let mut rng = Lcg(42);
        for _ in 0..20 {
            let z = 0.05 + 0.9 * rng.next_f64();
            let zeta = z * rng.next_f64();
            let (xi, eta) = atlas.to_canonical(0, 1, z, zeta).unwrap();
            let (xk, ek) = atlas.cross_canonical(0, 1, 0, 0, xi, eta).unwrap();
            let (xi2, eta2) = atlas.cross_canonical(0, 0, 0, 1, xk, ek).unwrap();
            assert!(
                (xi - xi2).abs() < 1e-8 && (eta - eta2).abs() < 1e-8,
                "({xi},{eta}) vs ({xi2},{eta2})"
            );
        }
    }

    #[test]
    fn lower_boundary_diagonal_pair() {
        let atlas = build_atlas(&scalar(1.0, 0.0), 201);
        for k in 0..10 {
            let xi = 2.0 * k as f64 / 9.0;
            let (eta, slope) = atlas.eta_lower(0, 0, xi).unwrap();
            assert_eq!(eta, 0.0);
            assert_eq!(slope, 0.0);
        }
    }

    #[test]
    fn lower_boundary_constant_pair() {
        // λ_i = 4, λ_j = 1: η_l(ξ) = -ξ/3, slope -1/3
        let plant = two_constant(4.0, 1.0);
        let atlas = build_atlas(&plant, 401);
        assert_eq!(atlas.s(0, 1), 1.0);
        for k in 1..10 {
            let xi = 1.5 * k as f64 / 10.0;
            let (eta, slope) = atlas.eta_lower(0, 1, xi).unwrap();
            assert!((eta + xi / 3.0).abs() < 1e-8, "eta {eta} at xi {xi}");
            assert!((slope + 1.0 / 3.0).abs() < 1e-8);
        }
        // inverse branch of the left boundary
        assert!((atlas.xi_left(0, 1, -0.1).unwrap() - 0.3).abs() < 1e-8);
        assert_eq!(atlas.xi_left(0, 1, 0.0).unwrap(), 0.0);
        assert_eq!(atlas.xi_left(0, 1, 0.3).unwrap(), 0.3);
    }

    #[test]
    fn lower_boundary_slopes_in_range() {
        let plant = coupled_two_state();
        let atlas = build_atlas(&plant, 401);
        for (i, j) in [(0usize, 1usize), (1, 0)] {
            let xi_max = atlas.xi_max(i, j);
            for k in 0..100 {
                let xi = xi_max * k as f64 / 99.0;
                let (_, slope) = atlas.eta_lower(i, j, xi).unwrap();
                assert!(
                    slope > -1.0 && slope < 0.0,
                    "slope {slope} out of (-1,0) at xi {xi} pair ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn eta_lower_strictly_decreasing() {
        let plant = coupled_two_state();
        let atlas = build_atlas(&plant, 401);
        let xi_max = atlas.xi_max(0, 1);
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let xi = xi_max * k as f64 / 199.0;
            let (eta, _) = atlas.eta_lower(0, 1, xi).unwrap();
            assert!(eta < prev);
            prev = eta;
        }
    }

    #[test]
    fn gamma_inside_admissible_interval() {
        let plant = coupled_two_state();
        let atlas = build_atlas(&plant, 401);
        let zd = atlas.z_delta(0, 1);
        let lo = ((plant.lambda[0])(zd) / (plant.lambda[1])(zd)).sqrt();
        assert!(atlas.gamma > lo && atlas.gamma < 1.0, "gamma {}", atlas.gamma);
    }

    #[test]
    fn sign_matrix_antisymmetric() {
        let plant = coupled_two_state();
        let atlas = build_atlas(&plant, 201);
        assert_eq!(atlas.s(0, 0), 1.0);
        assert_eq!(atlas.s(1, 1), 1.0);
        assert_eq!(atlas.s(0, 1), -atlas.s(1, 0));
    }
}
