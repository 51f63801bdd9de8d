//! Coefficient tables of the canonical kernel equations.
//!
//! After the stretch `ρ = φ_i(z)`, the scaling `K̄ = ψ_iψ_j K̃` and the linear
//! canonical map, the kernel PIDE becomes `4s G_ξη = (a+μ_c)G - c1 + Σ_k(...)`
//! with boundary data built from c4..c10. All coefficient functions reduce to
//! closed forms over the physical coordinates, which is how the solver
//! evaluates them; the (ρ, σ)- and ξ-argument forms used by the boundary
//! conditions are provided as thin wrappers.

use std::sync::Arc;

use crate::coords::CoordinateAtlas;
use crate::model::{Coeff1, PlantModel, TargetSpec};
use crate::numerics::{cumtrapz, GridFn1D};

pub struct CoefficientTables {
    pub n: usize,
    pub m: usize,
    pub mu_c: f64,
    lam: Vec<Coeff1>,
    lam_d1: Vec<Coeff1>,
    lam_d2: Vec<Coeff1>,
    reaction: Vec<Vec<Coeff1>>,
    local_term: Vec<Vec<Coeff1>>,
    lam0: Vec<f64>,
    sqrt_lam0: Vec<f64>,
    /// c4_j = λ_j'(0)/(4 √λ_j(0)) + q_j √λ_j(0); meaningful for j >= m.
    pub c4: Vec<f64>,
    /// c7_i(ρ) = -½ √λ_i(0) ∫0^ρ (A_ii(z_i(ρ̄)) + μ_c) dρ̄, tabulated.
    pub c7: Vec<GridFn1D>,
    atlas: Arc<CoordinateAtlas>,
    g_f: std::collections::BTreeMap<(usize, usize), Coeff1>,
}

/// Spec'd ρ-grid density for the c7 tabulation.
const C7_NODES: usize = 2001;

pub fn build_coefficients(
    plant: &PlantModel,
    atlas: Arc<CoordinateAtlas>,
    target: &TargetSpec,
) -> CoefficientTables {
    let n = plant.n;
    let m = plant.num_dirichlet();
    let lam0: Vec<f64> = (0..n).map(|i| (plant.lambda[i])(0.0)).collect();
    let sqrt_lam0: Vec<f64> = lam0.iter().map(|l| l.sqrt()).collect();
    let c4 = (0..n)
        .map(|j| (plant.lambda_d1[j])(0.0) / (4.0 * sqrt_lam0[j]) + plant.robin_q(j) * sqrt_lam0[j])
        .collect();
    let mut c7 = Vec::with_capacity(n);
    for i in 0..n {
        let a_ii = plant.reaction[i][i].clone();
        let at = atlas.clone();
        let mu = target.mu_c;
        let scale = -0.5 * sqrt_lam0[i];
        c7.push(
            cumtrapz(
                move |rho| scale * (a_ii(at.phi_inv(i, rho)) + mu),
                0.0,
                atlas.phi1(i),
                C7_NODES,
            )
            .expect("c7 tabulation"),
        );
    }
    CoefficientTables {
        n,
        m,
        mu_c: target.mu_c,
        lam: plant.lambda.clone(),
        lam_d1: plant.lambda_d1.clone(),
        lam_d2: plant.lambda_d2.clone(),
        reaction: plant.reaction.clone(),
        local_term: plant.local_term.clone(),
        lam0,
        sqrt_lam0,
        c4,
        c7,
        atlas,
        g_f: target.g_f.clone(),
    }
}

impl CoefficientTables {
    /// ψ_i(φ_i(z)) = (λ_i(z)/λ_i(0))^{1/4}.
    #[inline]
    pub fn psi_phys(&self, i: usize, z: f64) -> f64 {
        ((self.lam[i])(z) / self.lam0[i]).powf(0.25)
    }

    /// Zeroth-order coefficient left by the derivative-normalizing transforms.
    pub fn a_phys(&self, i: usize, j: usize, z: f64, zeta: f64) -> f64 {
        let (l1, d1, dd1) = ((self.lam[i])(z), (self.lam_d1[i])(z), (self.lam_d2[i])(z));
        let (l2, d2, dd2) = (
            (self.lam[j])(zeta),
            (self.lam_d1[j])(zeta),
            (self.lam_d2[j])(zeta),
        );
        -0.25 * dd1 + 0.25 * dd2 + 3.0 * d1 * d1 / (16.0 * l1) - 3.0 * d2 * d2 / (16.0 * l2)
    }

    /// Non-local source weight: c1 = λ_j(ζ) F_ij(z,ζ) / (ψ_i ψ_j).
    pub fn c1_phys(&self, i: usize, j: usize, f_ij: f64, z: f64, zeta: f64) -> f64 {
        (self.lam[j])(zeta) * f_ij / (self.psi_phys(i, z) * self.psi_phys(j, zeta))
    }

    /// Reaction coupling weight: c2_kj(ζ) = A_kj(ζ) λ_j(ζ) ψ_k / (λ_k(ζ) ψ_j).
    pub fn c2_phys(&self, k: usize, j: usize, zeta: f64) -> f64 {
        (self.reaction[k][j])(zeta) * (self.lam[j])(zeta) * self.psi_phys(k, zeta)
            / ((self.lam[k])(zeta) * self.psi_phys(j, zeta))
    }

    /// ζ-part of the separable c3 factor: λ_j(ζ)/ψ_j(ζ).
    pub fn c3_outer(&self, j: usize, zeta: f64) -> f64 {
        (self.lam[j])(zeta) / self.psi_phys(j, zeta)
    }

    /// ζ̄-part of the separable c3 factor: ψ_k(ζ̄)/λ_k(ζ̄).
    pub fn c3_inner(&self, k: usize, zeta_bar: f64) -> f64 {
        self.psi_phys(k, zeta_bar) / (self.lam[k])(zeta_bar)
    }

    /// Local-term source: c5 = √λ_j(0) A0_ij(z) / ψ_i.
    pub fn c5_phys(&self, i: usize, j: usize, z: f64) -> f64 {
        self.sqrt_lam0[j] * (self.local_term[i][j])(z) / self.psi_phys(i, z)
    }

    /// Local-term coupling: c6_kj(ζ̄) = A0_kj(ζ̄) √λ_j(0) ψ_k(ζ̄)/λ_k(ζ̄).
    pub fn c6_phys(&self, k: usize, j: usize, zeta_bar: f64) -> f64 {
        (self.local_term[k][j])(zeta_bar) * self.sqrt_lam0[j] * self.psi_phys(k, zeta_bar)
            / (self.lam[k])(zeta_bar)
    }

    /// Slope data on the lower boundary:
    /// c8 = (λ_i(0)λ_j(0)λ_i(z)λ_j(z)^3)^{1/4} A_ij(z) / (λ_j(z)-λ_i(z)).
    pub fn c8_phys(&self, i: usize, j: usize, z: f64) -> f64 {
        let (li, lj) = ((self.lam[i])(z), (self.lam[j])(z));
        (self.lam0[i] * self.lam0[j] * li * lj * lj * lj).powf(0.25) * (self.reaction[i][j])(z)
            / (lj - li)
    }

    /// Lower-boundary trace of H for i != j.
    pub fn c9(&self, i: usize, j: usize, xi: f64) -> f64 {
        let (_, slope) = self.atlas.eta_lower(i, j, xi).expect("xi in range");
        let z_l = self.atlas.z_lower(i, j, xi).expect("xi in range");
        let s = self.atlas.s(i, j);
        self.c8_phys(i, j, z_l) * slope / (s * slope - 1.0)
    }

    /// Lower-boundary trace of H for i = j.
    pub fn c10(&self, i: usize, xi: f64) -> f64 {
        let z = self.atlas.phi_inv(i, 0.5 * xi);
        -0.25 * self.sqrt_lam0[i] * ((self.reaction[i][i])(z) + self.mu_c)
    }

    /// Lower-boundary H trace in one call (c10 on the diagonal pairs, c9 off it).
    pub fn h_boundary(&self, i: usize, j: usize, xi: f64) -> f64 {
        if i == j {
            self.c10(i, xi)
        } else {
            self.c9(i, j, xi)
        }
    }

    /// Artificial boundary data for pairs with λ_i < λ_j (defaults to 0).
    pub fn g_f(&self, i: usize, j: usize, eta: f64) -> f64 {
        self.g_f.get(&(i, j)).map_or(0.0, |f| f(eta))
    }

    // ---- (ρ, σ)-argument wrappers matching the boundary-condition forms ----

    pub fn a(&self, i: usize, j: usize, rho: f64, sigma: f64) -> f64 {
        self.a_phys(
            i,
            j,
            self.atlas.phi_inv(i, rho),
            self.atlas.phi_inv(j, sigma),
        )
    }

    pub fn c1(&self, i: usize, j: usize, f_ij: impl Fn(f64, f64) -> f64, rho: f64, sigma: f64) -> f64 {
        let z = self.atlas.phi_inv(i, rho);
        let zeta = self.atlas.phi_inv(j, sigma);
        self.c1_phys(i, j, f_ij(z, zeta), z, zeta)
    }

    pub fn c2(&self, k: usize, j: usize, sigma: f64) -> f64 {
        self.c2_phys(k, j, self.atlas.phi_inv(j, sigma))
    }

    pub fn c3(&self, k: usize, j: usize, f_kj: f64, sigma: f64, zeta_bar: f64) -> f64 {
        self.c3_outer(j, self.atlas.phi_inv(j, sigma)) * f_kj * self.c3_inner(k, zeta_bar)
    }

    pub fn c5(&self, i: usize, j: usize, rho: f64) -> f64 {
        self.c5_phys(i, j, self.atlas.phi_inv(i, rho))
    }

    pub fn c7_at(&self, i: usize, rho: f64) -> f64 {
        self.c7[i].eval(rho.clamp(0.0, self.atlas.phi1(i))).unwrap()
    }

    pub fn c8(&self, i: usize, j: usize, rho: f64) -> f64 {
        self.c8_phys(i, j, self.atlas.phi_inv(i, rho))
    }
}
