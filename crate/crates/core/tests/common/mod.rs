//! Shared helpers for the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use pide_backstep::model::{
    constant, from_fn, validate_plant, zero2, LeftBc, PlantDescription, PlantModel, TargetSpec,
    DEFAULT_EPS_SEP,
};

pub fn demo_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data/two_coupled_pides.json")
}

/// Scalar constant-coefficient plant with Dirichlet left boundary and
/// Dirichlet actuation.
pub fn scalar_plant(lambda: f64, reaction: f64) -> PlantModel {
    let desc = PlantDescription {
        n: 1,
        lambda: vec![constant(lambda)],
        lambda_d1: Some(vec![constant(0.0)]),
        lambda_d2: Some(vec![constant(0.0)]),
        phi_conv: vec![constant(0.0)],
        reaction: vec![vec![constant(reaction)]],
        local_term: vec![vec![constant(0.0)]],
        nonlocal_kernel: vec![vec![zero2()]],
        left_bc: vec![LeftBc::Dirichlet],
        actuation_slope: vec![0.0],
        actuation_value: vec![vec![1.0]],
    };
    validate_plant(desc, DEFAULT_EPS_SEP).unwrap()
}

pub fn scalar_target(mu_c: f64) -> TargetSpec {
    TargetSpec::new(mu_c, vec![0.0], vec![1.0])
}

/// Three-state plant with descending constant diffusion and light couplings.
pub fn three_state_plant() -> PlantModel {
    let desc = PlantDescription {
        n: 3,
        lambda: vec![constant(3.0), constant(1.5), from_fn(|z| 0.6 + 0.1 * z)],
        lambda_d1: Some(vec![constant(0.0), constant(0.0), constant(0.1)]),
        lambda_d2: Some(vec![constant(0.0); 3]),
        phi_conv: vec![constant(0.0); 3],
        reaction: vec![
            vec![constant(0.5), from_fn(|z| 0.3 * z), constant(0.2)],
            vec![constant(0.1), constant(0.4), from_fn(|z| 0.2 + z)],
            vec![constant(0.3), constant(0.1), constant(0.6)],
        ],
        local_term: vec![
            vec![from_fn(|z| 0.2 * z), constant(0.1), constant(0.0)],
            vec![constant(0.0), constant(0.3), constant(0.1)],
            vec![constant(0.1), constant(0.0), from_fn(|z| 0.4 - 0.2 * z)],
        ],
        nonlocal_kernel: vec![
            vec![
                pide_backstep::model::from_fn2(|z, zeta| 0.3 * (z - zeta)),
                zero2(),
                zero2(),
            ],
            vec![zero2(), zero2(), pide_backstep::model::from_fn2(|z, zeta| 0.2 * z * zeta)],
            vec![zero2(), zero2(), zero2()],
        ],
        left_bc: vec![
            LeftBc::Dirichlet,
            LeftBc::Robin { q: 0.5 },
            LeftBc::Robin { q: -0.2 },
        ],
        actuation_slope: vec![1.0, 0.0, 1.0],
        actuation_value: vec![
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.5],
        ],
    };
    validate_plant(desc, DEFAULT_EPS_SEP).unwrap()
}

pub fn three_state_target(mu_c: f64) -> TargetSpec {
    TargetSpec::new(mu_c, vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.3])
}

/// Closed-form kernel of the constant-coefficient scalar case
/// (Dirichlet at z = 0): K = -c ζ I1(√(c(z²-ζ²)))/√(c(z²-ζ²)),
/// evaluated by a 30-term power series (I1(x)/x = ½ Σ (x²/4)^k /(k!(k+1)!)).
pub fn bessel_kernel(c: f64, z: f64, zeta: f64) -> f64 {
    let w = c * (z * z - zeta * zeta);
    let mut term = 0.5;
    let mut acc = term;
    for k in 1..30 {
        term *= w / (4.0 * k as f64 * (k as f64 + 1.0));
        acc += term;
    }
    -c * zeta * acc
}

/// Closed-form inverse kernel: same series with alternating signs
/// (the first-kind Bessel variant).
pub fn bessel_inverse_kernel(c: f64, z: f64, zeta: f64) -> f64 {
    bessel_kernel(-c, z, zeta) * -1.0
}

/// Deterministic pseudo-random stream.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}
