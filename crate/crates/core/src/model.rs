//! Plant description, validation and normalization.
//!
//! The plant is a system of n coupled parabolic PIDEs
//!
//! ```text
//! dx/dt = Λ(z) x'' + Φ(z) x' + A(z) x + A0(z) x(0,t) + ∫0^z F(z,ζ) x(ζ,t) dζ
//! ```
//!
//! with decoupled Dirichlet/Robin conditions at z = 0 and mixed actuation
//! `θ1[x](1) = u`. Validation enforces positive, mutually separated diffusion
//! coefficients; [`eliminate_convection`] removes Φ by an exponential state
//! rescaling; [`reorder_dirichlet_first`] normalizes the left-boundary row
//! order. Coefficients are carried as evaluable closures so downstream
//! modules can pick their own grid densities.

use std::sync::Arc;

use thiserror::Error;

use crate::numerics::{cumtrapz, GridFn1D};

/// Scalar coefficient of one spatial variable.
pub type Coeff1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Scalar coefficient of (z, ζ).
pub type Coeff2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Default minimal uniform separation between diffusion coefficients.
pub const DEFAULT_EPS_SEP: f64 = 1e-6;

/// Nodes used for invariant sampling and finite-difference derivative tables.
const PROBE_NODES: usize = 1001;

pub fn constant(c: f64) -> Coeff1 {
    Arc::new(move |_| c)
}

pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Coeff1 {
    Arc::new(f)
}

pub fn from_fn2(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Coeff2 {
    Arc::new(f)
}

pub fn zero2() -> Coeff2 {
    Arc::new(|_, _| 0.0)
}

/// One row of the unactuated boundary operator at z = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeftBc {
    /// `x_i(0, t) = 0`
    Dirichlet,
    /// `x_i'(0, t) + q x_i(0, t) = 0` (Neumann for q = 0)
    Robin { q: f64 },
}

impl LeftBc {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, LeftBc::Dirichlet)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("diffusion coefficient {index} is not positive at z = {z} (value {value})")]
    DiffusionNotPositive { index: usize, z: f64, value: f64 },
    #[error("diffusion coefficients {i} and {j} come within {sep} (< eps_sep = {eps_sep}) near z = {z}")]
    DiffusionCoefficientsTouch {
        i: usize,
        j: usize,
        z: f64,
        sep: f64,
        eps_sep: f64,
    },
    #[error("malformed boundary data: {0}")]
    MalformedBc(String),
    #[error("actuation row {index} is identically zero")]
    ActuationRowZero { index: usize },
    #[error("target row {index} has |Bt1_1| + |Bt1_0| = 0")]
    TargetRowZero { index: usize },
    #[error("channel {index} has Dirichlet actuation but a non-Dirichlet target row")]
    TargetTypeMismatch { index: usize },
}

/// Raw plant description prior to validation. Derivative entries are optional;
/// missing ones are populated by finite differences during validation.
pub struct PlantDescription {
    pub n: usize,
    pub lambda: Vec<Coeff1>,
    pub lambda_d1: Option<Vec<Coeff1>>,
    pub lambda_d2: Option<Vec<Coeff1>>,
    pub phi_conv: Vec<Coeff1>,
    pub reaction: Vec<Vec<Coeff1>>,
    pub local_term: Vec<Vec<Coeff1>>,
    pub nonlocal_kernel: Vec<Vec<Coeff2>>,
    pub left_bc: Vec<LeftBc>,
    pub actuation_slope: Vec<f64>,
    pub actuation_value: Vec<Vec<f64>>,
}

/// Validated plant with all derivative tables populated. Immutable and safe
/// to share across threads.
#[derive(Clone)]
pub struct PlantModel {
    pub n: usize,
    pub lambda: Vec<Coeff1>,
    pub lambda_d1: Vec<Coeff1>,
    pub lambda_d2: Vec<Coeff1>,
    pub phi_conv: Vec<Coeff1>,
    pub reaction: Vec<Vec<Coeff1>>,
    pub local_term: Vec<Vec<Coeff1>>,
    pub nonlocal_kernel: Vec<Vec<Coeff2>>,
    pub left_bc: Vec<LeftBc>,
    /// Diagonal of B1^1 (actuation on the state slope at z = 1).
    pub actuation_slope: Vec<f64>,
    /// Full B1^0 (actuation on the state value at z = 1).
    pub actuation_value: Vec<Vec<f64>>,
}

impl PlantModel {
    /// Number of Dirichlet rows at z = 0 (requires Dirichlet-first ordering).
    pub fn num_dirichlet(&self) -> usize {
        self.left_bc.iter().filter(|bc| bc.is_dirichlet()).count()
    }

    pub fn is_dirichlet_first(&self) -> bool {
        let m = self.num_dirichlet();
        self.left_bc[..m].iter().all(LeftBc::is_dirichlet)
    }

    /// Robin coefficient of left-BC row `i`; 0 is returned for Dirichlet rows
    /// (never used for them by the kernel equations).
    pub fn robin_q(&self, i: usize) -> f64 {
        match self.left_bc[i] {
            LeftBc::Dirichlet => 0.0,
            LeftBc::Robin { q } => q,
        }
    }

    pub fn has_convection(&self) -> bool {
        let probe = 17;
        (0..self.n).any(|i| {
            (0..probe).any(|k| {
                let z = k as f64 / (probe - 1) as f64;
                (self.phi_conv[i])(z).abs() > 1e-14
            })
        })
    }
}

/// Per-channel target boundary data at z = 1 and the stability-margin shift.
#[derive(Clone)]
pub struct TargetSpec {
    pub mu_c: f64,
    /// Diagonal of the target slope coefficient at z = 1.
    pub bt1_1: Vec<f64>,
    /// Diagonal of the target value coefficient at z = 1.
    pub bt1_0: Vec<f64>,
    /// Artificial boundary data per (i, j) pair with λ_i < λ_j; missing
    /// entries mean g_f = 0.
    pub g_f: std::collections::BTreeMap<(usize, usize), Coeff1>,
}

impl TargetSpec {
    pub fn new(mu_c: f64, bt1_1: Vec<f64>, bt1_0: Vec<f64>) -> Self {
        Self {
            mu_c,
            bt1_1,
            bt1_0,
            g_f: Default::default(),
        }
    }

    pub fn g_f(&self, i: usize, j: usize) -> Option<&Coeff1> {
        self.g_f.get(&(i, j))
    }

    /// Check target invariants against a validated plant.
    pub fn validate(&self, plant: &PlantModel) -> Result<(), ModelError> {
        if self.bt1_1.len() != plant.n || self.bt1_0.len() != plant.n {
            return Err(ModelError::MalformedBc(format!(
                "target rows must match n = {}",
                plant.n
            )));
        }
        for i in 0..plant.n {
            if self.bt1_1[i].abs() + self.bt1_0[i].abs() == 0.0 {
                return Err(ModelError::TargetRowZero { index: i });
            }
            if plant.actuation_slope[i] == 0.0 && self.bt1_1[i] != 0.0 {
                return Err(ModelError::TargetTypeMismatch { index: i });
            }
        }
        Ok(())
    }
}

/// 4th-order finite-difference derivative of `f` tabulated on the probe grid.
fn fd_derivative(f: &Coeff1) -> Coeff1 {
    let n = PROBE_NODES;
    let h = 1.0 / (n - 1) as f64;
    let samples: Vec<f64> = (0..n).map(|k| f(k as f64 * h)).collect();
    let mut d = vec![0.0; n];
    for k in 0..n {
        d[k] = if k >= 2 && k + 2 < n {
            (-samples[k + 2] + 8.0 * samples[k + 1] - 8.0 * samples[k - 1] + samples[k - 2])
                / (12.0 * h)
        } else if k + 4 < n && k < 2 {
            // one-sided 4th order at the left edge
            (-25.0 * samples[k] + 48.0 * samples[k + 1] - 36.0 * samples[k + 2]
                + 16.0 * samples[k + 3]
                - 3.0 * samples[k + 4])
                / (12.0 * h)
        } else {
            (25.0 * samples[k] - 48.0 * samples[k - 1] + 36.0 * samples[k - 2]
                - 16.0 * samples[k - 3]
                + 3.0 * samples[k - 4])
                / (12.0 * h)
        };
    }
    let nodes = (0..n).map(|k| k as f64 * h).collect();
    let table = GridFn1D::new(nodes, d).expect("probe grid is valid");
    Arc::new(move |z| table.eval(z).expect("derivative table covers [0,1]"))
}

/// Validate a raw plant description and populate missing derivative tables.
pub fn validate_plant(raw: PlantDescription, eps_sep: f64) -> Result<PlantModel, ModelError> {
    let n = raw.n;
    if n == 0 {
        return Err(ModelError::MalformedBc("n must be >= 1".into()));
    }
    let dims_ok = raw.lambda.len() == n
        && raw.phi_conv.len() == n
        && raw.reaction.len() == n
        && raw.reaction.iter().all(|r| r.len() == n)
        && raw.local_term.len() == n
        && raw.local_term.iter().all(|r| r.len() == n)
        && raw.nonlocal_kernel.len() == n
        && raw.nonlocal_kernel.iter().all(|r| r.len() == n)
        && raw.left_bc.len() == n
        && raw.actuation_slope.len() == n
        && raw.actuation_value.len() == n
        && raw.actuation_value.iter().all(|r| r.len() == n);
    if !dims_ok {
        return Err(ModelError::MalformedBc(
            "coefficient table dimensions do not match n".into(),
        ));
    }

    let h = 1.0 / (PROBE_NODES - 1) as f64;
    for i in 0..n {
        for k in 0..PROBE_NODES {
            let z = k as f64 * h;
            let v = (raw.lambda[i])(z);
            if !(v > 0.0) {
                return Err(ModelError::DiffusionNotPositive { index: i, z, value: v });
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut min_sep = f64::INFINITY;
            let mut z_min = 0.0;
            for k in 0..PROBE_NODES {
                let z = k as f64 * h;
                let sep = ((raw.lambda[i])(z) - (raw.lambda[j])(z)).abs();
                if sep < min_sep {
                    min_sep = sep;
                    z_min = z;
                }
            }
            if min_sep <= eps_sep {
                return Err(ModelError::DiffusionCoefficientsTouch {
                    i,
                    j,
                    z: z_min,
                    sep: min_sep,
                    eps_sep,
                });
            }
        }
    }
    for (i, row) in raw.actuation_value.iter().enumerate() {
        let row_norm: f64 = row.iter().map(|v| v.abs()).sum();
        if raw.actuation_slope[i].abs() + row_norm == 0.0 {
            return Err(ModelError::ActuationRowZero { index: i });
        }
    }

    let lambda_d1 = match raw.lambda_d1 {
        Some(d) if d.len() == n => d,
        Some(_) => {
            return Err(ModelError::MalformedBc(
                "lambda_d1 length does not match n".into(),
            ))
        }
        None => raw.lambda.iter().map(fd_derivative).collect(),
    };
    let lambda_d2 = match raw.lambda_d2 {
        Some(d) if d.len() == n => d,
        Some(_) => {
            return Err(ModelError::MalformedBc(
                "lambda_d2 length does not match n".into(),
            ))
        }
        None => lambda_d1.iter().map(fd_derivative).collect(),
    };

    Ok(PlantModel {
        n,
        lambda: raw.lambda,
        lambda_d1,
        lambda_d2,
        phi_conv: raw.phi_conv,
        reaction: raw.reaction,
        local_term: raw.local_term,
        nonlocal_kernel: raw.nonlocal_kernel,
        left_bc: raw.left_bc,
        actuation_slope: raw.actuation_slope,
        actuation_value: raw.actuation_value,
    })
}

/// Remove the convection term by the exponential state rescaling
/// `x̌ = W(z) x` with `W = exp(½ ∫0^z Λ^{-1} Φ)`.
///
/// Returns the convection-free plant together with the diagonal weight
/// entries so states and initial profiles can be mapped between the two
/// representations. The left Robin coefficients and the actuation operators are
/// updated so the transformed plant keeps the same boundary-condition types.
pub fn eliminate_convection(plant: &PlantModel) -> (PlantModel, Vec<Coeff1>) {
    let n = plant.n;
    if !plant.has_convection() {
        let weight: Vec<Coeff1> = (0..n).map(|_| constant(1.0)).collect();
        return (plant.clone(), weight);
    }

    // w_i(z) = exp(0.5 * ∫0^z Φ_i/λ_i)
    let mut weight: Vec<Coeff1> = Vec::with_capacity(n);
    let mut log_weight: Vec<Coeff1> = Vec::with_capacity(n);
    for i in 0..n {
        let phi = plant.phi_conv[i].clone();
        let lam = plant.lambda[i].clone();
        let table = cumtrapz(move |z| 0.5 * phi(z) / lam(z), 0.0, 1.0, PROBE_NODES)
            .expect("probe grid is valid");
        let table = Arc::new(table);
        let t2 = table.clone();
        log_weight.push(Arc::new(move |z| t2.eval(z).expect("in range")));
        weight.push(Arc::new(move |z| table.eval(z).expect("in range").exp()));
    }

    let mut reaction: Vec<Vec<Coeff1>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let a = plant.reaction[i][j].clone();
            let wi = log_weight[i].clone();
            let wj = log_weight[j].clone();
            if i == j {
                let phi = plant.phi_conv[i].clone();
                let phi_d1 = fd_derivative(&plant.phi_conv[i]);
                let lam = plant.lambda[i].clone();
                let lam_d1 = plant.lambda_d1[i].clone();
                row.push(from_fn(move |z| {
                    let (p, pd, l, ld) = (phi(z), phi_d1(z), lam(z), lam_d1(z));
                    a(z) - p * p / (4.0 * l) - (pd * l - ld * p) / (2.0 * l)
                }));
            } else {
                row.push(from_fn(move |z| (wi(z) - wj(z)).exp() * a(z)));
            }
        }
        reaction.push(row);
    }

    let local_term: Vec<Vec<Coeff1>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let a0 = plant.local_term[i][j].clone();
                    let wi = log_weight[i].clone();
                    from_fn(move |z| wi(z).exp() * a0(z))
                })
                .collect()
        })
        .collect();

    let nonlocal_kernel: Vec<Vec<Coeff2>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let f = plant.nonlocal_kernel[i][j].clone();
                    let wi = log_weight[i].clone();
                    let wj = log_weight[j].clone();
                    from_fn2(move |z, zeta| (wi(z) - wj(zeta)).exp() * f(z, zeta))
                })
                .collect()
        })
        .collect();

    let left_bc: Vec<LeftBc> = (0..n)
        .map(|i| match plant.left_bc[i] {
            LeftBc::Dirichlet => LeftBc::Dirichlet,
            LeftBc::Robin { q } => LeftBc::Robin {
                q: q - (plant.phi_conv[i])(0.0) / (2.0 * (plant.lambda[i])(0.0)),
            },
        })
        .collect();

    let w1: Vec<f64> = (0..n).map(|i| (weight[i])(1.0)).collect();
    let actuation_slope: Vec<f64> = (0..n).map(|i| plant.actuation_slope[i] / w1[i]).collect();
    let actuation_value: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut v = plant.actuation_value[i][j] / w1[j];
                    if i == j {
                        v -= plant.actuation_slope[i] * (plant.phi_conv[i])(1.0)
                            / (2.0 * (plant.lambda[i])(1.0))
                            / w1[i];
                    }
                    v
                })
                .collect()
        })
        .collect();

    let transformed = PlantModel {
        n,
        lambda: plant.lambda.clone(),
        lambda_d1: plant.lambda_d1.clone(),
        lambda_d2: plant.lambda_d2.clone(),
        phi_conv: (0..n).map(|_| constant(0.0)).collect(),
        reaction,
        local_term,
        nonlocal_kernel,
        left_bc,
        actuation_slope,
        actuation_value,
    };
    (transformed, weight)
}

/// Permute the state so the Dirichlet rows of the left boundary operator come
/// first. Returns the reordered plant and the permutation `perm` with
/// `new index k  <-  old index perm[k]`.
pub fn reorder_dirichlet_first(plant: &PlantModel) -> (PlantModel, Vec<usize>) {
    let n = plant.n;
    let mut perm: Vec<usize> = (0..n).filter(|&i| plant.left_bc[i].is_dirichlet()).collect();
    perm.extend((0..n).filter(|&i| !plant.left_bc[i].is_dirichlet()));

    let pick1 = |v: &Vec<Coeff1>| -> Vec<Coeff1> { perm.iter().map(|&k| v[k].clone()).collect() };
    let pick_mat1 = |m: &Vec<Vec<Coeff1>>| -> Vec<Vec<Coeff1>> {
        perm.iter()
            .map(|&i| perm.iter().map(|&j| m[i][j].clone()).collect())
            .collect()
    };
    let pick_mat2 = |m: &Vec<Vec<Coeff2>>| -> Vec<Vec<Coeff2>> {
        perm.iter()
            .map(|&i| perm.iter().map(|&j| m[i][j].clone()).collect())
            .collect()
    };

    let reordered = PlantModel {
        n,
        lambda: pick1(&plant.lambda),
        lambda_d1: pick1(&plant.lambda_d1),
        lambda_d2: pick1(&plant.lambda_d2),
        phi_conv: pick1(&plant.phi_conv),
        reaction: pick_mat1(&plant.reaction),
        local_term: pick_mat1(&plant.local_term),
        nonlocal_kernel: pick_mat2(&plant.nonlocal_kernel),
        left_bc: perm.iter().map(|&k| plant.left_bc[k]).collect(),
        actuation_slope: perm.iter().map(|&k| plant.actuation_slope[k]).collect(),
        actuation_value: perm
            .iter()
            .map(|&i| perm.iter().map(|&j| plant.actuation_value[i][j]).collect())
            .collect(),
    };
    (reordered, perm)
}
