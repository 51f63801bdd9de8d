//! Assembly of the stabilizing boundary feedback `u(t) = 𝒦[x(t)]`.
//!
//! The plant actuation `u = B1^1 x'(1) + B1^0 x(1)` is rewritten by
//! substituting the target boundary rows through the transformation kernel:
//! channels with a Dirichlet target row replace the boundary value `x_i(1)`
//! by `∫ K row · x`, channels with a slope (Neumann/Robin) target row replace
//! `x_i'(1)` by the kernel-trace expression carrying `K(1,1)`, `∂_z K(1,·)`
//! and the target ratio. The result collapses into one boundary matrix plus
//! one integral-kernel row per channel.

use thiserror::Error;

use crate::kernel::KernelSolution;
use crate::model::{Coeff1, PlantModel, TargetSpec};
use crate::numerics::{trapz_samples, GridFn1D};

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("channel {index}: slope actuation has no slope target row to substitute")]
    MissingKernelTrace { index: usize },
    #[error("state grid has {got} channels/nodes, gain expects {expected}")]
    GridMismatch { got: usize, expected: usize },
}

/// Boundary-plus-integral representation of the feedback operator.
pub struct FeedbackGain {
    pub n: usize,
    /// Matrix multiplying the boundary trace x(1, t).
    pub k_boundary: Vec<Vec<f64>>,
    /// Integral-kernel rows over ζ: `u_i += Σ_j ∫ k_kernel[i][j](ζ) x_j(ζ) dζ`.
    pub k_kernel: Vec<Vec<GridFn1D>>,
    /// Per-channel target type (true when the target row is Dirichlet).
    pub dirichlet_target: Vec<bool>,
}

/// Intermediate: a boundary-trace expression `c · x(1)` plus kernel rows.
#[derive(Clone)]
struct Rep {
    boundary: Vec<f64>,
    kernel: Vec<Vec<f64>>,
}

impl Rep {
    fn zeros(n: usize, mm: usize) -> Self {
        Self {
            boundary: vec![0.0; n],
            kernel: vec![vec![0.0; mm]; n],
        }
    }

    fn add_scaled(&mut self, other: &Rep, c: f64) {
        for j in 0..self.boundary.len() {
            self.boundary[j] += c * other.boundary[j];
            for t in 0..self.kernel[j].len() {
                self.kernel[j][t] += c * other.kernel[j][t];
            }
        }
    }
}

pub fn build_gain(
    sol: &KernelSolution,
    plant: &PlantModel,
    target: &TargetSpec,
) -> Result<FeedbackGain, FeedbackError> {
    let n = sol.n;
    let mm = sol.grid_n;
    let h = 1.0 / (mm - 1) as f64;
    let top = mm - 1;

    // kernel traces at z = 1
    let k_row = |i: usize, j: usize, t: usize| sol.k_values[sol.pair(i, j)][top * mm + t];
    let dz_row = |i: usize, j: usize, t: usize| {
        let table = &sol.k[sol.pair(i, j)];
        let zeta = sol.z_nodes[t];
        let sheet = if zeta <= table.curve[top] || table.sheet_neg.is_none() {
            &table.sheet_pos
        } else {
            table.sheet_neg.as_ref().unwrap()
        };
        (3.0 * sheet.at(top, t) - 4.0 * sheet.at(top - 1, t) + sheet.at(top - 2, t)) / (2.0 * h)
    };

    // x_j(1) substitutions
    let mut reps: Vec<Rep> = Vec::with_capacity(n);
    let mut dirichlet_target = Vec::with_capacity(n);
    for j in 0..n {
        let mut rep = Rep::zeros(n, mm);
        if target.bt1_1[j] == 0.0 {
            dirichlet_target.push(true);
            for col in 0..n {
                for t in 0..mm {
                    rep.kernel[col][t] = k_row(j, col, t);
                }
            }
        } else {
            dirichlet_target.push(false);
            rep.boundary[j] = 1.0;
        }
        reps.push(rep);
    }

    let mut k_boundary = vec![vec![0.0; n]; n];
    let mut rows = vec![vec![vec![0.0; mm]; n]; n];
    for i in 0..n {
        let mut u_rep = Rep::zeros(n, mm);
        // value actuation through the (possibly substituted) boundary trace
        for j in 0..n {
            let c = plant.actuation_value[i][j];
            if c != 0.0 {
                u_rep.add_scaled(&reps[j], c);
            }
        }
        // slope actuation through the slope substitution
        let b1 = plant.actuation_slope[i];
        if b1 != 0.0 {
            if target.bt1_1[i] == 0.0 {
                return Err(FeedbackError::MissingKernelTrace { index: i });
            }
            let ratio = target.bt1_0[i] / target.bt1_1[i];
            let mut d_rep = Rep::zeros(n, mm);
            for j in 0..n {
                let mut c = k_row(i, j, top); // K_ij(1,1)
                if i == j {
                    c -= ratio;
                }
                if c != 0.0 {
                    d_rep.add_scaled(&reps[j], c);
                }
            }
            for j in 0..n {
                for t in 0..mm {
                    d_rep.kernel[j][t] += dz_row(i, j, t) + ratio * k_row(i, j, t);
                }
            }
            u_rep.add_scaled(&d_rep, b1);
        }
        k_boundary[i] = u_rep.boundary;
        rows[i] = u_rep.kernel;
    }

    let nodes: Vec<f64> = sol.z_nodes.clone();
    let k_kernel = rows
        .into_iter()
        .map(|per_state| {
            per_state
                .into_iter()
                .map(|vals| GridFn1D::new(nodes.clone(), vals).expect("kernel grid"))
                .collect()
        })
        .collect();

    Ok(FeedbackGain {
        n,
        k_boundary,
        k_kernel,
        dirichlet_target,
    })
}

impl FeedbackGain {
    /// Fold a diagonal state weight w(z) into the gain so it applies to the
    /// pre-transformation state: `u = kb · W(1)x(1) + ∫ kk(ζ)W(ζ) x(ζ) dζ`.
    pub fn fold_weight(&self, weight: &[Coeff1]) -> FeedbackGain {
        let n = self.n;
        let k_boundary = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.k_boundary[i][j] * (weight[j])(1.0))
                    .collect()
            })
            .collect();
        let k_kernel = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let row = &self.k_kernel[i][j];
                        let vals: Vec<f64> = row
                            .nodes()
                            .iter()
                            .zip(row.values())
                            .map(|(&z, &v)| v * (weight[j])(z))
                            .collect();
                        GridFn1D::new(row.nodes().to_vec(), vals).unwrap()
                    })
                    .collect()
            })
            .collect();
        FeedbackGain {
            n,
            k_boundary,
            k_kernel,
            dirichlet_target: self.dirichlet_target.clone(),
        }
    }

    /// Resample the kernel rows onto a simulation grid once.
    pub fn sampled_on(&self, grid: &[f64]) -> SampledGain {
        let rows = (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        grid.iter()
                            .map(|&z| self.k_kernel[i][j].eval(z.clamp(0.0, 1.0)).unwrap())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        SampledGain {
            n: self.n,
            k_boundary: self.k_boundary.clone(),
            rows,
            grid: grid.to_vec(),
        }
    }

    /// Evaluate the control for a state sampled on an arbitrary grid.
    pub fn eval_control(&self, grid: &[f64], state: &[Vec<f64>]) -> Result<Vec<f64>, FeedbackError> {
        if state.len() != self.n || state.iter().any(|s| s.len() != grid.len()) {
            return Err(FeedbackError::GridMismatch {
                got: state.len(),
                expected: self.n,
            });
        }
        Ok(self.sampled_on(grid).eval(state))
    }
}

/// Gain with kernel rows pre-sampled on a fixed quadrature grid.
pub struct SampledGain {
    pub n: usize,
    pub k_boundary: Vec<Vec<f64>>,
    /// rows[i][j][node]
    pub rows: Vec<Vec<Vec<f64>>>,
    grid: Vec<f64>,
}

impl SampledGain {
    pub fn eval(&self, state: &[Vec<f64>]) -> Vec<f64> {
        let last = self.grid.len() - 1;
        (0..self.n)
            .map(|i| {
                let mut u = 0.0;
                for j in 0..self.n {
                    u += self.k_boundary[i][j] * state[j][last];
                    let integrand: Vec<f64> = self.rows[i][j]
                        .iter()
                        .zip(&state[j])
                        .map(|(k, x)| k * x)
                        .collect();
                    u += trapz_samples(&self.grid, &integrand);
                }
                u
            })
            .collect()
    }
}
