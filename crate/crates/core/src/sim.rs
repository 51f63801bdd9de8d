//! Method-of-lines simulation and eigenvalue estimation.
//!
//! Interior nodes use second-order central differences (and trapezoid rows
//! for the non-local integral term); boundary rows are kept as algebraic
//! equations with one-sided second-order stencils, so the time stepper is a
//! Crank–Nicolson scheme on the differential rows with the boundary rows
//! re-imposed each step. Feedback is evaluated from the previous step's
//! state, which keeps the implicit matrix constant.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::feedback::SampledGain;
use crate::kernel::KernelSolution;
use crate::model::{LeftBc, PlantModel, TargetSpec};
use crate::numerics::trapz_samples;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("grid too coarse: n_z = {0} (need at least 11)")]
    GridTooCoarse(usize),
    #[error("time step rejected: implicit solve failed (inconsistent boundary rows?)")]
    StepRejected,
    #[error("eigenvalue iteration failed to converge")]
    EigSolveFailed,
    #[error("initial profile dimensions do not match the grid")]
    GridMismatch,
}

/// Time-stamped spatial snapshots with their L2-norm series.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// snapshots[step][channel][node]
    pub snapshots: Vec<Vec<Vec<f64>>>,
    pub l2_norms: Vec<f64>,
    /// Control inputs applied at each step (empty channels for open loop).
    pub controls: Vec<Vec<f64>>,
    pub z_grid: Vec<f64>,
}

impl Trajectory {
    pub fn l2_norm_of(state: &[Vec<f64>], grid: &[f64]) -> f64 {
        let sq: Vec<f64> = (0..grid.len())
            .map(|t| state.iter().map(|row| row[t] * row[t]).sum())
            .collect();
        trapz_samples(grid, &sq).max(0.0).sqrt()
    }
}

/// Semi-discrete system: differential rows plus algebraic boundary rows.
pub struct SemiDiscrete {
    pub n: usize,
    pub n_z: usize,
    pub z: Vec<f64>,
    /// Spatial operator (valid on interior rows).
    op: DMatrix<f64>,
    /// Boundary rows (algebraic constraints), nonzero only there.
    bc: DMatrix<f64>,
    interior: Vec<bool>,
    /// Row index of the actuated boundary equation per channel.
    actuated_rows: Vec<usize>,
}

/// Feedback source for [`simulate`].
pub enum Input<'a> {
    Zero,
    Gain(&'a SampledGain),
}

/// One-sided second-order slope stencil at the left end: f'(z0) ≈ (-3f0+4f1-f2)/2h.
fn left_slope(h: f64) -> [f64; 3] {
    [-3.0 / (2.0 * h), 4.0 / (2.0 * h), -1.0 / (2.0 * h)]
}

/// One-sided second-order slope stencil at the right end: f'(zN) ≈ (3fN-4f(N-1)+f(N-2))/2h.
fn right_slope(h: f64) -> [f64; 3] {
    [3.0 / (2.0 * h), -4.0 / (2.0 * h), 1.0 / (2.0 * h)]
}

pub fn discretize(plant: &PlantModel, n_z: usize) -> Result<SemiDiscrete, SimError> {
    discretize_inner(plant, n_z, None)
}

/// Discretize the target dynamics: decay shift μ_c, decoupled right boundary
/// rows, and the extracted local coupling acting on the left boundary traces.
pub fn discretize_target(
    plant: &PlantModel,
    target: &TargetSpec,
    sol: &KernelSolution,
    n_z: usize,
) -> Result<SemiDiscrete, SimError> {
    discretize_inner(plant, n_z, Some((target, sol)))
}

fn discretize_inner(
    plant: &PlantModel,
    n_z: usize,
    target: Option<(&TargetSpec, &KernelSolution)>,
) -> Result<SemiDiscrete, SimError> {
    if n_z < 11 {
        return Err(SimError::GridTooCoarse(n_z));
    }
    let n = plant.n;
    let m = plant.num_dirichlet();
    let nz = n_z;
    let h = 1.0 / (nz - 1) as f64;
    let z: Vec<f64> = (0..nz).map(|k| k as f64 * h).collect();
    let dim = n * nz;
    let idx = |i: usize, k: usize| i * nz + k;

    let mut op = DMatrix::zeros(dim, dim);
    let mut bc = DMatrix::zeros(dim, dim);
    let mut interior = vec![false; dim];
    for i in 0..n {
        for k in 1..nz - 1 {
            let row = idx(i, k);
            interior[row] = true;
            let zk = z[k];
            let lam = (plant.lambda[i])(zk);
            op[(row, idx(i, k - 1))] += lam / (h * h);
            op[(row, idx(i, k))] += -2.0 * lam / (h * h);
            op[(row, idx(i, k + 1))] += lam / (h * h);
            let phi = (plant.phi_conv[i])(zk);
            if phi != 0.0 {
                op[(row, idx(i, k + 1))] += phi / (2.0 * h);
                op[(row, idx(i, k - 1))] -= phi / (2.0 * h);
            }
            match target {
                None => {
                    for j in 0..n {
                        op[(row, idx(j, k))] += (plant.reaction[i][j])(zk);
                        op[(row, idx(j, 0))] += (plant.local_term[i][j])(zk);
                        // trapezoid row of the non-local term over [0, z_k]
                        for t in 0..=k {
                            let w = if t == 0 || t == k { 0.5 } else { 1.0 };
                            op[(row, idx(j, t))] +=
                                w * h * (plant.nonlocal_kernel[i][j])(zk, z[t]);
                        }
                    }
                }
                Some((tspec, sol)) => {
                    op[(row, idx(i, k))] += -tspec.mu_c;
                    let a0t = sol.a0_tilde_matrix(zk);
                    for j in 0..n {
                        let c = a0t[i][j];
                        if c == 0.0 {
                            continue;
                        }
                        if j < m {
                            // Dirichlet columns couple through the boundary slope
                            let st = left_slope(h);
                            for (o, s) in st.iter().enumerate() {
                                op[(row, idx(j, o))] -= c * s;
                            }
                        } else {
                            op[(row, idx(j, 0))] -= c;
                        }
                    }
                }
            }
        }
        // boundary rows
        let row0 = idx(i, 0);
        match plant.left_bc[i] {
            LeftBc::Dirichlet => {
                bc[(row0, idx(i, 0))] = 1.0;
            }
            LeftBc::Robin { q } => {
                let st = left_slope(h);
                for (o, s) in st.iter().enumerate() {
                    bc[(row0, idx(i, o))] += *s;
                }
                bc[(row0, idx(i, 0))] += q;
            }
        }
        let row1 = idx(i, nz - 1);
        match target {
            None => {
                let st = right_slope(h);
                let b1 = plant.actuation_slope[i];
                for (o, s) in st.iter().enumerate() {
                    bc[(row1, idx(i, nz - 1 - o))] += b1 * s;
                }
                for j in 0..n {
                    bc[(row1, idx(j, nz - 1))] += plant.actuation_value[i][j];
                }
            }
            Some((tspec, _)) => {
                let st = right_slope(h);
                for (o, s) in st.iter().enumerate() {
                    bc[(row1, idx(i, nz - 1 - o))] += tspec.bt1_1[i] * s;
                }
                bc[(row1, idx(i, nz - 1))] += tspec.bt1_0[i];
            }
        }
    }

    Ok(SemiDiscrete {
        n,
        n_z: nz,
        z,
        op,
        bc,
        interior,
        actuated_rows: (0..n).map(|i| idx(i, nz - 1)).collect(),
    })
}

impl SemiDiscrete {
    /// Reduce the DAE to an ODE on the interior unknowns by solving the
    /// boundary rows for the boundary values.
    pub fn reduced_operator(&self) -> Result<DMatrix<f64>, SimError> {
        let dim = self.n * self.n_z;
        let nb: Vec<usize> = (0..dim).filter(|&r| !self.interior[r]).collect();
        let ni: Vec<usize> = (0..dim).filter(|&r| self.interior[r]).collect();
        // solve bc_bb x_b = -bc_bi x_i
        let mut bc_bb = DMatrix::zeros(nb.len(), nb.len());
        let mut bc_bi = DMatrix::zeros(nb.len(), ni.len());
        for (r, &row) in nb.iter().enumerate() {
            for (c, &col) in nb.iter().enumerate() {
                bc_bb[(r, c)] = self.bc[(row, col)];
            }
            for (c, &col) in ni.iter().enumerate() {
                bc_bi[(r, c)] = self.bc[(row, col)];
            }
        }
        let lu = bc_bb.lu();
        let x_b = lu.solve(&(-bc_bi)).ok_or(SimError::StepRejected)?;
        // reduced = op_ii + op_ib * x_b
        let mut reduced = DMatrix::zeros(ni.len(), ni.len());
        for (r, &row) in ni.iter().enumerate() {
            for (c, &col) in ni.iter().enumerate() {
                reduced[(r, c)] = self.op[(row, col)];
            }
        }
        let mut op_ib = DMatrix::zeros(ni.len(), nb.len());
        for (r, &row) in ni.iter().enumerate() {
            for (c, &col) in nb.iter().enumerate() {
                op_ib[(r, c)] = self.op[(row, col)];
            }
        }
        reduced += op_ib * x_b;
        Ok(reduced)
    }
}

/// Integrate the semi-discrete system with trapezoidal (Crank–Nicolson)
/// stepping; boundary rows are imposed algebraically each step and the
/// feedback is evaluated from the previous step.
pub fn simulate(
    sys: &SemiDiscrete,
    input: Input<'_>,
    x0: &[Vec<f64>],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, SimError> {
    let n = sys.n;
    let nz = sys.n_z;
    let dim = n * nz;
    if x0.len() != n || x0.iter().any(|p| p.len() != nz) {
        return Err(SimError::GridMismatch);
    }

    let mut lhs = DMatrix::zeros(dim, dim);
    let mut rhs = DMatrix::zeros(dim, dim);
    // fully implicit variant used for the first steps: it damps the shock a
    // boundary-incompatible initial profile injects, which trapezoidal
    // stepping would carry as a persistent oscillation
    let mut lhs_euler = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        if sys.interior[r] {
            lhs[(r, r)] = 1.0;
            rhs[(r, r)] = 1.0;
            lhs_euler[(r, r)] = 1.0;
            for c in 0..dim {
                lhs[(r, c)] -= 0.5 * dt * sys.op[(r, c)];
                rhs[(r, c)] += 0.5 * dt * sys.op[(r, c)];
                lhs_euler[(r, c)] -= dt * sys.op[(r, c)];
            }
        } else {
            for c in 0..dim {
                lhs[(r, c)] = sys.bc[(r, c)];
                lhs_euler[(r, c)] = sys.bc[(r, c)];
            }
        }
    }
    let lu = lhs.lu();
    let lu_euler = lhs_euler.lu();
    const STARTUP_STEPS: usize = 2;

    let mut x = DVector::zeros(dim);
    for i in 0..n {
        for k in 0..nz {
            x[i * nz + k] = x0[i][k];
        }
    }

    let steps = ((t_end / dt).round() as usize).max(1);
    let unpack = |x: &DVector<f64>| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..nz).map(|k| x[i * nz + k]).collect())
            .collect()
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::with_capacity(steps + 1);
    let mut norms = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);

    let state0 = unpack(&x);
    times.push(0.0);
    norms.push(Trajectory::l2_norm_of(&state0, &sys.z));
    controls.push(match &input {
        Input::Zero => vec![0.0; n],
        Input::Gain(g) => g.eval(&state0),
    });
    snapshots.push(state0);

    // feedback is lagged one step: evaluated from the state at t_k for the
    // step to t_{k+1}, keeping the implicit matrix constant
    for step in 1..=steps {
        let state = unpack(&x);
        let u = match &input {
            Input::Zero => vec![0.0; n],
            Input::Gain(g) => g.eval(&state),
        };
        let startup = step <= STARTUP_STEPS;
        let mut b = if startup { x.clone() } else { &rhs * &x };
        for r in 0..dim {
            if !sys.interior[r] {
                b[r] = 0.0;
            }
        }
        for (i, &row) in sys.actuated_rows.iter().enumerate() {
            b[row] = u[i];
        }
        let solver = if startup { &lu_euler } else { &lu };
        x = solver.solve(&b).ok_or(SimError::StepRejected)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::StepRejected);
        }
        let state = unpack(&x);
        times.push(step as f64 * dt);
        norms.push(Trajectory::l2_norm_of(&state, &sys.z));
        controls.push(u);
        snapshots.push(state);
    }

    Ok(Trajectory {
        times,
        snapshots,
        l2_norms: norms,
        controls,
        z_grid: sys.z.clone(),
    })
}

/// Apply the forward (or inverse) backstepping transform to every snapshot.
pub fn transform_trajectory(traj: &Trajectory, sol: &KernelSolution, inverse: bool) -> Trajectory {
    let n = sol.n;
    let grid = &traj.z_grid;
    let nz = grid.len();
    let mut snapshots = Vec::with_capacity(traj.snapshots.len());
    let mut norms = Vec::with_capacity(traj.snapshots.len());
    for state in &traj.snapshots {
        let mut out = vec![vec![0.0; nz]; n];
        for i in 0..n {
            for (r, &zr) in grid.iter().enumerate() {
                let mut acc = 0.0;
                if r > 0 {
                    let mut integrand = Vec::with_capacity(r + 1);
                    for (t, &zt) in grid.iter().take(r + 1).enumerate() {
                        let mut v = 0.0;
                        for j in 0..n {
                            let kv = if inverse {
                                sol.l_at(i, j, zr, zt)
                            } else {
                                sol.k_at(i, j, zr, zt)
                            };
                            v += kv * state[j][t];
                        }
                        integrand.push(v);
                    }
                    acc = trapz_samples(&grid[..=r], &integrand);
                }
                out[i][r] = state[i][r] + if inverse { acc } else { -acc };
            }
        }
        norms.push(Trajectory::l2_norm_of(&out, grid));
        snapshots.push(out);
    }
    Trajectory {
        times: traj.times.clone(),
        snapshots,
        l2_norms: norms,
        controls: traj.controls.clone(),
        z_grid: traj.z_grid.clone(),
    }
}

// ---------------------------------------------------------------------------
// Eigenvalue estimation
// ---------------------------------------------------------------------------

/// Assemble the scalar operator λ(z) d²/dz² with the given boundary rows on
/// `n` nodes, reduced to the interior unknowns.
fn scalar_operator(
    lam: &dyn Fn(f64) -> f64,
    bc0: LeftBc,
    bt1: (f64, f64),
    n: usize,
) -> DMatrix<f64> {
    let h = 1.0 / (n - 1) as f64;
    let dim = n - 2;
    // boundary substitutions:
    //   z=0 Dirichlet: x0 = 0;  Robin: (-3x0+4x1-x2)/2h + q x0 = 0
    //   z=1: bt1_1 (3xN-4x(N-1)+x(N-2))/2h + bt1_0 xN = 0
    let (c0_1, c0_2) = match bc0 {
        LeftBc::Dirichlet => (0.0, 0.0),
        LeftBc::Robin { q } => {
            let d = 3.0 - 2.0 * h * q;
            (4.0 / d, -1.0 / d)
        }
    };
    let (b1, b0) = bt1;
    let (cn_1, cn_2) = if b1 == 0.0 {
        (0.0, 0.0)
    } else {
        let d = 3.0 * b1 / (2.0 * h) + b0;
        (
            (4.0 * b1 / (2.0 * h)) / d,
            (-b1 / (2.0 * h)) / d,
        )
    };

    DMatrix::from_fn(dim, dim, |r, c| {
        let k = r + 1; // physical node index
        let lamk = lam(k as f64 * h) / (h * h);
        let mut v = 0.0;
        if c == r {
            v += -2.0 * lamk;
        }
        if c + 1 == r {
            v += lamk;
        }
        if c == r + 1 {
            v += lamk;
        }
        // boundary eliminations fold into the first/last interior rows
        if k == 1 {
            if c == 0 {
                v += lamk * c0_1;
            }
            if c == 1 {
                v += lamk * c0_2;
            }
        }
        if k == dim {
            if c == dim - 1 {
                v += lamk * cn_1;
            }
            if c == dim - 2 {
                v += lamk * cn_2;
            }
        }
        v
    })
}

/// Largest real eigenvalue by shifted inverse iteration with a Gershgorin
/// starting shift and a deflated second pass as a safeguard.
pub fn largest_eigenvalue(mat: &DMatrix<f64>) -> Result<f64, SimError> {
    let dim = mat.nrows();
    let bound = (0..dim)
        .map(|r| {
            let center = mat[(r, r)];
            let radius: f64 = (0..dim)
                .filter(|&c| c != r)
                .map(|c| mat[(r, c)].abs())
                .sum();
            center + radius
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let run = |shift: f64, deflate: Option<&DVector<f64>>| -> Result<(f64, DVector<f64>), SimError> {
        let shifted = mat - DMatrix::identity(dim, dim) * shift;
        let lu = shifted.lu();
        let mut v = DVector::from_fn(dim, |r, _| 1.0 + (r as f64 * 0.7).sin());
        v /= v.norm();
        let mut lambda = shift;
        for _ in 0..200 {
            if let Some(d) = deflate {
                let proj = d.dot(&v);
                v -= d * proj;
            }
            let w = lu.solve(&v).ok_or(SimError::EigSolveFailed)?;
            let norm = w.norm();
            if !norm.is_finite() || norm == 0.0 {
                return Err(SimError::EigSolveFailed);
            }
            let w = w / norm;
            let new_lambda = w.dot(&(mat * &w));
            let delta = (new_lambda - lambda).abs();
            lambda = new_lambda;
            v = w;
            if delta < 1e-11 * (1.0 + lambda.abs()) {
                break;
            }
        }
        Ok((lambda, v))
    };

    let shift = bound + 1.0;
    let (l1, v1) = run(shift, None)?;
    // deflation safeguard: a second pass orthogonal to the converged vector
    // must not uncover anything larger
    let (l2, _) = run(shift, Some(&v1))?;
    Ok(l1.max(l2))
}

/// Largest eigenvalue of the decoupled, unshifted target operator, per
/// channel and overall.
pub fn estimate_mu_max(
    plant: &PlantModel,
    target: &TargetSpec,
    n_nodes: usize,
) -> Result<(f64, Vec<f64>), SimError> {
    let n_nodes = n_nodes.max(401);
    let mut per_channel = Vec::with_capacity(plant.n);
    for i in 0..plant.n {
        let lam = plant.lambda[i].clone();
        let mat = scalar_operator(
            &move |z| lam(z),
            plant.left_bc[i],
            (target.bt1_1[i], target.bt1_0[i]),
            n_nodes,
        );
        per_channel.push(largest_eigenvalue(&mat)?);
    }
    let mu_max = per_channel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((mu_max, per_channel))
}
