//! Successive approximation for the canonical kernel equations.
//!
//! The increments are iterated in canonical coordinates on the pair grids
//! while every coupling term is read through tables over the physical
//! triangle: the previous G-increment of each pair is resampled physically
//! (`P` tables), the full right-hand side of the H-equation collapses to a
//! single physical field (`S` tables), and both integral operators reduce to
//! axis-aligned cumulative trapezoids. This keeps one sweep at O(n^3 M^3)
//! and makes every cross-element read a plain bilinear lookup.

use std::sync::Arc;

use thiserror::Error;

use crate::coords::{build_atlas, CoordinateAtlas};
use crate::model::{PlantModel, TargetSpec};
use crate::numerics::NumericsError;

use super::coeffs::{build_coefficients, CoefficientTables};
use super::grid::{PairField, PairGrid, PhysGrid};

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Canonical and physical grid density (nodes per axis).
    pub grid_n: usize,
    /// Stop once the sup of both increments drops below this.
    pub tol: f64,
    /// Sweep budget before reporting no convergence.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grid_n: 51,
            tol: 1e-3,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("successive approximation did not converge: sup update {sup:.3e} after {iterations} sweeps")]
    NoConvergence { sup: f64, iterations: usize },
    #[error("plant still carries a convection term; eliminate it first")]
    ConvectionPresent,
    #[error("left boundary conditions are not ordered Dirichlet-first")]
    NotDirichletFirst,
    #[error("numerics: {0}")]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Per-sweep convergence record.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    pub sup_g: f64,
    pub sup_h: f64,
    /// Smallest envelope constant under which this sweep's increments satisfy
    /// the factorial growth bound.
    pub envelope_m: f64,
}

pub(crate) struct Workspace {
    pub n: usize,
    pub m: usize,
    pub atlas: Arc<CoordinateAtlas>,
    pub tabs: CoefficientTables,
    pub grids: Vec<PairGrid>,
    pub phys: PhysGrid,
    /// F_kj(ζ̄, ζ) at phys nodes, `[ (k*n+j) ][ t*M + c ]`, valid for t >= c.
    f_tab: Vec<Vec<f64>>,
    /// (a + μ_c)(z, ζ) per pair on the phys triangle (diag-extended).
    a_mu_tab: Vec<Vec<f64>>,
    /// c1 per pair on the phys triangle (diag-extended).
    c1_tab: Vec<Vec<f64>>,
    /// c2_kj(ζ) at phys nodes, `[ (k*n+j) ][ c ]`.
    c2_tab: Vec<Vec<f64>>,
    /// λ_j/ψ_j at phys nodes per j.
    u_tab: Vec<Vec<f64>>,
    /// ψ_k/λ_k at phys nodes per k.
    v_tab: Vec<Vec<f64>>,
    /// Canonical coordinates of each phys triangle node per pair.
    p_stencil: Vec<Vec<(f64, f64)>>,
}

impl Workspace {
    pub fn pair(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    fn build(plant: &PlantModel, target: &TargetSpec, opts: &SolverOptions) -> Self {
        let n = plant.n;
        let m = plant.num_dirichlet();
        let atlas_nodes = (8 * (opts.grid_n - 1) + 1).max(401);
        let atlas = Arc::new(build_atlas(plant, atlas_nodes));
        let tabs = build_coefficients(plant, atlas.clone(), target);
        let grids: Vec<PairGrid> = (0..n * n)
            .map(|p| PairGrid::build(&atlas, p / n, p % n, opts.grid_n))
            .collect();
        let phys = PhysGrid::new(opts.grid_n);
        let mm = phys.n;

        let mut f_tab = vec![vec![0.0; mm * mm]; n * n];
        for k in 0..n {
            for j in 0..n {
                let t_f = &mut f_tab[k * n + j];
                for t in 0..mm {
                    for c in 0..=t {
                        t_f[t * mm + c] =
                            (plant.nonlocal_kernel[k][j])(phys.node(t), phys.node(c));
                    }
                }
            }
        }
        let mut a_mu_tab = vec![vec![0.0; mm * mm]; n * n];
        let mut c1_tab = vec![vec![0.0; mm * mm]; n * n];
        for i in 0..n {
            for j in 0..n {
                let p = i * n + j;
                for iz in 0..mm {
                    let z = phys.node(iz);
                    for ic in 0..=iz {
                        let zeta = phys.node(ic);
                        a_mu_tab[p][iz * mm + ic] = tabs.a_phys(i, j, z, zeta) + tabs.mu_c;
                        c1_tab[p][iz * mm + ic] = tabs.c1_phys(
                            i,
                            j,
                            (plant.nonlocal_kernel[i][j])(z, zeta),
                            z,
                            zeta,
                        );
                    }
                }
                phys.extend_diag(&mut a_mu_tab[p]);
                phys.extend_diag(&mut c1_tab[p]);
            }
        }
        let c2_tab: Vec<Vec<f64>> = (0..n * n)
            .map(|p| {
                (0..mm)
                    .map(|c| tabs.c2_phys(p / n, p % n, phys.node(c)))
                    .collect()
            })
            .collect();
        let u_tab: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..mm).map(|c| tabs.c3_outer(j, phys.node(c))).collect())
            .collect();
        let v_tab: Vec<Vec<f64>> = (0..n)
            .map(|k| (0..mm).map(|t| tabs.c3_inner(k, phys.node(t))).collect())
            .collect();

        let mut p_stencil = vec![vec![(0.0, 0.0); mm * mm]; n * n];
        for i in 0..n {
            for j in 0..n {
                let st = &mut p_stencil[i * n + j];
                for iz in 0..mm {
                    let z = phys.node(iz);
                    for ic in 0..=iz {
                        st[iz * mm + ic] = atlas
                            .to_canonical(i, j, z, phys.node(ic).min(z))
                            .expect("triangle node");
                    }
                }
            }
        }

        Self {
            n,
            m,
            atlas,
            tabs,
            grids,
            phys,
            f_tab,
            a_mu_tab,
            c1_tab,
            c2_tab,
            u_tab,
            v_tab,
            p_stencil,
        }
    }

    /// Resample a set of canonical pair fields onto the physical triangle.
    pub fn tabulate_p(&self, fields: &[PairField]) -> Vec<Vec<f64>> {
        let mm = self.phys.n;
        let mut out = vec![vec![0.0; mm * mm]; self.n * self.n];
        for p in 0..self.n * self.n {
            let grid = &self.grids[p];
            let st = &self.p_stencil[p];
            let table = &mut out[p];
            for iz in 0..mm {
                for ic in 0..=iz {
                    let (xi, eta) = st[iz * mm + ic];
                    table[iz * mm + ic] = fields[p].interp(grid, xi, eta, false);
                }
            }
            self.phys.extend_diag(table);
        }
        out
    }

    /// Physical right-hand side of the H-equation per pair:
    /// S = (a+μ)P_ij + Σ_k (c2 P_ik + ∫ c3 P_ik).
    pub fn tabulate_s(&self, p_tabs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mm = self.phys.n;
        let h = self.phys.h();
        let mut out = vec![vec![0.0; mm * mm]; self.n * self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                let pair = self.pair(i, j);
                let table = &mut out[pair];
                for iz in 0..mm {
                    for ic in 0..=iz {
                        let mut s = self.a_mu_tab[pair][iz * mm + ic] * p_tabs[pair][iz * mm + ic];
                        for k in 0..self.n {
                            let pik = &p_tabs[self.pair(i, k)];
                            s += self.c2_tab[k * self.n + j][ic] * pik[iz * mm + ic];
                            if iz > ic {
                                // ∫_ζ^z F_kj(t, ζ) ψ_k/λ_k(t) P_ik(z, t) dt
                                let f_kj = &self.f_tab[k * self.n + j];
                                let vk = &self.v_tab[k];
                                let mut acc = 0.5
                                    * (f_kj[ic * mm + ic] * vk[ic] * pik[iz * mm + ic]
                                        + f_kj[iz * mm + ic] * vk[iz] * pik[iz * mm + iz]);
                                for t in ic + 1..iz {
                                    acc += f_kj[t * mm + ic] * vk[t] * pik[iz * mm + t];
                                }
                                s += self.u_tab[j][ic] * acc * h;
                            }
                        }
                        table[iz * mm + ic] = s;
                    }
                }
                self.phys.extend_diag(table);
            }
        }
        out
    }

    /// Column-cumulative application of the H-operator: result = (1/4s) ∫ S.
    /// `init` optionally supplies the inhomogeneous start data (boundary trace
    /// minus the c1 integral) used for the zeroth increment.
    pub fn apply_fh(&self, s_tabs: &[Vec<f64>], with_c1_bc: bool) -> Vec<PairField> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(self.apply_fh_pair(i, j, &s_tabs[self.pair(i, j)], with_c1_bc));
            }
        }
        out
    }

    fn apply_fh_pair(&self, i: usize, j: usize, s_tab: &[f64], with_c1_bc: bool) -> PairField {
        let pair = self.pair(i, j);
        let grid = &self.grids[pair];
        let mut field = PairField::zeros(grid);
        let quarter = 1.0 / (4.0 * grid.s);
        let c1_tab = &self.c1_tab[pair];
        let n_above = grid.eta_above.n;

        for p in 0..grid.xi.n {
            let xi = grid.xi.node(p);
            let eta_l = grid.eta_l[p];
            let top = grid.top_at(xi);
            let bc = if with_c1_bc {
                self.tabs.h_boundary(i, j, xi)
            } else {
                0.0
            };
            // integrand of the running integral at the Γ2 foot
            let foot_phys = (grid.z_l[p], grid.z_l[p]);
            let int_at = |phys: (f64, f64)| -> f64 {
                let mut v = self.phys.interp(s_tab, phys.0, phys.1);
                if with_c1_bc {
                    v -= self.phys.interp(c1_tab, phys.0, phys.1);
                }
                v
            };
            let f_foot = int_at(foot_phys);

            let mut cum = 0.0;
            let mut prev_eta = eta_l;
            let mut prev_f = f_foot;
            let mut topped = false;
            let mut top_value = 0.0;
            let mut top_eta = top;
            let mut top_slope = 0.0;

            // ghost entries extend the boundary value linearly with the known
            // integrand slope so interpolation stays second order at the edges
            let mut advance = |eta: f64, phys: (f64, f64), store: &mut f64| {
                if topped {
                    *store = top_value + top_slope * (eta - top_eta);
                    return;
                }
                if eta < prev_eta - 1e-14 {
                    *store = bc + quarter * f_foot * (eta - eta_l);
                    return;
                }
                if eta <= top + 1e-14 {
                    let f = int_at(phys);
                    cum += 0.5 * (prev_f + f) * (eta - prev_eta);
                    prev_eta = eta;
                    prev_f = f;
                    *store = bc + quarter * cum;
                } else {
                    // clamp the running integral at the upper domain edge
                    let edge = top.max(eta_l);
                    let phys_top = self
                        .atlas
                        .from_canonical(i, j, xi, edge)
                        .expect("edge point");
                    let f = int_at(phys_top);
                    cum += 0.5 * (prev_f + f) * (edge - prev_eta);
                    top_value = bc + quarter * cum;
                    top_eta = edge;
                    top_slope = quarter * f;
                    topped = true;
                    *store = top_value + top_slope * (eta - top_eta);
                }
            };

            if let Some(ax) = grid.eta_below {
                for q in 0..ax.n {
                    let eta = ax.node(q);
                    let phys = grid.map_below[p * ax.n + q];
                    let mut v = 0.0;
                    advance(eta, phys, &mut v);
                    field.below[p * ax.n + q] = v;
                }
            }
            for q in 0..n_above {
                let eta = grid.eta_above.node(q);
                let phys = grid.map_above[p * n_above + q];
                let mut v = 0.0;
                advance(eta, phys, &mut v);
                field.above[p * n_above + q] = v;
            }
        }
        field
    }

    /// Diagonal-trace integrand of the left-boundary bracket for pairs with
    /// λ_i ≥ λ_j and a Robin column j: 2H(η,η) + c4_j G(η,η) + ∫ c6 G_ik.
    fn bracket_integrand(
        &self,
        i: usize,
        j: usize,
        eta: f64,
        g: &[PairField],
        h: &[PairField],
        p_tabs: &[Vec<f64>],
    ) -> f64 {
        let pair = self.pair(i, j);
        let grid = &self.grids[pair];
        let h_diag = h[pair].interp(grid, eta, eta, false);
        let g_diag = g[pair].interp(grid, eta, eta, false);
        // s = +1 here, so the diagonal point maps to (z_d, 0) with z_d = φ_i^{-1}(η)
        let z_d = self.atlas.phi_inv(i, eta);
        let mut w = 0.0;
        if z_d > 1e-14 {
            let ns = ((z_d * (self.phys.n - 1) as f64).ceil() as usize).max(1);
            let hh = z_d / ns as f64;
            for k in 0..self.n {
                let pik = &p_tabs[self.pair(i, k)];
                let mut acc = 0.0;
                for t in 0..=ns {
                    let zb = hh * t as f64;
                    let val = self.tabs.c6_phys(k, j, zb) * self.phys.interp(pik, z_d, zb);
                    acc += if t == 0 || t == ns { 0.5 * val } else { val };
                }
                w += acc * hh;
            }
        }
        2.0 * h_diag + self.tabs.c4[j] * g_diag + w
    }

    /// Cumulative bracket over the above-sheet η nodes (empty when the pair
    /// has no bracket case).
    pub fn bracket_cumulative(
        &self,
        i: usize,
        j: usize,
        g: &[PairField],
        h: &[PairField],
        p_tabs: &[Vec<f64>],
    ) -> Vec<f64> {
        let pair = self.pair(i, j);
        let grid = &self.grids[pair];
        if !(grid.s > 0.0 && j >= self.m) {
            return Vec::new();
        }
        let ax = grid.eta_above;
        let mut integrand = Vec::with_capacity(ax.n);
        for q in 0..ax.n {
            integrand.push(self.bracket_integrand(i, j, ax.node(q), g, h, p_tabs));
        }
        let mut cum = vec![0.0; ax.n];
        for q in 1..ax.n {
            cum[q] = cum[q - 1] + 0.5 * (integrand[q - 1] + integrand[q]) * ax.step();
        }
        cum
    }

    /// Row-cumulative application of the G-operator.
    /// `g0` adds the zeroth-increment boundary data (three-case source term).
    pub fn apply_fg(
        &self,
        g: &[PairField],
        h: &[PairField],
        p_tabs: &[Vec<f64>],
        with_g0: bool,
    ) -> Vec<PairField> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(self.apply_fg_pair(i, j, g, h, p_tabs, with_g0));
            }
        }
        out
    }

    fn apply_fg_pair(
        &self,
        i: usize,
        j: usize,
        g: &[PairField],
        h: &[PairField],
        p_tabs: &[Vec<f64>],
        with_g0: bool,
    ) -> PairField {
        let pair = self.pair(i, j);
        let grid = &self.grids[pair];
        let mut field = PairField::zeros(grid);
        let bracket = self.bracket_cumulative(i, j, g, h, p_tabs);
        let hf = &h[pair];
        let n_above = grid.eta_above.n;

        // zeroth-increment source on the left boundary, a function of η >= 0
        let g0_at = |eta: f64| -> f64 {
            if !with_g0 || eta < 0.0 {
                return 0.0;
            }
            if grid.s < 0.0 {
                return self.tabs.g_f(i, j, eta);
            }
            if j < self.m {
                return 0.0;
            }
            // -∫0^η c5(ρ(η̄,η̄)) dη̄ along the diagonal (ρ = η̄ since s = +1)
            -trapz_on_axis(
                &grid.eta_above,
                |e| self.tabs.c5_phys(i, j, self.atlas.phi_inv(i, e)),
                0.0,
                eta,
            )
        };

        // above sheet rows
        for q in 0..n_above {
            let eta = grid.eta_above.node(q);
            let mut base = g0_at(eta);
            if !bracket.is_empty() {
                base += bracket[q];
            }
            let xi_start = eta;
            let xi_r = 2.0 * grid.a - eta;
            let h_start = hf.interp(grid, xi_start.min(grid.xi_max), eta, false);
            self.row_cumulative(
                grid,
                eta,
                base,
                xi_start,
                xi_r,
                h_start,
                |p| hf.above[p * n_above + q],
                |xi| hf.interp(grid, xi, eta, false),
                |p, v| field.above[p * n_above + q] = v,
            );
        }
        // below sheet rows: zero boundary data on the curve
        if let Some(ax) = grid.eta_below {
            for q in 0..ax.n {
                let eta = ax.node(q);
                let xi_start = self
                    .atlas
                    .xi_left(i, j, eta.max(grid.b))
                    .expect("eta in range");
                let xi_r = 2.0 * grid.a - eta;
                let h_start = if with_g0 {
                    hf.interp(grid, xi_start.min(grid.xi_max), eta, true)
                } else {
                    0.0
                };
                self.row_cumulative(
                    grid,
                    eta,
                    0.0,
                    xi_start,
                    xi_r,
                    h_start,
                    |p| hf.below[p * ax.n + q],
                    |xi| hf.interp(grid, xi, eta, true),
                    |p, v| field.below[p * ax.n + q] = v,
                );
            }
        }
        field
    }

    /// Shared row-integration pattern: value(ξ_p) = base + ∫_{ξ_start}^{ξ_p} H.
    #[allow(clippy::too_many_arguments)]
    fn row_cumulative(
        &self,
        grid: &PairGrid,
        _eta: f64,
        base: f64,
        xi_start: f64,
        xi_right: f64,
        h_start: f64,
        h_node: impl Fn(usize) -> f64,
        h_interp: impl Fn(f64) -> f64,
        mut store: impl FnMut(usize, f64),
    ) {
        let mut cum = 0.0;
        let mut prev_xi = xi_start;
        let mut prev_h = h_start;
        let mut capped = false;
        let mut cap_value = base;
        let mut cap_xi = xi_right;
        let mut cap_slope = 0.0;
        for p in 0..grid.xi.n {
            let xi = grid.xi.node(p);
            if xi < xi_start - 1e-14 {
                // linear ghost extension left of the domain (slope = H there)
                store(p, base + h_start * (xi - xi_start));
                continue;
            }
            if capped {
                store(p, cap_value + cap_slope * (xi - cap_xi));
                continue;
            }
            if xi <= xi_right + 1e-14 {
                let hv = h_node(p);
                cum += 0.5 * (prev_h + hv) * (xi - prev_xi);
                prev_xi = xi;
                prev_h = hv;
                store(p, base + cum);
            } else {
                let xi_edge = xi_right.max(xi_start);
                let hv = h_interp(xi_edge.min(grid.xi_max).max(0.0));
                cum += 0.5 * (prev_h + hv) * (xi_edge - prev_xi);
                cap_value = base + cum;
                cap_xi = xi_edge;
                cap_slope = hv;
                capped = true;
                store(p, cap_value + cap_slope * (xi - cap_xi));
            }
        }
    }

    /// Zeroth increments: the pure source terms of both integral equations.
    pub fn init_iterates(&self) -> (Vec<PairField>, Vec<PairField>) {
        let zeros: Vec<PairField> = self.grids.iter().map(PairField::zeros).collect();
        let zero_p = vec![vec![0.0; self.phys.n * self.phys.n]; self.n * self.n];
        let dg0 = self.apply_fg(&zeros, &zeros, &zero_p, true);
        let dh0 = self.apply_fh(&zero_p, true);
        (dg0, dh0)
    }
}

/// ln(l!) for the growth envelope, exact for the sweep counts in play.
fn ln_factorial(l: usize) -> f64 {
    (2..=l).map(|k| (k as f64).ln()).sum()
}

/// Smallest envelope constant M such that |Δ| ≤ M^{l+1}/l! (z-γζ)^l holds at
/// every in-domain node of this increment.
fn envelope_constant(ws: &Workspace, fields: &[PairField], l: usize, gamma: f64) -> f64 {
    let mut m_hat: f64 = 0.0;
    let lf = ln_factorial(l);
    for (pair, field) in fields.iter().enumerate() {
        let grid = &ws.grids[pair];
        let mut scan = |values: &[f64], maps: &[(f64, f64)], mask: &[bool]| {
            for (k, &v) in values.iter().enumerate() {
                if !mask[k] || v == 0.0 {
                    continue;
                }
                let (z, zeta) = maps[k];
                let w = z - gamma * zeta;
                if w <= 1e-14 {
                    // only the origin corner, where converged increments vanish
                    continue;
                }
                let log_ratio = lf + v.abs().ln() - l as f64 * w.ln();
                m_hat = m_hat.max((log_ratio / (l + 1) as f64).exp());
            }
        };
        scan(&field.above, &grid.map_above, &grid.in_above);
        scan(&field.below, &grid.map_below, &grid.in_below);
    }
    m_hat
}

/// Composite trapezoid from `a` to `b` anchored on the nodes of `axis`.
///
/// Integrates the piecewise interpolant exactly: splitting at the fixed grid
/// nodes keeps the quadrature error a smooth function of the endpoints, which
/// downstream finite differences rely on.
fn trapz_on_axis(axis: &crate::numerics::Axis, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a + 1e-15 {
        return 0.0;
    }
    let h = axis.step();
    let mut acc = 0.0;
    let mut prev_x = a;
    let mut prev_v = f(a);
    let mut p = (((a - axis.lo) / h).floor() as isize + 1).max(0) as usize;
    while p < axis.n {
        let x = axis.node(p);
        if x >= b - 1e-15 {
            break;
        }
        if x > a + 1e-15 {
            let v = f(x);
            acc += 0.5 * (prev_v + v) * (x - prev_x);
            prev_x = x;
            prev_v = v;
        }
        p += 1;
    }
    acc + 0.5 * (prev_v + f(b)) * (b - prev_x)
}

/// Kahan-compensated accumulation of an increment into the running sum.
fn accumulate(sum: &mut PairField, comp: &mut PairField, inc: &PairField) {
    let add = |s: &mut [f64], c: &mut [f64], d: &[f64]| {
        for k in 0..s.len() {
            let y = d[k] - c[k];
            let t = s[k] + y;
            c[k] = (t - s[k]) - y;
            s[k] = t;
        }
    };
    add(&mut sum.above, &mut comp.above, &inc.above);
    add(&mut sum.below, &mut comp.below, &inc.below);
}

/// Converged kernel state: accumulated canonical tables plus the physical
/// resamplings needed to evaluate the fixpoint identity anywhere.
pub(crate) struct Converged {
    pub ws: Workspace,
    pub g: Vec<PairField>,
    pub h: Vec<PairField>,
    pub p_full: Vec<Vec<f64>>,
    /// Bracket cumulative per pair over the above η nodes (empty if no case).
    pub bracket: Vec<Vec<f64>>,
    pub records: Vec<SweepRecord>,
    pub iterations_used: usize,
    pub final_update_sup: f64,
}

impl Converged {
    /// Boundary value of the full G on the left boundary at η (one-sided:
    /// `neg_side` requests the η < 0 branch at η = 0).
    fn g_boundary(&self, i: usize, j: usize, eta: f64, neg_side: bool) -> f64 {
        let ws = &self.ws;
        let pair = ws.pair(i, j);
        let grid = &ws.grids[pair];
        if eta < 0.0 || (neg_side && i != j) {
            return 0.0;
        }
        if grid.s < 0.0 {
            return ws.tabs.g_f(i, j, eta);
        }
        if j < ws.m {
            return 0.0;
        }
        // G0(η) + bracket(η), both integrated exactly to η
        let g0 = -trapz_on_axis(
            &grid.eta_above,
            |e| ws.tabs.c5_phys(i, j, ws.atlas.phi_inv(i, e)),
            0.0,
            eta,
        );

        let ax = grid.eta_above;
        let (q, _) = ax.locate(eta);
        let eta_q = ax.node(q);
        let partial = 0.5
            * (ws.bracket_integrand(i, j, eta_q, &self.g, &self.h, &self.p_full)
                + ws.bracket_integrand(i, j, eta, &self.g, &self.h, &self.p_full))
            * (eta - eta_q);
        g0 + self.bracket[pair][q] + partial
    }

    /// Evaluate the converged G at an arbitrary canonical point through the
    /// fixpoint identity (boundary data plus a row quadrature of H).
    pub fn eval_g(&self, i: usize, j: usize, xi: f64, eta: f64, neg_side: bool) -> f64 {
        let ws = &self.ws;
        let pair = ws.pair(i, j);
        let grid = &ws.grids[pair];
        let eta = eta.clamp(grid.b, grid.a);
        let xi_start = if eta >= 0.0 && !neg_side {
            eta
        } else if i == j {
            eta.max(0.0)
        } else {
            ws.atlas.xi_left(i, j, eta.min(0.0)).expect("eta in range")
        };
        let base = self.g_boundary(i, j, eta, neg_side);
        let xi_end = xi.clamp(0.0, grid.xi_max).min(2.0 * grid.a - eta);
        if xi_end <= xi_start + 1e-14 {
            return base;
        }
        let force_below = neg_side || eta < 0.0;
        if force_below && i != j {
            // anchor the integrand with the exact lower-boundary trace: the
            // table's own boundary representation is replaced by the closed
            // form, which matters where the trace data is sharply peaked
            // (small diffusion gap)
            base + trapz_on_axis(
                &grid.xi,
                |x| {
                    let (eta_l, _) = ws.atlas.eta_lower(i, j, x).expect("xi in range");
                    let at_curve = self.h[pair].interp_smooth(grid, x, eta_l, true);
                    ws.tabs.h_boundary(i, j, x) + self.h[pair].interp_smooth(grid, x, eta, true)
                        - at_curve
                },
                xi_start,
                xi_end,
            )
        } else {
            base + trapz_on_axis(
                &grid.xi,
                |x| self.h[pair].interp_smooth(grid, x, eta, force_below),
                xi_start,
                xi_end,
            )
        }
    }

}

/// Run the successive approximation until the sup of both increments falls
/// below `tol`.
pub(crate) fn iterate(
    plant: &PlantModel,
    target: &TargetSpec,
    opts: &SolverOptions,
) -> Result<Converged, KernelError> {
    if plant.has_convection() {
        return Err(KernelError::ConvectionPresent);
    }
    if !plant.is_dirichlet_first() {
        return Err(KernelError::NotDirichletFirst);
    }
    let ws = Workspace::build(plant, target, opts);
    let gamma = ws.atlas.gamma;
    let np = ws.n * ws.n;

    let (mut dg, mut dh) = ws.init_iterates();
    let mut g: Vec<PairField> = ws.grids.iter().map(PairField::zeros).collect();
    let mut h: Vec<PairField> = ws.grids.iter().map(PairField::zeros).collect();
    let mut g_c: Vec<PairField> = ws.grids.iter().map(PairField::zeros).collect();
    let mut h_c: Vec<PairField> = ws.grids.iter().map(PairField::zeros).collect();
    let mut records = Vec::new();

    let iterations_used;
    let mut final_sup;
    let mut l = 0;
    loop {
        for pidx in 0..np {
            accumulate(&mut g[pidx], &mut g_c[pidx], &dg[pidx]);
            accumulate(&mut h[pidx], &mut h_c[pidx], &dh[pidx]);
        }
        let sup_g = dg
            .iter()
            .enumerate()
            .map(|(p, f)| f.sup_abs(&ws.grids[p]))
            .fold(0.0, f64::max);
        let sup_h = dh
            .iter()
            .enumerate()
            .map(|(p, f)| f.sup_abs(&ws.grids[p]))
            .fold(0.0, f64::max);
        let env_g = envelope_constant(&ws, &dg, l, gamma);
        let env_h = envelope_constant(&ws, &dh, l, gamma);
        records.push(SweepRecord {
            sup_g,
            sup_h,
            envelope_m: env_g.max(env_h),
        });
        final_sup = sup_g.max(sup_h);
        if final_sup < opts.tol {
            iterations_used = l;
            break;
        }
        if l >= opts.max_iter {
            return Err(KernelError::NoConvergence {
                sup: final_sup,
                iterations: l,
            });
        }
        // next increments from the current ones
        let p_tabs = ws.tabulate_p(&dg);
        let s_tabs = ws.tabulate_s(&p_tabs);
        let dg_next = ws.apply_fg(&dg, &dh, &p_tabs, false);
        let dh_next = ws.apply_fh(&s_tabs, false);
        dg = dg_next;
        dh = dh_next;
        l += 1;
    }

    let p_full = ws.tabulate_p(&g);
    let bracket: Vec<Vec<f64>> = (0..np)
        .map(|p| ws.bracket_cumulative(p / ws.n, p % ws.n, &g, &h, &p_full))
        .collect();
    Ok(Converged {
        ws,
        g,
        h,
        p_full,
        bracket,
        records,
        iterations_used,
        final_update_sup: final_sup,
    })
}

/// Fitted growth-envelope constant over all recorded sweeps.
pub fn growth_m_hat(records: &[SweepRecord]) -> f64 {
    records.iter().map(|r| r.envelope_m).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_plants::scalar;
    use crate::model::TargetSpec;

    fn scalar_workspace(c: f64, mu_c: f64) -> Workspace {
        let plant = scalar(1.0, c);
        let target = TargetSpec::new(mu_c, vec![0.0], vec![1.0]);
        Workspace::build(&plant, &target, &SolverOptions::default())
    }

    #[test]
    fn operators_preserve_zero() {
        let ws = scalar_workspace(5.0, 0.0);
        let zeros: Vec<PairField> = ws.grids.iter().map(PairField::zeros).collect();
        let zero_p = vec![vec![0.0; ws.phys.n * ws.phys.n]];
        let s_tabs = ws.tabulate_s(&zero_p);
        let dh = ws.apply_fh(&s_tabs, false);
        let dg = ws.apply_fg(&zeros, &zeros, &zero_p, false);
        assert!(dh[0].above.iter().all(|&v| v == 0.0));
        assert!(dg[0].above.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_h_integrates_to_row_length() {
        // ΔG'(ξ,η) = ξ - η when ΔH ≡ 1 on the diagonal-pair triangle
        let ws = scalar_workspace(0.0, 0.0);
        let grid = &ws.grids[0];
        let mut h_field = PairField::zeros(grid);
        h_field.above.iter_mut().for_each(|v| *v = 1.0);
        let zeros: Vec<PairField> = ws.grids.iter().map(PairField::zeros).collect();
        let zero_p = vec![vec![0.0; ws.phys.n * ws.phys.n]];
        let dg = ws.apply_fg(&zeros, &[h_field], &zero_p, false);
        let na = grid.eta_above.n;
        for p in 0..grid.xi.n {
            for q in 0..na {
                if !grid.in_above[p * na + q] {
                    continue;
                }
                let expect = grid.xi.node(p) - grid.eta_above.node(q);
                let got = dg[0].above[p * na + q];
                assert!(
                    (got - expect).abs() < 1e-10,
                    "at ({}, {}): {got} vs {expect}",
                    grid.xi.node(p),
                    grid.eta_above.node(q)
                );
            }
        }
    }

    #[test]
    fn zeroth_h_increment_is_constant_for_constant_data() {
        // i = j, A = 1, μ_c = 2, λ ≡ 1, F ≡ 0: ΔH⁰ ≡ -(1+2)/4
        let ws = scalar_workspace(1.0, 2.0);
        let (_, dh0) = ws.init_iterates();
        let grid = &ws.grids[0];
        let na = grid.eta_above.n;
        for p in 0..grid.xi.n {
            for q in 0..na {
                if grid.in_above[p * na + q] {
                    assert!((dh0[0].above[p * na + q] + 0.75).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zeroth_g_increment_vanishes_without_sources() {
        let ws = scalar_workspace(5.0, 0.0);
        let (dg0, _) = ws.init_iterates();
        assert!(dg0[0].above.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_g_increment_matches_picard_term() {
        // classical scalar case: ΔG¹(ξ,η) = -(c+μ)/4 (ξ-η)
        let c = 5.0;
        let ws = scalar_workspace(c, 0.0);
        let (dg0, dh0) = ws.init_iterates();
        let p_tabs = ws.tabulate_p(&dg0);
        let dg1 = ws.apply_fg(&dg0, &dh0, &p_tabs, false);
        let grid = &ws.grids[0];
        let na = grid.eta_above.n;
        for p in 0..grid.xi.n {
            for q in 0..na {
                if !grid.in_above[p * na + q] {
                    continue;
                }
                let expect = -(c / 4.0) * (grid.xi.node(p) - grid.eta_above.node(q));
                let got = dg1[0].above[p * na + q];
                assert!(
                    (got - expect).abs() < 1e-10,
                    "picard term mismatch: {got} vs {expect}"
                );
            }
        }
    }
}
