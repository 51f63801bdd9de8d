//! Back-map of the converged canonical solution to the physical triangle and
//! extraction of the target-system local coupling.
//!
//! Node values of K are produced by evaluating the fixpoint identity at the
//! exactly mapped canonical point of every (z, ζ) node instead of
//! interpolating the canonical table pointwise; the remaining interpolation
//! error then enters only under an integral, which keeps finite-difference
//! residuals of the result meaningful under grid refinement.

use std::collections::BTreeMap;

use crate::model::PlantModel;
use crate::numerics::{extend_linear, Axis, GridFn1D, PiecewiseGridFn2D, Sheet};

use super::solver::Converged;

/// Physical sheets of one kernel pair plus its plain node values.
pub(crate) struct PhysicalPair {
    pub table: PiecewiseGridFn2D,
    /// Side-consistent node values over the triangle (diag-ghosted).
    pub values: Vec<f64>,
    /// |η| of each triangle node: distance to the separation line in the
    /// coordinate in which it is straight.
    pub eta_abs: Vec<f64>,
}

impl Converged {
    /// Separation-curve sample ζ_sep(z) of pair (i, j): the physical image of
    /// the canonical row η = 0. Columns where the η ≥ 0 piece does not reach
    /// into the triangle at all get the sentinel -1 so side classification by
    /// `ζ <= ζ_sep` picks the η < 0 piece everywhere there.
    pub(crate) fn curve_zeta(&self, i: usize, j: usize, z: f64) -> f64 {
        if i == j {
            return z;
        }
        let atlas = &self.ws.atlas;
        let s = atlas.s(i, j);
        let shift = 0.5 * (1.0 - s) * (atlas.phi1(i) - atlas.phi1(j));
        let arg = atlas.phi(i, z) - shift;
        if arg < 0.0 {
            return -1.0;
        }
        atlas.phi_inv(j, arg.min(atlas.phi1(j))).min(z)
    }
}

/// Build the physical kernel tables for every pair.
pub(crate) fn to_original(conv: &Converged, plant: &PlantModel) -> Vec<PhysicalPair> {
    let n = conv.ws.n;
    let phys = conv.ws.phys;
    let mm = phys.n;
    let axis = Axis::new(0.0, 1.0, mm);
    let atlas = conv.ws.atlas.clone();
    let tabs = &conv.ws.tabs;

    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut pos = Sheet::zeros(axis, axis);
            let mut neg = Sheet::zeros(axis, axis);
            let mut mask_pos = vec![false; mm * mm];
            let mut mask_neg = vec![false; mm * mm];
            let mut curve = Vec::with_capacity(mm);

            for iz in 0..mm {
                let z = phys.node(iz);
                let zeta_sep = conv.curve_zeta(i, j, z);
                curve.push(zeta_sep);
                let coef = |zeta: f64| {
                    tabs.psi_phys(i, z) * tabs.psi_phys(j, zeta)
                        / ((plant.lambda[j])(zeta))
                };
                // anchor on the curve (or the domain edge when the η >= 0
                // piece does not reach this column)
                let zs = zeta_sep.clamp(0.0, z);
                let (xi_anchor, _) = atlas.to_canonical(i, j, z, zs).expect("curve point");
                let anchor_pos = coef(zs) * conv.eval_g(i, j, xi_anchor, 0.0, false);

                // positive sheet: the η >= 0 piece lives on ζ in [0, ζ_sep]
                let mut last_valid: Option<(f64, f64)> = None;
                for ic in 0..mm {
                    let zeta = phys.node(ic);
                    let idx = iz * mm + ic;
                    if zeta <= zeta_sep + 1e-13 {
                        let (xi, eta) = atlas.to_canonical(i, j, z, zeta.min(z)).unwrap();
                        let v = coef(zeta) * conv.eval_g(i, j, xi, eta.max(0.0), false);
                        pos.set(iz, ic, v);
                        mask_pos[idx] = true;
                        if zeta_sep - zeta > 0.05 * phys.h() {
                            last_valid = Some((zeta, v));
                        }
                    } else {
                        let v = match last_valid {
                            Some((zp, vp)) => {
                                extend_linear(zeta_sep, anchor_pos, zp, vp, zeta)
                            }
                            None => anchor_pos,
                        };
                        pos.set(iz, ic, v);
                    }
                }

                // negative sheet (i != j): the η <= 0 piece on ζ in [ζ_sep, z]
                if i != j {
                    let anchor_lo = coef(zs) * conv.eval_g(i, j, xi_anchor, 0.0, true);
                    let (xi_d, eta_d) = atlas.to_canonical(i, j, z, z).unwrap();
                    let anchor_hi = coef(z) * conv.eval_g(i, j, xi_d, eta_d, true);
                    let mut first_valid: Option<(f64, f64)> = None;
                    let mut last_valid: Option<(f64, f64)> = None;
                    for ic in 0..mm {
                        let zeta = phys.node(ic);
                        let idx = iz * mm + ic;
                        if zeta >= zeta_sep - 1e-13 && zeta <= z + 1e-13 {
                            let (xi, eta) = atlas.to_canonical(i, j, z, zeta.min(z)).unwrap();
                            let v = coef(zeta) * conv.eval_g(i, j, xi, eta.min(0.0), true);
                            neg.set(iz, ic, v);
                            mask_neg[idx] = true;
                            if zeta - zs > 0.05 * phys.h() && first_valid.is_none() {
                                first_valid = Some((zeta, v));
                            }
                            if z - zeta > 0.05 * phys.h() {
                                last_valid = Some((zeta, v));
                            }
                        }
                    }
                    for ic in 0..mm {
                        let zeta = phys.node(ic);
                        if zeta < zeta_sep - 1e-13 {
                            let v = match first_valid {
                                Some((zp, vp)) => extend_linear(zs, anchor_lo, zp, vp, zeta),
                                None => anchor_lo,
                            };
                            neg.set(iz, ic, v);
                        } else if zeta > z + 1e-13 {
                            let v = match last_valid {
                                Some((zp, vp)) => extend_linear(z, anchor_hi, zp, vp, zeta),
                                None => anchor_hi,
                            };
                            neg.set(iz, ic, v);
                        }
                    }
                }
            }

            let table = PiecewiseGridFn2D {
                sheet_pos: pos,
                sheet_neg: if i == j { None } else { Some(neg) },
                curve: curve.clone(),
                pos_below_curve: true,
                mask_pos: mask_pos.clone(),
                mask_neg: if i == j { None } else { Some(mask_neg) },
            };

            // side-consistent node values for quadrature paths
            let mut values = vec![0.0; mm * mm];
            let mut eta_abs = vec![0.0; mm * mm];
            for iz in 0..mm {
                let z = phys.node(iz);
                for ic in 0..=iz {
                    let zeta = phys.node(ic);
                    values[iz * mm + ic] = if zeta <= curve[iz] {
                        table.sheet_pos.at(iz, ic)
                    } else {
                        table.sheet_neg.as_ref().unwrap().at(iz, ic)
                    };
                    let (_, eta) = atlas.to_canonical(i, j, z, zeta.min(z)).unwrap();
                    eta_abs[iz * mm + ic] = eta.abs();
                }
            }
            phys.extend_diag(&mut values);

            out.push(PhysicalPair { table, values, eta_abs });
        }
    }
    out
}

/// The local coupling of the target system: entries exist exactly for pairs
/// with λ_i < λ_j; Dirichlet columns use the kernel's boundary trace, Robin
/// columns its ζ-derivative corrected by the local-term operator.
pub(crate) fn extract_a0_tilde(
    conv: &Converged,
    plant: &PlantModel,
    pairs: &[PhysicalPair],
) -> BTreeMap<(usize, usize), GridFn1D> {
    let n = conv.ws.n;
    let m = conv.ws.m;
    let phys = conv.ws.phys;
    let mm = phys.n;
    let h = phys.h();
    let z_nodes: Vec<f64> = (0..mm).map(|k| phys.node(k)).collect();

    let mut out = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if conv.ws.atlas.s(i, j) >= 0.0 {
                continue; // λ_i >= λ_j carries boundary conditions, not couplings
            }
            let lam_j0 = (plant.lambda[j])(0.0);
            let lam_j0_d1 = (plant.lambda_d1[j])(0.0);
            let q_j = plant.robin_q(j);
            let table = &pairs[conv.ws.pair(i, j)].table;
            let mut vals = Vec::with_capacity(mm);
            for iz in 0..mm {
                let z = z_nodes[iz];
                let v = if j < m {
                    -lam_j0 * table.sheet_value_at_left(iz)
                } else {
                    // one-sided second-order ∂_ζ at ζ = 0 on the sheet that
                    // covers the stencil (ghost-extended where it does not)
                    let sheet = if table.curve[iz] > 0.0 {
                        &table.sheet_pos
                    } else {
                        table.sheet_neg.as_ref().unwrap()
                    };
                    let d_zeta = (-3.0 * sheet.at(iz, 0) + 4.0 * sheet.at(iz, 1)
                        - sheet.at(iz, 2))
                        / (2.0 * h);
                    let k0 = table.sheet_value_at_left(iz);
                    // C_ij[K](z) = A0_ij(z) - ∫0^z Σ_k K_ik(z,ζ) A0_kj(ζ) dζ
                    let mut c_op = (plant.local_term[i][j])(z);
                    let mut acc = 0.0;
                    for t in 0..=iz {
                        let zeta = z_nodes[t];
                        let mut term = 0.0;
                        for k in 0..n {
                            term += pairs[conv.ws.pair(i, k)].values[iz * mm + t]
                                * (plant.local_term[k][j])(zeta);
                        }
                        acc += if t == 0 || t == iz { 0.5 * term } else { term };
                    }
                    if iz > 0 {
                        c_op -= acc * h;
                    }
                    lam_j0 * d_zeta + (lam_j0_d1 + q_j * lam_j0) * k0 - c_op
                };
                vals.push(v);
            }
            out.insert((i, j), GridFn1D::new(z_nodes.clone(), vals).unwrap());
        }
    }
    out
}

trait LeftValue {
    fn sheet_value_at_left(&self, iz: usize) -> f64;
}

impl LeftValue for PiecewiseGridFn2D {
    /// Kernel value at (z_iz, ζ = 0) read from the sheet valid there.
    fn sheet_value_at_left(&self, iz: usize) -> f64 {
        if self.curve[iz] > 0.0 || self.sheet_neg.is_none() {
            self.sheet_pos.at(iz, 0)
        } else {
            self.sheet_neg.as_ref().unwrap().at(iz, 0)
        }
    }
}

/// Export the canonical solution tables (both iterate families) as piecewise
/// grid functions over (ξ, η).
pub(crate) fn export_canonical(conv: &Converged) -> (Vec<PiecewiseGridFn2D>, Vec<PiecewiseGridFn2D>) {
    let n = conv.ws.n;
    let mut g_out = Vec::with_capacity(n * n);
    let mut h_out = Vec::with_capacity(n * n);
    for p in 0..n * n {
        let grid = &conv.ws.grids[p];
        let pack = |field: &super::grid::PairField| {
            let mut pos = Sheet::zeros(grid.xi, grid.eta_above);
            pos.values.copy_from_slice(&field.above);
            let neg = grid.eta_below.map(|ax| {
                let mut s = Sheet::zeros(grid.xi, ax);
                s.values.copy_from_slice(&field.below);
                s
            });
            PiecewiseGridFn2D {
                sheet_pos: pos,
                sheet_neg: neg,
                curve: vec![0.0; grid.xi.n],
                pos_below_curve: false,
                mask_pos: grid.in_above.clone(),
                mask_neg: if grid.eta_below.is_some() {
                    Some(grid.in_below.clone())
                } else {
                    None
                },
            }
        };
        g_out.push(pack(&conv.g[p]));
        h_out.push(pack(&conv.h[p]));
    }
    (g_out, h_out)
}
