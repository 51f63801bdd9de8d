//! Residual checks of the kernel boundary-value problem in the original
//! coordinates: interior PDE defect, boundary rows, and the trace identities
//! on the diagonal ζ = z.

use crate::model::PlantModel;
use crate::numerics::trapz;

use super::KernelSolution;

/// Residual magnitudes of the converged kernel.
#[derive(Debug, Clone, Copy)]
pub struct ResidualReport {
    /// Sup of the interior PDE defect away from the separation curve.
    pub pde_residual_sup: f64,
    /// Grid L2 norm of the same defect.
    pub pde_residual_l2: f64,
    /// Sup over the boundary rows at ζ = 0 (pairs with λ_i ≥ λ_j).
    pub bc_residual_sup: f64,
    /// Max deviation of K_ii(z,z) from its closed-form trace.
    pub trace_diag_err: f64,
    /// Max |K_ij(z,z)| for i ≠ j (exact zeros expected at nodes).
    pub trace_offdiag_err: f64,
    /// Max deviation of the one-sided slope of K_ij at the diagonal from
    /// A_ij/(λ_j - λ_i).
    pub trace_offdiag_slope_err: f64,
}

/// Number of curve-adjacent nodes excluded from interior stencils.
const CURVE_BAND: f64 = 2.0;

pub fn residual_report(sol: &KernelSolution, plant: &PlantModel) -> ResidualReport {
    let n = sol.n;
    let mm = sol.grid_n;
    let h = 1.0 / (mm - 1) as f64;
    let z = &sol.z_nodes;
    let mu = sol.mu_c;

    let mut pde_sup: f64 = 0.0;
    let mut pde_sq = 0.0;
    let mut pde_count = 0usize;
    for i in 0..n {
        for j in 0..n {
            let pair = i * n + j;
            let table = &sol.k[pair];
            // the same two-node band that guards the separation curve guards
            // every domain edge: centered stencils must not straddle a
            // boundary-evaluation regime
            for iz in 2..mm - 2 {
                let zz = z[iz];
                for ic in 2..iz.saturating_sub(1) {
                    let zeta = z[ic];
                    let dist = (zeta - table.curve[iz]).abs();
                    if i != j && dist < CURVE_BAND * h {
                        continue;
                    }
                    // measure the band in the coordinate in which the kink is
                    // straight as well: one-sided evaluation degrades inside
                    // the first canonical cells around the separation line
                    if i != j && sol.eta_abs[pair][iz * mm + ic] < sol.eta_band[pair] {
                        continue;
                    }
                    // the full stencil footprint must stay on one side of the
                    // curve; near the wedge the curve is steep in z, so the
                    // ζ-band alone does not guarantee that
                    if i != j {
                        let side = zeta > table.curve[iz];
                        let same_side = [
                            (iz + 1, ic),
                            (iz - 1, ic),
                            (iz, ic + 1),
                            (iz, ic - 1),
                        ]
                        .iter()
                        .all(|&(a, b)| (z[b] > table.curve[a]) == side);
                        if !same_side {
                            continue;
                        }
                    }
                    let sheet = if zeta <= table.curve[iz] {
                        &table.sheet_pos
                    } else {
                        table.sheet_neg.as_ref().unwrap()
                    };
                    let v = sheet.at(iz, ic);
                    let dzz = (sheet.at(iz + 1, ic) - 2.0 * v + sheet.at(iz - 1, ic)) / (h * h);
                    let lam_j = |zeta: f64| (plant.lambda[j])(zeta);
                    let dcc = (lam_j(z[ic + 1]) * sheet.at(iz, ic + 1)
                        - 2.0 * lam_j(zeta) * v
                        + lam_j(z[ic - 1]) * sheet.at(iz, ic - 1))
                        / (h * h);
                    // B_ij[K](z,ζ) from the node tables
                    let mut b = -(plant.nonlocal_kernel[i][j])(zz, zeta);
                    for k in 0..n {
                        let kik = sol.k_values[i * n + k][iz * mm + ic];
                        let mut a_kj = (plant.reaction[k][j])(zeta);
                        if k == j {
                            a_kj += mu;
                        }
                        b += kik * a_kj;
                    }
                    let mut acc = 0.0;
                    for t in ic..=iz {
                        let mut term = 0.0;
                        for k in 0..n {
                            term += sol.k_values[i * n + k][iz * mm + t]
                                * (plant.nonlocal_kernel[k][j])(z[t], zeta);
                        }
                        acc += if t == ic || t == iz { 0.5 * term } else { term };
                    }
                    b += acc * h;

                    let r = (plant.lambda[i])(zz) * dzz - dcc - b;
                    pde_sup = pde_sup.max(r.abs());
                    pde_sq += r * r;
                    pde_count += 1;
                }
            }
        }
    }
    let pde_l2 = if pde_count > 0 {
        (pde_sq * h * h).sqrt()
    } else {
        0.0
    };

    let m = sol.m;
    let mut bc_sup: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pair = i * n + j;
            if sol.s_sign[pair] < 0.0 {
                continue;
            }
            let table = &sol.k[pair];
            // rows need a genuine triangle width for the one-sided ζ-stencil
            for iz in 2..mm {
                let zz = z[iz];
                let r = if j < m {
                    table.sheet_pos.at(iz, 0)
                } else {
                    let sheet = &table.sheet_pos; // ζ = 0 lies on the η >= 0 side for λ_i >= λ_j
                    let d_zeta = (-3.0 * sheet.at(iz, 0) + 4.0 * sheet.at(iz, 1)
                        - sheet.at(iz, 2))
                        / (2.0 * h);
                    let lam_j0 = (plant.lambda[j])(0.0);
                    let mut c_op = (plant.local_term[i][j])(zz);
                    let mut acc = 0.0;
                    for t in 0..=iz {
                        let mut term = 0.0;
                        for k in 0..n {
                            term += sol.k_values[i * n + k][iz * mm + t]
                                * (plant.local_term[k][j])(z[t]);
                        }
                        acc += if t == 0 || t == iz { 0.5 * term } else { term };
                    }
                    if iz > 0 {
                        c_op -= acc * h;
                    }
                    lam_j0 * d_zeta
                        + ((plant.lambda_d1[j])(0.0) + plant.robin_q(j) * lam_j0)
                            * sheet.at(iz, 0)
                        - c_op
                };
                bc_sup = bc_sup.max(r.abs());
            }
        }
    }

    // diagonal trace against an independent quadrature of the closed form
    let mut diag_err: f64 = 0.0;
    for i in 0..n {
        let pair = i * n + i;
        for iz in 0..mm {
            let zz = z[iz];
            let lam = plant.lambda[i].clone();
            let a_ii = plant.reaction[i][i].clone();
            let reference = if zz > 0.0 {
                -trapz(
                    |zeta| (a_ii(zeta) + mu) / (2.0 * lam(zeta).sqrt()),
                    0.0,
                    zz,
                    2000,
                ) / lam(zz).sqrt()
            } else {
                0.0
            };
            let v = sol.k_values[pair][iz * mm + iz];
            diag_err = diag_err.max((v - reference).abs());
        }
    }

    let mut offdiag_err: f64 = 0.0;
    let mut slope_err: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pair = i * n + j;
            let table = &sol.k[pair];
            let sheet = table.sheet_neg.as_ref().unwrap();
            for iz in 0..mm {
                offdiag_err = offdiag_err.max(sheet.at(iz, iz).abs());
                // the forward stencil (z, z+h, z+2h at fixed ζ = z) is only a
                // one-sided derivative of the diagonal-side piece while it
                // stays below the separation curve
                if iz + 2 < mm && z[iz] >= table.curve[iz + 2] {
                    let d_z = (-3.0 * sheet.at(iz, iz) + 4.0 * sheet.at(iz + 1, iz)
                        - sheet.at(iz + 2, iz))
                        / (2.0 * h);
                    let zz = z[iz];
                    let expected = (plant.reaction[i][j])(zz)
                        / ((plant.lambda[j])(zz) - (plant.lambda[i])(zz));
                    slope_err = slope_err.max((d_z - expected).abs());
                }
            }
        }
    }

    ResidualReport {
        pde_residual_sup: pde_sup,
        pde_residual_l2: pde_l2,
        bc_residual_sup: bc_sup,
        trace_diag_err: diag_err,
        trace_offdiag_err: offdiag_err,
        trace_offdiag_slope_err: slope_err,
    }
}
