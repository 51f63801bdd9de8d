//! Inverse transformation kernel via the Volterra reciprocity relation
//! `L(z,ζ) = K(z,ζ) + ∫_ζ^z L(z,s) K(s,ζ) ds`, solved by successive
//! approximation on the physical triangle grid.

use crate::numerics::{Axis, PiecewiseGridFn2D, Sheet};

use super::grid::PhysGrid;
use super::solver::KernelError;

/// Iterate the reciprocity relation. `k_values[pair]` are side-consistent
/// triangle node tables (pair = i*n + j); the result has the same layout.
pub(crate) fn solve_inverse_values(
    k_values: &[Vec<f64>],
    n: usize,
    phys: PhysGrid,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Vec<f64>>, KernelError> {
    let mm = phys.n;
    let h = phys.h();
    let mut l_cur: Vec<Vec<f64>> = k_values.to_vec();
    for _ in 0..max_iter {
        let mut l_next = k_values.to_vec();
        for i in 0..n {
            for j in 0..n {
                let pair = i * n + j;
                for iz in 0..mm {
                    for ic in 0..=iz {
                        if iz == ic {
                            continue;
                        }
                        // ∫_ζ^z Σ_k L_ik(z,s) K_kj(s,ζ) ds over node columns
                        let mut acc = 0.0;
                        for t in ic..=iz {
                            let mut term = 0.0;
                            for k in 0..n {
                                term += l_cur[i * n + k][iz * mm + t]
                                    * k_values[k * n + j][t * mm + ic];
                            }
                            acc += if t == ic || t == iz { 0.5 * term } else { term };
                        }
                        l_next[pair][iz * mm + ic] += acc * h;
                    }
                }
            }
        }
        let mut sup: f64 = 0.0;
        for pair in 0..n * n {
            for iz in 0..mm {
                for ic in 0..=iz {
                    sup = sup.max((l_next[pair][iz * mm + ic] - l_cur[pair][iz * mm + ic]).abs());
                }
            }
        }
        l_cur = l_next;
        if sup < tol {
            for table in &mut l_cur {
                phys.extend_diag(table);
            }
            return Ok(l_cur);
        }
    }
    Err(KernelError::NoConvergence {
        sup: tol,
        iterations: max_iter,
    })
}

/// Package inverse-kernel node values as piecewise tables. L inherits the
/// forward kernel's separation curves; since only values (never derivatives)
/// of L are consumed downstream, both sheets carry the same node data.
pub(crate) fn package_inverse(
    l_values: &[Vec<f64>],
    curves: &[Vec<f64>],
    n: usize,
    phys: PhysGrid,
) -> Vec<PiecewiseGridFn2D> {
    let mm = phys.n;
    let axis = Axis::new(0.0, 1.0, mm);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let pair = i * n + j;
            let mut sheet = Sheet::zeros(axis, axis);
            sheet.values.copy_from_slice(&l_values[pair]);
            let mask: Vec<bool> = (0..mm * mm)
                .map(|idx| idx % mm <= idx / mm)
                .collect();
            let neg = if i == j { None } else { Some(sheet.clone()) };
            out.push(PiecewiseGridFn2D {
                sheet_pos: sheet,
                sheet_neg: neg,
                curve: curves[pair].clone(),
                pos_below_curve: true,
                mask_pos: mask.clone(),
                mask_neg: if i == j { None } else { Some(mask) },
            });
        }
    }
    out
}
