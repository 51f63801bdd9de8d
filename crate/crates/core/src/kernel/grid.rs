//! Discretization of the canonical pair domains and the physical triangle.
//!
//! Each pair (i, j) is sampled on a uniform ξ-axis over [0, ξ_max] and two
//! uniform η-axes sharing the separation row η = 0: [0, a] above and [b, 0]
//! below (the below sheet exists only for i ≠ j). Node positions mapped to
//! the physical triangle are precomputed once, with out-of-domain nodes
//! clamped to the nearest domain point so ghost entries always hold usable
//! boundary-extension data.

use crate::coords::CoordinateAtlas;
use crate::numerics::Axis;

/// Values over one pair's two sheets; `below` is empty for i = j.
#[derive(Debug, Clone)]
pub struct PairField {
    /// Above sheet, layout `[ix * n_eta_above + iy]`.
    pub above: Vec<f64>,
    /// Below sheet, layout `[ix * n_eta_below + iy]`; row iy = n-1 is η = 0.
    pub below: Vec<f64>,
}

impl PairField {
    pub fn zeros(grid: &PairGrid) -> Self {
        Self {
            above: vec![0.0; grid.xi.n * grid.eta_above.n],
            below: grid
                .eta_below
                .map_or(Vec::new(), |ax| vec![0.0; grid.xi.n * ax.n]),
        }
    }

    pub fn sup_abs(&self, grid: &PairGrid) -> f64 {
        let mut sup: f64 = 0.0;
        for (k, &v) in self.above.iter().enumerate() {
            if grid.in_above[k] {
                sup = sup.max(v.abs());
            }
        }
        for (k, &v) in self.below.iter().enumerate() {
            if grid.in_below[k] {
                sup = sup.max(v.abs());
            }
        }
        sup
    }

    /// Bilinear interpolation on the sheet picked by the sign of η.
    /// η = 0 reads the above sheet; pass `force_below` to read the other limit.
    pub fn interp(&self, grid: &PairGrid, xi: f64, eta: f64, force_below: bool) -> f64 {
        let (axis, values) = if (eta < 0.0 || force_below) && grid.eta_below.is_some() {
            (grid.eta_below.as_ref().unwrap(), &self.below)
        } else {
            (&grid.eta_above, &self.above)
        };
        let (ix, tx) = grid.xi.locate(xi);
        let (iy, ty) = axis.locate(eta);
        let ny = axis.n;
        let v00 = values[ix * ny + iy];
        let v01 = values[ix * ny + iy + 1];
        let v10 = values[(ix + 1) * ny + iy];
        let v11 = values[(ix + 1) * ny + iy + 1];
        let lo = v00 + tx * (v10 - v00);
        let hi = v01 + tx * (v11 - v01);
        lo + ty * (hi - lo)
    }

    /// Per-sheet interpolation with a C1 (Catmull–Rom) profile in η and a
    /// linear blend in ξ. The final evaluation paths integrate along ξ (where
    /// the trapezoid integrates the linear interpolant exactly), while the
    /// η-dependence must be C1 in the query so finite differences of derived
    /// tables stay free of grid-scale kinks. Cubic is safe within a sheet:
    /// each sheet is one smooth piece, ghost-extended past its edges.
    pub fn interp_smooth(&self, grid: &PairGrid, xi: f64, eta: f64, force_below: bool) -> f64 {
        let (axis, values) = if (eta < 0.0 || force_below) && grid.eta_below.is_some() {
            (grid.eta_below.as_ref().unwrap(), &self.below)
        } else {
            (&grid.eta_above, &self.above)
        };
        let (ix, tx) = grid.xi.locate(xi);
        let (iy, ty) = axis.locate(eta);
        let ny = axis.n;
        let col = |gx: usize| -> f64 {
            let at = |gy: isize| values[gx * ny + gy.clamp(0, ny as isize - 1) as usize];
            catmull_rom(
                at(iy as isize - 1),
                at(iy as isize),
                at(iy as isize + 1),
                at(iy as isize + 2),
                ty,
            )
        };
        let lo = col(ix);
        let hi = col(ix + 1);
        lo + tx * (hi - lo)
    }
}

#[inline]
fn catmull_rom(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
    let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
    let c = -0.5 * p0 + 0.5 * p2;
    ((a * t + b) * t + c) * t + p1
}

/// Static geometry of one pair's canonical grid.
pub struct PairGrid {
    pub i: usize,
    pub j: usize,
    pub s: f64,
    pub xi_max: f64,
    /// Apex η of the Γ1 corner; the right edge is ξ + η = 2a.
    pub a: f64,
    /// Lowest η (0 for i = j).
    pub b: f64,
    pub xi: Axis,
    pub eta_above: Axis,
    pub eta_below: Option<Axis>,
    /// η_l(ξ_p) per ξ node.
    pub eta_l: Vec<f64>,
    /// Physical foot z of Γ2 per ξ node.
    pub z_l: Vec<f64>,
    /// Clamped canonical coordinates per above-sheet node.
    pub canon_above: Vec<(f64, f64)>,
    pub canon_below: Vec<(f64, f64)>,
    /// Physical (z, ζ) of the clamped node positions.
    pub map_above: Vec<(f64, f64)>,
    pub map_below: Vec<(f64, f64)>,
    pub in_above: Vec<bool>,
    pub in_below: Vec<bool>,
}

impl PairGrid {
    pub fn build(atlas: &CoordinateAtlas, i: usize, j: usize, n: usize) -> Self {
        let s = atlas.s(i, j);
        let xi_max = atlas.xi_max(i, j);
        let a = atlas.corner_a(i, j);
        let b = atlas.corner_b(i, j);
        let xi = Axis::new(0.0, xi_max, n.max(3));

        let span = a - b;
        let n_above = ((n - 1) as f64 * a / span).round() as usize + 1;
        let n_above = n_above.clamp(3, 4 * n);
        let eta_above = Axis::new(0.0, a, n_above);
        let eta_below = if i == j {
            None
        } else {
            let n_below = (((n - 1) as f64 * (-b) / span).round() as usize + 1).clamp(3, 4 * n);
            Some(Axis::new(b, 0.0, n_below))
        };

        let eta_l: Vec<f64> = (0..xi.n)
            .map(|p| {
                if i == j {
                    0.0
                } else {
                    atlas.eta_lower(i, j, xi.node(p)).unwrap().0
                }
            })
            .collect();
        let z_l: Vec<f64> = (0..xi.n)
            .map(|p| atlas.z_lower(i, j, xi.node(p)).unwrap())
            .collect();

        let mut grid = Self {
            i,
            j,
            s,
            xi_max,
            a,
            b,
            xi,
            eta_above,
            eta_below,
            eta_l,
            z_l,
            canon_above: Vec::new(),
            canon_below: Vec::new(),
            map_above: Vec::new(),
            map_below: Vec::new(),
            in_above: Vec::new(),
            in_below: Vec::new(),
        };
        grid.fill_maps(atlas);
        grid
    }

    fn fill_maps(&mut self, atlas: &CoordinateAtlas) {
        let tol = 1e-9 * (1.0 + self.xi_max);
        let (i, j) = (self.i, self.j);
        for p in 0..self.xi.n {
            let xi = self.xi.node(p);
            let top = self.top_at(xi);
            let bottom = self.eta_l[p];
            for q in 0..self.eta_above.n {
                let eta = self.eta_above.node(q);
                let inside = eta <= top + tol;
                let eta_c = eta.clamp(bottom.min(top), top);
                let phys = atlas.from_canonical(i, j, xi, eta_c).expect("clamped node");
                self.canon_above.push((xi, eta_c));
                self.map_above.push(phys);
                self.in_above.push(inside);
            }
            if let Some(ax) = self.eta_below {
                for q in 0..ax.n {
                    let eta = ax.node(q);
                    let inside = eta >= bottom - tol && eta <= top + tol;
                    let eta_c = eta.clamp(bottom, top.max(bottom));
                    let phys = atlas.from_canonical(i, j, xi, eta_c).expect("clamped node");
                    self.canon_below.push((xi, eta_c));
                    self.map_below.push(phys);
                    self.in_below.push(inside);
                }
            }
        }
    }

    /// Upper domain boundary at ξ: min(ξ, 2a - ξ).
    #[inline]
    pub fn top_at(&self, xi: f64) -> f64 {
        xi.min(2.0 * self.a - xi).max(self.b)
    }

}

/// Uniform triangle grid over 0 ≤ ζ ≤ z ≤ 1 with one ghost extension above
/// the diagonal so bilinear reads remain valid in diagonal-cut cells.
#[derive(Debug, Clone, Copy)]
pub struct PhysGrid {
    pub n: usize,
}

impl PhysGrid {
    pub fn new(n: usize) -> Self {
        Self { n: n.max(3) }
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            1.0
        } else {
            k as f64 * self.h()
        }
    }

    /// Extend values linearly one row past the diagonal: the entry (iz, iz+1)
    /// continues the column profile through the diagonal node.
    pub fn extend_diag(&self, field: &mut [f64]) {
        let n = self.n;
        for iz in 0..n - 1 {
            let prev = if iz >= 1 {
                field[iz * n + iz - 1]
            } else {
                field[iz * n + iz]
            };
            let diag = field[iz * n + iz];
            field[iz * n + iz + 1] = 2.0 * diag - prev;
        }
    }

    /// Bilinear read of a triangle field (with diagonal ghosts filled).
    pub fn interp(&self, field: &[f64], z: f64, zeta: f64) -> f64 {
        let n = self.n;
        let h = self.h();
        let fx = (z / h).clamp(0.0, (n - 1) as f64);
        let ix = (fx.floor() as usize).min(n - 2);
        let tx = fx - ix as f64;
        let fy = (zeta / h).clamp(0.0, (n - 1) as f64);
        let iy = (fy.floor() as usize).min(n - 2);
        let ty = fy - iy as f64;
        let v00 = field[ix * n + iy];
        let v01 = field[ix * n + iy + 1];
        let v10 = field[(ix + 1) * n + iy];
        let v11 = field[(ix + 1) * n + iy + 1];
        let lo = v00 + tx * (v10 - v00);
        let hi = v01 + tx * (v11 - v01);
        lo + ty * (hi - lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::build_atlas;
    use crate::model::test_plants::coupled_two_state;

    #[test]
    fn pair_grid_masks_match_geometry() {
        let plant = coupled_two_state();
        let atlas = build_atlas(&plant, 401);
        for (i, j) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
            let grid = PairGrid::build(&atlas, i, j, 51);
            assert_eq!(i == j, grid.eta_below.is_none());
            // the η = 0 row of the above sheet is always in-domain
            for p in 0..grid.xi.n {
                let xi = grid.xi.node(p);
                let inside = grid.in_above[p * grid.eta_above.n];
                assert_eq!(inside, xi <= 2.0 * grid.a + 1e-9, "xi {xi} pair ({i},{j})");
            }
            // clamped maps stay inside the physical triangle
            for &(z, zeta) in grid.map_above.iter().chain(grid.map_below.iter()) {
                assert!((0.0..=1.0).contains(&z));
                assert!(zeta >= -1e-12 && zeta <= z + 1e-9);
            }
        }
    }

    #[test]
    fn phys_grid_bilinear_on_triangle() {
        let g = PhysGrid::new(21);
        let n = g.n;
        let mut field = vec![0.0; n * n];
        for iz in 0..n {
            for ic in 0..=iz {
                field[iz * n + ic] = g.node(iz) * 2.0 - g.node(ic);
            }
        }
        g.extend_diag(&mut field);
        // linear field is reproduced exactly, including near the diagonal
        for &(z, zeta) in &[(0.5, 0.25), (0.9, 0.9), (0.31, 0.30), (1.0, 0.0)] {
            let v = g.interp(&field, z, zeta);
            assert!((v - (2.0 * z - zeta)).abs() < 1e-12, "at ({z},{zeta})");
        }
    }
}
