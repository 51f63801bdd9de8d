//! Grid-sampled function machinery: 1-D/2-D interpolation, composite quadrature,
//! monotone-function inversion and decay-rate fitting.
//!
//! Everything here is pure and immutable after construction, so values can be
//! shared freely between threads.

use thiserror::Error;

/// Absolute clamp tolerance applied at interval ends before reporting
/// an out-of-range abscissa.
pub const RANGE_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("abscissa {x} outside [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("query point ({a}, {b}) outside the gridded domain")]
    OutsideDomain { a: f64, b: f64 },
    #[error("grid values are not strictly monotone")]
    NotMonotone,
    #[error("norm sequence contains a non-positive entry")]
    NonPositiveNorm,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

// ---------------------------------------------------------------------------
// 1-D grid functions
// ---------------------------------------------------------------------------

/// Samples of a scalar function on strictly increasing abscissae.
///
/// Evaluation uses a piecewise-cubic monotonicity-preserving (Fritsch–Carlson)
/// interpolant; node values are reproduced exactly.
#[derive(Debug, Clone)]
pub struct GridFn1D {
    nodes: Vec<f64>,
    values: Vec<f64>,
    /// Hermite slopes at the nodes.
    slopes: Vec<f64>,
}

impl GridFn1D {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(NumericsError::Invalid(format!(
                "need >= 2 nodes and matching values, got {}/{}",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NumericsError::Invalid(
                "nodes must be strictly increasing".into(),
            ));
        }
        let slopes = pchip_slopes(&nodes, &values);
        Ok(Self {
            nodes,
            values,
            slopes,
        })
    }

    /// Sample a callable on `n` uniform nodes over `[lo, hi]`.
    pub fn sample(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let nodes: Vec<f64> = (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect();
        let values = nodes.iter().map(|&x| f(x)).collect();
        Self::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    fn clamp_abscissa(&self, x: f64) -> Result<f64> {
        let (lo, hi) = (self.lo(), self.hi());
        if x < lo - RANGE_CLAMP_TOL || x > hi + RANGE_CLAMP_TOL {
            return Err(NumericsError::OutOfRange { x, lo, hi });
        }
        Ok(x.clamp(lo, hi))
    }

    fn cell_of(&self, x: f64) -> usize {
        // nodes are sorted; find k with nodes[k] <= x < nodes[k+1]
        match self
            .nodes
            .binary_search_by(|probe| probe.partial_cmp(&x).unwrap())
        {
            Ok(k) => k.min(self.nodes.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.nodes.len() - 2),
        }
    }

    /// Interpolated value at `x` (clamped within [`RANGE_CLAMP_TOL`] of the ends).
    pub fn eval(&self, x: f64) -> Result<f64> {
        let x = self.clamp_abscissa(x)?;
        let k = self.cell_of(x);
        let h = self.nodes[k + 1] - self.nodes[k];
        let t = (x - self.nodes[k]) / h;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        Ok(h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1)
    }

    /// Derivative of the interpolant at `x`.
    pub fn eval_deriv(&self, x: f64) -> Result<f64> {
        let x = self.clamp_abscissa(x)?;
        let k = self.cell_of(x);
        let h = self.nodes[k + 1] - self.nodes[k];
        let t = (x - self.nodes[k]) / h;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let dh00 = 6.0 * t * t - 6.0 * t;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = -6.0 * t * t + 6.0 * t;
        let dh11 = 3.0 * t * t - 2.0 * t;
        Ok(dh00 * y0 / h + dh10 * d0 + dh01 * y1 / h + dh11 * d1)
    }
}

/// Fritsch–Carlson slopes: shape-preserving, C1.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        let d = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![d, d];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let mut d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        d = 0.0;
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        d = 3.0 * d0;
    }
    d
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Composite trapezoid of a callable over `[a, b]` with `n_sub` uniform subintervals.
pub fn trapz(f: impl Fn(f64) -> f64, a: f64, b: f64, n_sub: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = n_sub.max(1);
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for k in 1..n {
        acc += f(a + h * k as f64);
    }
    acc * h
}

/// Trapezoid over explicit samples at the given abscissae.
pub fn trapz_samples(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 0.0;
    for k in 0..x.len().saturating_sub(1) {
        acc += 0.5 * (y[k] + y[k + 1]) * (x[k + 1] - x[k]);
    }
    acc
}

/// Trapezoid over uniformly spaced samples.
pub fn trapz_uniform(y: &[f64], h: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let inner: f64 = y[1..y.len() - 1].iter().sum();
    h * (0.5 * (y[0] + y[y.len() - 1]) + inner)
}

/// Cumulative trapezoid of a callable on `n` uniform nodes over `[lo, hi]`,
/// returned as a grid function (value 0 at `lo`).
pub fn cumtrapz(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<GridFn1D> {
    if n < 2 {
        return Err(NumericsError::Invalid("cumtrapz needs n >= 2".into()));
    }
    let h = (hi - lo) / (n - 1) as f64;
    let samples: Vec<f64> = (0..n).map(|k| f(lo + h * k as f64)).collect();
    let mut acc = vec![0.0; n];
    for k in 1..n {
        acc[k] = acc[k - 1] + 0.5 * (samples[k - 1] + samples[k]) * h;
    }
    let nodes = (0..n).map(|k| lo + h * k as f64).collect();
    GridFn1D::new(nodes, acc)
}

// ---------------------------------------------------------------------------
// Monotone inversion
// ---------------------------------------------------------------------------

/// Solve `interp1(f, x) = y` for a strictly increasing grid function.
///
/// Bracketing bisection refined by Newton steps on the interpolant; the
/// result satisfies `|f(x) - y| < 1e-10`.
pub fn invert_monotone(f: &GridFn1D, y: f64) -> Result<f64> {
    if f.values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(NumericsError::NotMonotone);
    }
    let (vmin, vmax) = (f.values[0], *f.values.last().unwrap());
    if y < vmin - RANGE_CLAMP_TOL || y > vmax + RANGE_CLAMP_TOL {
        return Err(NumericsError::OutOfRange {
            x: y,
            lo: vmin,
            hi: vmax,
        });
    }
    let y = y.clamp(vmin, vmax);
    // bracket by the stored values first
    let k = match f
        .values
        .binary_search_by(|probe| probe.partial_cmp(&y).unwrap())
    {
        Ok(k) => return Ok(f.nodes[k]),
        Err(k) => k.saturating_sub(1).min(f.nodes.len() - 2),
    };
    let (mut lo, mut hi) = (f.nodes[k], f.nodes[k + 1]);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = f.eval(x)? - y;
        if v.abs() < 1e-13 {
            return Ok(x);
        }
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // Newton refinement, falling back to bisection when it escapes the bracket
        let d = f.eval_deriv(x)?;
        let mut next = if d.abs() > 1e-300 { x - v / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-15 && v.abs() < 1e-10 {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Uniform axes and 2-D piecewise sheets
// ---------------------------------------------------------------------------

/// A uniform axis with `n >= 2` nodes over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2 && hi > lo, "degenerate axis [{lo}, {hi}] x {n}");
        Self { lo, hi, n }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.hi
        } else {
            self.lo + self.step() * k as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Cell index and local coordinate for a query (clamped to the axis).
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let h = self.step();
        let t = ((x - self.lo) / h).clamp(0.0, (self.n - 1) as f64);
        let k = (t.floor() as usize).min(self.n - 2);
        (k, t - k as f64)
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

/// One smooth piece of a piecewise kernel: a full rectangle of values over
/// uniform axes. Entries beyond the piece's true (curved) region hold
/// linearly extended ghost values so bilinear interpolation stays second
/// order up to the separation curve.
#[derive(Debug, Clone)]
pub struct Sheet {
    pub x: Axis,
    pub y: Axis,
    /// Row-major values: `values[ix * y.n + iy]`.
    pub values: Vec<f64>,
}

impl Sheet {
    pub fn zeros(x: Axis, y: Axis) -> Self {
        let values = vec![0.0; x.n * y.n];
        Self { x, y, values }
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.y.n + iy]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        self.values[ix * self.y.n + iy] = v;
    }

    /// Bilinear interpolation. Queries must lie inside the sheet rectangle
    /// (within the clamp tolerance).
    pub fn bilinear(&self, a: f64, b: f64) -> Result<f64> {
        let tol_x = self.x.step() * 1e-9 + RANGE_CLAMP_TOL;
        let tol_y = self.y.step() * 1e-9 + RANGE_CLAMP_TOL;
        if !self.x.contains(a, tol_x) || !self.y.contains(b, tol_y) {
            return Err(NumericsError::OutsideDomain { a, b });
        }
        let (ix, tx) = self.x.locate(a);
        let (iy, ty) = self.y.locate(b);
        let v00 = self.at(ix, iy);
        let v01 = self.at(ix, iy + 1);
        let v10 = self.at(ix + 1, iy);
        let v11 = self.at(ix + 1, iy + 1);
        let lo = v00 + tx * (v10 - v00);
        let hi = v01 + tx * (v11 - v01);
        Ok(lo + ty * (hi - lo))
    }
}

/// Sheet selector for [`PiecewiseGridFn2D::interp2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideHint {
    /// Smooth piece on the non-negative side of the separation coordinate.
    Pos,
    /// Smooth piece on the negative side.
    Neg,
    /// Pick by the sign of the query relative to the separation curve.
    Auto,
}

/// A kernel sampled on uniform axes, continuous but only piecewise smooth
/// across a separation curve `y = curve(x)`.
///
/// `sheet_pos` extends the smooth piece on the side classified positive by
/// `pos_below_curve`; both sheets agree on the curve itself up to the
/// interpolation error of the converged kernel.
#[derive(Debug, Clone)]
pub struct PiecewiseGridFn2D {
    pub sheet_pos: Sheet,
    pub sheet_neg: Option<Sheet>,
    /// Separation-curve samples, one per `sheet_pos.x` node.
    pub curve: Vec<f64>,
    /// true if the positive sheet covers `y <= curve(x)`.
    pub pos_below_curve: bool,
    /// In-domain flags per node of `sheet_pos` (ghost entries are false).
    pub mask_pos: Vec<bool>,
    pub mask_neg: Option<Vec<bool>>,
}

impl PiecewiseGridFn2D {
    /// Single smooth piece (no separation inside the domain).
    pub fn single(sheet: Sheet, curve: Vec<f64>, pos_below_curve: bool, mask: Vec<bool>) -> Self {
        Self {
            sheet_pos: sheet,
            sheet_neg: None,
            curve,
            pos_below_curve,
            mask_pos: mask,
            mask_neg: None,
        }
    }

    pub fn curve_at(&self, x: f64) -> f64 {
        let (k, t) = self.sheet_pos.x.locate(x);
        self.curve[k] + t * (self.curve[k + 1] - self.curve[k])
    }

    fn pick(&self, a: f64, b: f64, hint: SideHint) -> &Sheet {
        let neg = match &self.sheet_neg {
            None => return &self.sheet_pos,
            Some(s) => s,
        };
        match hint {
            SideHint::Pos => &self.sheet_pos,
            SideHint::Neg => neg,
            SideHint::Auto => {
                let below = b <= self.curve_at(a);
                if below == self.pos_below_curve {
                    &self.sheet_pos
                } else {
                    neg
                }
            }
        }
    }

    /// Bilinear interpolation on the selected sheet.
    pub fn interp2(&self, a: f64, b: f64, hint: SideHint) -> Result<f64> {
        self.pick(a, b, hint).bilinear(a, b)
    }
}

// ---------------------------------------------------------------------------
// Decay-rate fitting
// ---------------------------------------------------------------------------

/// Least-squares slope of `log(norm)` against time over the window that
/// excludes the first 20% of the time span. Positive result = decay.
pub fn fit_decay_rate(times: &[f64], norms: &[f64]) -> Result<f64> {
    if times.len() != norms.len() || times.len() < 10 {
        return Err(NumericsError::Invalid(
            "need >= 10 matching (time, norm) samples".into(),
        ));
    }
    if norms.iter().any(|&v| v <= 0.0) {
        return Err(NumericsError::NonPositiveNorm);
    }
    let t0 = times[0] + 0.2 * (times[times.len() - 1] - times[0]);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t >= t0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(NumericsError::Invalid("fit window too short".into()));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(NumericsError::Invalid("degenerate time samples".into()));
    }
    Ok(-(n * sxy - sx * sy) / denom)
}

/// Extend a boundary-anchored linear profile to a ghost node.
///
/// The returned value places the ghost on the line through
/// `(anchor_pos, anchor_val)` and `(inner_pos, inner_val)`, so interpolation
/// across the ghost reproduces the anchor exactly. Falls back to the anchor
/// value when the two support points (nearly) coincide.
pub fn extend_linear(
    anchor_pos: f64,
    anchor_val: f64,
    inner_pos: f64,
    inner_val: f64,
    ghost_pos: f64,
) -> f64 {
    let span = anchor_pos - inner_pos;
    if span.abs() < 1e-13 {
        return anchor_val;
    }
    let slope = (anchor_val - inner_val) / span;
    anchor_val + slope * (ghost_pos - anchor_pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interp1_linear_data() {
        let f = GridFn1D::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!((f.eval(0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interp1_reproduces_nodes() {
        let f = GridFn1D::sample(|x| (3.0 * x).sin() + x * x, 0.0, 2.0, 37).unwrap();
        for (k, &x) in f.nodes().iter().enumerate() {
            assert_eq!(f.eval(x).unwrap(), f.values()[k]);
        }
    }

    #[test]
    fn interp1_sin_accuracy() {
        let f = GridFn1D::sample(|x| x.sin(), 0.0, 1.0, 51).unwrap();
        assert!((f.eval(0.3).unwrap() - 0.3f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn interp1_out_of_range() {
        let f = GridFn1D::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(f.eval(1.5).is_err());
        // clamped just beyond the end
        assert!(f.eval(1.0 + 0.5e-12).is_ok());
    }

    #[test]
    fn trapz_exact_for_linears() {
        assert_eq!(trapz(|_| 1.0, 0.0, 1.0, 7), 1.0);
        assert!((trapz(|z| z, 0.0, 1.0, 13) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trapz_exp_reference() {
        let v = trapz(|z| z.exp(), 0.0, 1.0, 1000);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn trapz_second_order_refinement() {
        let exact = 1f64.exp() - 1.0;
        let e1 = (trapz(|z| z.exp(), 0.0, 1.0, 50) - exact).abs();
        let e2 = (trapz(|z| z.exp(), 0.0, 1.0, 100) - exact).abs();
        let ratio = e1 / e2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected ~4x error drop, got {ratio}"
        );
    }

    #[test]
    fn invert_identity() {
        let f = GridFn1D::sample(|x| x, 0.0, 1.0, 11).unwrap();
        assert!((invert_monotone(&f, 0.7).unwrap() - 0.7).abs() < 1e-10);
    }

    #[test]
    fn invert_cubic() {
        let f = GridFn1D::sample(|x| x * x * x, 0.0, 1.0, 201).unwrap();
        assert!((invert_monotone(&f, 0.125).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn invert_endpoint() {
        let f = GridFn1D::sample(|x| x.exp(), 0.0, 1.0, 21).unwrap();
        let top = f.hi();
        assert_eq!(invert_monotone(&f, 1f64.exp()).unwrap(), top);
    }

    #[test]
    fn invert_rejects_non_monotone() {
        let f = GridFn1D::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.5]).unwrap();
        assert!(matches!(
            invert_monotone(&f, 0.7),
            Err(NumericsError::NotMonotone)
        ));
    }

    #[test]
    fn invert_round_trip_on_range() {
        let f = GridFn1D::sample(|x| x + 0.3 * (2.0 * x).sin(), 0.0, 1.0, 101).unwrap();
        for k in 0..=20 {
            let y = f.values()[0] + (f.values().last().unwrap() - f.values()[0]) * k as f64 / 20.0;
            let x = invert_monotone(&f, y).unwrap();
            assert!((f.eval(x).unwrap() - y).abs() < 1e-9);
        }
    }

    #[test]
    fn sheet_constant_field() {
        let mut s = Sheet::zeros(Axis::new(0.0, 1.0, 5), Axis::new(0.0, 2.0, 7));
        s.values.iter_mut().for_each(|v| *v = 3.0);
        let pw = PiecewiseGridFn2D::single(s, vec![2.0; 5], true, vec![true; 35]);
        assert_eq!(pw.interp2(0.3, 1.1, SideHint::Auto).unwrap(), 3.0);
    }

    #[test]
    fn sheet_bilinear_exactness() {
        let x = Axis::new(0.0, 1.0, 9);
        let y = Axis::new(0.0, 1.0, 9);
        let mut s = Sheet::zeros(x, y);
        for ix in 0..x.n {
            for iy in 0..y.n {
                s.set(ix, iy, x.node(ix) * y.node(iy));
            }
        }
        let pw = PiecewiseGridFn2D::single(s, vec![1.0; 9], true, vec![true; 81]);
        assert!((pw.interp2(0.25, 0.5, SideHint::Pos).unwrap() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn sheet_rejects_outside() {
        let s = Sheet::zeros(Axis::new(0.0, 1.0, 5), Axis::new(0.0, 1.0, 5));
        let pw = PiecewiseGridFn2D::single(s, vec![1.0; 5], true, vec![true; 25]);
        assert!(pw.interp2(1.5, 0.5, SideHint::Pos).is_err());
    }

    #[test]
    fn decay_rate_exact_exponential() {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.01).collect();
        let norms: Vec<f64> = times.iter().map(|&t| (-3.0 * t).exp()).collect();
        assert!((fit_decay_rate(&times, &norms).unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn decay_rate_growth_is_negative() {
        let times: Vec<f64> = (0..100).map(|k| k as f64 * 0.02).collect();
        let norms: Vec<f64> = times.iter().map(|&t| (0.5 * t).exp()).collect();
        assert!((fit_decay_rate(&times, &norms).unwrap() + 0.5).abs() < 1e-6);
    }

    #[test]
    fn decay_rate_with_noise() {
        // deterministic +-1% ripple
        let times: Vec<f64> = (0..500).map(|k| k as f64 * 0.004).collect();
        let norms: Vec<f64> = times
            .iter()
            .enumerate()
            .map(|(k, &t)| (-3.36 * t).exp() * (1.0 + 0.01 * ((k * 7919 % 200) as f64 / 100.0 - 1.0)))
            .collect();
        let rate = fit_decay_rate(&times, &norms).unwrap();
        assert!((rate - 3.36).abs() < 0.05, "rate {rate}");
    }

    #[test]
    fn decay_rate_rejects_nonpositive() {
        let times: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let mut norms = vec![1.0; 20];
        norms[5] = 0.0;
        assert!(matches!(
            fit_decay_rate(&times, &norms),
            Err(NumericsError::NonPositiveNorm)
        ));
    }

    #[test]
    fn cumtrapz_matches_closed_form() {
        let g = cumtrapz(|x| 2.0 * x, 0.0, 1.0, 101).unwrap();
        assert!((g.eval(0.5).unwrap() - 0.25).abs() < 1e-4);
        assert!((g.eval(1.0).unwrap() - 1.0).abs() < 1e-4);
    }
}
