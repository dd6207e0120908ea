//! Tabulated regularly varying functions: truncated expectations, asymptotic
//! inverses, normalizing sequences, the oscillating pair of slowly varying
//! functions, and discrete heavy-tailed laws.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{IterateTable, MapParams};
use crate::rng;
use crate::special::darling_kac_factor;

/// Relative slack used by shape checks on tabulated data.
pub const SHAPE_TOL: f64 = 1e-9;

/// A positive function tabulated in log-log coordinates, nondecreasing in
/// `ln y`, with log-linear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogTable {
    ln_x: Vec<f64>,
    ln_y: Vec<f64>,
}

impl LogTable {
    pub fn from_logs(ln_x: Vec<f64>, ln_y: Vec<f64>) -> Result<Self> {
        if ln_x.len() != ln_y.len() || ln_x.len() < 2 {
            return Err(Error::InvalidParameter { name: "table", reason: "need >= 2 matched points" });
        }
        for i in 1..ln_x.len() {
            if !(ln_x[i] > ln_x[i - 1]) {
                return Err(Error::Shape { property: "strictly increasing abscissa", index: i });
            }
            if !(ln_y[i] >= ln_y[i - 1]) {
                return Err(Error::Shape { property: "nondecreasing values", index: i });
            }
        }
        if ln_y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "table", reason: "values must be positive and finite" });
        }
        Ok(LogTable { ln_x, ln_y })
    }

    /// Tabulate `f` at the points `xs`.
    pub fn from_fn<F: Fn(f64) -> f64>(xs: &[f64], f: F) -> Result<Self> {
        let ln_x = xs.iter().map(|&x| libm::log(x)).collect();
        let ln_y = xs.iter().map(|&x| libm::log(f(x))).collect();
        Self::from_logs(ln_x, ln_y)
    }

    pub fn ln_x(&self) -> &[f64] {
        &self.ln_x
    }

    pub fn ln_y(&self) -> &[f64] {
        &self.ln_y
    }

    pub fn x_range(&self) -> (f64, f64) {
        (libm::exp(self.ln_x[0]), libm::exp(*self.ln_x.last().unwrap()))
    }

    /// `ln f` at `ln x`.
    pub fn eval_ln(&self, lx: f64) -> Result<f64> {
        let (lo, hi) = (self.ln_x[0], *self.ln_x.last().unwrap());
        let lx = snap(lx, lo, hi);
        if !(lx >= lo && lx <= hi) {
            return Err(Error::OutOfRange { value: libm::exp(lx), lo: libm::exp(lo), hi: libm::exp(hi) });
        }
        let i = self.ln_x.partition_point(|&v| v <= lx).clamp(1, self.ln_x.len() - 1);
        Ok(lerp(self.ln_x[i - 1], self.ln_x[i], self.ln_y[i - 1], self.ln_y[i], lx))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.eval_ln(libm::log(x)).map(libm::exp)
    }

    /// `ln x` with `f(x) = y`, given `ln y`; on flat stretches the left end.
    pub fn inverse_ln(&self, ly: f64) -> Result<f64> {
        let (lo, hi) = (self.ln_y[0], *self.ln_y.last().unwrap());
        let ly = snap(ly, lo, hi);
        if !(ly >= lo && ly <= hi) {
            return Err(Error::OutOfRange { value: libm::exp(ly), lo: libm::exp(lo), hi: libm::exp(hi) });
        }
        let i = self.ln_y.partition_point(|&v| v < ly);
        if i == 0 {
            return Ok(self.ln_x[0]);
        }
        Ok(lerp(self.ln_y[i - 1], self.ln_y[i], self.ln_x[i - 1], self.ln_x[i], ly))
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        self.inverse_ln(libm::log(y)).map(libm::exp)
    }
}

/// Pull values within rounding distance of the ends onto them.
#[inline]
fn snap(v: f64, lo: f64, hi: f64) -> f64 {
    let eps = 1e-12 * (1.0 + libm::fabs(lo).max(libm::fabs(hi)));
    if v < lo && v > lo - eps {
        lo
    } else if v > hi && v < hi + eps {
        hi
    } else {
        v
    }
}

#[inline]
fn lerp(x0: f64, x1: f64, y0: f64, y1: f64, x: f64) -> f64 {
    if x1 == x0 {
        return y0;
    }
    let w = (x - x0) / (x1 - x0);
    y0 + w * (y1 - y0)
}

/// Asymptotic inverse of a tabulated increasing function: `t` with `f(t) = y`.
pub fn asymptotic_inverse(f: &LogTable, y: f64) -> Result<f64> {
    f.inverse(y)
}

/// Geometric grid from `lo` to `hi` with `per_decade` points per decade,
/// both ends included.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = libm::log10(hi / lo);
    let steps = libm::ceil(decades * per_decade as f64).max(1.0) as usize;
    let (llo, lhi) = (libm::log(lo), libm::log(hi));
    (0..=steps)
        .map(|i| {
            if i == steps {
                hi
            } else {
                libm::exp(llo + (lhi - llo) * i as f64 / steps as f64)
            }
        })
        .collect()
}

/// Integer grid: every integer up to `dense`, then geometric to `hi`.
pub fn integer_grid(dense: u64, hi: u64, per_decade: usize) -> Vec<u64> {
    let mut out: Vec<u64> = (1..=dense.min(hi)).collect();
    if hi > dense {
        for t in geometric_grid(dense as f64, hi as f64, per_decade) {
            let k = libm::round(t) as u64;
            if k > *out.last().unwrap() {
                out.push(k);
            }
        }
        if *out.last().unwrap() != hi {
            out.push(hi);
        }
    }
    out
}

/// A tabulated truncated expectation `t -> L(t) = E[phi ^ t]`.
///
/// Checked on construction: increasing, concave and `L(t)/t` nonincreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedExpectation {
    grid: Vec<f64>,
    values: Vec<f64>,
    mass: f64,
}

impl TruncatedExpectation {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, mass: f64) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(Error::InvalidParameter { name: "grid", reason: "need >= 2 matched points" });
        }
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter { name: "mass", reason: "must be positive" });
        }
        if !(grid[0] > 0.0) || !(values[0] > 0.0) {
            return Err(Error::InvalidParameter { name: "grid", reason: "grid and values must be positive" });
        }
        let n = grid.len();
        for i in 1..n {
            if !(grid[i] > grid[i - 1]) {
                return Err(Error::Shape { property: "strictly increasing grid", index: i });
            }
            if values[i] < values[i - 1] * (1.0 - SHAPE_TOL) {
                return Err(Error::Shape { property: "monotonicity", index: i });
            }
            if values[i] / grid[i] > values[i - 1] / grid[i - 1] * (1.0 + SHAPE_TOL) {
                return Err(Error::Shape { property: "L(t)/t nonincreasing", index: i });
            }
        }
        for i in 1..n - 1 {
            let s0 = (values[i] - values[i - 1]) / (grid[i] - grid[i - 1]);
            let s1 = (values[i + 1] - values[i]) / (grid[i + 1] - grid[i]);
            if s1 > s0 + SHAPE_TOL * (libm::fabs(s0) + values[i] / grid[i]) {
                return Err(Error::Shape { property: "concavity", index: i });
            }
        }
        Ok(TruncatedExpectation { grid, values, mass })
    }

    /// Tabulate a closed-form `L` on `grid`.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Vec<f64>, l: F, mass: f64) -> Result<Self> {
        let values = grid.iter().map(|&t| l(t)).collect();
        Self::new(grid, values, mass)
    }

    /// Enforce the invariants on noisy estimates: the least concave majorant
    /// through the origin, which is also nondecreasing and star-shaped.
    pub fn regularized(grid: Vec<f64>, values: Vec<f64>, mass: f64) -> Result<Self> {
        if grid.len() != values.len() || grid.is_empty() {
            return Err(Error::InvalidParameter { name: "grid", reason: "need matched nonempty data" });
        }
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(grid.len() + 1);
        pts.push((0.0, 0.0));
        let mut run = 0.0f64;
        for (&t, &v) in grid.iter().zip(&values) {
            run = run.max(v);
            pts.push((t, run));
        }
        // Upper hull.
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for p in pts {
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        let mut out = Vec::with_capacity(grid.len());
        let mut j = 1;
        for &t in &grid {
            while j + 1 < hull.len() && hull[j].0 < t {
                j += 1;
            }
            out.push(lerp(hull[j - 1].0, hull[j].0, hull[j - 1].1, hull[j].1, t));
        }
        Self::new(grid, out, mass)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `L(t)` by log-linear interpolation; exact at grid points.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = (self.grid[0], *self.grid.last().unwrap());
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange { value: t, lo, hi });
        }
        let i = self.grid.partition_point(|&g| g <= t).clamp(1, self.grid.len() - 1);
        let (t0, t1) = (self.grid[i - 1], self.grid[i]);
        if t == t1 {
            return Ok(self.values[i]);
        }
        let w = libm::log(t / t0) / libm::log(t1 / t0);
        Ok(libm::exp(
            libm::log(self.values[i - 1]) + w * libm::log(self.values[i] / self.values[i - 1]),
        ))
    }

    /// `ln L` against `ln t` over the grid.
    pub fn log_table(&self) -> LogTable {
        LogTable {
            ln_x: self.grid.iter().map(|&t| libm::log(t)).collect(),
            ln_y: self.values.iter().map(|&v| libm::log(v)).collect(),
        }
    }

    /// `ln(t / L(t))` against `ln t`; nondecreasing by the invariants.
    fn ratio_table(&self) -> LogTable {
        let ln_x: Vec<f64> = self.grid.iter().map(|&t| libm::log(t)).collect();
        let mut ln_y: Vec<f64> =
            ln_x.iter().zip(&self.values).map(|(lt, v)| lt - libm::log(*v)).collect();
        for i in 1..ln_y.len() {
            ln_y[i] = ln_y[i].max(ln_y[i - 1]);
        }
        LogTable { ln_x, ln_y }
    }

    /// Log-log slope of `L` over the top decade of the grid.
    pub fn index_diagnostic(&self) -> f64 {
        let hi = *self.grid.last().unwrap();
        let lo = (hi / 10.0).max(self.grid[0]);
        let (a, b) = (self.eval(lo).unwrap_or(self.values[0]), *self.values.last().unwrap());
        libm::log(b / a) / libm::log(hi / lo)
    }
}

/// `c(n)` tabulated on a grid of times, with its declared index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizingSequence {
    pub n: Vec<f64>,
    pub c: Vec<f64>,
    pub alpha: f64,
}

impl NormalizingSequence {
    pub fn new(n: Vec<f64>, c: Vec<f64>, alpha: f64) -> Result<Self> {
        if n.len() != c.len() || n.is_empty() {
            return Err(Error::InvalidParameter { name: "grid", reason: "need matched nonempty data" });
        }
        for i in 0..n.len() {
            if i > 0 && !(c[i] >= c[i - 1]) {
                return Err(Error::Shape { property: "increasing c(n)", index: i });
            }
            if c[i] > n[i] * (1.0 + 1e-6) {
                return Err(Error::Shape { property: "c(n) <= n", index: i });
            }
        }
        Ok(NormalizingSequence { n, c, alpha })
    }

    /// `c(n)` at a grid time.
    pub fn at(&self, n: f64) -> Option<f64> {
        self.n.iter().position(|&m| m == n).map(|i| self.c[i])
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.n.iter().zip(&self.c).map(|(n, c)| c / n).collect()
    }
}

/// The normalizing sequence of a map with a barely infinite right cusp:
/// `c = a~^-1(n / (DK * (th+ U_n + th- V_n))` with `a~(t) = t / (th- V_t)`.
pub fn normalizing_sequence_cusps(
    params: &MapParams,
    table: &IterateTable,
    grid: &[u64],
) -> Result<NormalizingSequence> {
    if params.p1 != 1.0 {
        return Err(Error::Hypothesis("the right cusp must be barely infinite (p1 = 1)"));
    }
    let len = table.len() as u64;
    let top = grid.iter().copied().max().unwrap_or(0);
    if grid.is_empty() || grid[0] == 0 || top > len {
        return Err(Error::OutOfRange { value: top as f64, lo: 1.0, hi: len as f64 });
    }
    let ts = integer_grid(1000, len, 2000);
    let ln_x: Vec<f64> = ts.iter().map(|&t| libm::log(t as f64)).collect();
    let ln_y: Vec<f64> = ts
        .iter()
        .map(|&t| libm::log(t as f64) - libm::log(params.theta_minus * table.v_sum[t as usize]))
        .collect();
    let a_tilde = LogTable::from_logs(ln_x, ln_y)?;
    let dk = darling_kac_factor(params.alpha);
    let mut c = Vec::with_capacity(grid.len());
    for &n in grid {
        let i = n as usize;
        let s = params.theta_plus * table.u_sum[i] + params.theta_minus * table.v_sum[i];
        let ly = libm::log(n as f64) - libm::log(dk * s);
        c.push(libm::exp(a_tilde.inverse_ln(ly)?));
    }
    NormalizingSequence::new(grid.iter().map(|&n| n as f64).collect(), c, params.alpha)
}

/// The normalizing sequence of two components:
/// `c = a_B^-1(n / (DK * (L_A(n) + L_B(n))))` with `a_B(t) = t / L_B(t)`.
pub fn normalizing_sequence_abstract(
    l_a: &TruncatedExpectation,
    l_b: &TruncatedExpectation,
    alpha: f64,
    grid: &[f64],
) -> Result<NormalizingSequence> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter { name: "alpha", reason: "must lie in (0, 1]" });
    }
    let a_b = l_b.ratio_table();
    let dk = darling_kac_factor(alpha);
    let mut c = Vec::with_capacity(grid.len());
    for &n in grid {
        let s = l_a.eval(n)? + l_b.eval(n)?;
        c.push(libm::exp(a_b.inverse_ln(libm::log(n) - libm::log(dk * s))?));
    }
    NormalizingSequence::new(grid.to_vec(), c, alpha)
}

/// [`normalizing_sequence_abstract`] entirely in log space, for functions
/// given as `ln t -> ln L(t)`. Returns `ln c` at each `ln n` of the grid.
/// `ln_a_b` is `ln a_B` tabulated against `ln t`.
pub fn normalizing_sequence_log<FA: Fn(f64) -> f64, FB: Fn(f64) -> f64>(
    ln_l_a: FA,
    ln_l_b: FB,
    ln_a_b: &LogTable,
    alpha: f64,
    ln_grid: &[f64],
) -> Result<Vec<f64>> {
    let ln_dk = libm::log(darling_kac_factor(alpha));
    ln_grid
        .iter()
        .map(|&s| {
            let (x, y) = (ln_l_a(s), ln_l_b(s));
            let m = x.max(y);
            let ln_sum = m + libm::log(libm::exp(x - m) + libm::exp(y - m));
            ln_a_b.inverse_ln(s - ln_dk - ln_sum)
        })
        .collect()
}

/// Two slowly varying functions `L(t) = exp(int_1^t eps(y)/y dy)` with
/// piecewise constant `eps`, whose ratio oscillates between 0 and infinity.
///
/// Index `m` of every vector refers to breakpoint `t_{m+1}`; on
/// `[t_m, t_{m+1})` the exponents are `K_A(m)`, `K_B(m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatingPair {
    pub ln_t: Vec<f64>,
    pub k_a: Vec<f64>,
    pub k_b: Vec<f64>,
    pub ln_l_a: Vec<f64>,
    pub ln_l_b: Vec<f64>,
    /// Dominance factor used in place of `n` when it is larger.
    pub depth: f64,
}

/// `K_A(m)` for `m >= 1`: `K_A(2n) = K_A(2n+1) = 1/(2n+2)`.
pub fn k_a(m: usize) -> f64 {
    1.0 / (2 * (m / 2) + 2) as f64
}

/// `K_B(m)` for `m >= 1`: `K_B(2n+1) = K_B(2n+2) = 1/(2n+3)`.
pub fn k_b(m: usize) -> f64 {
    1.0 / (2 * ((m - 1) / 2) + 3) as f64
}

/// Default dominance depth of [`OscillatingPair::construct`].
pub const DEFAULT_DEPTH: f64 = 50.0;
/// Default bound on `ln t` for breakpoints.
pub const DEFAULT_MAX_LN_T: f64 = 1e6;

impl OscillatingPair {
    /// The pair `L_A = L_B` with a single exponent, which never oscillates.
    pub fn trivial(k: f64) -> Self {
        OscillatingPair {
            ln_t: alloc::vec![0.0],
            k_a: alloc::vec![k],
            k_b: alloc::vec![k],
            ln_l_a: alloc::vec![0.0],
            ln_l_b: alloc::vec![0.0],
            depth: 1.0,
        }
    }

    /// Breakpoints `t_1 = 1 < ... < t_{2 levels + 2}` such that for every
    /// `n <= levels`, `L_A(t_{2n+2}) >= max(n, depth) L_B(t_{2n+2})` and
    /// `L_A(t_{2n+1}) <= L_B(t_{2n+1}) / max(n, depth)`.
    pub fn construct(levels: usize, depth: f64, max_ln_t: f64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidParameter { name: "levels", reason: "must be >= 2" });
        }
        if !(depth >= 1.0) {
            return Err(Error::InvalidParameter { name: "depth", reason: "must be >= 1" });
        }
        let mut pair = OscillatingPair {
            ln_t: alloc::vec![0.0],
            k_a: alloc::vec![k_a(1)],
            k_b: alloc::vec![k_b(1)],
            ln_l_a: alloc::vec![0.0],
            ln_l_b: alloc::vec![0.0],
            depth,
        };
        // Breakpoint t_m for m = 2, ..., 2 levels + 2.
        for m in 2..=2 * levels + 2 {
            let last = m - 2;
            let (s0, ka, kb) = (pair.ln_t[last], pair.k_a[last], pair.k_b[last]);
            let diff0 = pair.ln_l_a[last] - pair.ln_l_b[last];
            let n = (m - 1) / 2;
            let factor = libm::log((n as f64).max(depth));
            // Even m = 2n+2: A must dominate by the factor. Odd m = 2n+1: B must.
            let (want, rate) = if m % 2 == 0 { (factor, ka - kb) } else { (-factor, kb - ka) };
            let gap = if m % 2 == 0 { want - diff0 } else { diff0 - want };
            let mut step = (gap / libm::fabs(rate)).max(0.0);
            if step <= 0.0 {
                step = 1.0;
            }
            let mut s = s0 + step;
            let holds = |s: f64| {
                let d = diff0 + (ka - kb) * (s - s0);
                if m % 2 == 0 {
                    d >= want
                } else {
                    d <= want
                }
            };
            while !holds(s) {
                s += f64::EPSILON * s.max(1.0) * 4.0;
            }
            if !(s <= max_ln_t) {
                return Err(Error::Overflow { achieved_level: (m - 2) / 2 });
            }
            pair.ln_l_a.push(pair.ln_l_a[last] + ka * (s - s0));
            pair.ln_l_b.push(pair.ln_l_b[last] + kb * (s - s0));
            pair.ln_t.push(s);
            pair.k_a.push(k_a(m));
            pair.k_b.push(k_b(m));
        }
        Ok(pair)
    }

    /// Number of breakpoints.
    pub fn len(&self) -> usize {
        self.ln_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_t.is_empty()
    }

    /// `ln t_m` for `m >= 1`.
    pub fn ln_breakpoint(&self, m: usize) -> f64 {
        self.ln_t[m - 1]
    }

    fn segment(&self, s: f64) -> usize {
        self.ln_t.partition_point(|&v| v <= s).max(1) - 1
    }

    /// `ln L_A(t)` at `s = ln t >= 0`.
    pub fn ln_l_a(&self, s: f64) -> f64 {
        let i = self.segment(s);
        self.ln_l_a[i] + self.k_a[i] * (s - self.ln_t[i])
    }

    /// `ln L_B(t)` at `s = ln t >= 0`.
    pub fn ln_l_b(&self, s: f64) -> f64 {
        let i = self.segment(s);
        self.ln_l_b[i] + self.k_b[i] * (s - self.ln_t[i])
    }

    /// `ln a_B(t) = ln t - ln L_B(t)` tabulated at the breakpoints and at
    /// `ln_top`; exact because both are piecewise linear in `ln t`.
    pub fn ln_a_b_table(&self, ln_top: f64) -> LogTable {
        let mut ln_x: Vec<f64> = self.ln_t.iter().copied().filter(|&s| s < ln_top).collect();
        ln_x.push(ln_top);
        let ln_y = ln_x.iter().map(|&s| s - self.ln_l_b(s)).collect();
        LogTable { ln_x, ln_y }
    }

    /// `ln c(n)` at each `ln n` of the grid, with `alpha = 1`.
    pub fn ln_normalizer(&self, ln_grid: &[f64]) -> Result<Vec<f64>> {
        let top = ln_grid.iter().copied().fold(1.0, f64::max);
        let table = self.ln_a_b_table(top);
        normalizing_sequence_log(|s| self.ln_l_a(s), |s| self.ln_l_b(s), &table, 1.0, ln_grid)
    }

    /// Log grid from `t_2` to `t_last` with `per_segment` points between
    /// consecutive breakpoints, breakpoints included.
    pub fn breakpoint_grid(&self, last: usize, per_segment: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for m in 2..last.min(self.len()) {
            let (a, b) = (self.ln_breakpoint(m), self.ln_breakpoint(m + 1));
            for i in 0..per_segment {
                out.push(a + (b - a) * i as f64 / per_segment as f64);
            }
        }
        out.push(self.ln_breakpoint(last.min(self.len())));
        out
    }

    /// Table rows `(m, ln t_m, K_A(m), K_B(m), ln L_A(t_m), ln L_B(t_m))`.
    pub fn rows(&self) -> Vec<(usize, f64, f64, f64, f64, f64)> {
        (0..self.len())
            .map(|i| (i + 1, self.ln_t[i], self.k_a[i], self.k_b[i], self.ln_l_a[i], self.ln_l_b[i]))
            .collect()
    }
}

/// Extremes of `c(n)/n` over a grid of `ln n`.
pub fn oscillation_check(pair: &OscillatingPair, ln_grid: &[f64]) -> Result<(f64, f64)> {
    let ln_c = pair.ln_normalizer(ln_grid)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (lc, s) in ln_c.iter().zip(ln_grid) {
        let r = libm::exp(lc - s);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// `b*(t) = b(t / lnln t) lnln t` and its inverse, tabulated.
#[derive(Clone, Debug, PartialEq)]
pub struct LilNormalizer {
    pub b_star: LogTable,
}

impl LilNormalizer {
    pub fn b_star(&self, t: f64) -> Result<f64> {
        self.b_star.eval(t)
    }

    /// `a*`, the inverse of `b*`.
    pub fn a_star(&self, y: f64) -> Result<f64> {
        asymptotic_inverse(&self.b_star, y)
    }
}

/// Tabulate `b*` on `grid`, which must start above `e^e`.
pub fn lil_normalizer<F: Fn(f64) -> f64>(b: F, grid: &[f64]) -> Result<LilNormalizer> {
    let e_e = libm::exp(core::f64::consts::E);
    if grid.is_empty() || !(grid[0] > e_e) {
        return Err(Error::Domain { what: "the iterated-log normalizer", value: grid.first().copied().unwrap_or(0.0) });
    }
    let b_star = LogTable::from_fn(grid, |t| {
        let ll = libm::log(libm::log(t));
        b(t / ll) * ll
    })?;
    Ok(LilNormalizer { b_star })
}

/// Catalogue tail `P[phi > k] = s(k + x0)/s(x0)`, `s(x) = x^-a (ln x)^-b
/// (lnln x)^-c`, `x0 = e^e`; its pmf decays like `n^-(1+a) (ln n)^-b
/// (lnln n)^-c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailFamily {
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
}

impl TailFamily {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !b.is_finite() || !c.is_finite() {
            return Err(Error::UnsupportedFamily);
        }
        Ok(TailFamily { a, b, c })
    }

    /// `P[phi > k] ~ k^-index`.
    pub fn power(index: f64) -> Result<Self> {
        Self::new(index, 0.0, 0.0)
    }

    fn ln_s(&self, x: f64) -> f64 {
        let l = libm::log(x);
        -self.a * l - self.b * libm::log(l) - self.c * libm::log(libm::log(l))
    }

    pub fn survival(&self, k: f64) -> f64 {
        if k < 0.0 {
            return 1.0;
        }
        let x0 = libm::exp(core::f64::consts::E);
        libm::exp(self.ln_s(k + x0) - self.ln_s(x0))
    }

    /// Whether `E[phi] < infinity`.
    pub fn integrable(&self) -> bool {
        lex_gt(&[self.a, self.b, self.c], &[1.0, 1.0, 1.0])
    }
}

/// Lexicographic `x > y`.
pub fn lex_gt(x: &[f64], y: &[f64]) -> bool {
    for (a, b) in x.iter().zip(y) {
        if a > b {
            return true;
        }
        if a < b {
            return false;
        }
    }
    false
}

/// How `P[phi > k]` continues beyond the tabulated head.
#[derive(Clone)]
pub enum TailRule {
    Zero,
    /// `P[phi > k] = P[phi > K] (K/k)^index` past the cutoff `K`.
    Power { index: f64 },
    Family(TailFamily),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for TailRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailRule::Zero => write!(f, "Zero"),
            TailRule::Power { index } => write!(f, "Power {{ index: {index} }}"),
            TailRule::Family(t) => write!(f, "Family({t:?})"),
            TailRule::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Default head length of heavy-tailed laws.
pub const DEFAULT_CUTOFF: usize = 1_000_000;
const GUIDE: usize = 4096;

/// An N-valued law given by its tail `S(k) = P[phi > k]`: a table up to a
/// cutoff plus an analytic rule beyond.
#[derive(Clone, Debug)]
pub struct DiscreteHeavyTail {
    head: Vec<f64>,
    head_sum: Vec<f64>,
    tail: TailRule,
    family: Option<TailFamily>,
    guide_lo: Vec<u32>,
    guide_hi: Vec<u32>,
}

impl DiscreteHeavyTail {
    /// `head[k] = P[phi > k]` for `k = 0..=cutoff`.
    pub fn new(head: Vec<f64>, tail: TailRule, family: Option<TailFamily>) -> Result<Self> {
        if head.is_empty() || head.len() > u32::MAX as usize {
            return Err(Error::InvalidParameter { name: "head", reason: "bad table length" });
        }
        if !(head[0] <= 1.0 && head[0] >= 0.0) {
            return Err(Error::Shape { property: "P[phi > 0] <= 1", index: 0 });
        }
        for i in 1..head.len() {
            if !(head[i] <= head[i - 1] && head[i] >= 0.0) {
                return Err(Error::Shape { property: "nonincreasing tail", index: i });
            }
        }
        let mut head_sum = Vec::with_capacity(head.len() + 1);
        let mut acc = 0.0;
        head_sum.push(0.0);
        for &s in &head {
            acc += s;
            head_sum.push(acc);
        }
        let mut guide_lo = Vec::with_capacity(GUIDE);
        let mut guide_hi = Vec::with_capacity(GUIDE);
        for j in 0..GUIDE {
            let (lo_u, hi_u) = (j as f64 / GUIDE as f64, (j + 1) as f64 / GUIDE as f64);
            guide_lo.push(head.partition_point(|&s| s >= hi_u) as u32);
            guide_hi.push(head.partition_point(|&s| s > lo_u) as u32);
        }
        let out = DiscreteHeavyTail { head, head_sum, tail, family, guide_lo, guide_hi };
        let k = out.cutoff() as f64;
        if out.survival(k + 1.0) > out.head[out.cutoff()] * (1.0 + SHAPE_TOL) {
            return Err(Error::Shape { property: "nonincreasing tail", index: out.cutoff() + 1 });
        }
        Ok(out)
    }

    /// Tabulate a catalogue family.
    pub fn from_family(family: TailFamily, cutoff: usize) -> Result<Self> {
        let head = (0..=cutoff).map(|k| family.survival(k as f64)).collect();
        Self::new(head, TailRule::Family(family), Some(family))
    }

    /// Lifetimes `f_k = k^-s / zeta(s)`, `k >= 1`.
    pub fn zeta_lifetime(s: f64, cutoff: usize) -> Result<Self> {
        if !(s > 1.0) {
            return Err(Error::InvalidParameter { name: "s", reason: "must exceed 1" });
        }
        let z = crate::special::hurwitz_zeta(s, 1.0);
        let mut head = alloc::vec![0.0; cutoff + 1];
        head[cutoff] = crate::special::hurwitz_zeta(s, cutoff as f64 + 1.0) / z;
        for k in (0..cutoff).rev() {
            head[k] = head[k + 1] + libm::pow(k as f64 + 1.0, -s) / z;
        }
        head[0] = head[0].min(1.0);
        let rule = TailRule::Function(Arc::new(move |k: f64| {
            crate::special::hurwitz_zeta(s, libm::floor(k) + 1.0) / z
        }));
        Self::new(head, rule, None)
    }

    /// Point mass at `m`.
    pub fn point_mass(m: usize) -> Result<Self> {
        let head = (0..=m).map(|k| if k < m { 1.0 } else { 0.0 }).collect();
        Self::new(head, TailRule::Zero, None)
    }

    pub fn cutoff(&self) -> usize {
        self.head.len() - 1
    }

    pub fn family(&self) -> Option<TailFamily> {
        self.family
    }

    pub fn tail_rule(&self) -> &TailRule {
        &self.tail
    }

    /// `P[phi > k]` for real `k` (taken at its floor).
    pub fn survival(&self, k: f64) -> f64 {
        if k < 0.0 {
            return 1.0;
        }
        let kf = libm::floor(k);
        if kf <= self.cutoff() as f64 {
            return self.head[kf as usize];
        }
        match &self.tail {
            TailRule::Zero => 0.0,
            TailRule::Power { index } => {
                let kc = self.cutoff() as f64;
                self.head[self.cutoff()] * libm::pow(kc / kf, *index)
            }
            TailRule::Family(t) => t.survival(kf),
            TailRule::Function(f) => f(kf),
        }
    }

    /// `P[phi = k]`.
    pub fn pmf(&self, k: u64) -> f64 {
        let k = k as f64;
        self.survival(k - 1.0) - self.survival(k)
    }

    /// `E[phi ^ t] = sum_{k < t} P[phi > k]` for integer `t` within the head.
    pub fn truncated_mean(&self, t: usize) -> Result<f64> {
        if t > self.cutoff() + 1 {
            return Err(Error::OutOfRange { value: t as f64, lo: 0.0, hi: (self.cutoff() + 1) as f64 });
        }
        Ok(self.head_sum[t])
    }

    /// The truncated expectation on an integer grid inside the head.
    pub fn truncated_expectation(&self, grid: &[usize]) -> Result<TruncatedExpectation> {
        let values = grid.iter().map(|&t| self.truncated_mean(t)).collect::<Result<Vec<_>>>()?;
        TruncatedExpectation::new(grid.iter().map(|&t| t as f64).collect(), values, 1.0)
    }

    /// The smallest `k` with `P[phi > k] < u`, for `u` in `(0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let j = (libm::ceil(u * GUIDE as f64) as usize).clamp(1, GUIDE) - 1;
        let lo = self.guide_lo[j] as usize;
        let hi = (self.guide_hi[j] as usize).min(self.head.len());
        if lo < self.head.len() {
            let k = lo + self.head[lo..hi].partition_point(|&s| s >= u);
            if k < self.head.len() {
                return k as f64;
            }
            // Guide bounds are conservative; finish the scan of the head.
            let k = k + self.head[k.min(self.head.len())..].partition_point(|&s| s >= u);
            if k < self.head.len() {
                return k as f64;
            }
        }
        self.tail_quantile(u)
    }

    fn tail_quantile(&self, u: f64) -> f64 {
        let mut lo = self.cutoff() as f64;
        let mut hi = 2.0 * (lo + 1.0);
        while self.survival(hi) >= u {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return f64::MAX;
            }
        }
        // Invariant: survival(lo) >= u > survival(hi).
        while hi - lo > 1.0 {
            let mid = libm::floor(0.5 * (lo + hi));
            if mid <= lo || mid >= hi {
                break;
            }
            if self.survival(mid) >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng::uniform_open0(rng))
    }
}

/// Law of `phi` with `E[phi ^ t] = (L(t) - L(0)) / L(1)`, from the increments
/// `P[phi > k] = (L(k+1) - L(k)) / L(1)`.
pub fn distribution_from_l<F>(l: F, cutoff: usize) -> Result<DiscreteHeavyTail>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let l1 = l(1.0);
    if !(l1 > 0.0) {
        return Err(Error::InvalidParameter { name: "L", reason: "L(1) must be positive" });
    }
    let mut head = Vec::with_capacity(cutoff + 1);
    let mut prev = l(0.0);
    for k in 0..=cutoff {
        let next = l(k as f64 + 1.0);
        let inc = (next - prev) / l1;
        if k > 0 && inc > head[k - 1] * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Shape { property: "concavity", index: k });
        }
        head.push(inc.max(0.0));
        prev = next;
    }
    head[0] = head[0].min(1.0);
    for k in 1..head.len() {
        head[k] = head[k].min(head[k - 1]);
    }
    let rule = TailRule::Function(Arc::new(move |k: f64| ((l(k + 1.0) - l(k)) / l1).max(0.0)));
    DiscreteHeavyTail::new(head, rule, None)
}
