//! Two-branch interval maps with indifferent fixed points at 0 and 1.
//!
//! The built-in family is
//!
//! ```text
//! T(x) = x + a0 * x^(1+p0)                      on [0, c]
//! T(x) = 1 - ((1-x) + a1 * (1-x)^(1+p1))        on (c, 1]
//! ```
//!
//! with `a0 = (1-c)/c^(1+p0)` and `a1 = c/(1-c)^(1+p1)`, so both branches map
//! onto `[0, 1]`. The point `x = c` belongs to the left branch.
//!
//! Internally points are carried as `(side, distance to that side's fixed
//! point)`. Near `x = 1` this keeps the full relative precision that plain
//! `f64` coordinates only have near `x = 0`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::Exponent;

/// Residual tolerance of the inverse-branch root finder.
pub const TOL_ROOT: f64 = 1e-14;

/// Iterates below this value are treated as having underflowed.
pub const UNDERFLOW: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Parameters of the built-in family, with all derived constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapSpec", into = "MapSpec")]
pub struct MapParams {
    pub c: f64,
    pub p0: f64,
    pub p1: f64,
    pub a0: f64,
    pub a1: f64,
    /// `1 / T'(c+)`
    pub theta_plus: f64,
    /// `1 / T'(c-)`
    pub theta_minus: f64,
    /// `min(1, 1/p0)`
    pub alpha: f64,
    /// `min(1, 1/p1)`
    pub beta: f64,
}

/// The serialized form of [`MapParams`]: only the free parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub c: f64,
    pub p0: f64,
    pub p1: f64,
}

impl TryFrom<MapSpec> for MapParams {
    type Error = Error;
    fn try_from(s: MapSpec) -> Result<Self> {
        MapParams::new(s.c, s.p0, s.p1)
    }
}

impl From<MapParams> for MapSpec {
    fn from(m: MapParams) -> Self {
        MapSpec { c: m.c, p0: m.p0, p1: m.p1 }
    }
}

impl MapParams {
    pub fn new(c: f64, p0: f64, p1: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParameter { name: "c", reason: "must lie in (0, 1)" });
        }
        if !(p0 >= 1.0 && p0.is_finite()) {
            return Err(Error::InvalidParameter { name: "p0", reason: "must be finite and >= 1" });
        }
        if !(p1 >= 1.0 && p1.is_finite()) {
            return Err(Error::InvalidParameter { name: "p1", reason: "must be finite and >= 1" });
        }
        let a0 = (1.0 - c) / libm::pow(c, 1.0 + p0);
        let a1 = c / libm::pow(1.0 - c, 1.0 + p1);
        let theta_minus = 1.0 / (1.0 + (1.0 + p0) * a0 * libm::pow(c, p0));
        let theta_plus = 1.0 / (1.0 + (1.0 + p1) * a1 * libm::pow(1.0 - c, p1));
        Ok(MapParams {
            c,
            p0,
            p1,
            a0,
            a1,
            theta_plus,
            theta_minus,
            alpha: (1.0 / p0).min(1.0),
            beta: (1.0 / p1).min(1.0),
        })
    }

    /// The symmetric map `c = 1/2`, `p0 = p1 = p`.
    pub fn symmetric(p: f64) -> Result<Self> {
        Self::new(0.5, p, p)
    }

    /// `T(x)`.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { what: "the interval map", value: x });
        }
        Ok(if x <= self.c {
            (x + self.a0 * libm::pow(x, 1.0 + self.p0)).min(1.0)
        } else {
            let y = 1.0 - x;
            (1.0 - (y + self.a1 * libm::pow(y, 1.0 + self.p1))).max(0.0)
        })
    }

    /// Inverse branch `f0 = (T|[0,c])^-1` or `f1 = (T|(c,1])^-1` at `y`.
    pub fn inverse_branch(&self, side: Side, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain { what: "an inverse branch", value: y });
        }
        match side {
            Side::Left => self.branch(Side::Left).preimage_distance(y),
            Side::Right => Ok(1.0 - self.branch(Side::Right).preimage_distance(1.0 - y)?),
        }
    }

    /// Distance-coordinate description of one branch.
    pub fn branch(&self, side: Side) -> Branch {
        match side {
            Side::Left => Branch::new(self.a0, self.p0, self.c, 1.0 - self.c, true),
            Side::Right => Branch::new(self.a1, self.p1, 1.0 - self.c, self.c, false),
        }
    }

    /// `[f0(c), f1(c)]`, the interval separating the two cusps.
    pub fn separating_interval(&self) -> Result<(f64, f64)> {
        Ok((self.inverse_branch(Side::Left, self.c)?, self.inverse_branch(Side::Right, self.c)?))
    }
}

/// One branch in distance coordinates: `d -> d + coef * d^(1+p)`, where `d` is
/// the distance to the branch's fixed point and `edge` is the distance from
/// the fixed point to `c`.
#[derive(Clone, Copy, Debug)]
pub struct Branch {
    pub coef: f64,
    pub p: f64,
    pow_p: Exponent,
    pub edge: f64,
    /// `coef * edge^(1+p)`, the other branch's edge.
    other_edge: f64,
    /// Whether `d == edge` stays on this branch (true for the left branch).
    inclusive: bool,
}

/// Result of one step in distance coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    Stay(f64),
    Cross(f64),
}

impl Branch {
    fn new(coef: f64, p: f64, edge: f64, other_edge: f64, inclusive: bool) -> Self {
        Branch { coef, p, pow_p: Exponent::new(p), edge, other_edge, inclusive }
    }

    /// `coef * d^(1+p)`
    #[inline]
    pub fn increment(&self, d: f64) -> f64 {
        self.coef * d * self.pow_p.apply(d)
    }

    #[inline]
    pub fn stays(&self, next: f64) -> bool {
        if self.inclusive {
            next <= self.edge
        } else {
            next < self.edge
        }
    }

    #[inline]
    pub fn step(&self, d: f64) -> Step {
        let next = d + self.increment(d);
        if self.stays(next) {
            Step::Stay(next)
        } else {
            Step::Cross(self.crossing_distance(d))
        }
    }

    /// Distance of `T(point)` to the other fixed point, for a point at
    /// distance `d` that leaves this branch. Written to avoid cancellation
    /// when `d` is close to `edge`.
    pub fn crossing_distance(&self, d: f64) -> f64 {
        let gap = self.edge - d;
        let direct = self.other_edge + gap - self.increment(d);
        // The direct form loses digits only when the image is near the fixed point.
        let v = if direct > 1e-3 * self.other_edge {
            direct
        } else if d > 0.5 * self.edge {
            let q = 1.0 + self.p;
            // edge^q - d^q = -edge^q * expm1(q * log1p((d - edge)/edge))
            gap - self.other_edge * libm::expm1(q * libm::log1p(-gap / self.edge))
        } else {
            direct
        };
        v.max(0.0)
    }

    /// Solve `d + coef * d^(1+p) = target` for `d` in `[0, edge]`.
    pub fn preimage_distance(&self, target: f64) -> Result<f64> {
        if !(0.0..=self.edge + self.other_edge).contains(&target) {
            return Err(Error::Domain { what: "a branch preimage", value: target });
        }
        if target == 0.0 {
            return Ok(0.0);
        }
        if target == self.edge + self.other_edge {
            return Ok(self.edge);
        }
        let q = 1.0 + self.p;
        let resid = |d: f64| d + self.increment(d) - target;
        let (mut lo, mut hi) = (0.0f64, self.edge.min(target));
        let mut d = (target - self.increment(target)).clamp(lo, hi);
        if d <= 0.0 {
            d = 0.5 * hi;
        }
        for _ in 0..200 {
            let r = resid(d);
            if r == 0.0 {
                return Ok(d);
            }
            if r > 0.0 {
                hi = d;
            } else {
                lo = d;
            }
            let slope = 1.0 + q * self.coef * self.pow_p.apply(d);
            let mut next = d - r / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == d || hi - lo <= f64::EPSILON * hi {
                break;
            }
            d = next;
        }
        if libm::fabs(resid(d)) <= TOL_ROOT * target {
            Ok(d)
        } else {
            Err(Error::Convergence { target })
        }
    }
}

/// Inverse-branch orbits of the endpoints and their partial sums.
///
/// `u[k] = f0^k(1)` and `v[k] = 1 - f1^k(0)`; `u_sum[m]` and `v_sum[m]` hold the
/// sums of the first `m` terms, so they have length `len + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateTable {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub u_sum: Vec<f64>,
    pub v_sum: Vec<f64>,
}

impl IterateTable {
    pub fn build(params: &MapParams, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter { name: "n", reason: "table length must be >= 1" });
        }
        let u = inverse_orbit(&params.branch(Side::Left), n)?;
        let v = inverse_orbit(&params.branch(Side::Right), n)?;
        let u_sum = partial_sums(&u);
        let v_sum = partial_sums(&v);
        Ok(IterateTable { u, v, u_sum, v_sum })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

fn inverse_orbit(branch: &Branch, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut d = 1.0;
    for _ in 0..n {
        out.push(d);
        if d != 0.0 {
            d = branch.preimage_distance(d)?;
            if d < UNDERFLOW {
                d = 0.0;
            }
        }
    }
    Ok(out)
}

fn partial_sums(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &x in xs {
        acc += x;
        out.push(acc);
    }
    out
}

/// An increasing self-map of `[0, kappa]` fixing 0 and lying strictly below the
/// diagonal, the setting for comparing two indifferent fixed points.
pub struct FixedPointFunction<F> {
    f: F,
    kappa: f64,
}

/// Grid size used to check the shape hypotheses.
const SHAPE_GRID: usize = 1000;

impl<F: Fn(f64) -> f64> FixedPointFunction<F> {
    pub fn new(f: F, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter { name: "kappa", reason: "must be positive" });
        }
        if f(0.0) != 0.0 {
            return Err(Error::Hypothesis("f(0) must be 0"));
        }
        let mut prev = 0.0;
        for i in 1..=SHAPE_GRID {
            let x = kappa * i as f64 / SHAPE_GRID as f64;
            let y = f(x);
            if !(y < x && y >= 0.0) {
                return Err(Error::Hypothesis("f must satisfy 0 <= f(x) < x on (0, kappa]"));
            }
            if y < prev {
                return Err(Error::Hypothesis("f must be increasing"));
            }
            prev = y;
        }
        Ok(FixedPointFunction { f, kappa })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// A map branch seen as a fixed-point function in distance coordinates.
pub type BranchFunction = FixedPointFunction<Box<dyn Fn(f64) -> f64 + Send + Sync>>;

impl BranchFunction {
    /// `f0` near 0, or `x -> 1 - f1(1 - x)` near 0 for the right branch.
    pub fn from_branch(params: &MapParams, side: Side) -> Result<Self> {
        let branch = params.branch(side);
        let f = move |x: f64| branch.preimage_distance(x).unwrap_or(f64::NAN);
        FixedPointFunction::new(Box::new(f) as Box<dyn Fn(f64) -> f64 + Send + Sync>, 1.0)
    }
}

/// Ratios `sum_{j<m} g^j(kappa) / sum_{j<m} f^j(kappa)` for `m = 1..=n`.
pub fn compare_partial_sums<F, G>(
    f: &FixedPointFunction<F>,
    g: &FixedPointFunction<G>,
    kappa: f64,
    n: usize,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if !(kappa > 0.0 && kappa <= f.kappa() && kappa <= g.kappa()) {
        return Err(Error::Domain { what: "the common domain of f and g", value: kappa });
    }
    let mut out = Vec::with_capacity(n);
    let (mut xf, mut xg) = (kappa, kappa);
    let (mut sf, mut sg) = (0.0, 0.0);
    for _ in 0..n {
        sf += xf;
        sg += xg;
        out.push(sg / sf);
        xf = if xf < UNDERFLOW { 0.0 } else { f.apply(xf) };
        xg = if xg < UNDERFLOW { 0.0 } else { g.apply(xg) };
    }
    Ok(out)
}
