//! One-sided stable laws `G_alpha` (Laplace transform `exp(-t^alpha)`), the
//! normalized Mittag-Leffler laws `Y_alpha = Gamma(1+alpha) * G_alpha^-alpha`,
//! and Kolmogorov-Smirnov distances.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::special::{gamma, integrate, ln_gamma};

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "alpha", reason: "must lie in (0, 1]" })
    }
}

/// Kanter's function
/// `A(u) = [sin(a u)^a sin((1-a) u)^(1-a) / sin u]^(1/(1-a))` in log form.
fn ln_kanter(alpha: f64, u: f64) -> f64 {
    if u <= 0.0 {
        // Limit u -> 0+: alpha^(alpha/(1-alpha)) * (1 - alpha).
        return alpha / (1.0 - alpha) * libm::log(alpha) + libm::log(1.0 - alpha);
    }
    let beta = 1.0 - alpha;
    (alpha * libm::log(libm::sin(alpha * u)) + beta * libm::log(libm::sin(beta * u))
        - libm::log(libm::sin(u)))
        / beta
}

/// The one-sided stable law of order `alpha`; `alpha = 1` is the point mass at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableSpec {
    alpha: f64,
}

impl StableSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        check_order(alpha)?;
        Ok(StableSpec { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// One draw, using one uniform angle and one exponential.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.alpha == 1.0 {
            return 1.0;
        }
        let u = PI * rng::uniform_open0(rng);
        let e = rng::exponential(rng);
        let a = self.alpha;
        libm::exp((1.0 - a) / a * (ln_kanter(a, u) - libm::log(e)))
    }

    /// `P[G <= x] = (1/pi) * int_0^pi exp(-A(u) x^(-a/(1-a))) du`.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.alpha == 1.0 {
            return if x >= 1.0 { 1.0 } else { 0.0 };
        }
        if x <= 0.0 {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        let a = self.alpha;
        let ln_s = -a / (1.0 - a) * libm::log(x);
        stable_integral(a, ln_s)
    }
}

/// `(1/pi) int_0^pi exp(-A(u) e^ln_s) du`.
fn stable_integral(alpha: f64, ln_s: f64) -> f64 {
    let f = |u: f64| {
        if u >= PI {
            return 0.0;
        }
        let z = ln_kanter(alpha, u) + ln_s;
        if z > 700.0 {
            0.0
        } else {
            libm::exp(-libm::exp(z))
        }
    };
    (integrate(&f, 0.0, PI, 1e-9) / PI).clamp(0.0, 1.0)
}

/// The normalized Mittag-Leffler law of order `alpha`; mean 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlSpec {
    alpha: f64,
}

impl MlSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        check_order(alpha)?;
        Ok(MlSpec { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn stable(&self) -> StableSpec {
        StableSpec { alpha: self.alpha }
    }

    /// One draw: `Gamma(1+a) (E / A(U))^(1-a)`, the stable draw transformed.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.alpha == 1.0 {
            return 1.0;
        }
        let g = self.stable().sample(rng);
        gamma(1.0 + self.alpha) * libm::pow(g, -self.alpha)
    }

    /// `E[Y^n] = n! Gamma(1+a)^n / Gamma(1+n a)`.
    pub fn moment(&self, n: u32) -> f64 {
        libm::exp(self.ln_moment(n))
    }

    /// Natural log of [`MlSpec::moment`], for orders where the moment overflows.
    pub fn ln_moment(&self, n: u32) -> f64 {
        if n == 0 || self.alpha == 1.0 {
            return 0.0;
        }
        let n = n as f64;
        ln_gamma(n + 1.0) + n * ln_gamma(1.0 + self.alpha) - ln_gamma(1.0 + n * self.alpha)
    }

    /// `P[Y <= y] = P[G >= (Gamma(1+a)/y)^(1/a)]`.
    pub fn cdf(&self, y: f64) -> f64 {
        if self.alpha == 1.0 {
            return if y >= 1.0 { 1.0 } else { 0.0 };
        }
        if y <= 0.0 {
            return 0.0;
        }
        if y == f64::INFINITY {
            return 1.0;
        }
        let a = self.alpha;
        // (y / Gamma(1+a))^(1/(1-a)) is the exponent scale of the stable integral.
        let ln_s = (libm::log(y) - ln_gamma(1.0 + a)) / (1.0 - a);
        1.0 - stable_integral(a, ln_s)
    }
}

/// A sorted sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData { have: 0, need: 1 });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter { name: "values", reason: "NaN in sample" });
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(EmpiricalDistribution { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fraction of the sample `<= x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Lower empirical quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.len();
        let idx = libm::ceil(p.clamp(0.0, 1.0) * n as f64) as usize;
        self.values[idx.clamp(1, n) - 1]
    }

    pub fn median(&self) -> f64 {
        let n = self.len();
        if n % 2 == 1 {
            self.values[n / 2]
        } else {
            0.5 * (self.values[n / 2 - 1] + self.values[n / 2])
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_n - F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(emp: &EmpiricalDistribution, cdf: F) -> f64 {
    let n = emp.len() as f64;
    emp.values.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (xs, ys) = (a.values(), b.values());
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max(libm::fabs(i as f64 / n - j as f64 / m));
    }
    d
}
