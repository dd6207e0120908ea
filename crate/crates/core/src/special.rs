//! Small special-function helpers on top of `libm`.

/// Gamma function.
#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Natural log of |Gamma(x)|.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// The Darling-Kac constant `Gamma(2 - alpha) * Gamma(1 + alpha)`.
#[inline]
pub fn darling_kac_factor(alpha: f64) -> f64 {
    gamma(2.0 - alpha) * gamma(1.0 + alpha)
}

/// `x^n` for a small integer exponent by repeated squaring.
#[inline]
pub fn powi(mut x: f64, mut n: u32) -> f64 {
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= x;
        }
        x *= x;
        n >>= 1;
    }
    acc
}

/// A fixed real exponent with fast paths for integers and half-integers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Int(u32),
    /// `n + 1/2`
    Half(u32),
    Real(f64),
}

impl Exponent {
    pub fn new(p: f64) -> Self {
        let twice = 2.0 * p;
        if p >= 0.0 && p <= 64.0 && libm::floor(p) == p {
            Exponent::Int(p as u32)
        } else if p >= 0.0 && p <= 64.0 && libm::floor(twice) == twice {
            Exponent::Half(libm::floor(p) as u32)
        } else {
            Exponent::Real(p)
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Exponent::Int(n) => powi(x, n),
            Exponent::Half(n) => powi(x, n) * libm::sqrt(x),
            Exponent::Real(p) => libm::pow(x, p),
        }
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || libm::fabs(delta) <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Hurwitz zeta `sum_{k>=0} (q+k)^-s` for `s > 1`, `q > 0`, by Euler-Maclaurin.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    // B_2j / (2j)!
    const B: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
        1.0 / 74724249600.0,
    ];
    let n = 12usize;
    let mut acc = 0.0;
    for k in 0..n {
        acc += libm::pow(q + k as f64, -s);
    }
    let x = q + n as f64;
    let xs = libm::pow(x, -s);
    acc += x * xs / (s - 1.0) + 0.5 * xs;
    // term j: B_2j/(2j)! * s(s+1)...(s+2j-2) * x^(-s-2j+1)
    let mut rising = s;
    let mut pw = xs / x;
    for (j, b) in B.iter().enumerate() {
        acc += b * rising * pw;
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        pw /= x * x;
    }
    acc
}
