//! The renewal chain with its tower, and iid realizations of the
//! sums-versus-maxima dichotomy.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regvar::{lex_gt, DiscreteHeavyTail, TailFamily, DEFAULT_CUTOFF};
use crate::rng;
use crate::special::hurwitz_zeta;

/// Verdict on `int a_psi(phi) dP`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Divergent,
    Convergent,
}

/// Exponents `(e0, e1, e2, e3)` with `L(t) ~ t^e0 (ln t)^e1 (lnln t)^e2
/// (lnlnln t)^e3` for the truncated expectation of a catalogue tail.
pub fn growth_exponents(f: &TailFamily) -> [f64; 4] {
    if f.a < 1.0 {
        [1.0 - f.a, -f.b, -f.c, 0.0]
    } else if f.a > 1.0 {
        [0.0; 4]
    } else if f.b < 1.0 {
        [0.0, 1.0 - f.b, -f.c, 0.0]
    } else if f.b > 1.0 {
        [0.0; 4]
    } else if f.c < 1.0 {
        [0.0, 0.0, 1.0 - f.c, 0.0]
    } else if f.c == 1.0 {
        [0.0, 0.0, 0.0, 1.0]
    } else {
        [0.0; 4]
    }
}

/// Bertrand-series verdict on `sum_n P[phi = n] n / L_psi(n)`; no
/// integrability precondition.
pub fn classify_series(phi: &TailFamily, psi: &TailFamily) -> Classification {
    let g = growth_exponents(psi);
    // P[phi = n] n / L_psi(n) = n^-(a + g0) (ln n)^-(b + g1) ...
    let e = [phi.a + g[0], phi.b + g[1], phi.c + g[2], g[3]];
    if lex_gt(&e, &[1.0, 1.0, 1.0, 1.0]) {
        Classification::Convergent
    } else {
        Classification::Divergent
    }
}

/// How `phi_n` and `psi_n` are drawn at each time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// `phi = psi`, one draw per time.
    Identical,
    Independent,
}

/// An iid process `(phi_n, psi_n)` with catalogue tails.
#[derive(Clone, Debug)]
pub struct IidProcessSpec {
    pub phi: Arc<DiscreteHeavyTail>,
    pub psi: Arc<DiscreteHeavyTail>,
    pub coupling: Coupling,
    pub classification: Classification,
}

impl IidProcessSpec {
    pub fn new(
        phi: Arc<DiscreteHeavyTail>,
        psi: Arc<DiscreteHeavyTail>,
        coupling: Coupling,
    ) -> Result<Self> {
        let (Some(fp), Some(fs)) = (phi.family(), psi.family()) else {
            return Err(Error::UnsupportedFamily);
        };
        if coupling == Coupling::Identical && fp != fs {
            return Err(Error::InvalidParameter { name: "coupling", reason: "identical coupling needs phi = psi" });
        }
        let classification = classify_series(&fp, &fs);
        Ok(IidProcessSpec { phi, psi, coupling, classification })
    }

    /// `phi = psi` with the given catalogue tail.
    pub fn identical(family: TailFamily, cutoff: usize) -> Result<Self> {
        let d = Arc::new(DiscreteHeavyTail::from_family(family, cutoff)?);
        Self::new(d.clone(), d, Coupling::Identical)
    }

    pub fn independent(phi: TailFamily, psi: TailFamily, cutoff: usize) -> Result<Self> {
        Self::new(
            Arc::new(DiscreteHeavyTail::from_family(phi, cutoff)?),
            Arc::new(DiscreteHeavyTail::from_family(psi, cutoff)?),
            Coupling::Independent,
        )
    }
}

/// The integral criterion of the dichotomy, for nonintegrable `phi`.
pub fn classify_integral_criterion(spec: &IidProcessSpec) -> Result<Classification> {
    let (Some(fp), Some(fs)) = (spec.phi.family(), spec.psi.family()) else {
        return Err(Error::UnsupportedFamily);
    };
    if fp.integrable() {
        return Err(Error::Hypothesis("phi must have infinite expectation"));
    }
    Ok(classify_series(&fp, &fs))
}

/// Checkpointed path of `R_n = phi_n / sum_{k<n} psi_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumsMaxTrace {
    pub checkpoints: Vec<u64>,
    /// `R_n` at each checkpoint; `None` while the sum is 0.
    pub ratio: Vec<Option<f64>>,
    /// `max_{1 <= m <= n} R_m` at each checkpoint.
    pub running_max: Vec<f64>,
}

/// Simulate `R_n` for `n = 1..=last checkpoint`.
pub fn sums_vs_maxima_run<R: RngCore + ?Sized>(
    spec: &IidProcessSpec,
    checkpoints: &[u64],
    rng: &mut R,
) -> SumsMaxTrace {
    let n_max = checkpoints.last().copied().unwrap_or(0);
    let mut trace = SumsMaxTrace {
        checkpoints: checkpoints.to_vec(),
        ratio: Vec::with_capacity(checkpoints.len()),
        running_max: Vec::with_capacity(checkpoints.len()),
    };
    let mut next_cp = 0usize;
    let mut sum = 0.0f64;
    let mut run_max = 0.0f64;
    // psi_0
    let mut pending = spec.psi.sample(rng);
    // P[phi > run_max * sum] for a stale sum; smaller true sums only lower it.
    let mut cached_bound = 1.0f64;
    let mut refresh = 0u32;
    for n in 1..=n_max {
        sum += pending;
        let at_cp = next_cp < checkpoints.len() && checkpoints[next_cp] == n;
        let r = match spec.coupling {
            Coupling::Identical => {
                let x = spec.psi.sample(rng);
                pending = x;
                ratio_of(x, sum)
            }
            Coupling::Independent => {
                let u = rng::uniform_open0(rng);
                pending = spec.psi.sample(rng);
                if refresh == 0 {
                    cached_bound = spec.phi.survival(libm::floor(run_max * sum));
                    refresh = 256;
                }
                refresh -= 1;
                // phi_n > run_max * sum requires u <= P[phi > floor(run_max * sum)].
                if at_cp || u <= cached_bound || run_max == 0.0 {
                    ratio_of(spec.phi.quantile(u), sum)
                } else {
                    None
                }
            }
        };
        if let Some(r) = r {
            if r > run_max {
                run_max = r;
                refresh = 0;
            }
        }
        while next_cp < checkpoints.len() && checkpoints[next_cp] == n {
            trace.ratio.push(r);
            trace.running_max.push(run_max);
            next_cp += 1;
        }
    }
    while trace.ratio.len() < checkpoints.len() {
        trace.ratio.push(None);
        trace.running_max.push(run_max);
    }
    trace
}

#[inline]
fn ratio_of(x: f64, sum: f64) -> Option<f64> {
    if sum > 0.0 {
        Some(x / sum)
    } else {
        None
    }
}

/// Lifetime law of the renewal chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LifetimeLaw {
    /// `f_k = k^-s / zeta(s)`, `k >= 1`.
    Zeta { s: f64 },
    /// `f_k = pmf[k - 1]`.
    Finite { pmf: Vec<f64> },
}

/// The renewal chain `p_{0,k-1} = f_k`, `p_{k,k-1} = 1`.
#[derive(Clone, Debug)]
pub struct RenewalChainSpec {
    pub law: LifetimeLaw,
    lifetime: Arc<DiscreteHeavyTail>,
    mean: f64,
    /// `sum k f_k < infinity`
    pub finite_mean: bool,
    /// `sum k^2 f_k = infinity`
    pub infinite_second_moment: bool,
}

impl RenewalChainSpec {
    pub fn new(law: LifetimeLaw, cutoff: usize) -> Result<Self> {
        let (lifetime, finite_mean, infinite_second_moment) = match &law {
            LifetimeLaw::Zeta { s } => {
                if !(*s > 2.0) {
                    return Err(Error::Hypothesis("lifetimes must have finite mean (s > 2)"));
                }
                (DiscreteHeavyTail::zeta_lifetime(*s, cutoff)?, true, *s <= 3.0)
            }
            LifetimeLaw::Finite { pmf } => {
                let total: f64 = pmf.iter().sum();
                if pmf.is_empty() || pmf.iter().any(|&p| !(p >= 0.0)) || libm::fabs(total - 1.0) > 1e-12 {
                    return Err(Error::InvalidParameter { name: "pmf", reason: "must be a probability vector" });
                }
                let mut head = Vec::with_capacity(pmf.len() + 1);
                let mut s = 1.0f64;
                head.push(1.0);
                for &p in pmf {
                    s = (s - p).max(0.0);
                    head.push(s);
                }
                *head.last_mut().unwrap() = 0.0;
                (DiscreteHeavyTail::new(head, crate::regvar::TailRule::Zero, None)?, true, false)
            }
        };
        let mean = match &law {
            LifetimeLaw::Zeta { s } => hurwitz_zeta(s - 1.0, 1.0) / hurwitz_zeta(*s, 1.0),
            LifetimeLaw::Finite { .. } => lifetime.truncated_mean(lifetime.cutoff() + 1)?,
        };
        Ok(RenewalChainSpec { law, lifetime: Arc::new(lifetime), mean, finite_mean, infinite_second_moment })
    }

    pub fn zeta(s: f64) -> Result<Self> {
        Self::new(LifetimeLaw::Zeta { s }, DEFAULT_CUTOFF)
    }

    /// `f_m = 1`.
    pub fn deterministic(m: usize) -> Result<Self> {
        let mut pmf = alloc::vec![0.0; m];
        pmf[m - 1] = 1.0;
        Self::new(LifetimeLaw::Finite { pmf }, 0)
    }

    pub fn lifetime(&self) -> &DiscreteHeavyTail {
        &self.lifetime
    }

    /// `E[L] = sum_k k f_k = 1 / mu_0`.
    pub fn mean_lifetime(&self) -> f64 {
        self.mean
    }

    /// `sum_{k >= m} P[L > k]`.
    pub fn tail_sum(&self, m: u64) -> f64 {
        match &self.law {
            LifetimeLaw::Zeta { s } => {
                let q = m as f64 + 1.0;
                ((hurwitz_zeta(s - 1.0, q) - m as f64 * hurwitz_zeta(*s, q)) / hurwitz_zeta(*s, 1.0)).max(0.0)
            }
            LifetimeLaw::Finite { .. } => {
                let k = self.lifetime.cutoff() + 1;
                if m as usize >= k {
                    0.0
                } else {
                    self.mean - self.lifetime.truncated_mean(m as usize).unwrap_or(self.mean)
                }
            }
        }
    }

    /// Invariant probability `mu_k = P[L > k] / E[L]`.
    pub fn stationary_pmf(&self, k: u64) -> f64 {
        self.lifetime.survival(k as f64) / self.mean
    }

    /// Draw `X_0` from the invariant law.
    pub fn sample_stationary<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        let v = rng::uniform_open0(rng) * self.mean;
        // X_0 = min { x : sum_{k > x} P[L > k] < v }
        let k = self.lifetime.cutoff() as u64;
        if self.tail_sum(k + 1) < v {
            let (mut lo, mut hi) = (0u64, k);
            if self.tail_sum(1) < v {
                return 0;
            }
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if self.tail_sum(mid + 1) < v {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
        let (mut lo, mut hi) = (k, 2 * k + 2);
        while self.tail_sum(hi + 1) >= v {
            lo = hi;
            hi = hi.saturating_mul(2);
            if hi == u64::MAX {
                return hi;
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.tail_sum(mid + 1) < v {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// A lifetime `L >= 1`.
    #[inline]
    pub fn sample_lifetime<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        self.lifetime.sample(rng) as u64
    }
}

/// A state `(k, j)` of the tower, `0 <= j <= 2k + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerChainState {
    pub k: u64,
    pub j: u64,
}

impl TowerChainState {
    pub fn in_a(&self) -> bool {
        self.j > 0 && self.j <= self.k
    }

    pub fn in_b(&self) -> bool {
        self.j > self.k + 1
    }

    /// One transition; `lifetime` is consulted only at `(0, 0)`.
    pub fn step(&self, lifetime: impl FnOnce() -> u64) -> TowerChainState {
        if self.k == 0 {
            TowerChainState { k: lifetime() - 1, j: 0 }
        } else if self.j < 2 * self.k + 1 {
            TowerChainState { k: self.k, j: self.j + 1 }
        } else {
            TowerChainState { k: self.k - 1, j: 0 }
        }
    }
}

/// Checkpointed occupation counts of the tower started at `(0, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerTrace {
    pub checkpoints: Vec<u64>,
    pub s_a: Vec<u64>,
    pub s_b: Vec<u64>,
    /// `X_{N_n}`, the base-chain state behind time `n - 1`.
    pub bound: Vec<u64>,
    /// Base-chain steps `N_n`.
    pub base_steps: Vec<u64>,
    /// Phase ends where `|S_n(A) - S_n(B)| > X_{N_n}`.
    pub violations: u64,
}

impl TowerTrace {
    pub fn ratio(&self, i: usize) -> Option<f64> {
        if self.s_b[i] == 0 {
            None
        } else {
            Some(self.s_a[i] as f64 / self.s_b[i] as f64)
        }
    }
}

/// Run the tower from `(0, 0)` one level at a time. Within a level the
/// difference `S(A) - S(B)` is monotone on each of the A and B stretches, so
/// checking the bound at stretch ends checks it at every step.
pub fn tower_ratio_run<R: RngCore + ?Sized>(
    spec: &RenewalChainSpec,
    checkpoints: &[u64],
    rng: &mut R,
) -> TowerTrace {
    let n_max = checkpoints.last().copied().unwrap_or(0);
    let mut tr = TowerTrace {
        checkpoints: checkpoints.to_vec(),
        s_a: Vec::new(),
        s_b: Vec::new(),
        bound: Vec::new(),
        base_steps: Vec::new(),
        violations: 0,
    };
    let mut next = 0usize;
    // Times 0..t have been consumed; s_a, s_b count them.
    let (mut t, mut s_a, mut s_b, mut base) = (0u64, 0u64, 0u64, 0u64);
    let mut level = 0u64;
    let push = |tr: &mut TowerTrace, sa: u64, sb: u64, bound: u64, base: u64| {
        tr.s_a.push(sa);
        tr.s_b.push(sb);
        tr.bound.push(bound);
        tr.base_steps.push(base);
    };
    while next < checkpoints.len() && checkpoints[next] == 0 {
        push(&mut tr, 0, 0, 0, 0);
        next += 1;
    }
    while t < n_max {
        // Level `level` occupies times t .. t + len.
        let k = level;
        let len = if k == 0 { 1 } else { 2 * k + 2 };
        let base_here = if t == 0 { 0 } else { base + 1 };
        while next < checkpoints.len() && checkpoints[next] <= t + len {
            let m = checkpoints[next] - t;
            // m >= 1 states of this level are counted: j = 0..m-1.
            let a = (m - 1).min(k);
            let b = (m - 1).saturating_sub(k + 1);
            push(&mut tr, s_a + a, s_b + b, k, base_here);
            next += 1;
        }
        if k > 0 {
            // End of the A stretch, then end of the level.
            let a_end = (s_a + k).abs_diff(s_b);
            let b_end = (s_a + k).abs_diff(s_b + k);
            if a_end > k || b_end > k {
                tr.violations += 1;
            }
        } else if s_a.abs_diff(s_b) > 0 {
            tr.violations += 1;
        }
        s_a += k;
        s_b += k;
        t += len;
        base = base_here;
        level = if k == 0 { spec.sample_lifetime(rng) - 1 } else { k - 1 };
    }
    tr
}

/// Step-by-step tower simulation checking `|S_n(A) - S_n(B)| <= X_{N_n}` at
/// every `n`; reference for [`tower_ratio_run`].
pub fn tower_ratio_reference<R: RngCore + ?Sized>(
    spec: &RenewalChainSpec,
    checkpoints: &[u64],
    rng: &mut R,
) -> TowerTrace {
    let n_max = checkpoints.last().copied().unwrap_or(0);
    let mut tr = TowerTrace {
        checkpoints: checkpoints.to_vec(),
        s_a: Vec::new(),
        s_b: Vec::new(),
        bound: Vec::new(),
        base_steps: Vec::new(),
        violations: 0,
    };
    let mut state = TowerChainState { k: 0, j: 0 };
    let (mut s_a, mut s_b, mut base, mut x) = (0u64, 0u64, 0u64, 0u64);
    let mut next = 0usize;
    for n in 0..=n_max {
        while next < checkpoints.len() && checkpoints[next] == n {
            tr.s_a.push(s_a);
            tr.s_b.push(s_b);
            tr.bound.push(x);
            tr.base_steps.push(base);
            next += 1;
        }
        if n == n_max {
            break;
        }
        // Count time n.
        if n >= 1 && state.j == 0 {
            base += 1;
        }
        if state.j == 0 {
            x = state.k;
        }
        s_a += state.in_a() as u64;
        s_b += state.in_b() as u64;
        if s_a.abs_diff(s_b) > x {
            tr.violations += 1;
        }
        state = state.step(|| spec.sample_lifetime(rng));
    }
    tr
}

/// `X_n / n` of the base chain at each checkpoint, from a stationary start.
pub fn tanny_check<R: RngCore + ?Sized>(
    spec: &RenewalChainSpec,
    checkpoints: &[u64],
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(checkpoints.len());
    // The chain sits at `x - (n - t)` for n in [t, t + x].
    let mut t = 0u64;
    let mut x = spec.sample_stationary(rng);
    for &n in checkpoints {
        while n > t + x {
            t += x + 1;
            x = spec.sample_lifetime(rng) - 1;
        }
        let state = x - (n - t);
        out.push(if n == 0 { 0.0 } else { state as f64 / n as f64 });
    }
    out
}

/// Occupation counts of base states `0..=kmax` over times `0..n`, from a
/// stationary start.
pub fn base_occupation<R: RngCore + ?Sized>(
    spec: &RenewalChainSpec,
    n: u64,
    kmax: u64,
    rng: &mut R,
) -> Vec<u64> {
    let mut counts = alloc::vec![0u64; kmax as usize + 1];
    let mut t = 0u64;
    let mut x = spec.sample_stationary(rng);
    while t < n {
        // Times t..=t+x visit x, x-1, ..., 0; keep those before n.
        let end = (t + x).min(n - 1);
        // State at time s is x - (s - t); states <= kmax occur for s >= t + x - kmax.
        let first = t + x.saturating_sub(kmax);
        let mut s = first.max(t);
        while s <= end {
            counts[(x - (s - t)) as usize] += 1;
            s += 1;
        }
        t += x + 1;
        x = spec.sample_lifetime(rng) - 1;
    }
    counts
}
