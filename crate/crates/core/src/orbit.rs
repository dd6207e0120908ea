//! Long orbits of the two-branch map: occupation counts at checkpoints,
//! running extremes of `S_n(A)/S_n(B)`, returns to the crossing set, and
//! visits to a set `M`.
//!
//! A point is carried as `(side, d)` with `d` its distance to the fixed point
//! of its branch. On a branch `d` increases every step, so region membership
//! only changes when `d` passes one of finitely many breakpoints; the inner
//! loop compares against the next breakpoint instead of testing regions.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::distributions::{ks_statistic, EmpiricalDistribution, MlSpec};
use crate::error::{Error, Result};
use crate::maps::{Branch, MapParams, Side};
use crate::regvar::{NormalizingSequence, TruncatedExpectation};
use crate::rng::{self, trial_stream};

/// Below this relative increment `coef d^p` a branch is advanced along its
/// continuous flow instead of step by step.
pub const FLOW_THRESHOLD: f64 = 1.0 / (1u64 << 40) as f64;

/// Interval of `[0, 1]` with open or closed ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "yes")]
    pub lo_closed: bool,
    #[serde(default)]
    pub hi_closed: bool,
}

fn yes() -> bool {
    true
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        Interval { lo, hi, lo_closed, hi_closed }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    fn overlaps(&self, o: &Interval) -> bool {
        let (lo, lo_c) = if self.lo > o.lo || (self.lo == o.lo && !self.lo_closed) {
            (self.lo, self.lo_closed)
        } else {
            (o.lo, o.lo_closed)
        };
        let (hi, hi_c) = if self.hi < o.hi || (self.hi == o.hi && !self.hi_closed) {
            (self.hi, self.hi_closed)
        } else {
            (o.hi, o.hi_closed)
        };
        !Interval::new(lo, hi, lo_c, hi_c).is_empty()
    }
}

/// A finite union of intervals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region {
    pub intervals: Vec<Interval>,
}

impl Region {
    pub fn empty() -> Self {
        Region { intervals: Vec::new() }
    }

    pub fn single(iv: Interval) -> Self {
        Region { intervals: alloc::vec![iv] }
    }

    /// `[lo, hi)`
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self::single(Interval::new(lo, hi, true, false))
    }

    /// `(lo, hi]`
    pub fn open_closed(lo: f64, hi: f64) -> Self {
        Self::single(Interval::new(lo, hi, false, true))
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::single(Interval::new(lo, hi, false, false))
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::single(Interval::new(lo, hi, true, true))
    }

    pub fn whole() -> Self {
        Self::closed(0.0, 1.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(x))
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.iter().all(|iv| iv.is_empty())
    }

    pub fn overlaps(&self, o: &Region) -> bool {
        self.intervals.iter().any(|a| o.intervals.iter().any(|b| !a.is_empty() && !b.is_empty() && a.overlaps(b)))
    }

    /// Lebesgue measure, assuming disjoint intervals clipped to `[0, 1]`.
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|iv| (iv.hi.min(1.0) - iv.lo.max(0.0)).max(0.0)).sum()
    }
}

/// Law of the initial point.
#[derive(Clone)]
pub enum InitialLaw {
    Uniform,
    /// Uniform on a region, normalized.
    UniformOn(Region),
    Point(f64),
    /// Rejection sampling of a density bounded by `bound` on `[0, 1]`.
    Density { density: Arc<dyn Fn(f64) -> f64 + Send + Sync>, bound: f64 },
}

impl fmt::Debug for InitialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialLaw::Uniform => write!(f, "Uniform"),
            InitialLaw::UniformOn(r) => write!(f, "UniformOn({r:?})"),
            InitialLaw::Point(x) => write!(f, "Point({x})"),
            InitialLaw::Density { bound, .. } => write!(f, "Density {{ bound: {bound} }}"),
        }
    }
}

impl InitialLaw {
    /// A point `(side, d)`.
    pub fn sample<R: RngCore + ?Sized>(&self, c: f64, rng: &mut R) -> Result<(Side, f64)> {
        let x = match self {
            InitialLaw::Uniform => rng::uniform(rng),
            InitialLaw::Point(x) => *x,
            InitialLaw::UniformOn(region) => {
                let total = region.length();
                if !(total > 0.0) {
                    return Err(Error::InvalidParameter { name: "initial", reason: "region has zero length" });
                }
                let mut u = rng::uniform(rng) * total;
                let mut x = f64::NAN;
                for iv in &region.intervals {
                    let (lo, hi) = (iv.lo.max(0.0), iv.hi.min(1.0));
                    let len = (hi - lo).max(0.0);
                    if u < len {
                        x = lo + u;
                        if !iv.contains(x) {
                            // Open end hit exactly; the event has probability 0.
                            x = 0.5 * (lo + hi);
                        }
                        break;
                    }
                    u -= len;
                }
                if x.is_nan() {
                    let iv = region.intervals.last().unwrap();
                    x = 0.5 * (iv.lo + iv.hi);
                }
                x
            }
            InitialLaw::Density { density, bound } => {
                let mut tries = 0u32;
                loop {
                    let x = rng::uniform(rng);
                    if rng::uniform(rng) * bound <= density(x) {
                        break x;
                    }
                    tries += 1;
                    if tries > 1_000_000 {
                        return Err(Error::InvalidParameter { name: "initial", reason: "density rejection failed" });
                    }
                }
            }
        };
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { what: "an initial point", value: x });
        }
        Ok(if x <= c { (Side::Left, x) } else { (Side::Right, 1.0 - x) })
    }
}

/// Experiment configuration of the orbit engine.
#[derive(Clone, Debug)]
pub struct OrbitConfig {
    pub map: MapParams,
    pub n_steps: u64,
    pub n_trials: u64,
    pub seed: u64,
    pub checkpoints: Vec<u64>,
    pub a: Region,
    pub b: Region,
    pub m: Region,
    pub y: Region,
    /// The middle interval `(eps, 1 - eps)` tracked for mass escape.
    pub middle: Region,
    pub initial: InitialLaw,
    /// Second set of ratio extremes restricted to `n >= burn_in`.
    pub burn_in: u64,
    pub record_returns: bool,
    pub record_m_visits: bool,
}

/// `{10^2, 10^3, ..} ∪ {n}` up to `n`.
pub fn geometric_checkpoints(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 100u64;
    while k < n {
        out.push(k);
        k = k.saturating_mul(10);
    }
    out.push(n);
    out
}

impl OrbitConfig {
    /// Defaults: `A = [0, f0(c))`, `B = (f1(c), 1]`, `Y = [f0(c), f1(c)]`,
    /// `M = (c, 1)`, uniform initial law, geometric checkpoints.
    pub fn new(map: MapParams, n_steps: u64, n_trials: u64, seed: u64) -> Result<Self> {
        let (y0, y1) = map.separating_interval()?;
        Ok(OrbitConfig {
            map,
            n_steps,
            n_trials,
            seed,
            checkpoints: geometric_checkpoints(n_steps),
            a: Region::half_open(0.0, y0),
            b: Region::open_closed(y1, 1.0),
            m: Region::open(map.c, 1.0),
            y: Region::closed(y0, y1),
            middle: Region::open(0.1, 0.9),
            initial: InitialLaw::Uniform,
            burn_in: 10_000,
            record_returns: false,
            record_m_visits: false,
        })
    }

    /// `A = [0, delta_a)`, `B = (1 - delta_b, 1]`.
    pub fn with_targets(mut self, delta_a: f64, delta_b: f64) -> Result<Self> {
        for (name, d) in [("delta_a", delta_a), ("delta_b", delta_b)] {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidParameter { name, reason: "must lie in (0, 1)" });
            }
        }
        self.a = Region::half_open(0.0, delta_a);
        self.b = Region::open_closed(1.0 - delta_b, 1.0);
        Ok(self)
    }

    /// Track `(eps, 1 - eps)`.
    pub fn with_middle(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::InvalidParameter { name: "epsilon", reason: "must lie in (0, 1/2)" });
        }
        self.middle = Region::open(eps, 1.0 - eps);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter { name: "checkpoints", reason: "must be strictly increasing" });
        }
        if self.checkpoints.last().is_some_and(|&k| k > self.n_steps) {
            return Err(Error::InvalidParameter { name: "checkpoints", reason: "must not exceed n_steps" });
        }
        if self.a.overlaps(&self.b) {
            return Err(Error::InvalidParameter { name: "targets", reason: "A and B must be disjoint" });
        }
        Ok(())
    }
}

const R_A: usize = 0;
const R_B: usize = 1;
const R_M: usize = 2;
const R_Y: usize = 3;
const R_MID: usize = 4;
const REGIONS: usize = 5;

/// Regions as `d`-intervals on one side.
#[derive(Clone, Debug)]
struct SideRegions {
    intervals: [Vec<Interval>; REGIONS],
    breakpoints: Vec<f64>,
}

impl SideRegions {
    fn compile(regions: [&Region; REGIONS], side: Side, c: f64) -> Self {
        let mut intervals: [Vec<Interval>; REGIONS] = Default::default();
        let mut breakpoints = Vec::new();
        for (r, region) in regions.iter().enumerate() {
            for iv in &region.intervals {
                let d_iv = match side {
                    Side::Left => *iv,
                    Side::Right => Interval::new(1.0 - iv.hi, 1.0 - iv.lo, iv.hi_closed, iv.lo_closed),
                };
                if d_iv.is_empty() {
                    continue;
                }
                for b in [d_iv.lo, d_iv.hi] {
                    if b > 0.0 && b <= c.max(1.0 - c) {
                        breakpoints.push(b);
                    }
                }
                intervals[r].push(d_iv);
            }
        }
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        SideRegions { intervals, breakpoints }
    }

    #[inline]
    fn mask(&self, d: f64) -> u8 {
        let mut m = 0u8;
        for (r, ivs) in self.intervals.iter().enumerate() {
            if ivs.iter().any(|iv| iv.contains(d)) {
                m |= 1 << r;
            }
        }
        m
    }

    /// Smallest breakpoint `>= d`.
    #[inline]
    fn next_breakpoint(&self, d: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b < d);
        self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY)
    }
}

/// The configuration compiled for the inner loop.
#[derive(Clone, Debug)]
pub struct CompiledOrbit {
    branches: [Branch; 2],
    /// Exclusive upper bound on `d` for staying on each side.
    stay_below: [f64; 2],
    sides: [SideRegions; 2],
}

fn side_index(s: Side) -> usize {
    match s {
        Side::Left => 0,
        Side::Right => 1,
    }
}

fn other(s: Side) -> Side {
    match s {
        Side::Left => Side::Right,
        Side::Right => Side::Left,
    }
}

impl CompiledOrbit {
    pub fn new(cfg: &OrbitConfig) -> Self {
        let regions = [&cfg.a, &cfg.b, &cfg.m, &cfg.y, &cfg.middle];
        let left = cfg.map.branch(Side::Left);
        let right = cfg.map.branch(Side::Right);
        CompiledOrbit {
            branches: [left, right],
            // The left branch keeps d == edge; the right one does not.
            stay_below: [next_up(left.edge), right.edge],
            sides: [
                SideRegions::compile(regions, Side::Left, cfg.map.c),
                SideRegions::compile(regions, Side::Right, cfg.map.c),
            ],
        }
    }

    fn mask(&self, side: Side, d: f64) -> u8 {
        self.sides[side_index(side)].mask(d)
    }
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

/// Occupation statistics at one checkpoint `n` (times `0..n`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub n: u64,
    pub s_a: u64,
    pub s_b: u64,
    pub s_m: u64,
    pub s_y: u64,
    pub s_mid: u64,
    /// Crossing-set visits among times `0..n`.
    pub y_visits: u64,
    pub ratio: Option<f64>,
    pub run_max: Option<f64>,
    pub run_min: Option<f64>,
    /// Extremes over `burn_in <= m <= n`.
    pub run_max_burn: Option<f64>,
    pub run_min_burn: Option<f64>,
}

/// One simulated orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationTrace {
    pub trial: u64,
    pub initial_side: Side,
    pub initial_distance: f64,
    pub checkpoints: Vec<CheckpointStats>,
    /// Steps advanced along the continuous flow.
    pub stagnation_steps: u64,
    pub stagnation_jumps: u64,
}

impl OccupationTrace {
    pub fn initial_point(&self) -> f64 {
        match self.initial_side {
            Side::Left => self.initial_distance,
            Side::Right => 1.0 - self.initial_distance,
        }
    }

    pub fn last(&self) -> Option<&CheckpointStats> {
        self.checkpoints.last()
    }
}

/// Side of a crossing-set visit: `Y_A` is the part of the right component
/// mapped into the left one, `Y_B` the reverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum YSide {
    #[serde(rename = "Y_A")]
    A,
    #[serde(rename = "Y_B")]
    B,
}

/// A visit to the crossing set and the time to the next one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnVisit {
    pub side: YSide,
    pub time: u64,
    pub phi: u64,
    /// The orbit ended first; `phi` is a lower bound.
    pub censored: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReturnRecord {
    pub visits: Vec<ReturnVisit>,
}

impl ReturnRecord {
    /// Complete (uncensored) return times on a side.
    pub fn phis(&self, side: YSide) -> impl Iterator<Item = u64> + '_ {
        self.visits.iter().filter(move |v| v.side == side && !v.censored).map(|v| v.phi)
    }

    /// Whether sides strictly alternate.
    pub fn alternates(&self) -> bool {
        self.visits.windows(2).all(|w| w[0].side != w[1].side)
    }
}

/// Maximal runs `[start, start + len)` of times in `M`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MVisits {
    pub runs: Vec<(u64, u64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trace: OccupationTrace,
    pub returns: Option<ReturnRecord>,
    pub m_visits: Option<MVisits>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Extremes {
    max: Option<f64>,
    min: Option<f64>,
}

impl Extremes {
    #[inline]
    fn offer_max(&mut self, r: f64) {
        self.max = Some(self.max.map_or(r, |m| m.max(r)));
    }

    #[inline]
    fn offer_min(&mut self, r: f64) {
        self.min = Some(self.min.map_or(r, |m| m.min(r)));
    }
}

struct Recorder<'a> {
    cfg: &'a OrbitConfig,
    counts: [u64; REGIONS],
    /// Start of the current constant-mask run.
    run_start: u64,
    mask: u8,
    all: Extremes,
    burn: Extremes,
    next_cp: usize,
    stats: Vec<CheckpointStats>,
    y_visits: u64,
    last_cross: Option<(YSide, u64)>,
    returns: Option<ReturnRecord>,
    m_visits: Option<MVisits>,
    m_run_start: Option<u64>,
}

impl<'a> Recorder<'a> {
    fn flush(&mut self, t: u64) {
        let len = t - self.run_start;
        if len > 0 {
            for r in 0..REGIONS {
                if self.mask & (1 << r) != 0 {
                    self.counts[r] += len;
                }
            }
        }
        self.run_start = t;
    }

    #[inline]
    fn ratio(&self) -> Option<f64> {
        let (a, b) = (self.counts[R_A], self.counts[R_B]);
        if a >= 1 && b >= 1 {
            Some(a as f64 / b as f64)
        } else {
            None
        }
    }

    fn offer(&mut self, t: u64, max: bool, min: bool) {
        if let Some(r) = self.ratio() {
            if max {
                self.all.offer_max(r);
            }
            if min {
                self.all.offer_min(r);
            }
            if t >= self.cfg.burn_in {
                if max {
                    self.burn.offer_max(r);
                }
                if min {
                    self.burn.offer_min(r);
                }
            }
        }
    }

    /// The point at time `t` has mask `new`.
    fn set_mask(&mut self, t: u64, new: u8) {
        if new == self.mask {
            return;
        }
        self.flush(t);
        let old = self.mask;
        let bit = |m: u8, r: usize| m & (1 << r) != 0;
        // A run of A ends at t: R_t is a local maximum; B: a local minimum.
        if bit(old, R_A) && !bit(new, R_A) {
            self.offer(t, true, false);
        }
        if bit(old, R_B) && !bit(new, R_B) {
            self.offer(t, false, true);
        }
        // R first defined at t + 1.
        let first_b = bit(new, R_B) && self.counts[R_B] == 0 && self.counts[R_A] >= 1;
        let first_a = bit(new, R_A) && self.counts[R_A] == 0 && self.counts[R_B] >= 1;
        if first_a || first_b {
            let (a, b) = (self.counts[R_A] + first_a as u64, self.counts[R_B] + first_b as u64);
            let r = a as f64 / b as f64;
            self.all.offer_max(r);
            self.all.offer_min(r);
            if t + 1 >= self.cfg.burn_in {
                self.burn.offer_max(r);
                self.burn.offer_min(r);
            }
        }
        if let Some(mv) = self.m_visits.as_mut() {
            match (bit(old, R_M), bit(new, R_M)) {
                (false, true) => self.m_run_start = Some(t),
                (true, false) => {
                    let s = self.m_run_start.take().unwrap_or(0);
                    mv.runs.push((s, t - s));
                }
                _ => {}
            }
        }
        self.mask = new;
    }

    /// Record every checkpoint `<= t` and the burn-in time.
    fn checkpoint(&mut self, t: u64) {
        self.flush(t);
        if t == self.cfg.burn_in {
            self.offer(t, true, true);
        }
        while self.next_cp < self.cfg.checkpoints.len() && self.cfg.checkpoints[self.next_cp] == t {
            self.offer(t, true, true);
            self.stats.push(CheckpointStats {
                n: t,
                s_a: self.counts[R_A],
                s_b: self.counts[R_B],
                s_m: self.counts[R_M],
                s_y: self.counts[R_Y],
                s_mid: self.counts[R_MID],
                y_visits: self.y_visits,
                ratio: self.ratio(),
                run_max: self.all.max,
                run_min: self.all.min,
                run_max_burn: self.burn.max,
                run_min_burn: self.burn.min,
            });
            self.next_cp += 1;
        }
    }

    /// The point at time `t` leaves its side at the next step.
    fn cross(&mut self, t: u64, from: Side) {
        let side = match from {
            Side::Right => YSide::A,
            Side::Left => YSide::B,
        };
        self.y_visits += 1;
        if let Some(rec) = self.returns.as_mut() {
            if let Some((s, t0)) = self.last_cross {
                rec.visits.push(ReturnVisit { side: s, time: t0, phi: t - t0, censored: false });
            }
        }
        self.last_cross = Some((side, t));
    }

    fn next_event(&self) -> u64 {
        let cp = self.cfg.checkpoints.get(self.next_cp).copied().unwrap_or(u64::MAX);
        let burn = if self.cfg.burn_in > self.run_start { self.cfg.burn_in } else { u64::MAX };
        cp.min(burn).min(self.cfg.n_steps)
    }
}

/// Simulate trial `trial` of `cfg`.
pub fn simulate_trial(cfg: &OrbitConfig, compiled: &CompiledOrbit, trial: u64) -> Result<TrialResult> {
    let mut rng = trial_stream(cfg.seed, trial);
    let (side, d) = cfg.initial.sample(cfg.map.c, &mut rng)?;
    Ok(simulate_from(cfg, compiled, trial, side, d))
}

/// Simulate an orbit started at `(side, d)`.
pub fn simulate_from(cfg: &OrbitConfig, k: &CompiledOrbit, trial: u64, side0: Side, d0: f64) -> TrialResult {
    let mut rec = Recorder {
        cfg,
        counts: [0; REGIONS],
        run_start: 0,
        mask: 0,
        all: Extremes::default(),
        burn: Extremes::default(),
        next_cp: 0,
        stats: Vec::with_capacity(cfg.checkpoints.len()),
        y_visits: 0,
        last_cross: None,
        returns: if cfg.record_returns { Some(ReturnRecord::default()) } else { None },
        m_visits: if cfg.record_m_visits { Some(MVisits::default()) } else { None },
        m_run_start: None,
    };
    let n = cfg.n_steps;
    let (mut side, mut d) = (side0, d0);
    let mut t = 0u64;
    let mut stagnation_steps = 0u64;
    let mut stagnation_jumps = 0u64;
    rec.set_mask(0, k.mask(side, d));
    rec.checkpoint(0);

    'outer: loop {
        let si = side_index(side);
        let br = &k.branches[si];
        let regions = &k.sides[si];
        let mut nb = regions.next_breakpoint(d);
        // Walk this side until crossing.
        loop {
            let ev = rec.next_event();
            if t >= ev {
                rec.checkpoint(t);
                if t >= n {
                    break 'outer;
                }
                continue;
            }
            let budget = ev - t;
            if d == 0.0 {
                // Fixed point.
                t += budget;
                continue;
            }
            if br.increment(d) < FLOW_THRESHOLD * d {
                let target = libm::pow(FLOW_THRESHOLD / br.coef, 1.0 / br.p).min(nb);
                let (jump, d_new) = flow_jump(br, d, target, budget);
                stagnation_steps += jump;
                stagnation_jumps += 1;
                t += jump;
                d = d_new;
                if d >= nb {
                    rec.set_mask(t, regions.mask(d));
                    nb = regions.next_breakpoint(d);
                }
                continue;
            }
            let lim = k.stay_below[si].min(nb);
            let (steps, d_last, exited) = run_kernel(br, d, lim, budget);
            t += steps;
            d = d_last;
            if !exited {
                continue;
            }
            // d_last stays below lim; the next step leaves the side or passes nb.
            let next = d + br.increment(d);
            if br.stays(next) {
                t += 1;
                d = next;
                rec.set_mask(t, regions.mask(d));
                nb = regions.next_breakpoint(d);
                continue;
            }
            // Time t is a crossing-set visit; T(x_t) is on the other side.
            rec.cross(t, side);
            let d_other = br.crossing_distance(d);
            t += 1;
            side = other(side);
            d = d_other;
            rec.set_mask(t, k.mask(side, d));
            continue 'outer;
        }
    }
    // Close open runs at n.
    rec.flush(n);
    if let Some(mv) = rec.m_visits.as_mut() {
        if let Some(s) = rec.m_run_start.take() {
            mv.runs.push((s, n - s));
        }
    }
    if let (Some(r), Some((s, t0))) = (rec.returns.as_mut(), rec.last_cross) {
        r.visits.push(ReturnVisit { side: s, time: t0, phi: n - t0, censored: true });
    }
    TrialResult {
        trace: OccupationTrace {
            trial,
            initial_side: side0,
            initial_distance: d0,
            checkpoints: rec.stats,
            stagnation_steps,
            stagnation_jumps,
        },
        returns: rec.returns,
        m_visits: rec.m_visits,
    }
}

/// Advance along `x' = coef x^(1+p)` from `d` towards `target`, at most
/// `budget` steps. Returns the steps taken and the new distance.
fn flow_jump(br: &Branch, d: f64, target: f64, budget: u64) -> (u64, f64) {
    let (p, coef) = (br.p, br.coef);
    let inv_d = libm::pow(d, -p);
    let inv_t = libm::pow(target, -p);
    if !inv_d.is_finite() {
        return (budget, d);
    }
    let need = libm::ceil(((inv_d - inv_t) / (p * coef)).max(1.0));
    let steps = if need >= budget as f64 { budget } else { need as u64 };
    let rest = inv_d - p * coef * steps as f64;
    let d_new = if rest > 0.0 { libm::pow(rest, -1.0 / p) } else { target };
    (steps, d_new.max(d))
}

/// Iterate `d -> d + coef d^(1+p)` while the result stays below `lim`, at
/// most `budget` steps. Returns `(steps, d, exited)`; when `exited` the next
/// iterate would reach `lim`.
#[inline]
fn run_kernel(br: &Branch, d: f64, lim: f64, budget: u64) -> (u64, f64, bool) {
    use crate::special::Exponent;
    let coef = br.coef;
    match crate::special::Exponent::new(br.p) {
        Exponent::Int(1) => kernel(d, lim, budget, |x| x + coef * x * x),
        Exponent::Int(2) => kernel(d, lim, budget, |x| x + coef * x * (x * x)),
        Exponent::Int(3) => kernel(d, lim, budget, |x| {
            let x2 = x * x;
            x + coef * x * (x2 * x)
        }),
        Exponent::Half(0) => kernel(d, lim, budget, |x| x + coef * x * libm::sqrt(x)),
        Exponent::Half(1) => kernel(d, lim, budget, |x| x + coef * x * (x * libm::sqrt(x))),
        _ => kernel(d, lim, budget, |x| x + br.increment(x)),
    }
}

#[inline(always)]
fn kernel<F: Fn(f64) -> f64>(mut d: f64, lim: f64, budget: u64, f: F) -> (u64, f64, bool) {
    let mut i = 0u64;
    while i < budget {
        let next = f(d);
        if !(next < lim) {
            return (i, d, true);
        }
        d = next;
        i += 1;
    }
    (i, d, false)
}

/// Step-by-step reference simulation without breakpoint bookkeeping; used to
/// cross-check [`simulate_from`].
pub fn reference_counts(cfg: &OrbitConfig, side0: Side, d0: f64) -> Vec<[u64; 5]> {
    let compiled = CompiledOrbit::new(cfg);
    let mut counts = [0u64; 5];
    let mut out = Vec::new();
    let (mut side, mut d) = (side0, d0);
    let mut next_cp = 0;
    for t in 0..=cfg.n_steps {
        while next_cp < cfg.checkpoints.len() && cfg.checkpoints[next_cp] == t {
            out.push(counts);
            next_cp += 1;
        }
        if t == cfg.n_steps {
            break;
        }
        let m = compiled.mask(side, d);
        for (r, c) in counts.iter_mut().enumerate() {
            *c += ((m >> r) & 1) as u64;
        }
        let br = cfg.map.branch(side);
        match br.step(d) {
            crate::maps::Step::Stay(x) => d = x,
            crate::maps::Step::Cross(x) => {
                side = other(side);
                d = x;
            }
        }
    }
    out
}

/// Run all trials sequentially, in trial order.
pub fn run_orbits(cfg: &OrbitConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let compiled = CompiledOrbit::new(cfg);
    (0..cfg.n_trials).map(|i| simulate_trial(cfg, &compiled, i)).collect()
}

/// Count checkpoint pairs `(k, n)` violating `S_k(M) > n <=> phi_{M,n} < k`,
/// with `phi_{M,n}` the time of the `(n+1)`-th visit to `M` rebuilt from the
/// visit runs, for `n` in the checkpoints and `S_k - 1`, `S_k`.
pub fn verify_duality(trace: &OccupationTrace, visits: &MVisits, m: &Region) -> Result<u64> {
    if !m.contains(trace.initial_point()) {
        return Err(Error::Hypothesis("the orbit must start in M"));
    }
    // Return times phi_M along the visit sequence.
    let mut returns: Vec<u64> = Vec::new();
    let mut prev: Option<u64> = None;
    for &(start, len) in &visits.runs {
        for s in start..start + len {
            if let Some(p) = prev {
                returns.push(s - p);
            }
            prev = Some(s);
        }
    }
    let mut prefix = Vec::with_capacity(returns.len() + 1);
    let mut acc = 0u64;
    prefix.push(0u64);
    for &r in &returns {
        acc += r;
        prefix.push(acc);
    }
    // phi_{M,n}; beyond the record it exceeds the orbit length.
    let phi = |n: u64| prefix.get(n as usize).copied().unwrap_or(u64::MAX);
    let mut violations = 0u64;
    let ks: Vec<(u64, u64)> = trace.checkpoints.iter().map(|c| (c.n, c.s_m)).collect();
    for &(k, s_k) in &ks {
        let mut ns: Vec<u64> = ks.iter().map(|&(n, _)| n).collect();
        ns.push(s_k);
        if s_k > 0 {
            ns.push(s_k - 1);
        }
        for n in ns {
            if (s_k > n) != (phi(n) < k) {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

/// `L^(t) = sum_{side visits} min(phi, t) / (all visits)` on `grid`,
/// regularized to a concave majorant. Censored visits count with their lower
/// bound.
pub fn empirical_truncated_expectation<'a, I>(records: I, side: YSide, grid: &[f64]) -> Result<TruncatedExpectation>
where
    I: IntoIterator<Item = &'a ReturnRecord>,
{
    let mut phis: Vec<u64> = Vec::new();
    let mut total = 0u64;
    for rec in records {
        total += rec.visits.len() as u64;
        phis.extend(rec.visits.iter().filter(|v| v.side == side).map(|v| v.phi));
    }
    if phis.len() < 1000 {
        return Err(Error::InsufficientData { have: phis.len(), need: 1000 });
    }
    phis.sort_unstable();
    let mut prefix = Vec::with_capacity(phis.len() + 1);
    let mut acc = 0.0f64;
    prefix.push(0.0);
    for &p in &phis {
        acc += p as f64;
        prefix.push(acc);
    }
    let values = grid
        .iter()
        .map(|&t| {
            let below = phis.partition_point(|&p| (p as f64) < t);
            (prefix[below] + t * (phis.len() - below) as f64) / total as f64
        })
        .collect();
    TruncatedExpectation::regularized(grid.to_vec(), values, phis.len() as f64 / total as f64)
}

/// Normalized occupation times `S_n(M)/c(n)` at the last checkpoint.
#[derive(Clone, Debug)]
pub struct DkResult {
    pub n: u64,
    pub c_n: f64,
    pub sample: EmpiricalDistribution,
    pub ks: f64,
}

/// Compare `S_n(M)/c(n)` with the Mittag-Leffler law of order `alpha`.
pub fn dk_experiment(results: &[TrialResult], map: &MapParams, normalizer: &NormalizingSequence) -> Result<DkResult> {
    if map.p1 != 1.0 {
        return Err(Error::Hypothesis("the right cusp must be barely infinite (p1 = 1)"));
    }
    let n = results
        .first()
        .and_then(|r| r.trace.last())
        .map(|c| c.n)
        .ok_or(Error::InsufficientData { have: 0, need: 1 })?;
    let c_n = normalizer
        .at(n as f64)
        .ok_or(Error::OutOfRange { value: n as f64, lo: normalizer.n[0], hi: *normalizer.n.last().unwrap() })?;
    let values = results.iter().map(|r| r.trace.last().map_or(0.0, |c| c.s_m as f64 / c_n)).collect();
    let sample = EmpiricalDistribution::new(values)?;
    let ml = MlSpec::new(map.alpha)?;
    let ks = ks_statistic(&sample, |y| ml.cdf(y));
    Ok(DkResult { n, c_n, sample, ks })
}

/// Per-trial ratio extremes at one checkpoint index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub n: u64,
    pub run_max: Vec<Option<f64>>,
    pub run_min: Vec<Option<f64>>,
    pub ratio: Vec<Option<f64>>,
    pub run_max_burn: Vec<Option<f64>>,
    pub run_min_burn: Vec<Option<f64>>,
}

impl RatioSummary {
    /// Fraction of trials with `max >= hi` and `min <= lo`.
    pub fn both_divergent_fraction(&self, hi: f64, lo: f64, burn: bool) -> f64 {
        let (mx, mn) = if burn { (&self.run_max_burn, &self.run_min_burn) } else { (&self.run_max, &self.run_min) };
        let hits = mx.iter().zip(mn).filter(|(a, b)| a.is_some_and(|a| a >= hi) && b.is_some_and(|b| b <= lo)).count();
        hits as f64 / mx.len().max(1) as f64
    }

    /// Median of `R_n`, undefined ratios counted as `+inf`.
    pub fn median_ratio(&self) -> f64 {
        let mut v: Vec<f64> = self.ratio.iter().map(|r| r.unwrap_or(f64::INFINITY)).collect();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        if k == 0 {
            return f64::NAN;
        }
        if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        }
    }
}

/// Ratio extremes across trials at every checkpoint.
pub fn ratio_experiment(results: &[TrialResult]) -> Vec<RatioSummary> {
    let Some(first) = results.first() else { return Vec::new() };
    (0..first.trace.checkpoints.len())
        .map(|i| {
            let at = |f: fn(&CheckpointStats) -> Option<f64>| results.iter().map(|r| f(&r.trace.checkpoints[i])).collect();
            RatioSummary {
                n: first.trace.checkpoints[i].n,
                run_max: at(|c| c.run_max),
                run_min: at(|c| c.run_min),
                ratio: at(|c| c.ratio),
                run_max_burn: at(|c| c.run_max_burn),
                run_min_burn: at(|c| c.run_min_burn),
            }
        })
        .collect()
}

/// Mean fraction of time in the middle interval at each checkpoint.
pub fn mass_escape(results: &[TrialResult]) -> Vec<(u64, f64)> {
    let Some(first) = results.first() else { return Vec::new() };
    (0..first.trace.checkpoints.len())
        .map(|i| {
            let n = first.trace.checkpoints[i].n;
            let mean = results
                .iter()
                .map(|r| {
                    let c = &r.trace.checkpoints[i];
                    if c.n == 0 {
                        1.0
                    } else {
                        c.s_mid as f64 / c.n as f64
                    }
                })
                .sum::<f64>()
                / results.len() as f64;
            (n, mean)
        })
        .collect()
}
