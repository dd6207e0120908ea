//! Experiment runners. Each turns a resolved [`ExperimentConfig`] into CSV
//! tables and a JSON summary.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

use occtime_core::chains::{classify_integral_criterion, Coupling, IidProcessSpec, RenewalChainSpec};
use occtime_core::distributions::{ks_statistic, EmpiricalDistribution, MlSpec};
use occtime_core::maps::{compare_partial_sums, FixedPointFunction, IterateTable, MapParams};
use occtime_core::orbit::{
    dk_experiment, mass_escape, ratio_experiment, verify_duality, InitialLaw, OrbitConfig, Region, TrialResult, YSide,
};
use occtime_core::regvar::{
    integer_grid, normalizing_sequence_cusps, oscillation_check, OscillatingPair, TailFamily, DEFAULT_MAX_LN_T,
};

use crate::config::{ExperimentConfig, Kind};
use crate::error::{LabError, LabResult};
use crate::parallel;

/// A CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        Table { name, header: header.to_vec(), rows: Vec::new() }
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }
}

/// A summary value compared with a declared threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, relation: "<=", threshold, pass: value <= threshold }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, relation: ">=", threshold, pass: value >= threshold }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub kind: Kind,
    /// The resolved configuration; running it again reproduces `tables`.
    pub config: ExperimentConfig,
    pub tables: Vec<Table>,
    pub summary: Map<String, Value>,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl ExperimentResult {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

struct Output {
    tables: Vec<Table>,
    summary: Map<String, Value>,
    checks: Vec<Check>,
}

impl Output {
    fn new() -> Self {
        Output { tables: Vec::new(), summary: Map::new(), checks: Vec::new() }
    }

    fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.into(), v.into());
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Validate, resolve and run.
pub fn run(cfg: &ExperimentConfig) -> LabResult<ExperimentResult> {
    let cfg = cfg.resolve()?;
    let kind = cfg.kind.expect("resolved configs carry a kind");
    let start = Instant::now();
    let out = match kind {
        Kind::Dk => dk(&cfg)?,
        Kind::Ratio => ratio(&cfg)?,
        Kind::Duality => duality(&cfg)?,
        Kind::MassEscape => escape(&cfg)?,
        Kind::IterateSums => iterate_sums(&cfg)?,
        Kind::Oscillating => oscillating(&cfg)?,
        Kind::SumsMaxima => sums_maxima(&cfg)?,
        Kind::Renewal => renewal(&cfg)?,
        Kind::CompareSums => compare_sums(&cfg)?,
    };
    Ok(ExperimentResult {
        kind,
        config: cfg,
        tables: out.tables,
        summary: out.summary,
        checks: out.checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn map_of(cfg: &ExperimentConfig) -> LabResult<MapParams> {
    Ok(MapParams::new(cfg.c.unwrap(), cfg.p0.unwrap(), cfg.p1.unwrap())?)
}

fn checkpoints(cfg: &ExperimentConfig) -> Vec<u64> {
    cfg.checkpoints.as_ref().map(|v| v.iter().map(|c| c.0).collect()).unwrap_or_default()
}

fn orbit_config(cfg: &ExperimentConfig) -> LabResult<OrbitConfig> {
    let mut o = OrbitConfig::new(map_of(cfg)?, cfg.n_steps.unwrap().0, cfg.n_trials.unwrap().0, cfg.seed.unwrap().0)?;
    o.checkpoints = checkpoints(cfg);
    o.record_returns = cfg.record_returns.unwrap_or(false);
    if let Some([lo, hi]) = cfg.m {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(LabError::Validation("m must satisfy 0 <= lo < hi <= 1".into()));
        }
        o.m = Region::open(lo, hi);
    }
    Ok(o)
}

fn traces_table(results: &[TrialResult]) -> Table {
    let mut t = Table::new("traces", &["trial", "n", "S_A", "S_B", "S_M", "R", "R_runmax", "R_runmin", "mid_fraction"]);
    for r in results {
        for c in &r.trace.checkpoints {
            let mid = if c.n == 0 { None } else { Some(c.s_mid as f64 / c.n as f64) };
            t.rows.push(vec![
                r.trace.trial.to_string(),
                c.n.to_string(),
                c.s_a.to_string(),
                c.s_b.to_string(),
                c.s_m.to_string(),
                opt(c.ratio),
                opt(c.run_max),
                opt(c.run_min),
                opt(mid),
            ]);
        }
    }
    t
}

fn returns_table(results: &[TrialResult]) -> Option<Table> {
    if results.iter().all(|r| r.returns.is_none()) {
        return None;
    }
    let mut t = Table::new("returns", &["trial", "visit", "side", "phi", "censored"]);
    for r in results {
        for (i, v) in r.returns.iter().flat_map(|x| x.visits.iter()).enumerate() {
            let side = match v.side {
                YSide::A => "Y_A",
                YSide::B => "Y_B",
            };
            t.rows.push(vec![
                r.trace.trial.to_string(),
                i.to_string(),
                side.into(),
                v.phi.to_string(),
                v.censored.to_string(),
            ]);
        }
    }
    Some(t)
}

fn push_traces(out: &mut Output, results: &[TrialResult]) {
    out.tables.push(traces_table(results));
    if let Some(t) = returns_table(results) {
        out.tables.push(t);
    }
    let flow: u64 = results.iter().map(|r| r.trace.stagnation_steps).sum();
    out.put("flow_steps", flow);
}

/// Index of the first checkpoint at or beyond `n`.
fn checkpoint_at(cps: &[u64], n: u64) -> Option<usize> {
    cps.iter().position(|&k| k >= n)
}

fn dk(cfg: &ExperimentConfig) -> LabResult<Output> {
    let o = orbit_config(cfg)?;
    if o.map.p1 != 1.0 {
        return Err(occtime_core::Error::Hypothesis("the right cusp must be barely infinite (p1 = 1)").into());
    }
    let grid: Vec<u64> = o.checkpoints.iter().copied().filter(|&k| k > 0).collect();
    let top = *grid.last().ok_or_else(|| LabError::Validation("dk needs a positive checkpoint".into()))?;
    let table = IterateTable::build(&o.map, top as usize)?;
    let seq = normalizing_sequence_cusps(&o.map, &table, &grid)?;
    let results = parallel::run_orbits(&o)?;
    let res = dk_experiment(&results, &o.map, &seq)?;
    let ml = MlSpec::new(o.map.alpha)?;

    let mut out = Output::new();
    let mut norm = Table::new("normalizer", &["n", "c_n", "c_n_over_n"]);
    let mut by_n = Vec::new();
    for (i, &n) in o.checkpoints.iter().enumerate() {
        let Some(c_n) = seq.at(n as f64) else { continue };
        norm.rows.push(vec![n.to_string(), num(c_n), num(c_n / n as f64)]);
        let sample = EmpiricalDistribution::new(
            results.iter().map(|r| r.trace.checkpoints[i].s_m as f64 / c_n).collect(),
        )?;
        by_n.push((n, ks_statistic(&sample, |y| ml.cdf(y)), sample.median()));
    }
    let mut sample = Table::new("sample", &["trial", "S_M", "normalized"]);
    for r in &results {
        let s_m = r.trace.last().map_or(0, |c| c.s_m);
        sample.rows.push(vec![r.trace.trial.to_string(), s_m.to_string(), num(s_m as f64 / res.c_n)]);
    }
    out.tables.push(norm);
    out.tables.push(sample);
    push_traces(&mut out, &results);

    let q = |p: f64| res.sample.quantile(p);
    out.put("alpha", o.map.alpha);
    out.put("n", res.n);
    out.put("c_n", res.c_n);
    out.put("ks", res.ks);
    out.put("median", res.sample.median());
    out.put("mean", res.sample.mean());
    out.put("quantiles", json!({"0.1": q(0.1), "0.25": q(0.25), "0.5": q(0.5), "0.75": q(0.75), "0.9": q(0.9)}));
    out.put("ks_by_n", by_n.iter().map(|&(n, ks, _)| json!([n, ks])).collect::<Vec<_>>());
    out.put("median_by_n", by_n.iter().map(|&(n, _, m)| json!([n, m])).collect::<Vec<_>>());
    if o.map.alpha < 1.0 {
        out.checks.push(Check::at_most("ks", res.ks, 0.15));
        if let Some(i) = checkpoint_at(&grid, 10_000).filter(|&i| i + 1 < by_n.len()) {
            out.put("ks_early", by_n[i].1);
            out.checks.push(Check::at_most("ks_minus_ks_early", res.ks - by_n[i].1, 0.0));
        }
    } else {
        let m = res.sample.median();
        out.checks.push(Check::at_least("median", m, 0.7));
        out.checks.push(Check::at_most("median", m, 1.3));
    }
    Ok(out)
}

fn ratio(cfg: &ExperimentConfig) -> LabResult<Output> {
    let mut o = orbit_config(cfg)?;
    if let (Some(a), Some(b)) = (cfg.delta_a, cfg.delta_b) {
        o = o.with_targets(a, b)?;
    }
    let results = parallel::run_orbits(&o)?;
    let summaries = ratio_experiment(&results);
    let mut out = Output::new();
    let mut t = Table::new("ratio_summary", &["n", "median_R", "both_divergent", "both_divergent_after_burn_in"]);
    for s in &summaries {
        t.rows.push(vec![
            s.n.to_string(),
            num(s.median_ratio()),
            num(s.both_divergent_fraction(5.0, 0.2, false)),
            num(s.both_divergent_fraction(5.0, 0.2, true)),
        ]);
    }
    out.tables.push(t);
    push_traces(&mut out, &results);
    let last = summaries.last().ok_or_else(|| LabError::Validation("no checkpoints".into()))?;
    let frac = last.both_divergent_fraction(5.0, 0.2, false);
    out.put("n", last.n);
    out.put("median_R", last.median_ratio());
    out.put("both_divergent", frac);
    out.put("median_by_n", summaries.iter().map(|s| json!([s.n, s.median_ratio()])).collect::<Vec<_>>());
    if o.map.p0 == o.map.p1 {
        out.checks.push(Check::at_least("both_divergent", frac, 0.8));
    } else if let Some(i) = checkpoint_at(&o.checkpoints, 10_000).filter(|&i| i + 1 < summaries.len()) {
        let (early, late) = (summaries[i].median_ratio(), last.median_ratio());
        let drop = if o.map.p0 < o.map.p1 { early / late } else { late / early };
        out.put("median_drop", drop);
        out.checks.push(Check::at_least("median_drop", drop, 5.0));
    }
    Ok(out)
}

fn duality(cfg: &ExperimentConfig) -> LabResult<Output> {
    let mut o = orbit_config(cfg)?;
    o.initial = InitialLaw::UniformOn(o.m.clone());
    o.record_m_visits = true;
    let results = parallel::run_orbits(&o)?;
    let mut violations = 0u64;
    for r in &results {
        violations += verify_duality(&r.trace, r.m_visits.as_ref().expect("recorded"), &o.m)?;
    }
    let mut out = Output::new();
    push_traces(&mut out, &results);
    out.put("violations", violations);
    out.put("pairs_checked", results.iter().map(|r| r.trace.checkpoints.len() as u64).sum::<u64>());
    out.checks.push(Check::at_most("violations", violations as f64, 0.0));
    Ok(out)
}

fn escape(cfg: &ExperimentConfig) -> LabResult<Output> {
    let o = orbit_config(cfg)?.with_middle(cfg.epsilon.unwrap())?;
    let results = parallel::run_orbits(&o)?;
    let frac = mass_escape(&results);
    let mut out = Output::new();
    let mut t = Table::new("mass_escape", &["n", "mid_fraction"]);
    for &(n, f) in &frac {
        t.rows.push(vec![n.to_string(), num(f)]);
    }
    out.tables.push(t);
    push_traces(&mut out, &results);
    if let Some(&(n, f)) = frac.last() {
        out.put("n", n);
        out.put("mid_fraction", f);
    }
    out.put("decreasing", frac.windows(2).all(|w| w[1].1 <= w[0].1));
    Ok(out)
}

/// `S_n` over its leading term: `a S_n / ln n` for exponent 1, otherwise
/// `S_n / ((alpha / a)^alpha n^(1 - alpha) / (1 - alpha))` with `alpha = 1/p`.
fn sum_ratio(sum: f64, a: f64, p: f64, n: f64) -> f64 {
    if p == 1.0 {
        a * sum / n.ln()
    } else {
        let alpha = 1.0 / p;
        sum / ((alpha / a).powf(alpha) * n.powf(1.0 - alpha) / (1.0 - alpha))
    }
}

fn iterate_sums(cfg: &ExperimentConfig) -> LabResult<Output> {
    let map = map_of(cfg)?;
    let n = cfg.n_steps.unwrap().0;
    let table = IterateTable::build(&map, n as usize)?;
    let mut t = Table::new("iterates", &["k", "u_k", "v_k", "U_k", "V_k"]);
    for k in std::iter::once(0).chain(integer_grid(1000, n - 1, 200)) {
        let k = k as usize;
        t.rows.push(vec![
            k.to_string(),
            num(table.u[k]),
            num(table.v[k]),
            num(table.u_sum[k]),
            num(table.v_sum[k]),
        ]);
    }
    let mut out = Output::new();
    out.tables.push(t);
    let nn = n as usize;
    let (ru, rv) = (sum_ratio(table.u_sum[nn], map.a0, map.p0, n as f64), sum_ratio(table.v_sum[nn], map.a1, map.p1, n as f64));
    out.put("n", n);
    out.put("U_n", table.u_sum[nn]);
    out.put("V_n", table.v_sum[nn]);
    out.put("U_ratio", ru);
    out.put("V_ratio", rv);
    for (name, p, r) in [("U_ratio", map.p0, ru), ("V_ratio", map.p1, rv)] {
        let tol = if p == 1.0 { 0.25 } else { 0.10 };
        out.checks.push(Check::at_most(&format!("|{name} - 1|"), (r - 1.0).abs(), tol));
    }
    Ok(out)
}

fn oscillating(cfg: &ExperimentConfig) -> LabResult<Output> {
    let levels = cfg.levels.unwrap().0 as usize;
    let pair = OscillatingPair::construct(levels, cfg.depth.unwrap(), DEFAULT_MAX_LN_T)?;
    let mut out = Output::new();
    let mut t = Table::new("breakpoints", &["m", "ln_t", "K_A", "K_B", "ln_L_A", "ln_L_B"]);
    for (m, s, ka, kb, la, lb) in pair.rows() {
        t.rows.push(vec![m.to_string(), num(s), num(ka), num(kb), num(la), num(lb)]);
    }
    out.tables.push(t);

    let grid = pair.breakpoint_grid(2 * levels, 200);
    let ln_c = pair.ln_normalizer(&grid)?;
    let mut t = Table::new("normalizer", &["ln_n", "ln_c_n", "c_n_over_n"]);
    for (s, lc) in grid.iter().zip(&ln_c) {
        t.rows.push(vec![num(*s), num(*lc), num((lc - s).exp())]);
    }
    out.tables.push(t);

    let mut failed = 0u64;
    for n in 1..=levels {
        let (even, odd) = (pair.ln_breakpoint(2 * n + 2), pair.ln_breakpoint(2 * n + 1));
        let ln_n = (n as f64).ln();
        if pair.ln_l_a(even) < ln_n + pair.ln_l_b(even) {
            failed += 1;
        }
        if pair.ln_l_a(odd) > pair.ln_l_b(odd) - ln_n {
            failed += 1;
        }
    }
    let (lo, hi) = oscillation_check(&pair, &grid)?;
    out.put("levels", levels as u64);
    out.put("inequality_failures", failed);
    out.put("min_c_over_n", lo);
    out.put("max_c_over_n", hi);
    out.checks.push(Check::at_most("inequality_failures", failed as f64, 0.0));
    out.checks.push(Check::at_most("min_c_over_n", lo, 0.05));
    out.checks.push(Check::at_least("max_c_over_n", hi, 0.5));
    Ok(out)
}

fn tail(v: [f64; 3]) -> LabResult<TailFamily> {
    TailFamily::new(v[0], v[1], v[2]).map_err(|_| LabError::Validation(format!("tail {v:?} needs a > 0 and finite b, c")))
}

fn sums_maxima(cfg: &ExperimentConfig) -> LabResult<Output> {
    let (phi, psi) = (tail(cfg.phi.unwrap())?, tail(cfg.psi.unwrap())?);
    let cutoff = cfg.cutoff.unwrap().0 as usize;
    let spec = match cfg.coupling.unwrap() {
        Coupling::Identical => {
            if phi != psi {
                return Err(LabError::Validation("identical coupling needs phi = psi".into()));
            }
            IidProcessSpec::identical(phi, cutoff)?
        }
        Coupling::Independent => IidProcessSpec::independent(phi, psi, cutoff)?,
    };
    let cps = checkpoints(cfg);
    let traces = parallel::run_sums_maxima(&spec, &cps, cfg.seed.unwrap().0, cfg.n_trials.unwrap().0);
    let mut t = Table::new("trajectories", &["trial", "n", "ratio", "runmax"]);
    for (trial, tr) in traces.iter().enumerate() {
        for i in 0..cps.len() {
            t.rows.push(vec![trial.to_string(), cps[i].to_string(), opt(tr.ratio[i]), num(tr.running_max[i])]);
        }
    }
    let mut out = Output::new();
    out.tables.push(t);
    let k = traces.len() as f64;
    let big = traces.iter().filter(|tr| *tr.running_max.last().unwrap() > 100.0).count() as f64 / k;
    let small = traces.iter().filter(|tr| tr.ratio.last().unwrap().is_some_and(|r| r <= 0.1)).count() as f64 / k;
    let decade = checkpoint_at(&cps, cps.last().unwrap() / 10).unwrap();
    let flat = traces.iter().filter(|tr| tr.running_max[decade] == *tr.running_max.last().unwrap()).count() as f64 / k;
    let verdict = match classify_integral_criterion(&spec) {
        Ok(c) => json!(c),
        Err(e) => json!(e.to_string()),
    };
    out.put("classification", json!(spec.classification));
    out.put("integral_criterion", verdict);
    out.put("runmax_above_100", big);
    out.put("ratio_at_most_0.1", small);
    out.put("runmax_flat_last_decade", flat);
    match spec.classification {
        occtime_core::chains::Classification::Divergent => out.checks.push(Check::at_least("runmax_above_100", big, 0.9)),
        occtime_core::chains::Classification::Convergent => {
            out.checks.push(Check::at_least("ratio_at_most_0.1", small, 0.9));
            out.checks.push(Check::at_least("runmax_flat_last_decade", flat, 0.8));
        }
    }
    Ok(out)
}

fn renewal(cfg: &ExperimentConfig) -> LabResult<Output> {
    let spec = RenewalChainSpec::zeta(cfg.zeta.unwrap())?;
    let cps = checkpoints(cfg);
    let traces = parallel::run_towers(&spec, &cps, cfg.seed.unwrap().0, cfg.n_trials.unwrap().0);
    let mut t = Table::new("trajectories", &["trial", "n", "state", "S_A", "S_B", "ratio"]);
    let mut bound_failures = 0u64;
    for (trial, tr) in traces.iter().enumerate() {
        for i in 0..cps.len() {
            if tr.s_a[i].abs_diff(tr.s_b[i]) > tr.bound[i] {
                bound_failures += 1;
            }
            t.rows.push(vec![
                trial.to_string(),
                cps[i].to_string(),
                tr.bound[i].to_string(),
                tr.s_a[i].to_string(),
                tr.s_b[i].to_string(),
                opt(tr.ratio(i)),
            ]);
        }
    }
    let mut out = Output::new();
    out.tables.push(t);
    let violations: u64 = traces.iter().map(|tr| tr.violations).sum::<u64>() + bound_failures;
    let last = cps.len() - 1;
    let close = traces.iter().filter(|tr| tr.ratio(last).is_some_and(|r| (r - 1.0).abs() <= 0.05)).count() as f64
        / traces.len() as f64;
    out.put("finite_mean", spec.finite_mean);
    out.put("infinite_second_moment", spec.infinite_second_moment);
    out.put("violations", violations);
    out.put("ratio_within_0.05", close);
    out.checks.push(Check::at_most("violations", violations as f64, 0.0));
    out.checks.push(Check::at_least("ratio_within_0.05", close, 0.9));
    Ok(out)
}

fn compare_sums(cfg: &ExperimentConfig) -> LabResult<Output> {
    let ([a, q], [b, r]) = (cfg.f.unwrap(), cfg.g.unwrap());
    let kappa = cfg.kappa.unwrap();
    let f = FixedPointFunction::new(move |x: f64| x - a * x.powf(q), kappa)?;
    let g = FixedPointFunction::new(move |x: f64| x - b * x.powf(r), kappa)?;
    let n = cfg.n_steps.unwrap().0;
    let ratios = compare_partial_sums(&f, &g, kappa, n as usize)?;
    let mut t = Table::new("partial_sums", &["m", "ratio"]);
    for m in integer_grid(1000, n, 200) {
        t.rows.push(vec![m.to_string(), num(ratios[m as usize - 1])]);
    }
    let mut out = Output::new();
    out.tables.push(t);
    let last = *ratios.last().unwrap();
    out.put("m", n);
    out.put("ratio", last);
    if q == r && q > 1.0 {
        // Both orbits decay like ((p - 1) coef m)^(-1/(p - 1)).
        let limit = (a / b).powf(1.0 / (q - 1.0));
        out.put("limit", limit);
        out.put("relative_error", last / limit - 1.0);
    }
    Ok(out)
}
