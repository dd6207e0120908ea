//! Trial-parallel drivers. Every trial owns the stream `(seed, trial)`, and
//! results are collected in trial order, so output does not depend on the
//! number of worker threads.

use occtime_core::chains::{sums_vs_maxima_run, tower_ratio_run, IidProcessSpec, RenewalChainSpec, SumsMaxTrace, TowerTrace};
use occtime_core::orbit::{simulate_trial, CompiledOrbit, OrbitConfig, TrialResult};
use occtime_core::rng::trial_stream;
use occtime_core::Result;
use rayon::prelude::*;

/// Parallel counterpart of `occtime_core::orbit::run_orbits`.
pub fn run_orbits(cfg: &OrbitConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let compiled = CompiledOrbit::new(cfg);
    (0..cfg.n_trials).into_par_iter().map(|t| simulate_trial(cfg, &compiled, t)).collect()
}

pub fn run_towers(spec: &RenewalChainSpec, checkpoints: &[u64], seed: u64, trials: u64) -> Vec<TowerTrace> {
    (0..trials)
        .into_par_iter()
        .map(|t| tower_ratio_run(spec, checkpoints, &mut trial_stream(seed, t)))
        .collect()
}

pub fn run_sums_maxima(spec: &IidProcessSpec, checkpoints: &[u64], seed: u64, trials: u64) -> Vec<SumsMaxTrace> {
    (0..trials)
        .into_par_iter()
        .map(|t| sums_vs_maxima_run(spec, checkpoints, &mut trial_stream(seed, t)))
        .collect()
}
