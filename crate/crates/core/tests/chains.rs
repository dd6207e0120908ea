use occtime_core::chains::*;
use occtime_core::regvar::{DiscreteHeavyTail, TailFamily};
use occtime_core::rng::trial_stream;
use occtime_core::Error;

fn decades(lo: u64, hi: u64) -> Vec<u64> {
    let mut v = Vec::new();
    let mut k = lo;
    while k <= hi {
        v.push(k);
        k *= 10;
    }
    v
}

#[test]
fn tower_ratio_converges_and_bound_holds() {
    let spec = RenewalChainSpec::zeta(2.5).unwrap();
    assert!(spec.finite_mean && spec.infinite_second_moment);
    let cps = decades(1000, 1_000_000);
    let mut close = 0;
    for seed in 0..50 {
        let tr = tower_ratio_run(&spec, &cps, &mut trial_stream(11, seed));
        assert_eq!(tr.violations, 0);
        for i in 0..cps.len() {
            assert!(tr.s_a[i].abs_diff(tr.s_b[i]) <= tr.bound[i]);
            assert!(tr.s_a[i] + tr.s_b[i] <= cps[i]);
        }
        if (tr.ratio(cps.len() - 1).unwrap() - 1.0).abs() <= 0.05 {
            close += 1;
        }
    }
    assert!(close >= 45, "{close}/50");
}

#[test]
fn tower_fast_path_agrees_with_steps() {
    let spec = RenewalChainSpec::zeta(2.5).unwrap();
    let cps: Vec<u64> = (0..=40).map(|i| i * 5000).collect();
    for seed in 0..5 {
        let fast = tower_ratio_run(&spec, &cps, &mut trial_stream(3, seed));
        let slow = tower_ratio_reference(&spec, &cps, &mut trial_stream(3, seed));
        assert_eq!(fast, slow);
    }
}

#[test]
fn invariant_measure_frequencies() {
    let spec = RenewalChainSpec::zeta(2.5).unwrap();
    let (reps, n, kmax) = (60u64, 100_000u64, 10u64);
    let mut freq = vec![Vec::new(); kmax as usize + 1];
    for r in 0..reps {
        let counts = base_occupation(&spec, n, kmax, &mut trial_stream(21, r));
        for (k, c) in counts.iter().enumerate() {
            freq[k].push(*c as f64 / n as f64);
        }
    }
    for (k, f) in freq.iter().enumerate() {
        let mean = f.iter().sum::<f64>() / reps as f64;
        let var = f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        let want = spec.stationary_pmf(k as u64);
        assert!((mean - want).abs() <= 3.0 * se, "k={k}: {mean} vs {want} (se {se})");
    }
}

#[test]
fn stationary_pmf_sums_to_one() {
    let spec = RenewalChainSpec::zeta(3.5).unwrap();
    let head: f64 = (0..1000).map(|k| spec.stationary_pmf(k)).sum();
    let rest = spec.tail_sum(1000) / spec.mean_lifetime();
    assert!((head + rest - 1.0).abs() < 1e-9);
}

#[test]
fn tanny_ratio_vanishes() {
    let spec = RenewalChainSpec::zeta(2.5).unwrap();
    let cps = decades(100, 1_000_000);
    let mut small = 0;
    for seed in 0..100 {
        let r = tanny_check(&spec, &cps, &mut trial_stream(5, seed));
        if *r.last().unwrap() <= 0.01 {
            small += 1;
        }
    }
    assert!(small >= 95, "{small}/100");
}

#[test]
fn lifetime_sampler_tail_frequencies() {
    let spec = RenewalChainSpec::zeta(2.5).unwrap();
    let n = 200_000;
    let mut rng = trial_stream(8, 0);
    let draws: Vec<u64> = (0..n).map(|_| spec.sample_lifetime(&mut rng)).collect();
    assert!(draws.iter().all(|&l| l >= 1));
    for &k in &[1u64, 2, 3, 5, 10, 30, 100] {
        let p = spec.lifetime().survival(k as f64);
        let hat = draws.iter().filter(|&&l| l > k).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hat - p).abs() <= 3.0 * se, "k={k}: {hat} vs {p}");
    }
}

#[test]
fn heavy_tail_sampler_tail_frequencies() {
    let d = DiscreteHeavyTail::from_family(TailFamily::power(0.5).unwrap(), 100_000).unwrap();
    let n = 200_000;
    let mut rng = trial_stream(9, 0);
    let draws: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
    for &k in &[1.0, 3.0, 10.0, 100.0, 1000.0] {
        let p = d.survival(k);
        let hat = draws.iter().filter(|&&x| x > k).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hat - p).abs() <= 3.0 * se, "k={k}: {hat} vs {p}");
    }
}

#[test]
fn divergent_identical_pair_running_max_grows() {
    let spec = IidProcessSpec::identical(TailFamily::power(0.5).unwrap(), 100_000).unwrap();
    assert_eq!(spec.classification, Classification::Divergent);
    let cps = decades(10, 1_000_000);
    let mut hits = 0;
    for seed in 0..40 {
        let tr = sums_vs_maxima_run(&spec, &cps, &mut trial_stream(31, seed));
        assert!(tr.running_max.windows(2).all(|w| w[1] >= w[0]));
        if *tr.running_max.last().unwrap() > 100.0 {
            hits += 1;
        }
    }
    // An independent Pareto simulation puts the hit rate near 0.6.
    assert!(hits >= 18, "{hits}/40");
}

#[test]
fn convergent_pair_settles() {
    let phi = TailFamily::new(1.0, 3.0, 0.0).unwrap();
    let psi = TailFamily::power(1.0).unwrap();
    let spec = IidProcessSpec::independent(phi, psi, 100_000).unwrap();
    assert_eq!(spec.classification, Classification::Convergent);
    let cps: Vec<u64> = (0..=10).map(|i| 1_000_000 + i * 900_000).collect();
    let (mut flat, mut small) = (0, 0);
    for seed in 0..40 {
        let tr = sums_vs_maxima_run(&spec, &cps, &mut trial_stream(41, seed));
        if tr.running_max.first() == tr.running_max.last() {
            flat += 1;
        }
        if tr.ratio.last().unwrap().unwrap() <= 0.1 {
            small += 1;
        }
    }
    assert!(flat >= 32, "{flat}/40");
    assert!(small >= 36, "{small}/40");
}

#[test]
fn integral_criterion_needs_nonintegrable_phi() {
    let ex_phi = TailFamily::new(1.0, 0.0, 1.0).unwrap();
    let ex_psi = TailFamily::power(1.0).unwrap();
    let spec = IidProcessSpec::independent(ex_phi, ex_psi, 10_000).unwrap();
    assert_eq!(classify_integral_criterion(&spec).unwrap(), Classification::Divergent);

    let integrable = IidProcessSpec::independent(TailFamily::new(1.0, 3.0, 0.0).unwrap(), ex_psi, 10_000).unwrap();
    assert!(matches!(classify_integral_criterion(&integrable), Err(Error::Hypothesis(_))));
}

#[test]
fn renewal_rejects_infinite_mean() {
    assert!(matches!(RenewalChainSpec::zeta(2.0), Err(Error::Hypothesis(_))));
    assert!(RenewalChainSpec::new(LifetimeLaw::Finite { pmf: vec![0.5, 0.4] }, 0).is_err());
}
