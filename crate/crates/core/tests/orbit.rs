use occtime_core::distributions::{ks_two_sample, EmpiricalDistribution};
use occtime_core::maps::{IterateTable, MapParams};
use occtime_core::orbit::*;
use occtime_core::regvar::{geometric_grid, normalizing_sequence_cusps};
use occtime_core::Error;

fn symmetric() -> MapParams {
    MapParams::symmetric(1.0).unwrap()
}

#[test]
fn symmetric_orbits_live_near_the_fixed_points() {
    let cfg = OrbitConfig::new(symmetric(), 1_000_000, 100, 1).unwrap();
    let runs = run_orbits(&cfg).unwrap();
    let mean = runs
        .iter()
        .map(|r| {
            let c = r.trace.last().unwrap();
            (c.s_a + c.s_b) as f64 / c.n as f64
        })
        .sum::<f64>()
        / runs.len() as f64;
    assert!(mean >= 0.9, "{mean}");
}

#[test]
fn traces_are_monotone_and_partition_time() {
    let map = MapParams::new(0.5, 1.5, 3.0).unwrap();
    let mut cfg = OrbitConfig::new(map, 200_000, 20, 2).unwrap();
    cfg.middle = cfg.y.clone();
    for r in run_orbits(&cfg).unwrap() {
        for w in r.trace.checkpoints.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(b.s_a >= a.s_a && b.s_b >= a.s_b && b.s_m >= a.s_m);
            if let (Some(x), Some(y)) = (a.run_max, b.run_max) {
                assert!(y >= x);
            }
            if let (Some(x), Some(y)) = (a.run_min, b.run_min) {
                assert!(y <= x);
            }
        }
        assert_eq!(r.trace.checkpoints.len(), cfg.checkpoints.len());
        for c in &r.trace.checkpoints {
            assert_eq!(c.s_a + c.s_b + c.s_mid, c.n);
            if let Some(ratio) = c.ratio {
                assert!(c.run_max.unwrap() >= ratio && ratio >= c.run_min.unwrap());
            }
        }
    }
}

#[test]
fn trials_are_reproducible() {
    let cfg = OrbitConfig::new(symmetric(), 100_000, 4, 9).unwrap();
    let k = CompiledOrbit::new(&cfg);
    let all = run_orbits(&cfg).unwrap();
    let again = simulate_trial(&cfg, &k, 2).unwrap();
    assert_eq!(all[2], again);
}

#[test]
fn duality_has_no_violations() {
    for &(p0, p1) in &[(1.0, 1.0), (2.0, 1.0)] {
        let map = MapParams::new(0.5, p0, p1).unwrap();
        let mut cfg = OrbitConfig::new(map, 100_000, 30, 3).unwrap();
        cfg.initial = InitialLaw::UniformOn(cfg.m.clone());
        cfg.record_m_visits = true;
        cfg.checkpoints = (1..=100).map(|i| i * 1000).collect();
        for r in run_orbits(&cfg).unwrap() {
            let v = verify_duality(&r.trace, r.m_visits.as_ref().unwrap(), &cfg.m).unwrap();
            assert_eq!(v, 0);
        }
    }
}

#[test]
fn duality_on_the_whole_interval() {
    let mut cfg = OrbitConfig::new(symmetric(), 5000, 3, 3).unwrap();
    cfg.m = Region::whole();
    cfg.record_m_visits = true;
    cfg.checkpoints = vec![1, 10, 100, 5000];
    for r in run_orbits(&cfg).unwrap() {
        for c in &r.trace.checkpoints {
            assert_eq!(c.s_m, c.n);
        }
        assert_eq!(verify_duality(&r.trace, r.m_visits.as_ref().unwrap(), &cfg.m).unwrap(), 0);
    }
}

#[test]
fn duality_requires_start_in_m() {
    let mut cfg = OrbitConfig::new(symmetric(), 100, 1, 3).unwrap();
    cfg.initial = InitialLaw::Point(0.1);
    cfg.record_m_visits = true;
    let r = &run_orbits(&cfg).unwrap()[0];
    assert!(matches!(verify_duality(&r.trace, r.m_visits.as_ref().unwrap(), &cfg.m), Err(Error::Hypothesis(_))));
}

#[test]
fn crossing_returns_alternate() {
    let map = MapParams::new(0.5, 2.0, 1.0).unwrap();
    let mut cfg = OrbitConfig::new(map, 200_000, 10, 4).unwrap();
    cfg.record_returns = true;
    for r in run_orbits(&cfg).unwrap() {
        let rec = r.returns.unwrap();
        assert!(rec.alternates());
        assert!(rec.visits.iter().all(|v| v.phi >= 1));
        assert_eq!(rec.visits.len() as u64, r.trace.last().unwrap().y_visits);
    }
}

#[test]
fn empirical_truncated_expectations_vary_regularly() {
    let map = MapParams::new(0.5, 2.0, 1.0).unwrap();
    let mut cfg = OrbitConfig::new(map, 1_000_000, 300, 5).unwrap();
    cfg.record_returns = true;
    let runs = run_orbits(&cfg).unwrap();
    let recs: Vec<&ReturnRecord> = runs.iter().filter_map(|r| r.returns.as_ref()).collect();
    let grid = geometric_grid(1.0, 2e5, 20);
    let la = empirical_truncated_expectation(recs.iter().copied(), YSide::A, &grid).unwrap();
    let lb = empirical_truncated_expectation(recs.iter().copied(), YSide::B, &grid).unwrap();
    for t in geometric_grid(1e4, 1e5, 10) {
        let ra = la.eval(2.0 * t).unwrap() / la.eval(t).unwrap();
        let rb = lb.eval(2.0 * t).unwrap() / lb.eval(t).unwrap();
        assert!((ra / 2f64.sqrt() - 1.0).abs() <= 0.15, "A at {t}: {ra}");
        assert!((rb - 1.0).abs() <= 0.10, "B at {t}: {rb}");
    }
}

#[test]
fn empirical_truncated_expectation_saturates() {
    let mut cfg = OrbitConfig::new(symmetric(), 200_000, 1, 5).unwrap();
    cfg.record_returns = true;
    let r = run_orbits(&cfg).unwrap();
    let rec = r[0].returns.as_ref().unwrap();
    let max_phi = rec.visits.iter().filter(|v| v.side == YSide::A).map(|v| v.phi).max().unwrap() as f64;
    let grid: Vec<f64> = geometric_grid(1.0, 1e6, 10);
    let l = empirical_truncated_expectation([rec], YSide::A, &grid).unwrap();
    let far = l.eval(1e6).unwrap();
    assert!((l.eval(2.0 * max_phi).unwrap() / far - 1.0).abs() < 1e-12);
    let few = ReturnRecord { visits: rec.visits[..10].to_vec() };
    assert!(matches!(
        empirical_truncated_expectation([&few], YSide::A, &grid),
        Err(Error::InsufficientData { .. })
    ));
}

#[test]
fn occupation_of_m_is_insensitive_to_finite_measure_changes() {
    let map = MapParams::new(0.5, 2.0, 1.0).unwrap();
    let table = IterateTable::build(&map, 100_000).unwrap();
    let seq = normalizing_sequence_cusps(&map, &table, &[100_000]).unwrap();
    let mut cfg = OrbitConfig::new(map, 100_000, 400, 6).unwrap();
    let a = dk_experiment(&run_orbits(&cfg).unwrap(), &map, &seq).unwrap();
    // (c, 1 - delta) would drop an infinite-measure piece at the right cusp.
    cfg.m = Region::open(0.6, 1.0);
    let b = dk_experiment(&run_orbits(&cfg).unwrap(), &map, &seq).unwrap();
    assert!(ks_two_sample(&a.sample, &b.sample) <= 0.1);
    assert!(matches!(
        dk_experiment(&run_orbits(&cfg).unwrap(), &MapParams::new(0.5, 1.0, 2.0).unwrap(), &seq),
        Err(Error::Hypothesis(_))
    ));
}

#[test]
fn symmetric_ratio_is_exchangeable() {
    // At 1000 trials the statistic is dominated by sampling noise.
    let mut cfg = OrbitConfig::new(symmetric(), 10_000, 10_000, 7).unwrap();
    cfg = cfg.with_targets(0.2, 0.2).unwrap();
    let runs = run_orbits(&cfg).unwrap();
    let r: Vec<f64> = runs.iter().filter_map(|x| x.trace.last().unwrap().ratio).collect();
    let inv: Vec<f64> = r.iter().map(|x| 1.0 / x).collect();
    let ks = ks_two_sample(&EmpiricalDistribution::new(r).unwrap(), &EmpiricalDistribution::new(inv).unwrap());
    assert!(ks <= 0.05, "{ks}");
}

#[test]
fn mass_escapes_from_the_middle() {
    // Decay is logarithmic; a naive x-coordinate simulation of 400 orbits
    // gives 0.206 at n = 1e6.
    let cfg = OrbitConfig::new(symmetric(), 1_000_000, 100, 8).unwrap().with_middle(0.1).unwrap();
    let frac = mass_escape(&run_orbits(&cfg).unwrap());
    assert!(frac.windows(2).all(|w| w[1].1 < w[0].1), "{frac:?}");
    let (n, f) = *frac.last().unwrap();
    assert_eq!(n, 1_000_000);
    assert!((f - 0.206).abs() <= 0.02, "{f}");

    let mut fixed = OrbitConfig::new(symmetric(), 1000, 2, 8).unwrap().with_middle(0.1).unwrap();
    fixed.initial = InitialLaw::Point(0.0);
    assert!(mass_escape(&run_orbits(&fixed).unwrap()).iter().all(|&(_, f)| f == 0.0));

    let mut tiny = OrbitConfig::new(symmetric(), 1000, 2, 8).unwrap();
    tiny.middle = Region::whole();
    assert!(mass_escape(&run_orbits(&tiny).unwrap()).iter().all(|&(_, f)| f == 1.0));
}

#[test]
fn config_validation() {
    let mut cfg = OrbitConfig::new(symmetric(), 100, 1, 0).unwrap();
    assert!(cfg.clone().with_targets(0.0, 0.5).is_err());
    cfg = cfg.with_targets(0.6, 0.6).unwrap();
    assert!(cfg.validate().is_err());
    let mut cfg = OrbitConfig::new(symmetric(), 100, 1, 0).unwrap();
    cfg.checkpoints = vec![10, 1000];
    assert!(cfg.validate().is_err());
    assert!(OrbitConfig::new(symmetric(), 100, 1, 0).unwrap().with_middle(0.5).is_err());
}
