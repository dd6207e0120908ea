use std::fs;
use std::path::Path;
use std::process::Command;

use occtime::config::parse_count;
use occtime::{io, parallel, run, Count, ExperimentConfig, Kind, LabError};
use occtime_core::maps::MapParams;
use occtime_core::orbit::OrbitConfig;
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_occtime"))
}

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn small_dk() -> ExperimentConfig {
    cfg("kind = \"dk\"\nseed = 3\np0 = 2.0\nn_steps = \"2e4\"\nn_trials = 40\n")
}

#[test]
fn empty_config_lists_missing_fields() {
    match ExperimentConfig::default().resolve() {
        Err(LabError::Validation(msg)) => assert!(msg.contains("kind") && msg.contains("seed"), "{msg}"),
        other => panic!("{other:?}"),
    }
    match cfg("kind = \"renewal\"").resolve() {
        Err(LabError::Validation(msg)) => {
            for f in ["seed", "n_steps", "n_trials", "zeta"] {
                assert!(msg.contains(f), "{msg}");
            }
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_and_stray_keys_are_rejected() {
    let e = ExperimentConfig::from_toml("kind = \"dk\"\nseed = 1\nbogus = 2\n").unwrap_err();
    assert_eq!(e.exit_code(), 1);
    assert!(e.to_string().contains("bogus"));
    let stray = cfg("kind = \"renewal\"\nseed = 1\nn_steps = 100\nn_trials = 1\nzeta = 2.5\nc = 0.5\n");
    assert!(matches!(stray.resolve(), Err(LabError::Validation(_))));
    let half = cfg("kind = \"ratio\"\nseed = 1\nn_steps = 100\nn_trials = 1\ndelta_a = 0.1\n");
    assert!(matches!(half.resolve(), Err(LabError::Validation(_))));
}

#[test]
fn counts_accept_scientific_notation() {
    assert_eq!(parse_count("1e6"), Ok(1_000_000));
    assert_eq!(parse_count("2.5e3"), Ok(2500));
    assert_eq!(parse_count("1_000"), Ok(1000));
    assert!(parse_count("1.5").is_err());
    assert!(parse_count("-3").is_err());
    assert!(parse_count("1e6x").is_err());
    let c = cfg("kind = \"duality\"\nseed = \"1e1\"\nn_steps = 1e5\nn_trials = 3\n");
    assert_eq!(c.n_steps, Some(Count(100_000)));
    assert_eq!(c.seed, Some(Count(10)));
    assert!(ExperimentConfig::from_toml("n_steps = 1.5").is_err());
}

#[test]
fn resolved_config_round_trips() {
    let r = small_dk().resolve().unwrap();
    assert_eq!(r.m, Some([0.5, 1.0]));
    assert_eq!(r.p1, Some(1.0));
    let back = ExperimentConfig::from_toml(&r.to_toml()).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.resolve().unwrap(), r);
    let json = serde_json::to_string(&r).unwrap();
    assert_eq!(ExperimentConfig::from_json(&json).unwrap(), r);
}

#[test]
fn parallel_runs_match_sequential_runs() {
    let map = MapParams::new(0.5, 2.0, 1.0).unwrap();
    let mut o = OrbitConfig::new(map, 50_000, 12, 4).unwrap();
    o.record_returns = true;
    assert_eq!(parallel::run_orbits(&o).unwrap(), occtime_core::orbit::run_orbits(&o).unwrap());
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let c = small_dk();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| run(&c)).unwrap();
    let b = three.install(|| run(&c)).unwrap();
    assert_eq!(a.tables, b.tables);
    assert_eq!(a.summary, b.summary);
}

fn read_dir_tables(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn embedded_config_reproduces_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let (d1, d2) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = run(&small_dk()).unwrap();
    io::write_result(&first, &d1).unwrap();
    let again = ExperimentConfig::from_file(&d1.join("config.toml")).unwrap();
    io::write_result(&run(&again).unwrap(), &d2).unwrap();
    let (t1, t2) = (read_dir_tables(&d1), read_dir_tables(&d2));
    assert_eq!(t1.len(), 3);
    assert_eq!(t1, t2);

    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(d1.join("summary.json")).unwrap()).unwrap();
    assert_eq!(meta["kind"], "dk");
    assert_eq!(meta["version"], io::VERSION);
    assert!(meta["timing"]["seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(ExperimentConfig::from_json(&meta["config"].to_string()).unwrap(), first.config);
}

#[test]
fn csv_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&small_dk()).unwrap();
    let t = res.table("traces").unwrap();
    let p = tmp.path().join("traces.csv");
    io::write_table(t, &p).unwrap();
    let (header, rows) = io::read_table(&p).unwrap();
    assert_eq!(header, ["trial", "n", "S_A", "S_B", "S_M", "R", "R_runmax", "R_runmin", "mid_fraction"]);
    assert_eq!(rows, t.rows);
    assert_eq!(rows.len(), 40 * 4);
}

#[test]
fn every_kind_runs_at_small_scale() {
    let base = "seed = 5\n";
    let cases = [
        (Kind::Dk, "p0 = 2.0\nn_steps = 1000\nn_trials = 5\nrecord_returns = true\n", vec!["normalizer", "sample", "traces", "returns"]),
        (Kind::Ratio, "n_steps = 20000\nn_trials = 5\ndelta_a = 0.2\ndelta_b = 0.2\n", vec!["ratio_summary", "traces"]),
        (Kind::Duality, "p0 = 2.0\nn_steps = 5000\nn_trials = 5\n", vec!["traces"]),
        (Kind::MassEscape, "n_steps = 5000\nn_trials = 5\nepsilon = 0.2\n", vec!["mass_escape", "traces"]),
        (Kind::IterateSums, "p0 = 2.0\nn_steps = 5000\n", vec!["iterates"]),
        (Kind::Oscillating, "levels = 3\n", vec!["breakpoints", "normalizer"]),
        (Kind::SumsMaxima, "phi = [0.5, 0.0, 0.0]\nn_steps = 1000\nn_trials = 3\ncutoff = 1000\n", vec!["trajectories"]),
        (Kind::Renewal, "zeta = 2.5\nn_steps = 1000\nn_trials = 3\n", vec!["trajectories"]),
        (Kind::CompareSums, "f = [1.0, 2.0]\ng = [2.0, 2.0]\nkappa = 0.25\nn_steps = 1000\n", vec!["partial_sums"]),
    ];
    for (kind, extra, tables) in cases {
        let text = format!("kind = \"{kind}\"\n{base}{extra}");
        let r = run(&cfg(&text)).unwrap_or_else(|e| panic!("{kind}: {e}"));
        let names: Vec<&str> = r.tables.iter().map(|t| t.name).collect();
        assert_eq!(names, tables, "{kind}");
        for t in &r.tables {
            assert!(t.rows.iter().all(|row| row.len() == t.header.len()), "{kind}/{}", t.name);
        }
    }
}

#[test]
fn duality_summary_counts_pairs() {
    let r = run(&cfg("kind = \"duality\"\nseed = 1\nn_steps = \"1e4\"\nn_trials = 10\n")).unwrap();
    assert_eq!(r.number("violations"), Some(0.0));
    assert_eq!(r.number("pairs_checked"), Some(30.0));
    assert!(r.passed());
}

#[test]
fn describe_cards() {
    let dk = occtime::describe::describe("dk").unwrap();
    assert!(dk.contains("Darling-Kac") && dk.contains("Mittag-Leffler"));
    assert!(dk.contains("0.15"));
    assert!(occtime::describe::describe("renewal").unwrap().contains("renewal"));
    assert_eq!(occtime::describe::describe("dk").unwrap(), dk);
    assert!(matches!(occtime::describe::describe("bogus"), Err(LabError::Validation(_))));
    for k in Kind::ALL {
        assert_eq!(Kind::parse(k.name()).unwrap(), k);
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.toml");
    fs::write(&empty, "").unwrap();
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code().unwrap();

    assert_eq!(code(&["run", "--config", empty.to_str().unwrap()]), 1);
    assert_eq!(code(&["describe", "bogus"]), 1);
    assert_eq!(code(&["dk", "--bogus"]), 1);
    assert_eq!(code(&["dk", "--n", "1.5", "--trials", "2", "--seed", "1"]), 1);
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(code(&["dk", "--p1", "2", "--n", "1e3", "--trials", "2", "--seed", "1", "--out", out]), 2);
    assert_eq!(code(&["oscillating", "--levels", "60", "--seed", "1", "--out", out]), 3);
    assert_eq!(code(&["run", "--config", tmp.path().join("missing.toml").to_str().unwrap()]), 4);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let under_file = blocker.join("sub");
    assert_eq!(code(&["duality", "--n", "1e3", "--trials", "2", "--seed", "1", "--out", under_file.to_str().unwrap()]), 4);
    assert_eq!(code(&["describe", "dk"]), 0);
}

#[test]
fn cli_run_writes_files_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["duality", "--n", "1e5", "--trials", "20", "--seed", "1"])
        .env("OCCTIME_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let meta: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(meta["summary"]["violations"], 0);
    assert_eq!(meta["config"]["n_steps"], 100_000);
    for f in ["traces.csv", "summary.json", "config.toml"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }

    // Flags override the file; a kind mismatch is rejected.
    let file = tmp.path().join("c.toml");
    fs::write(&file, "kind = \"duality\"\nseed = 1\nn_steps = 1000\nn_trials = 2\n").unwrap();
    let o2 = tmp.path().join("o2");
    let st = bin()
        .args(["run", "--config", file.to_str().unwrap(), "--trials", "3", "--out", o2.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(st.status.success());
    let meta: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert_eq!(meta["config"]["n_trials"], 3);
    let st = bin().args(["ratio", "--config", file.to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scientific_counts_round_trip(mant in 1u64..1000, exp in 0u32..12) {
        let want = mant * 10u64.pow(exp);
        prop_assert_eq!(parse_count(&format!("{mant}e{exp}")), Ok(want));
        prop_assert_eq!(parse_count(&want.to_string()), Ok(want));
    }

    #[test]
    fn any_unknown_key_aborts(key in "[a-z]{3,10}") {
        let known = ["kind", "seed", "c", "p0", "p1", "n_steps", "n_trials", "checkpoints", "delta_a", "delta_b", "m",
            "epsilon", "record_returns", "zeta", "phi", "psi", "coupling", "cutoff", "levels", "depth", "f", "g", "kappa", "out"];
        prop_assume!(!known.contains(&key.as_str()));
        let text = format!("kind = \"duality\"\nseed = 1\n{key} = 1\n");
        prop_assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn identical_configs_give_identical_tables(seed in 0u64..1000) {
        let c = cfg(&format!("kind = \"ratio\"\nseed = {seed}\nn_steps = 3000\nn_trials = 3\n"));
        let (a, b) = (run(&c).unwrap(), run(&c).unwrap());
        prop_assert_eq!(a.tables, b.tables);
    }
}
