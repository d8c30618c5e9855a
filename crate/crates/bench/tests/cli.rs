use std::fs;
use std::path::PathBuf;
use std::process::Command;

use proptest::prelude::*;

use chaosamp_bench::{ExperimentConfig, ExperimentKind};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("chaosamp-bench-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn bench(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bench")).args(args).output().unwrap()
}

#[test]
fn writes_csv_and_aggregate() {
    let dir = scratch("ok");
    let cfg = dir.join("r.cfg");
    fs::write(&cfg, "d = 2\np = 3\nstrategies = standard, d-coh-opt\nratios = 2\nreplications = 3\nvalidation = 200\naggregate = true\n").unwrap();
    let out = bench(&["recovery", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("recovery.csv")).unwrap();
    assert!(csv.contains("# seed = 9"));
    let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "strategy,p,n,t,replicate,seed,relative_error,recovered,delta,cond,status");
    assert_eq!(data.len(), 1 + 2 * 3);
    assert!(data[1..].iter().all(|l| l.ends_with(",ok")));
    let agg = fs::read_to_string(dir.join("recovery_aggregate.dat")).unwrap();
    assert_eq!(agg.lines().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn rank_deficient_rows_give_partial_failure() {
    let dir = scratch("partial");
    let cfg = dir.join("r.cfg");
    fs::write(&cfg, "d = 2\np = 3\nstrategies = standard\nn = 4, 20\nreplications = 2\nvalidation = 100\n").unwrap();
    let out = bench(&["recovery", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let csv = fs::read_to_string(dir.join("recovery.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains("rank deficient")).count(), 2);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = scratch("bad");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "replications = 0\n").unwrap();
    assert_eq!(bench(&["recovery", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(bench(&["duffing", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(bench(&["weather"]).status.code(), Some(1));
    assert_eq!(bench(&["battery", "--config", "/nonexistent/cfg"]).status.code(), Some(1));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = scratch("workers");
    let cfg = dir.join("d.cfg");
    fs::write(&cfg, "p = 3\nstrategies = standard, coh-opt\nn = 30\nreplications = 3\nvalidation = 50\n").unwrap();
    let mut outputs = Vec::new();
    for w in ["1", "2"] {
        let sub = dir.join(w);
        let out = bench(&["duffing", "--config", cfg.to_str().unwrap(), "--workers", w, "--out", sub.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        outputs.push(fs::read(sub.join("duffing.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

proptest! {
    #[test]
    fn ratio_grid_never_undersamples(ratios in prop::collection::vec(0.1f64..12.0, 1..6), d in 1usize..4, p in 1usize..6) {
        let text = format!(
            "d = {d}\np = {p}\nratios = {}",
            ratios.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", ")
        );
        let cfg = ExperimentConfig::parse(ExperimentKind::Recovery, &text).unwrap();
        let size = chaosamp::cardinality(d, p).unwrap();
        let counts = cfg.sample_counts(size);
        prop_assert_eq!(counts.len(), ratios.len());
        for (n, r) in counts.iter().zip(&ratios) {
            prop_assert!(*n as f64 >= r * size as f64 - 1e-9);
            prop_assert!((*n as f64) < r * size as f64 + 1.0);
        }
    }

    #[test]
    fn repeated_keys_are_rejected(seed in any::<u64>()) {
        let text = format!("seed = {seed}\nseed = {seed}");
        prop_assert!(ExperimentConfig::parse(ExperimentKind::Battery, &text).is_err());
    }
}

#[test]
fn shipped_configs_parse() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for kind in [ExperimentKind::Recovery, ExperimentKind::Duffing, ExperimentKind::Battery] {
        let text = fs::read_to_string(root.join(format!("{}.cfg", kind.name()))).unwrap();
        let cfg = ExperimentConfig::parse(kind, &text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.replications, 60);
    }
}
