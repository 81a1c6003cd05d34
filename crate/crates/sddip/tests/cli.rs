mod common;

use std::path::Path;
use std::process::{Command, Output};

use sddip::instances::{generate_smkp, read_model, write_model};

fn sddip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sddip")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tiny(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.json");
    write_model(&generate_smkp(2, 2, 4, 2, 5).unwrap(), &path).unwrap();
    path
}

#[test]
fn gen_writes_a_valid_instance() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let o = sddip(&["gen", "smkp", "--T", "3", "--rows", "10", "--cols", "30", "--scens", "3", "--seed", "1", "--out", p(&a)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_model(&a).unwrap();
    assert_eq!(m.num_stages(), 3);
    assert_eq!(m.templates[1].state.len(), 30);

    let g = dir.path().join("g.json");
    let o = sddip(&["gen", "gep", "--T", "4", "--scens", "3", "--seed", "2", "--out", p(&g)]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_model(&g).unwrap().num_scenarios(), 27);
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = sddip(&["gen", "smkp", "--T", "3", "--rows", "4", "--cols", "6", "--scens", "3", "--seed", "8", "--out", p(out)]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny(dir.path());
    let out = dir.path().join("r.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec!["gen", "smkp", "--T", "3", "--rows", "2", "--cols", "3", "--scens", "2"],
        vec!["gen", "smkp", "--T", "3", "--rows", "x", "--cols", "3", "--scens", "2", "--out", "a.json"],
        vec!["solve", "--instance", p(&inst), "--M", "1", "--out", p(&out)],
        vec!["solve", "--instance", p(&inst), "--algo", "extform", "--M", "2", "--out", p(&out)],
        vec!["solve", "--instance", p(&inst), "--algo", "extform", "--cut", "L", "--out", p(&out)],
        vec!["solve", "--instance", p(&inst), "--algo", "nested", "--alpha", "0.2", "--out", p(&out)],
        vec!["solve", "--instance", p(&inst), "--gap-threshold", "0.1", "--out", p(&out)],
        vec!["solve", "--instance", p(&inst), "--cut", "X", "--out", p(&out)],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = sddip(&args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(code(&sddip(&["--help"])), 0);
    assert_eq!(code(&sddip(&["--version"])), 0);
}

#[test]
fn missing_instance_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sddip(&["solve", "--instance", p(&dir.path().join("nope.json")), "--out", p(&dir.path().join("r.csv"))]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
}

#[test]
fn extform_reports_the_optimum_with_zero_gap() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny(dir.path());
    let out = dir.path().join("r.csv");
    let o = sddip(&["solve", "--instance", p(&inst), "--algo", "extform", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(common::csv_cells_parse(&text));
    let s = common::summary(&text);
    let opt = common::smkp_brute_force(&read_model(&inst).unwrap());
    assert_eq!(s["status"], "converged");
    assert_eq!(s["gap_pct"].parse::<f64>().unwrap(), 0.0);
    assert!((s["UB"].parse::<f64>().unwrap() - opt).abs() <= 1e-6 * opt);
}

#[test]
fn alternating_run_reports_few_tight_cuts() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("s.json");
    write_model(&generate_smkp(3, 5, 10, 3, 2).unwrap(), &inst).unwrap();
    let out = dir.path().join("r.csv");
    let o = sddip(&["solve", "--instance", p(&inst), "--algo", "sddip", "--backward", "alternating", "--cut", "I",
        "--seed", "2", "--time-limit", "300", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(common::csv_cells_parse(&text));
    let s = common::summary(&text);
    assert!(s["tight_prop"].parse::<f64>().unwrap() < 0.5);
    assert_eq!(s["ub_kind"], "exhaustive");
}

#[test]
fn limits_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("s.json");
    write_model(&generate_smkp(3, 5, 10, 3, 2).unwrap(), &inst).unwrap();
    let out = dir.path().join("r.csv");
    let o = sddip(&["solve", "--instance", p(&inst), "--iteration-limit", "1", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert_eq!(common::summary(&std::fs::read_to_string(&out).unwrap())["status"], "iteration_limit");
    let o = sddip(&["solve", "--instance", p(&inst), "--time-limit", "0", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert_eq!(common::summary(&std::fs::read_to_string(&out).unwrap())["status"], "time_limit");
}

#[test]
fn frozen_clock_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("s.json");
    write_model(&generate_smkp(3, 3, 6, 3, 4).unwrap(), &inst).unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = sddip(&["solve", "--instance", p(&inst), "--seed", "9", "--no-timing", "--out", p(&out)]);
        assert_eq!(code(&o), 0);
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn nested_and_binarized_runs() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny(dir.path());
    let out = dir.path().join("r.csv");
    let o = sddip(&["solve", "--instance", p(&inst), "--algo", "nested", "--gap-threshold", "0.001", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let s = common::summary(&std::fs::read_to_string(&out).unwrap());
    let opt = common::smkp_brute_force(&read_model(&inst).unwrap());
    assert!((s["LB"].parse::<f64>().unwrap() - opt).abs() <= 1e-3 * opt);
    assert_eq!(s["ub_kind"], "deterministic");

    // integer-L cuts need binary states: GEP only runs after --binarize
    let g = dir.path().join("g.json");
    assert_eq!(code(&sddip(&["gen", "gep", "--T", "2", "--scens", "2", "--types", "2", "--caps", "1,2", "--out", p(&g)])), 0);
    let o = sddip(&["solve", "--instance", p(&g), "--cut", "I", "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    let o = sddip(&["solve", "--instance", p(&g), "--cut", "I", "--binarize", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn write_grid(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("grid.json");
    std::fs::write(&path, body).unwrap();
    path
}

const GRID: &str = r#"{
  "classes": [{"problem": "smkp", "T": 3, "rows": 3, "cols": 5, "scens": 2}],
  "instance_seeds": [1, 2],
  "run_seeds": [7],
  "configs": [
    {"name": "IA", "algo": "sddip", "cut": "I", "backward": "alternating", "M": 2},
    {"name": "EF", "algo": "extform"},
    {"name": "LIM", "algo": "sddip", "iteration_limit": 1}
  ]
}"#;

#[test]
fn bench_averages_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write_grid(dir.path(), GRID);
    let out = dir.path().join("table.csv");
    let o = sddip(&["bench", "--grid", p(&grid), "--out", p(&out), "--no-timing"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(lines.next().is_none());
    let cell = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(cell("class"), "smkp-3-3-5-2");
    assert_eq!(cell("LIM-t"), ">limit");
    assert_eq!(cell("LIM-iter"), "1");
    assert_eq!(cell("IA-fail"), "0");
    assert_eq!(cell("EF-gap"), "0");
    for h in &header[1..] {
        let c = cell(h);
        assert!(c == ">limit" || c.parse::<f64>().is_ok(), "{h} = {c}");
    }

    // IA-iter is the mean over the two instances
    let mut sum = 0.0;
    for seed in [1, 2] {
        let inst = dir.path().join(format!("i{seed}.json"));
        write_model(&generate_smkp(3, 3, 5, 2, seed).unwrap(), &inst).unwrap();
        let r = dir.path().join("r.csv");
        assert_eq!(code(&sddip(&["solve", "--instance", p(&inst), "--algo", "sddip", "--seed", "7", "--no-timing", "--out", p(&r)])), 0);
        sum += common::summary(&std::fs::read_to_string(&r).unwrap())["iterations"].parse::<f64>().unwrap();
    }
    assert_eq!(cell("IA-iter").parse::<f64>().unwrap(), sum / 2.0);
}

#[test]
fn bench_is_reproducible_and_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write_grid(dir.path(), GRID);
    let mut outputs = Vec::new();
    for (name, jobs) in [("a.csv", "1"), ("b.csv", "1"), ("c.csv", "3")] {
        let out = dir.path().join(name);
        let o = sddip(&["bench", "--grid", p(&grid), "--out", p(&out), "--no-timing", "--jobs", jobs]);
        assert_eq!(code(&o), 0);
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn bench_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    // integer-L on an integer-state class fails; extform still runs
    let grid = write_grid(dir.path(), r#"{
      "classes": [{"problem": "gep", "T": 2, "scens": 2, "types": 2}],
      "instance_seeds": [1],
      "configs": [{"name": "I", "algo": "sddip", "cut": "I"}, {"name": "EF", "algo": "extform"}]
    }"#);
    let out = dir.path().join("t.csv");
    let o = sddip(&["bench", "--grid", p(&grid), "--out", p(&out), "--no-timing"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed"));
    let text = std::fs::read_to_string(&out).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let cell = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(cell("I-fail"), "1");
    assert_eq!(cell("I-gap"), "NaN");
    assert_eq!(cell("EF-fail"), "0");
}

#[test]
fn bad_grids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    for body in [
        r#"{"classes": [], "instance_seeds": [1], "configs": [{"name": "A", "algo": "extform"}]}"#,
        r#"{"classes": [{"problem": "smkp", "T": 2, "rows": 1, "cols": 1, "scens": 1}], "instance_seeds": [1],
            "configs": [{"name": "A", "algo": "extform"}, {"name": "A", "algo": "nested"}]}"#,
        r#"{"classes": [{"problem": "knap", "T": 2}], "instance_seeds": [1], "configs": [{"name": "A", "algo": "extform"}]}"#,
    ] {
        let grid = write_grid(dir.path(), body);
        assert_eq!(code(&sddip(&["bench", "--grid", p(&grid), "--out", p(&out)])), 1);
    }
}
