use std::path::Path;
use std::process::{Command, Output};

use memsat::formula::Formula;
use serde_json::Value;

fn memsat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memsat"))
        .args(args)
        .output()
        .expect("run memsat")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, n: &str, seed: &str) -> std::path::PathBuf {
    let cnf = dir.join("a.cnf");
    let out = memsat(&["generate", "-n", n, "--seed", seed, "-o", path(&cnf)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    cnf
}

#[test]
fn generate_writes_instance_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = generate(dir.path(), "20", "7");
    let text = std::fs::read_to_string(&cnf).unwrap();
    assert!(text.starts_with("p cnf 20 86\n"));
    let f = Formula::from_dimacs_str(&text).unwrap();
    assert_eq!(f.num_clauses(), 86);

    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.cnf.json")).unwrap())
            .unwrap();
    assert_eq!(side["N"], 20);
    assert_eq!(side["M"], 86);
    assert_eq!(side["seed"], 7);
    assert_eq!(side["ratio"], "4.3");
    let planted: Vec<bool> = side["planted"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_i64().unwrap() > 0)
        .collect();
    assert!(f.is_satisfied_by(&planted));
}

#[test]
fn generate_json_without_out_is_pure_json() {
    let out = memsat(&["generate", "-n", "10", "--seed", "3", "--json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["M"], 43);
    assert!(v["dimacs"].as_str().unwrap().starts_with("p cnf 10 43"));
}

#[test]
fn solve_fixed_returns_verified_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = generate(dir.path(), "20", "11");
    let result = dir.path().join("r.json");
    let out = memsat(&[
        "solve", path(&cnf), "--engine", "fixed", "--seed", "1", "-o", path(&result),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("s SATISFIABLE"));

    let r: memsat::RunResult =
        serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert!(r.solved);
    assert_eq!(r.engine, memsat::EngineKind::Fixed);
    let f = Formula::from_dimacs_str(&std::fs::read_to_string(&cnf).unwrap()).unwrap();
    assert!(f.evaluate(&r.assignment).unwrap().satisfied);
}

#[test]
fn solve_float_json_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = generate(dir.path(), "20", "12");
    let out = memsat(&["solve", path(&cnf), "--engine", "float", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let r: memsat::RunResult = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r.solved);
}

#[test]
fn exhausted_budget_exits_10() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = generate(dir.path(), "60", "5");
    let out = memsat(&["solve", path(&cnf), "--max-steps", "1", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(10));
}

#[test]
fn malformed_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cnf");
    std::fs::write(&bad, "p cnf 3 1\n1 2 0\n").unwrap();
    assert_eq!(memsat(&["solve", path(&bad)]).status.code(), Some(3));
    let missing = dir.path().join("missing.cnf");
    assert_eq!(memsat(&["solve", path(&missing)]).status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(memsat(&["solve"]).status.code(), Some(2));
    assert_eq!(memsat(&["bench", "--engine", "analog"]).status.code(), Some(2));
}

#[test]
fn trace_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = generate(dir.path(), "20", "13");
    let a = dir.path().join("a.trace");
    let b = dir.path().join("b.trace");
    for t in [&a, &b] {
        let out = memsat(&["solve", path(&cnf), "--seed", "4", "--trace", path(t)]);
        assert_eq!(out.status.code(), Some(0));
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
    // one snapshot of 8 + 8·(N + 2M) bytes per step, step 0 included
    assert_eq!(a.len() % (8 + 8 * (20 + 2 * 86)), 0);
}

fn strip_wall_times(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.contains("wall_time"));
            map.values_mut().for_each(strip_wall_times);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_wall_times),
        _ => {}
    }
}

#[test]
fn bench_is_independent_of_job_count() {
    let run = |jobs: &str| {
        let out = memsat(&[
            "bench", "--sizes", "20,30", "--runs-per-size", "6", "--seed", "9", "--jobs", jobs,
            "--json",
        ]);
        assert!(out.status.success());
        let mut v: Value = serde_json::from_slice(&out.stdout).unwrap();
        strip_wall_times(&mut v);
        v
    };
    let serial = run("1");
    assert_eq!(serial["runs"].as_array().unwrap().len(), 12);
    assert_eq!(serial, run("8"));
}

#[test]
fn bench_exports_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    let out = memsat(&["bench", "--sizes", "20", "--runs-per-size", "3", "-o", path(&csv)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("engine,N,instance_seed,solved,steps,wall_time_s\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn fit_reads_points() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    std::fs::write(&csv, "N,median\n10,300\n20,1200\n40,4800\n").unwrap();
    let out = memsat(&["fit", path(&csv), "--json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["exponent"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((v["prefactor"].as_f64().unwrap() - 3.0).abs() < 1e-9);

    std::fs::write(&csv, "N,median\n10,300\n").unwrap();
    assert_eq!(memsat(&["fit", path(&csv)]).status.code(), Some(3));
}

#[test]
fn resources_match_linear_model() {
    let out = memsat(&["resources", "-n", "100", "--steps", "1000", "--json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["luts"], 751_343);
    assert_eq!(v["dsps"], 4300);
    assert_eq!(v["fits_vcu118"], true);
    assert!((v["projected_time_s"].as_f64().unwrap() - 96e-6).abs() < 1e-15);
}
