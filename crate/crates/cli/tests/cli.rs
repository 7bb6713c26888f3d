use std::path::Path;
use std::process::{Command, Output};

use cantor_ft::fourier::ghat1;
use cantor_ft::{build_default_schedule, DyadicRational};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cantor-ft"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn lemma31_sweep_verifies_every_subset() {
    let out = run(&["verify", "lemma31", "--n", "6", "--p", "1.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["result"]["counts"]["verified"], 64);
    assert_eq!(v["result"]["counts"]["violated"], 0);
    assert_eq!(v["verdict"], "verified");
    assert_eq!(v["config"]["command"]["verify"]["lemma31"]["n"], 6);
}

#[test]
fn zero_frequency_row() {
    let out = run(&["eval-ft", "--xi-grid", "0", "--kmax", "10", "--k-cap", "40"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "xi,value,tail_bound,kmax");
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    let s = build_default_schedule(40).unwrap();
    let expected = ghat1(&s, 0.0, 10);
    assert_eq!(cells[0], "0");
    assert_eq!(cells[1].parse::<f64>().unwrap(), expected.value);
    assert_eq!(cells[2].parse::<f64>().unwrap(), expected.tail_bound);
    assert_eq!(cells[3], "10");
}

#[test]
fn unresolved_tail_is_inconclusive() {
    // The default tail tolerance is not reached by generation 40.
    let out = run(&["eval-ft", "--xi-grid", "1,2", "--k-cap", "40"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn construct_emits_exact_rationals() {
    let out = run(&["construct", "--k", "3", "--k-cap", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("generation,kind,left,right"));
    let body: Vec<&str> = rows.collect();
    // 1 + 2 + 4 + 8 whites and as many blacks.
    assert_eq!(body.len(), 30);
    for r in body {
        let cells: Vec<&str> = r.split(',').collect();
        assert!(cells[1] == "white" || cells[1] == "black");
        for end in &cells[2..] {
            assert!(!end.contains('.'), "{end}");
            end.parse::<DyadicRational>().unwrap();
        }
    }
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&["verify", "lemma31", "--bogus"]).status.code(), Some(64));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&[]).status.code(), Some(64));
    assert_eq!(run(&["eval-ft", "--xi-grid", "log:0:1:3"]).status.code(), Some(64));
    assert_eq!(run(&["verify", "all", "--preset", "quarter"]).status.code(), Some(64));
    assert_eq!(run(&["construct", "--preset", "nonesuch"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "seed = 1\n[tolerances]\nabs_tol = 1e-6\nwobble = 3\n").unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "verify", "lemma31", "--n", "2"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(stderr(&out).contains("wobble"), "{}", stderr(&out));

    std::fs::write(&path, "seed = \n").unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "verify", "lemma31", "--n", "2"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(stderr(&out).contains("line 1"), "{}", stderr(&out));
}

#[test]
fn empty_config_gives_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    std::fs::write(&path, "").unwrap();
    let a = run(&["--config", path.to_str().unwrap(), "verify", "lemma31", "--n", "3"]);
    let b = run(&["verify", "lemma31", "--n", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["config"]["seed"], 0x5eed);
    assert_eq!(v["config"]["budget"], "desk");
    assert_eq!(v["config"]["schedule"]["preset"], "default");
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn reports_reproduce_from_their_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let args = ["verify", "lemma32", "--n", "2", "--samples", "2", "--seed", "7", "--out-dir", d, "--stem", "r"];
    let first = run(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let json1 = read(&dir.path().join("r.json"));
    let csv1 = read(&dir.path().join("r.csv"));
    let toml1 = read(&dir.path().join("r.config.toml"));
    let v: Value = serde_json::from_str(&json1).unwrap();
    assert_eq!(v["config"]["command"]["verify"]["lemma32"]["seed"], 7);

    // Same flags again, then from the emitted config, then from the report itself.
    assert_eq!(run(&args).status.code(), Some(0));
    assert_eq!(read(&dir.path().join("r.json")), json1);
    let cfg = dir.path().join("r.config.toml");
    assert_eq!(run(&["--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(read(&dir.path().join("r.json")), json1);
    assert_eq!(read(&dir.path().join("r.config.toml")), toml1);
    let copy = dir.path().join("saved.json");
    std::fs::write(&copy, &json1).unwrap();
    assert_eq!(run(&["--config", copy.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(read(&dir.path().join("r.json")), json1);
    assert_eq!(read(&dir.path().join("r.csv")), csv1);
}

#[test]
fn seed_defaults_are_fixed() {
    let a = run(&["verify", "lemma32", "--n", "2", "--samples", "1"]);
    let b = run(&["verify", "lemma32", "--n", "2", "--samples", "1"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["result"]["seed"], 0x5eed);
}

#[test]
fn schedule_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(&path, cantor_ft::ScheduleSpec::preset("quarter", 30).unwrap().to_toml()).unwrap();
    let out = run(&["dimension", "--schedule", path.to_str().unwrap(), "--kmax", "5", "--format", "csv"]);
    // The set has dimension 1/2, so the Frostman bound at exponent d - ε must fail.
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.ends_with(",false"), "{last}");
    // Θ_k = 4^-k and 2^k whites: exactly one half.
    assert_eq!(last.split(',').nth(3), Some("0.5"));
}

#[test]
fn lebesgue_witness_at_the_centre() {
    let out = run(&["lebesgue", "--point", "1/2", "--eps", "1/8", "--count", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["result"]["pairs"][0]["k"], 65);
    assert_eq!(v["result"]["pairs"][0]["certified"], true);
}

#[test]
fn validate_and_norms() {
    let out = run(&["validate-schedule", "--horizon", "100"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = run(&["norms", "--xi-max", "256", "--kmax", "8", "--k-cap", "60"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["result"]["profile_monotone"], true);
    assert_eq!(v["result"]["minkowski"]["verdict"], "verified");
}

#[test]
fn full_suite_at_ci_budget() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["verify", "all", "--preset", "default", "--budget", "ci", "--out-dir", d]);
    let err = stderr(&out);
    assert_eq!(err.lines().filter(|l| l.starts_with("criterion")).count(), 12, "{err}");
    let csv = read(&dir.path().join("verify-all.csv"));
    assert_eq!(csv.lines().count(), 13);
    let v: Value = serde_json::from_str(&read(&dir.path().join("verify-all.json"))).unwrap();
    let expected = match v["verdict"].as_str().unwrap() {
        "verified" => 0,
        "violated" => 1,
        _ => 2,
    };
    assert_eq!(out.status.code(), Some(expected));
}
