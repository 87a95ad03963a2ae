use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde_json::Value;

use super::*;

struct Run {
    status: ExitStatus,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

fn exec(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("exact-cantor").chain(args.iter().copied());
    let status = run(argv, &mut out, &mut err);
    Run {
        status,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn scratch() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().unwrap()).path()
}

fn trace_at(levels: usize) -> PathBuf {
    let p = scratch().join(format!("t{levels}.json"));
    if !p.exists() {
        let tmp = scratch().join(format!("t{levels}.{:?}.partial", std::thread::current().id()));
        let r = exec(&[
            "build",
            "--levels",
            &levels.to_string(),
            "--no-cache",
            "--out",
            tmp.to_str().unwrap(),
        ]);
        assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
        std::fs::rename(&tmp, &p).unwrap();
    }
    p
}

fn two_levels() -> &'static PathBuf {
    static P: OnceLock<PathBuf> = OnceLock::new();
    P.get_or_init(|| trace_at(2))
}

#[test]
fn circle_passes_and_cantor_fails_with_witness() {
    let r = exec(&["verify", "space", "--space", "circle", "--trials", "2000"]);
    assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["command"], "verify space");
    assert_eq!(v["result"]["passed"], true);

    let r = exec(&["verify", "space", "--space", "cantor3", "--trials", "500"]);
    assert_eq!(r.status, ExitStatus::Failed);
    assert!(r.json()["result"]["witness"]["annulus"].is_object(), "{}", r.stdout);
}

#[test]
fn rational_separation_scan() {
    let r = exec(&["verify", "wds", "--system", "rationals", "--qmax", "200"]);
    assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
    let sep = &r.json()["result"]["separation"];
    let ratio: exact_cantor::Rational = sep["min_ratio"].as_str().unwrap().parse().unwrap();
    assert!(ratio >= exact_cantor::Rational::one());
    assert!(r.json()["result"]["distribution"].is_null());
}

#[test]
fn divergent_exponent_is_a_config_error() {
    let out = scratch().join("never.json");
    let t0 = std::time::Instant::now();
    let r = exec(&["build", "--psi", "pow:a=1,tau=2", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status, ExitStatus::Usage);
    assert!(r.stderr.contains("hypothesis violated"), "{}", r.stderr);
    assert!(t0.elapsed().as_secs() < 5);
    assert!(!out.exists());
}

#[test]
fn config_file_diagnostics_and_overrides() {
    let cfg = scratch().join("bad.cfg");
    std::fs::write(&cfg, "levels = 2\nthis line is wrong\n").unwrap();
    let r = exec(&["verify", "space", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status, ExitStatus::Usage);
    assert!(r.stderr.contains("bad.cfg:2"), "{}", r.stderr);

    let cfg = scratch().join("good.cfg");
    std::fs::write(&cfg, "space = cantor3\nseed = 5\n").unwrap();
    let r = exec(&[
        "verify",
        "space",
        "--config",
        cfg.to_str().unwrap(),
        "--space",
        "circle",
        "--trials",
        "50",
    ]);
    assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
    let echo = &r.json()["config"];
    assert_eq!(echo[0], serde_json::json!(["space", "circle"]));
    assert!(echo.as_array().unwrap().contains(&serde_json::json!(["seed", "5"])));

    assert_eq!(exec(&["verify", "space", "--levels", "0"]).status, ExitStatus::Usage);
    assert_eq!(exec(&["frobnicate"]).status, ExitStatus::Usage);
}

#[test]
fn build_is_byte_identical_and_reports_levels() {
    let first = std::fs::read(two_levels()).unwrap();
    let again = scratch().join("again.json");
    let r = exec(&["build", "--levels", "2", "--no-cache", "--out", again.to_str().unwrap()]);
    assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
    assert_eq!(std::fs::read(&again).unwrap(), first);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("level") && lines[1].ends_with("pass") && lines[2].ends_with("pass"));
}

#[test]
fn scratch_cache_is_reused() {
    let dir = scratch().join("cache");
    let out = scratch().join("cached.json");
    // Only this test sets the variable; every other build passes --no-cache.
    std::env::set_var(commands::SCRATCH_ENV, &dir);
    let a = exec(&["build", "--levels", "1", "--out", out.to_str().unwrap()]);
    let b = exec(&["build", "--levels", "1", "--out", out.to_str().unwrap()]);
    std::env::remove_var(commands::SCRATCH_ENV);
    assert_eq!(a.status, ExitStatus::Pass, "{}", a.stderr);
    assert_eq!(b.status, ExitStatus::Pass, "{}", b.stderr);
    assert!(!a.stderr.contains("reusing") && b.stderr.contains("reusing"));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read_dir(dir.join("traces")).unwrap().count(), 1);
}

#[test]
fn mdp_report_lists_each_level() {
    let r = exec(&["dim", "mdp", "--trace", two_levels().to_str().unwrap()]);
    assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
    let mut rdr = csv::Reader::from_reader(r.stdout.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert!(rows
        .iter()
        .any(|r| &r[0] == "config" && &r[2] == "psi" && &r[3] == "pow:a=1,tau=5/2"));
    let b: Vec<&csv::StringRecord> = rows.iter().filter(|r| &r[0] == "bound").collect();
    assert_eq!(b.len(), 1);
    assert_eq!(&b[0][1], "2");
    let target = rows.iter().find(|r| &r[0] == "summary" && &r[2] == "target").unwrap();
    assert_eq!(&target[3], "2/5");
}

#[test]
fn box_counts_of_arcs() {
    let r = exec(&[
        "dim", "box", "--arc", "0:1/2", "--format", "json", "--kmin", "4", "--kmax", "14",
    ]);
    assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
    let slope = r.json()["result"]["report"]["slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 0.01, "{slope}");

    let r = exec(&[
        "dim",
        "box",
        "--trace",
        two_levels().to_str().unwrap(),
        "--level",
        "1",
        "--format",
        "json",
    ]);
    assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
    assert_eq!(r.json()["result"]["source"], "level 1 arcs");
    let r = exec(&["dim", "box", "--trace", two_levels().to_str().unwrap(), "--level", "3"]);
    assert_eq!(r.status, ExitStatus::Usage);
}

#[test]
fn cover_bracket_brackets_the_exponent() {
    let r = exec(&["dim", "cover", "--psi", "pow:a=1,tau=5/2", "--format", "json"]);
    assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
    assert_eq!(r.json()["result"]["contains_target"], true, "{}", r.stdout);
}

#[test]
fn classify_and_sample_a_trace() {
    let t = two_levels().to_str().unwrap();
    let r = exec(&["classify", "--trace", t, "--count", "12", "--seed", "3"]);
    assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
    let s = &r.json()["result"]["summary"];
    assert_eq!(s["violations"], 0);
    assert!(s["min_certified_hits"].as_u64().unwrap() >= 2);
    assert_eq!(s["c"], "1/2");
    assert_eq!(
        r.stdout,
        exec(&["classify", "--trace", t, "--count", "12", "--seed", "3"]).stdout
    );

    let r = exec(&["sample", "--trace", t, "--count", "4", "--seed", "1"]);
    assert_eq!(r.status, ExitStatus::Pass, "{}", r.stderr);
    assert_eq!(r.json()["result"].as_array().unwrap().len(), 4);

    assert_eq!(
        exec(&["classify", "--trace", t, "--c", "3/2"]).status,
        ExitStatus::Usage
    );
    let missing = exec(&["classify", "--trace", "/nonexistent/trace.json"]);
    assert_eq!(missing.status, ExitStatus::Usage);
    assert!(missing.stderr.contains("/nonexistent/trace.json"));
}

#[test]
fn one_level_trace_cannot_be_classified() {
    let one = trace_at(1);
    let r = exec(&["classify", "--trace", one.to_str().unwrap(), "--count", "3"]);
    assert_eq!(r.status, ExitStatus::Usage);
    assert!(r.stderr.contains("depth >= 2"), "{}", r.stderr);
}
