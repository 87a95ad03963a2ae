//! Acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! The construction-backed criteria share one depth-4 trace built through
//! the binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use exact_cantor::cantor::{verify_trace, Builder, ConstructionConfig, ConstructionTrace};
use exact_cantor::dimension::{mdp_lower_bound, MdpInput};
use exact_cantor::space::{circle_offset, witness_violates, Witness};
use exact_cantor::{MetricMeasureSpace, Rational};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_exact-cantor");

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn rat(v: &Value) -> Rational {
    v.as_str()
        .unwrap_or_else(|| panic!("not a rational string: {v}"))
        .parse()
        .unwrap()
}

struct Cli {
    out: Output,
    secs: f64,
}

impl Cli {
    fn code(&self) -> i32 {
        self.out.status.code().unwrap_or(-1)
    }
    fn stdout(&self) -> &str {
        std::str::from_utf8(&self.out.stdout).unwrap()
    }
    fn stderr(&self) -> &str {
        std::str::from_utf8(&self.out.stderr).unwrap()
    }
    fn json(&self) -> Value {
        serde_json::from_str(self.stdout()).unwrap_or(Value::Null)
    }
}

fn cli(args: &[&str]) -> Cli {
    let t0 = Instant::now();
    let out = Command::new(BIN)
        .args(args)
        .env_remove("EXACT_CANTOR_SCRATCH")
        .output()
        .expect("spawn the binary");
    Cli {
        out,
        secs: t0.elapsed().as_secs_f64(),
    }
}

#[derive(Default)]
struct Ledger {
    failed: Vec<&'static str>,
}

impl Ledger {
    fn line(&mut self, id: &'static str, passed: bool, secs: f64, budget: f64, detail: String) {
        let ok = passed && secs <= budget;
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:<3} {detail}; {secs:.2} s of {budget} s");
        if !ok {
            self.failed.push(id);
        }
    }

    fn info(&self, id: &str, detail: String) {
        println!("[INFO] {id:<3} {detail}");
    }
}

fn jarnik_slope(l: &mut Ledger) {
    let run = cli(&[
        "dim",
        "box",
        "--system",
        "rationals",
        "--tau",
        "5/4",
        "--qmax",
        "4096",
        "--kmin",
        "8",
        "--kmax",
        "20",
        "--format",
        "json",
    ]);
    let slope = run.json()["result"]["report"]["slope"].as_f64();
    let passed = run.code() == 0 && slope.is_some_and(|s| (s - 0.8).abs() <= 0.05);
    l.line(
        "1",
        passed,
        run.secs,
        60.0,
        format!("box-counting slope of the tau = 5/4 rational cover {slope:?}, target 0.8 +- 0.05"),
    );
}

fn mdp_closed_form(l: &mut Ledger) {
    let t0 = Instant::now();
    let levels = 600;
    let input = MdpInput {
        alpha: Rational::one(),
        m: vec![Rational::from(2); levels],
        delta: (1..=levels).map(|i| Rational::from(4).pow(-(i as i32))).collect(),
    };
    let b = mdp_lower_bound(&input, levels).expect("mdp bound");
    let secs = t0.elapsed().as_secs_f64();
    let last = &b.terms.last().expect("terms").bound;
    let tol = r(1, 10_000);
    let half = r(1, 2);
    let passed = (&last.lo - &half).abs() <= tol && (&last.hi - &half).abs() <= tol;
    // Exact value of the bound at this depth, for the record.
    let exact = r(levels as i64 - 1, 2 * levels as i64 - 1);
    l.line(
        "2",
        passed,
        secs,
        1.0,
        format!(
            "b_600 in [{:.9}, {:.9}] (exact {:.9}), |b - 1/2| = {:.3e} against 1e-4",
            last.lo.to_f64(),
            last.hi.to_f64(),
            exact.to_f64(),
            (last.lo.to_f64() - 0.5).abs()
        ),
    );
}

/// Exact containment of every child ring in its parent's closed arcs.
fn nested_exactly(t: &ConstructionTrace) -> bool {
    t.levels.windows(2).all(|w| {
        w[1].annuli.iter().all(|a| {
            let Some(p) = a.parent.and_then(|i| w[0].annuli.get(i)) else {
                return false;
            };
            let o = circle_offset(p.center.coord(), a.center.coord()).abs();
            &o + &a.outer <= p.outer && &o - &a.outer >= p.inner
        })
    })
}

fn soundness(l: &mut Ledger, dir: &Path) -> Option<(PathBuf, ConstructionTrace)> {
    let path = dir.join("depth4.json");
    let run = cli(&[
        "build",
        "--psi",
        "pow:a=1,tau=5/2",
        "--mode",
        "practical",
        "--levels",
        "4",
        "--no-cache",
        "--out",
        path.to_str().unwrap(),
    ]);
    let trace = ConstructionTrace::load(&path).ok();
    let Some(t) = trace else {
        l.line(
            "3",
            false,
            run.secs,
            600.0,
            format!("build exited {}: {}", run.code(), run.stderr().trim()),
        );
        return None;
    };
    let recheck = verify_trace(&t).expect("re-verification");
    let c = &t.config.c;
    let floors = t.levels.iter().all(|lv| {
        let n = Rational::from_integer(lv.params.n.clone());
        lv.delta_band >= (Rational::from(6) * c * c * n).recip()
    });
    let named = recheck
        .iter()
        .all(|v| v.band && v.radii_sound && v.separation && v.delta_floor && v.counts && v.disjoint && v.nested);
    let passed =
        run.code() == 0 && t.depth() == 4 && recheck == t.verification && named && floors && nested_exactly(&t);
    l.line(
        "3",
        passed,
        run.secs,
        600.0,
        format!(
            "4 levels: re-verified {} of 4, delta floors {floors}, exact nesting {}, N_4 ~ 2^{:.0}",
            recheck.iter().filter(|v| v.passed()).count(),
            nested_exactly(&t),
            Rational::from_integer(t.levels[3].params.n.clone()).log2_approx()
        ),
    );
    Some((path, t))
}

fn exactness(l: &mut Ledger, trace: &Path) {
    let run = cli(&[
        "classify",
        "--trace",
        trace.to_str().unwrap(),
        "--count",
        "100",
        "--c",
        "7/8",
        "--seed",
        "7",
    ]);
    let s = &run.json()["result"]["summary"];
    let hits = s["min_certified_hits"].as_u64();
    let viol = s["violations"].as_u64();
    let passed = s["count"].as_u64() == Some(100) && hits.is_some_and(|h| h >= 4) && viol == Some(0);
    l.line(
        "4",
        passed,
        run.secs,
        300.0,
        format!(
            "100 depth-4 points: min certified hits {hits:?} (need 4), c_3 violations {viol:?}, inconclusive {}",
            s["inconclusive_violations"]
        ),
    );
}

fn dimension(l: &mut Ledger, trace: &Path) {
    let mdp = cli(&["dim", "mdp", "--trace", trace.to_str().unwrap(), "--format", "json"]);
    let terms = mdp.json()["result"]["bound"]["terms"]
        .as_array()
        .cloned()
        .unwrap_or_default();
    let bounds: Vec<(Rational, Rational)> = terms
        .iter()
        .map(|t| (rat(&t["bound"]["lo"]), rat(&t["bound"]["hi"])))
        .collect();
    let alpha = Rational::one();
    let in_range = !bounds.is_empty() && bounds.iter().all(|(lo, hi)| lo.is_positive() && *hi <= alpha);
    let monotone = bounds.windows(2).all(|w| w[1].0 >= w[0].1);
    let cover = cli(&["dim", "cover", "--psi", "pow:a=1,tau=5/2", "--format", "json"]);
    let br = &cover.json()["result"]["bracket"];
    let (below, above) = (rat(&br["below"]), rat(&br["above"]));
    let target = r(2, 5);
    let tol = r(1, 20);
    let bracketed = below <= target && target <= above && &target - &below <= tol && &above - &target <= tol;
    let shown: Vec<String> = bounds.iter().map(|(lo, _)| format!("{:.4}", lo.to_f64())).collect();
    l.line(
        "5",
        mdp.code() == 0 && cover.code() == 0 && in_range && monotone && bracketed,
        mdp.secs + cover.secs,
        120.0,
        format!(
            "b_2..b_4 = [{}] in (0, 1] {in_range}, nondecreasing {monotone}; cover bracket [{below}, {above}] around 2/5",
            shown.join(", ")
        ),
    );
}

fn regularity(l: &mut Ledger) {
    let circle = cli(&["verify", "space", "--space", "circle", "--trials", "10000"]);
    let cc = rat(&circle.json()["result"]["estimated_c"]);
    let cantor = cli(&["verify", "space", "--space", "cantor3", "--trials", "10000"]);
    let replay = cli(&["verify", "space", "--space", "cantor3", "--trials", "10000"]);
    let witness: Option<Witness> = serde_json::from_value(cantor.json()["result"]["witness"].clone()).ok();
    let empty = matches!(&witness, Some(Witness::Annulus { measure, .. }) if measure.is_zero());
    let genuine = witness
        .as_ref()
        .is_some_and(|w| witness_violates(&MetricMeasureSpace::cantor3(), w));
    let passed =
        circle.code() == 0 && cc <= 4 && cantor.code() == 1 && empty && genuine && replay.stdout() == cantor.stdout();
    l.line(
        "6",
        passed,
        circle.secs + cantor.secs + replay.secs,
        30.0,
        format!(
            "circle C = {cc} (need <= 4); middle-thirds empty-annulus witness {empty}, reproducible {}",
            replay.stdout() == cantor.stdout()
        ),
    );
}

fn wds_audit(c: &str) -> (Cli, Option<Rational>, bool, usize, usize) {
    let run = cli(&[
        "verify",
        "wds",
        "--system",
        "rationals",
        "--qmax",
        "200",
        "--c",
        c,
        "--k",
        "50,100,200",
        "--balls",
        "10",
    ]);
    let v = run.json();
    let ratio = v["result"]["separation"]["min_ratio"]
        .as_str()
        .map(|s| s.parse().unwrap());
    let dist = &v["result"]["distribution"];
    let rows = dist["counts_table"].as_array().map_or(0, Vec::len);
    let short = dist["counts_table"]
        .as_array()
        .map_or(0, |t| t.iter().filter(|r| r["passed"] == false).count());
    (run, ratio, dist["distribution_pass"] == true, rows, short)
}

fn wds(l: &mut Ledger) {
    let (run, ratio, dist, rows, short) = wds_audit("2");
    let sep = ratio.as_ref().is_some_and(|m| *m >= Rational::one());
    l.line(
        "7",
        sep && dist,
        run.secs,
        60.0,
        format!(
            "C = 2: min separation ratio {} (need >= 1); distribution rows short {short} of {rows}",
            ratio.map_or("-".into(), |m| m.to_string())
        ),
    );
    let (_, _, dist3, rows3, short3) = wds_audit("3");
    l.info(
        "7",
        format!("same audit at C = 3: distribution pass {dist3}, rows short {short3} of {rows3}"),
    );
}

fn gating(l: &mut Ledger, dir: &Path, trace: Option<&ConstructionTrace>) {
    let out = dir.join("divergent.json");
    let run = cli(&["build", "--psi", "pow:a=1,tau=2", "--out", out.to_str().unwrap()]);
    let fast = run.code() == 2 && run.stderr().contains("hypothesis violated") && !out.exists();
    let t0 = Instant::now();
    let mut certs = 0;
    let tails = trace.is_some_and(|t| {
        let b = Builder::new(t.config.clone()).expect("builder");
        let c3 = t.config.c.pow(3);
        t.tail_certificates.len() == t.depth()
            && t.tail_certificates.iter().all(|tc| {
                let n = &t.levels[tc.l - 1].params.n;
                let again = b.tail_certificate(tc.l, n).expect("tail certificate");
                // (1 − c_l)/(8C³)^5 for α = β = 1.
                let cl = ConstructionConfig::c_of_level(tc.l);
                let rhs = (Rational::one() - cl) / (Rational::from(8) * &c3).pow(5);
                let ok = again == *tc && tc.rhs.contains(&rhs) && tc.bound.hi <= tc.rhs.lo;
                certs += ok as usize;
                ok
            })
    });
    l.line(
        "8",
        fast && tails && run.secs < 5.0,
        run.secs + t0.elapsed().as_secs_f64(),
        30.0,
        format!(
            "tau = 2 rejected with exit {} in {:.3} s; tail certificates below the bound {certs} of {}",
            run.code(),
            run.secs,
            trace.map_or(0, ConstructionTrace::depth)
        ),
    );
}

fn determinism(l: &mut Ledger, dir: &Path, trace: Option<&(PathBuf, ConstructionTrace)>) {
    let t0 = Instant::now();
    let (a, b) = (dir.join("det-a.json"), dir.join("det-b.json"));
    let build = |p: &Path| {
        cli(&[
            "build",
            "--levels",
            "2",
            "--seed",
            "11",
            "--no-cache",
            "--out",
            p.to_str().unwrap(),
        ])
    };
    let (ra, rb) = (build(&a), build(&b));
    let traces = ra.code() == 0 && rb.code() == 0 && std::fs::read(&a).ok() == std::fs::read(&b).ok();
    let builds_print = ra.stdout() == rb.stdout();
    let audit = |args: &[&str]| cli(args).out.stdout;
    let space = audit(&["verify", "space", "--trials", "3000", "--seed", "4"]);
    let wdsr = audit(&[
        "verify", "wds", "--qmax", "120", "--k", "50,100", "--balls", "4", "--seed", "4",
    ]);
    let audits = space == audit(&["verify", "space", "--trials", "3000", "--seed", "4"])
        && wdsr
            == audit(&[
                "verify", "wds", "--qmax", "120", "--k", "50,100", "--balls", "4", "--seed", "4",
            ]);
    let stored = trace.is_none_or(|(p, t)| {
        let mut s = t.to_json().unwrap();
        s.push('\n');
        std::fs::read_to_string(p).ok().as_deref() == Some(s.as_str())
    });
    l.line(
        "9",
        traces && builds_print && audits && stored,
        t0.elapsed().as_secs_f64(),
        60.0,
        format!(
            "repeat builds byte-identical {traces}, audits identical {audits}, depth-4 trace re-serializes {stored}"
        ),
    );
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut l = Ledger::default();
    jarnik_slope(&mut l);
    mdp_closed_form(&mut l);
    let deep = soundness(&mut l, dir.path());
    match &deep {
        Some((p, _)) => {
            exactness(&mut l, p);
            dimension(&mut l, p);
        }
        None => {
            l.line("4", false, 0.0, 300.0, "no depth-4 trace".into());
            l.line("5", false, 0.0, 120.0, "no depth-4 trace".into());
        }
    }
    regularity(&mut l);
    wds(&mut l);
    gating(&mut l, dir.path(), deep.as_ref().map(|d| &d.1));
    determinism(&mut l, dir.path(), deep.as_ref());
    if l.failed.is_empty() {
        println!("all criteria pass");
    } else {
        println!("failing criteria: {}", l.failed.join(", "));
        std::process::exit(1);
    }
}
