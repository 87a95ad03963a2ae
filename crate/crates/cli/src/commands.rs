//! The subcommands. Each returns whether its checks passed.

use std::io::Write;
use std::path::{Path, PathBuf};

use exact_cantor::cantor::{self, sample_limit_points, ConstructionConfig, ConstructionTrace};
use exact_cantor::dimension::{
    box_count_union, box_count_wpsi, critical_bracket, mdp_bound_of_trace, mdp_input_of_trace, BoxReport,
};
use exact_cantor::oracle::classify_exactness;
use exact_cantor::rational::Rounding;
use exact_cantor::space::{audit_regularity, normalize_arcs};
use exact_cantor::{Ball, Interval, MetricMeasureSpace, Rational, SpaceKind, WdsSystem};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::*;
use crate::config::{parse_pair, Echo, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report::{self, decimal, Row};

/// Environment variable naming the cache and scratch directory.
pub const SCRATCH_ENV: &str = "EXACT_CANTOR_SCRATCH";

fn rat(n: &BigInt) -> Rational {
    Rational::from_integer(n.clone())
}

fn load_trace(path: &Path) -> CliResult<ConstructionTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    Ok(ConstructionTrace::from_json(&text)?)
}

fn rat_arg(flag: &str, s: &str) -> CliResult<Rational> {
    s.parse().map_err(|e| CliError::config(flag, format!("{s:?}: {e}")))
}

// verify space

pub fn verify_space(a: &VerifySpaceArgs, stdout: &mut dyn Write) -> CliResult<bool> {
    let cfg = a.cfg.resolve()?;
    let space = MetricMeasureSpace::of_kind(cfg.space);
    let rep = audit_regularity(&space, a.trials, cfg.seed);
    let echo = Echo::of(&cfg).with("trials", a.trials);
    report::emit(&report::json("verify space", &echo, &rep)?, a.out.as_deref(), stdout)?;
    Ok(rep.passed)
}

// verify wds

/// Seeded audit balls: dyadic centers, radii in `[1/20, 1/5]`.
pub fn audit_balls(count: usize, seed: u64) -> Vec<Ball> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let center = Rational::dyadic(rng.random_range(0u64..1 << 20), 20);
            let u = Rational::dyadic(rng.random_range(0u64..=1 << 10), 10);
            Ball::new(center, Rational::new(1, 20) + u * Rational::new(3, 20))
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct SeparationResult {
    qmax: u64,
    pairs: u64,
    min_ratio: Option<Rational>,
    min_ratio_decimal: Option<String>,
    witness: Option<(Rational, Rational)>,
    required: Rational,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct WdsResult {
    separation: SeparationResult,
    distribution: Option<exact_cantor::WdsAudit>,
    passed: bool,
}

pub fn verify_wds(a: &VerifyWdsArgs, stdout: &mut dyn Write) -> CliResult<bool> {
    let cfg = a.cfg.resolve()?;
    let system = WdsSystem::new(cfg.system, MetricMeasureSpace::of_kind(cfg.space), cfg.c.clone())
        .with_max_candidates(cfg.max_candidates);
    let scan = system.separation_scan(a.qmax)?;
    let required = cfg.c.recip();
    let sep_pass = scan.min_ratio.as_ref().is_none_or(|m| *m >= required);
    let separation = SeparationResult {
        qmax: a.qmax,
        pairs: scan.pairs,
        min_ratio_decimal: scan.min_ratio.as_ref().map(|m| decimal(m, Rounding::Down)),
        min_ratio: scan.min_ratio,
        witness: scan.witness,
        required,
        passed: sep_pass,
    };
    let distribution = if a.k.is_empty() {
        None
    } else {
        Some(system.audit(&a.k, &audit_balls(a.balls, cfg.seed))?)
    };
    let passed = sep_pass && distribution.as_ref().is_none_or(|d| d.distribution_pass);
    let ks: Vec<String> = a.k.iter().map(u64::to_string).collect();
    let echo = Echo::of(&cfg)
        .with("qmax", a.qmax)
        .with("k", ks.join(","))
        .with("balls", a.balls);
    let result = WdsResult {
        separation,
        distribution,
        passed,
    };
    report::emit(&report::json("verify wds", &echo, &result)?, a.out.as_deref(), stdout)?;
    Ok(passed)
}

// build

fn cache_path(dir: &Path, cfg: &ConstructionConfig) -> CliResult<PathBuf> {
    let key = Sha256::digest(serde_json::to_vec(cfg)?);
    Ok(dir.join("traces").join(format!("{}.json", hex::encode(key))))
}

fn cached_trace(path: &Path, cfg: &ConstructionConfig) -> Option<ConstructionTrace> {
    let t = ConstructionTrace::load(path).ok()?;
    (t.config == *cfg).then_some(t)
}

pub fn build(a: &BuildArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<bool> {
    let cfg = a.cfg.resolve()?.construction();
    let cache = match std::env::var_os(SCRATCH_ENV) {
        Some(dir) if !a.no_cache => Some(cache_path(Path::new(&dir), &cfg)?),
        _ => None,
    };
    let trace = match cache.as_deref().and_then(|p| cached_trace(p, &cfg)) {
        Some(t) => {
            writeln!(
                stderr,
                "reusing cached trace {}",
                cache.as_ref().expect("cache path").display()
            )?;
            t
        }
        None => {
            let t = cantor::build(&cfg)?;
            if let Some(p) = &cache {
                if let Some(parent) = p.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| CliError::file(parent, e))?;
                }
                t.save(p)?;
            }
            t
        }
    };
    trace.save(&a.out)?;
    stdout.write_all(summary_table(&trace).as_bytes())?;
    for w in &trace.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    Ok(trace.verified())
}

fn bits_of(n: &BigInt) -> String {
    format!("2^{:.3}", rat(n).log2_approx())
}

/// One line per level: `N_l`, `t_l`, `δ_l`, `m_l`, the tail certificate and
/// the verification verdict.
pub fn summary_table(t: &ConstructionTrace) -> String {
    let header = [
        "level",
        "N_l",
        "t_l",
        "delta_l",
        "m_l",
        "m_required",
        "tail_bound",
        "tail_rhs",
        "verified",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
    for (i, lv) in t.levels.iter().enumerate() {
        let tail = t.tail_certificates.iter().find(|c| c.l == lv.params.l);
        let m = lv.m_certified.as_ref().map_or("-".to_string(), bits_of);
        let verdict = t
            .verification
            .get(i)
            .map_or("no", |r| if r.passed() { "pass" } else { "FAIL" });
        rows.push(vec![
            lv.params.l.to_string(),
            bits_of(&lv.params.n),
            lv.t.to_string(),
            decimal(&lv.delta_band, Rounding::Down),
            m,
            decimal(&lv.params.m_required, Rounding::Up),
            tail.map_or("-".into(), |c| decimal(&c.bound.hi, Rounding::Up)),
            tail.map_or("-".into(), |c| decimal(&c.rhs.lo, Rounding::Down)),
            verdict.to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

// dim

fn emit_dim<T: Serialize>(
    command: &str,
    echo: &Echo,
    rows: &[Row],
    result: &T,
    format: Format,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let text = match format {
        Format::Csv => report::csv(echo, rows)?,
        Format::Json => report::json(command, echo, result)?,
    };
    report::emit(&text, out, stdout)
}

fn trace_echo(t: &ConstructionTrace, path: &Path) -> Echo {
    Echo::of(&RunConfig::from_construction(&t.config)).with("trace", path.display())
}

#[derive(Debug, Serialize)]
struct MdpResult {
    input: exact_cantor::dimension::MdpInput,
    bound: exact_cantor::dimension::MdpBound,
}

pub fn dim_mdp(a: &DimMdpArgs, stdout: &mut dyn Write) -> CliResult<bool> {
    let t = load_trace(&a.trace)?;
    let input = mdp_input_of_trace(&t)?;
    let bound = mdp_bound_of_trace(&t)?;
    let mut rows = Vec::new();
    for (i, (m, d)) in input.m.iter().zip(&input.delta).enumerate() {
        rows.push(Row::exact("level", i + 1, "m", m));
        rows.push(Row::exact("level", i + 1, "delta", d));
    }
    for term in &bound.terms {
        rows.push(Row::enclosure("bound", term.l, "b", &term.bound));
    }
    rows.push(Row::exact("summary", "", "liminf_surrogate", &bound.liminf_surrogate));
    rows.push(Row::text(
        "summary",
        "",
        "window",
        format!("{}..={}", bound.window.0, bound.window.1),
    ));
    if let Some(target) = &bound.target {
        rows.push(Row::exact("summary", "", "target", target));
    }
    let result = MdpResult { input, bound };
    emit_dim(
        "dim mdp",
        &trace_echo(&t, &a.trace),
        &rows,
        &result,
        a.format,
        a.out.as_deref(),
        stdout,
    )?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct BoxResult {
    source: String,
    report: BoxReport,
    target: Rational,
}

pub fn dim_box(a: &DimBoxArgs, stdout: &mut dyn Write) -> CliResult<bool> {
    if a.kmin > a.kmax || a.kmax > 62 {
        return Err(CliError::config(
            "--kmin/--kmax",
            format!("bad scale range {}..={}", a.kmin, a.kmax),
        ));
    }
    let ks: Vec<u32> = (a.kmin..=a.kmax).collect();
    let scales: Vec<Rational> = ks.iter().map(|&k| Rational::dyadic(1, k)).collect();
    let (echo, source, rep, target) = if let Some(path) = &a.trace {
        let t = load_trace(path)?;
        let l = a.level.unwrap_or(t.depth());
        let level = t
            .levels
            .get(l.wrapping_sub(1))
            .ok_or_else(|| CliError::config("--level", format!("trace has levels 1..={}", t.depth())))?;
        let arcs: Vec<Interval> = level.annuli.iter().flat_map(|an| an.arcs()).collect();
        let rep = box_count_union(&normalize_arcs(&arcs), &scales, true)?;
        let cfg = RunConfig::from_construction(&t.config);
        let echo = trace_echo(&t, path).with("level", l);
        (echo, format!("level {l} arcs"), rep, cfg.alpha)
    } else if !a.arc.is_empty() {
        let cfg = a.cfg.resolve()?;
        let arcs = a
            .arc
            .iter()
            .map(|s| parse_pair(s).map(|(lo, hi)| Interval::new(lo, hi)))
            .collect::<exact_cantor::Result<Vec<_>>>()
            .map_err(|e| CliError::config("--arc", e.to_string()))?;
        let rep = box_count_union(&arcs, &scales, cfg.space == SpaceKind::Circle)?;
        let echo = Echo::of(&cfg).with("arc", a.arc.join(" "));
        (echo, "explicit arcs".to_string(), rep, cfg.alpha)
    } else {
        let cfg = a.cfg.resolve()?;
        if cfg.system != exact_cantor::SystemKind::Rationals || cfg.space != SpaceKind::Circle {
            return Err(CliError::Usage(
                "the cover box count needs the rationals on the circle".into(),
            ));
        }
        let rep = box_count_wpsi(&cfg.psi, a.qmax, &ks)?;
        let echo = Echo::of(&cfg).with("qmax", a.qmax);
        let target = &cfg.alpha / &cfg.psi.lower_order_at_zero();
        (echo, "rational cover".to_string(), rep, target)
    };
    let echo = echo.with("kmin", a.kmin).with("kmax", a.kmax);
    let mut rows: Vec<Row> = rep
        .rows
        .iter()
        .map(|r| Row::exact("scale", r.k, "count", &Rational::from(r.count as i64)))
        .collect();
    rows.push(Row::float("summary", "", "slope", rep.slope));
    rows.push(Row::float("summary", "", "intercept", rep.intercept));
    rows.push(Row::float("summary", "", "residual", rep.residual));
    rows.push(Row::text(
        "summary",
        "",
        "fit_window",
        format!("{}..={}", rep.fit_window.0, rep.fit_window.1),
    ));
    rows.push(Row::exact("summary", "", "target", &target));
    let result = BoxResult {
        source,
        report: rep,
        target,
    };
    emit_dim("dim box", &echo, &rows, &result, a.format, a.out.as_deref(), stdout)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct CoverResult {
    bracket: exact_cantor::dimension::CriticalBracket,
    target: Rational,
    contains_target: bool,
}

pub fn dim_cover(a: &DimCoverArgs, stdout: &mut dyn Write) -> CliResult<bool> {
    let cfg = a.cfg.resolve()?;
    if a.grid < 2 {
        return Err(CliError::config("--grid", "grid must be at least 2"));
    }
    let tol = rat_arg("--tol", &a.tol)?;
    let bracket = critical_bracket(&cfg.psi, &cfg.alpha, &tol, a.grid)?;
    let target = &cfg.alpha / &cfg.psi.lower_order_at_zero();
    let mut rows: Vec<Row> = bracket
        .probes
        .iter()
        .enumerate()
        .flat_map(|(i, (s, trend))| {
            let trend = serde_json::to_value(trend)
                .ok()
                .and_then(|v| v.as_str().map(String::from));
            [
                Row::exact("probe", i, "s", s),
                Row::text("probe", i, "trend", trend.unwrap_or_default()),
            ]
        })
        .collect();
    rows.push(Row::exact("summary", "", "below", &bracket.below));
    rows.push(Row::exact("summary", "", "above", &bracket.above));
    rows.push(Row::exact("summary", "", "target", &target));
    let echo = Echo::of(&cfg).with("grid", a.grid).with("tol", &tol);
    let contains_target = bracket.contains(&target);
    let result = CoverResult {
        bracket,
        target,
        contains_target,
    };
    emit_dim("dim cover", &echo, &rows, &result, a.format, a.out.as_deref(), stdout)?;
    Ok(true)
}

// classify

#[derive(Debug, Serialize)]
struct Verdict {
    chain: Vec<usize>,
    x: Rational,
    error_radius: Rational,
    certified_hits: usize,
    strict_hits: usize,
    violations: usize,
    inconclusive_violations: usize,
    error_dominates: bool,
}

#[derive(Debug, Serialize)]
pub struct ClassifySummary {
    pub count: usize,
    pub depth: usize,
    pub c: Rational,
    pub band: (Rational, Rational),
    pub min_certified_hits: usize,
    pub min_strict_hits: usize,
    pub violations: usize,
    pub inconclusive_violations: usize,
    pub error_dominated: usize,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
struct ClassifyResult {
    summary: ClassifySummary,
    verdicts: Vec<Verdict>,
}

pub fn classify(a: &ClassifyArgs, stdout: &mut dyn Write) -> CliResult<bool> {
    let t = load_trace(&a.trace)?;
    let d = t.depth();
    let seed = a.seed.unwrap_or(t.config.seed);
    let samples = sample_limit_points(&t, a.count, seed)?;
    let c = match &a.c {
        Some(s) => rat_arg("--c", s)?,
        None => ConstructionConfig::c_of_level(d - 1),
    };
    let cc = &t.config.c;
    let band = match &a.band {
        Some(s) => parse_pair(s).map_err(|e| CliError::config("--band", e.to_string()))?,
        None => (
            (cc * rat(&t.levels[d - 1].params.n)).recip(),
            cc / rat(&t.levels[d - 2].params.n),
        ),
    };
    if !band.0.is_positive() || band.1 > Rational::one() {
        return Err(CliError::config("--band", "band must lie in (0, 1]"));
    }
    let system = t.config.wds();
    let psi = &t.config.psi;
    let one = Rational::one();
    // Hits are counted over every radius from the band floor up; violations
    // only where the band asks for them.
    let verdicts = samples
        .par_iter()
        .map(|s| {
            let v = classify_exactness(s.point.coord(), &s.error_radius, &system, psi, &c, (&band.0, &one))?;
            let inside = |r: &Rational| r <= &band.1;
            Ok(Verdict {
                chain: s.chain.clone(),
                x: v.x.clone(),
                error_radius: s.error_radius.clone(),
                certified_hits: v.certified_hits(),
                strict_hits: v.strict_hits(),
                violations: v.violations.iter().filter(|ap| inside(&ap.radius)).count(),
                inconclusive_violations: v.inconclusive_violations.iter().filter(|ap| inside(&ap.radius)).count(),
                error_dominates: v.error_dominates,
            })
        })
        .collect::<exact_cantor::Result<Vec<_>>>()?;
    let min_certified_hits = verdicts.iter().map(|v| v.certified_hits).min().unwrap_or(0);
    let violations = verdicts.iter().map(|v| v.violations).sum();
    let summary = ClassifySummary {
        count: verdicts.len(),
        depth: d,
        c: c.clone(),
        band: band.clone(),
        min_certified_hits,
        min_strict_hits: verdicts.iter().map(|v| v.strict_hits).min().unwrap_or(0),
        violations,
        inconclusive_violations: verdicts.iter().map(|v| v.inconclusive_violations).sum(),
        error_dominated: verdicts.iter().filter(|v| v.error_dominates).count(),
        passed: violations == 0 && min_certified_hits >= d,
    };
    let passed = summary.passed;
    let echo = trace_echo(&t, &a.trace)
        .with("count", a.count)
        .with("c_test", &c)
        .with("band", format!("{}:{}", band.0, band.1))
        .with("sample_seed", seed);
    let result = ClassifyResult { summary, verdicts };
    report::emit(&report::json("classify", &echo, &result)?, a.out.as_deref(), stdout)?;
    Ok(passed)
}

// sample

pub fn sample(a: &SampleArgs, stdout: &mut dyn Write) -> CliResult<bool> {
    let t = load_trace(&a.trace)?;
    let seed = a.seed.unwrap_or(t.config.seed);
    let samples = sample_limit_points(&t, a.count, seed)?;
    let echo = trace_echo(&t, &a.trace)
        .with("count", a.count)
        .with("sample_seed", seed);
    report::emit(&report::json("sample", &echo, &samples)?, a.out.as_deref(), stdout)?;
    Ok(true)
}
