//! Metric measure spaces with Ahlfors and annular regularity audits.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Which concrete ambient space is in use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Circle,
    Interval,
    Cantor3,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::Circle => "circle",
            SpaceKind::Interval => "interval",
            SpaceKind::Cantor3 => "cantor3",
        })
    }
}

impl FromStr for SpaceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "circle" => Ok(SpaceKind::Circle),
            "interval" => Ok(SpaceKind::Interval),
            "cantor3" | "cantor" => Ok(SpaceKind::Cantor3),
            other => Err(Error::Parse(format!(
                "unknown space {other:?} (expected circle, interval or cantor3)"
            ))),
        }
    }
}

/// A regularity exponent. Rational for the smooth spaces, `log 2 / log 3`
/// for the middle-thirds set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exponent {
    Exact(Rational),
    Log2Over3,
}

impl Exponent {
    pub fn to_f64(&self) -> f64 {
        match self {
            Exponent::Exact(r) => r.to_f64(),
            Exponent::Log2Over3 => 2f64.ln() / 3f64.ln(),
        }
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            Exponent::Exact(r) => Some(r),
            Exponent::Log2Over3 => None,
        }
    }
}

/// A point given by its coordinate; circle coordinates live in `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Rational);

impl Point {
    pub fn new(coord: Rational) -> Self {
        Point(coord)
    }

    pub fn coord(&self) -> &Rational {
        &self.0
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Open ball `B(center, radius)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: Rational,
}

impl Ball {
    pub fn new(center: Rational, radius: Rational) -> Self {
        Ball {
            center: Point(center),
            radius,
        }
    }
}

/// Closed outer ball minus open inner ball.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annulus {
    pub center: Point,
    pub inner: Rational,
    pub outer: Rational,
}

impl Annulus {
    pub fn new(center: Rational, inner: Rational, outer: Rational) -> Self {
        Annulus {
            center: Point(center),
            inner,
            outer,
        }
    }
}

/// Closed real interval `[lo, hi]`, used for arcs in lifted coordinates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// An ambient space together with its regularity exponents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricMeasureSpace {
    pub kind: SpaceKind,
    pub alpha: Exponent,
    pub beta: Exponent,
    pub diameter: Rational,
}

/// Outcome of a regularity audit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub space: SpaceKind,
    pub passed: bool,
    pub estimated_c: Rational,
    pub witness: Option<Witness>,
    pub samples_tested: usize,
    pub degenerate_skipped: usize,
    pub seed: u64,
}

/// A ball or annulus where the regularity bound fails.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    Ball { ball: Ball, measure: Rational },
    Annulus { annulus: Annulus, measure: Rational },
}

/// `C` values above this are reported as failures.
pub const DEFAULT_C_CAP: i64 = 1_000_000;

impl MetricMeasureSpace {
    pub fn circle() -> Self {
        MetricMeasureSpace {
            kind: SpaceKind::Circle,
            alpha: Exponent::Exact(Rational::one()),
            beta: Exponent::Exact(Rational::one()),
            diameter: Rational::new(1, 2),
        }
    }

    pub fn interval() -> Self {
        MetricMeasureSpace {
            kind: SpaceKind::Interval,
            alpha: Exponent::Exact(Rational::one()),
            beta: Exponent::Exact(Rational::one()),
            diameter: Rational::one(),
        }
    }

    pub fn cantor3() -> Self {
        MetricMeasureSpace {
            kind: SpaceKind::Cantor3,
            alpha: Exponent::Log2Over3,
            beta: Exponent::Log2Over3,
            diameter: Rational::one(),
        }
    }

    pub fn of_kind(kind: SpaceKind) -> Self {
        match kind {
            SpaceKind::Circle => Self::circle(),
            SpaceKind::Interval => Self::interval(),
            SpaceKind::Cantor3 => Self::cantor3(),
        }
    }

    /// Canonical coordinate of a point (circle points reduced mod 1).
    pub fn normalize(&self, x: &Rational) -> Rational {
        match self.kind {
            SpaceKind::Circle => x.fract(),
            _ => x.clone(),
        }
    }

    pub fn distance(&self, a: &Point, b: &Point) -> Rational {
        distance(self, a, b)
    }

    pub fn ball_measure(&self, b: &Ball) -> Rational {
        ball_measure(self, b)
    }
}

/// Circle distance between two coordinates.
pub fn circle_distance(a: &Rational, b: &Rational) -> Rational {
    let t = (a - b).fract();
    let u = Rational::one() - &t;
    t.min(u)
}

/// Signed circle offset `b - a` reduced into `(-1/2, 1/2]`.
pub fn circle_offset(a: &Rational, b: &Rational) -> Rational {
    let t = (b - a).fract();
    if t > Rational::new(1, 2) {
        t - Rational::one()
    } else {
        t
    }
}

pub fn distance(space: &MetricMeasureSpace, a: &Point, b: &Point) -> Rational {
    match space.kind {
        SpaceKind::Circle => circle_distance(&a.0, &b.0),
        SpaceKind::Interval | SpaceKind::Cantor3 => (&a.0 - &b.0).abs(),
    }
}

fn clip01(x: Rational) -> Rational {
    if x.is_negative() {
        Rational::zero()
    } else if x > Rational::one() {
        Rational::one()
    } else {
        x
    }
}

/// Cantor function evaluated exactly on a rational in `[0, 1]`.
pub fn cantor_function(x: &Rational) -> Rational {
    if !x.is_positive() {
        return Rational::zero();
    }
    if *x >= Rational::one() {
        return Rational::one();
    }
    let den = x.denom().clone();
    let mut n = x.numer().clone();
    let mut bits: Vec<u8> = Vec::new();
    let mut seen: HashMap<BigInt, usize> = HashMap::new();
    let three = BigInt::from(3u32);
    loop {
        if n.is_zero() {
            return bits_value(&bits, None);
        }
        if let Some(&start) = seen.get(&n) {
            return bits_value(&bits, Some(start));
        }
        seen.insert(n.clone(), bits.len());
        let t = &n * &three;
        let (digit, rest) = t.div_rem(&den);
        let digit = digit.to_u8().expect("ternary digit");
        match digit {
            0 => bits.push(0),
            2 => bits.push(1),
            _ => {
                // First middle digit: the value is constant from here on.
                bits.push(1);
                return bits_value(&bits, None);
            }
        }
        n = rest;
    }
}

/// Value of the binary string `0.b1 b2 ...`, with `bits[start..]` repeating.
fn bits_value(bits: &[u8], period_start: Option<usize>) -> Rational {
    let to_int = |s: &[u8]| -> BigInt { s.iter().fold(BigInt::zero(), |acc, &b| (acc << 1u32) + BigInt::from(b)) };
    match period_start {
        None => Rational::new(to_int(bits), BigInt::one() << bits.len()),
        Some(s) => {
            let pre = &bits[..s];
            let per = &bits[s..];
            let l = per.len();
            let head = Rational::new(to_int(pre), BigInt::one() << s);
            let cyc = Rational::new(to_int(per), (BigInt::one() << l) - 1u32);
            head + cyc * Rational::new(BigInt::one(), BigInt::one() << s)
        }
    }
}

/// Measure of the open ball; the ball is intersected with the space.
pub fn ball_measure(space: &MetricMeasureSpace, b: &Ball) -> Rational {
    closed_ball_measure(space, &b.center.0, &b.radius)
}

// Open and closed balls have the same measure in all three spaces.
fn closed_ball_measure(space: &MetricMeasureSpace, c: &Rational, r: &Rational) -> Rational {
    if r.is_negative() {
        return Rational::zero();
    }
    match space.kind {
        SpaceKind::Circle => (r * Rational::from(2)).min(Rational::one()),
        SpaceKind::Interval => clip01(c + r) - clip01(c - r),
        SpaceKind::Cantor3 => cantor_function(&clip01(c + r)) - cantor_function(&clip01(c - r)),
    }
}

/// Exact `μ(B̄(c, outer)) − μ(B(c, inner))`.
pub fn annulus_measure(space: &MetricMeasureSpace, a: &Annulus) -> Rational {
    closed_ball_measure(space, &a.center.0, &a.outer) - closed_ball_measure(space, &a.center.0, &a.inner)
}

/// Circle annulus as closed arcs in lifted coordinates around its center.
pub fn annulus_arcs(a: &Annulus) -> Vec<Interval> {
    let c = &a.center.0;
    if a.inner.is_zero() {
        return vec![Interval::new(c - &a.outer, c + &a.outer)];
    }
    vec![
        Interval::new(c - &a.outer, c - &a.inner),
        Interval::new(c + &a.inner, c + &a.outer),
    ]
}

/// Split lifted arcs into pieces inside `[0, 1]`, sorted and merged.
pub fn normalize_arcs(arcs: &[Interval]) -> Vec<Interval> {
    let one = Rational::one();
    let mut pieces: Vec<Interval> = Vec::new();
    for a in arcs {
        if a.length() >= one {
            pieces.push(Interval::new(Rational::zero(), one.clone()));
            continue;
        }
        let shift = Rational::from_integer(a.lo.floor());
        let lo = &a.lo - &shift;
        let hi = &a.hi - &shift;
        if hi <= one {
            pieces.push(Interval::new(lo, hi));
        } else {
            pieces.push(Interval::new(lo, one.clone()));
            pieces.push(Interval::new(Rational::zero(), hi - &one));
        }
    }
    merge_intervals(pieces)
}

/// Sort and merge overlapping or touching closed intervals.
pub fn merge_intervals(mut v: Vec<Interval>) -> Vec<Interval> {
    v.sort();
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for iv in v {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi => {
                if iv.hi > last.hi {
                    last.hi = iv.hi;
                }
            }
            _ => out.push(iv),
        }
    }
    out
}

fn exponent_power(e: &Exponent, x: &Rational) -> f64 {
    match e {
        Exponent::Exact(r) if *r == Rational::one() => x.to_f64(),
        _ => (x.log2_approx() * e.to_f64()).exp2(),
    }
}

/// Ball ratio `max(μ/r^α, r^α/μ)` and annulus ratio `r^α((R−r)/r)^β / μ`.
/// Exact for unit exponents; `None` means the bound cannot hold for any `C`.
fn ball_ratio(space: &MetricMeasureSpace, r: &Rational, mu: &Rational) -> Option<Rational> {
    if mu.is_zero() {
        return None;
    }
    match space.alpha.as_rational() {
        Some(a) if *a == Rational::one() => {
            let up = mu / r;
            let down = r / mu;
            Some(up.max(down))
        }
        _ => {
            let ra = exponent_power(&space.alpha, r);
            let m = mu.to_f64();
            let v = (m / ra).max(ra / m);
            Some(Rational::from(num_rational::BigRational::from_float(v)?))
        }
    }
}

fn annulus_ratio(space: &MetricMeasureSpace, a: &Annulus, mu: &Rational) -> Option<Rational> {
    if mu.is_zero() {
        return None;
    }
    let unit = |e: &Exponent| e.as_rational().is_some_and(|x| *x == Rational::one());
    if unit(&space.alpha) && unit(&space.beta) {
        return Some((&a.outer - &a.inner) / mu);
    }
    let ra = exponent_power(&space.alpha, &a.inner);
    let q = (&a.outer - &a.inner) / &a.inner;
    let qb = exponent_power(&space.beta, &q);
    let v = ra * qb / mu.to_f64();
    Some(Rational::from(num_rational::BigRational::from_float(v)?))
}

fn random_dyadic(rng: &mut ChaCha8Rng, depth: u32) -> Rational {
    let n: u64 = rng.random_range(0..(1u64 << depth));
    Rational::dyadic(n, depth)
}

/// A random point of the middle-thirds set with `depth` ternary digits.
fn random_cantor_point(rng: &mut ChaCha8Rng, depth: u32) -> Rational {
    let mut x = Rational::zero();
    let mut scale = Rational::one();
    let third = Rational::new(1, 3);
    for _ in 0..depth {
        scale = &scale * &third;
        if rng.random_bool(0.5) {
            x += &(&scale * Rational::from(2));
        }
    }
    x
}

/// Sampling depth for audit centers and radii.
pub const AUDIT_DEPTH: u32 = 20;

/// Check both regularity bounds on seeded random balls and annuli.
pub fn audit_regularity(space: &MetricMeasureSpace, trials: usize, seed: u64) -> RegularityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials.max(1) {
        let center = match space.kind {
            SpaceKind::Cantor3 => random_cantor_point(&mut rng, AUDIT_DEPTH),
            _ => random_dyadic(&mut rng, AUDIT_DEPTH),
        };
        let a = random_dyadic(&mut rng, AUDIT_DEPTH) * &space.diameter;
        let b = random_dyadic(&mut rng, AUDIT_DEPTH) * &space.diameter;
        let (inner, outer) = if a <= b { (a, b) } else { (b, a) };
        samples.push(Annulus::new(center, inner, outer));
    }
    audit_annuli(space, &samples, seed)
}

/// Check both regularity bounds on an explicit list of annuli; each annulus
/// also contributes its outer ball to the Ahlfors check.
pub fn audit_annuli(space: &MetricMeasureSpace, samples: &[Annulus], seed: u64) -> RegularityReport {
    let cap = Rational::from(DEFAULT_C_CAP);
    let mut worst = Rational::one();
    let mut witness: Option<Witness> = None;
    let mut degenerate = 0usize;
    let mut worst_witness: Option<Witness> = None;
    for a in samples {
        if a.outer.is_positive() {
            let ball = Ball::new(a.center.0.clone(), a.outer.clone());
            let mu = ball_measure(space, &ball);
            match ball_ratio(space, &a.outer, &mu) {
                None => {
                    witness.get_or_insert(Witness::Ball { ball, measure: mu });
                }
                Some(r) => {
                    if r > worst {
                        worst = r;
                        worst_witness = Some(Witness::Ball { ball, measure: mu });
                    }
                }
            }
        }
        if a.inner == a.outer || a.inner.is_zero() {
            degenerate += 1;
            continue;
        }
        let mu = annulus_measure(space, a);
        match annulus_ratio(space, a, &mu) {
            None => {
                witness.get_or_insert(Witness::Annulus {
                    annulus: a.clone(),
                    measure: mu,
                });
            }
            Some(r) => {
                if r > worst {
                    worst = r;
                    worst_witness = Some(Witness::Annulus {
                        annulus: a.clone(),
                        measure: mu,
                    });
                }
            }
        }
    }
    let over_cap = worst > cap;
    if witness.is_none() && over_cap {
        witness = worst_witness;
    }
    RegularityReport {
        space: space.kind,
        passed: witness.is_none(),
        estimated_c: worst,
        witness,
        samples_tested: samples.len(),
        degenerate_skipped: degenerate,
        seed,
    }
}

/// Re-evaluate a witness: true when it still violates every finite `C` up to the cap.
pub fn witness_violates(space: &MetricMeasureSpace, w: &Witness) -> bool {
    let cap = Rational::from(DEFAULT_C_CAP);
    match w {
        Witness::Ball { ball, measure } => {
            let mu = ball_measure(space, ball);
            mu == *measure && ball_ratio(space, &ball.radius, &mu).is_none_or(|r| r > cap)
        }
        Witness::Annulus { annulus, measure } => {
            let mu = annulus_measure(space, annulus);
            mu == *measure && annulus_ratio(space, annulus, &mu).is_none_or(|r| r > cap)
        }
    }
}
