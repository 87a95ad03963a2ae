//! Well-separated, well-distributed point systems: reduced rationals with
//! `R(p/q) = q⁻²` and odd-numerator dyadics with `R(p/2^j) = 2^-j`.

pub mod count;
pub mod cover;
pub mod farey;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psi::ApproxFunction;
use crate::rational::{ceil_sqrt, floor_sqrt, Rational};
use crate::space::{ball_measure, Ball, Exponent, Interval, MetricMeasureSpace, Point, SpaceKind};

pub use count::BandSet;
pub use cover::cover_open_set;
use farey::{fractions_in, pruned_search, Frac, Region};

/// Default bound on the number of points a single query may produce.
pub const DEFAULT_MAX_CANDIDATES: usize = 2_000_000;

/// Node budget for one ψ-neighbourhood search.
pub const SEARCH_NODE_LIMIT: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Rationals,
    Dyadics,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemKind::Rationals => "rationals",
            SystemKind::Dyadics => "dyadics",
        })
    }
}

impl FromStr for SystemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rationals" => Ok(SystemKind::Rationals),
            "dyadics" => Ok(SystemKind::Dyadics),
            other => Err(Error::Parse(format!(
                "unknown system {other:?} (expected rationals or dyadics)"
            ))),
        }
    }
}

/// A system point with its radius `R(ξ)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WdsPoint {
    pub point: Point,
    pub radius: Rational,
}

impl WdsPoint {
    pub fn coord(&self) -> &Rational {
        &self.point.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WdsSystem {
    pub kind: SystemKind,
    pub space: MetricMeasureSpace,
    pub c: Rational,
    pub max_candidates: usize,
}

/// One distribution check: ball index, band `k`, and the two counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub ball: usize,
    pub k: u64,
    pub observed: usize,
    pub required: Rational,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WdsAudit {
    pub system: SystemKind,
    pub c: Rational,
    pub passed: bool,
    pub min_separation_ratio: Option<Rational>,
    pub separation_pairs: u64,
    pub separation_pass: bool,
    pub distribution_pass: bool,
    /// Least tested `k` from which every larger tested `k` passes on every ball.
    pub estimated_kb: Option<u64>,
    pub per_ball_kb: Vec<Option<u64>>,
    pub counts_table: Vec<CountRow>,
}

/// Smallest `j >= 0` with `2^j >= x`.
fn ceil_log2(x: &Rational) -> u64 {
    let mut j = 0u64;
    let mut p = Rational::one();
    while p < *x {
        p = p * Rational::from(2);
        j += 1;
    }
    j
}

/// Largest `j` with `2^j <= x`, if `x >= 1`.
fn floor_log2(x: &Rational) -> Option<u64> {
    if *x < Rational::one() {
        return None;
    }
    let f = x.floor();
    Some(f.bits() - 1)
}

fn to_frac(r: &Rational) -> Frac {
    Frac::from_rational(r)
}

impl WdsSystem {
    pub fn new(kind: SystemKind, space: MetricMeasureSpace, c: Rational) -> Self {
        WdsSystem {
            kind,
            space,
            c,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }

    pub fn rationals(space: MetricMeasureSpace, c: Rational) -> Self {
        Self::new(SystemKind::Rationals, space, c)
    }

    pub fn dyadics(space: MetricMeasureSpace, c: Rational) -> Self {
        Self::new(SystemKind::Dyadics, space, c)
    }

    pub fn with_max_candidates(mut self, cap: usize) -> Self {
        self.max_candidates = cap;
        self
    }

    fn require_line(&self) -> Result<()> {
        if self.space.kind == SpaceKind::Cantor3 {
            return Err(Error::Unsupported(
                "rational point systems are not enumerated on the middle-thirds set".into(),
            ));
        }
        Ok(())
    }

    fn in_space(&self, x: &Rational) -> bool {
        match self.space.kind {
            SpaceKind::Circle => !x.is_negative() && *x < Rational::one(),
            _ => !x.is_negative() && *x <= Rational::one(),
        }
    }

    /// The radius of a height: `1/q²` or `2^-j`.
    pub fn radius_of_height(&self, h: &BigInt) -> Rational {
        match self.kind {
            SystemKind::Rationals => Rational::new(1, h * h),
            SystemKind::Dyadics => Rational::dyadic(1, h.to_u32().expect("dyadic level")),
        }
    }

    /// Exact `R(x)`; fails for coordinates that are not system points.
    pub fn radius_of(&self, x: &Rational) -> Result<Rational> {
        let x = self.space.normalize(x);
        if !self.in_space(&x) {
            return Err(Error::NotSystemPoint(format!("{x} lies outside the space")));
        }
        let q = x.denom();
        match self.kind {
            SystemKind::Rationals => Ok(Rational::new(1, q * q)),
            SystemKind::Dyadics => {
                let j = q.bits() - 1;
                if BigInt::one() << j != *q {
                    return Err(Error::NotSystemPoint(format!("{x} is not a dyadic rational")));
                }
                Ok(Rational::dyadic(1, j as u32))
            }
        }
    }

    /// Heights whose radius lies in `[r_lo, r_hi]`: denominators `q` for
    /// rationals, levels `j` for dyadics.
    pub fn heights_for_radii(&self, r_lo: &Rational, r_hi: &Rational) -> Option<(BigInt, BigInt)> {
        if !r_lo.is_positive() || r_lo > r_hi {
            return None;
        }
        let (lo, hi) = match self.kind {
            SystemKind::Rationals => {
                let lo = ceil_sqrt(&r_hi.recip()).max(BigInt::one());
                (lo, floor_sqrt(&r_lo.recip()))
            }
            SystemKind::Dyadics => {
                let lo = BigInt::from(ceil_log2(&r_hi.recip()));
                let hi = BigInt::from(floor_log2(&r_lo.recip())?);
                (lo, hi)
            }
        };
        (lo <= hi).then_some((lo, hi))
    }

    /// Radius window `[1/(Ck), C/k]` of band `k`.
    pub fn band_radii(&self, k: &BigInt) -> (Rational, Rational) {
        let k = Rational::from_integer(k.clone());
        ((&self.c * &k).recip(), &self.c / &k)
    }

    fn make_point(&self, lifted: &Rational, radius: Rational) -> WdsPoint {
        WdsPoint {
            point: Point(self.space.normalize(lifted)),
            radius,
        }
    }

    fn finish(&self, raw: Vec<(Rational, Rational)>) -> Vec<WdsPoint> {
        let mut pts: Vec<WdsPoint> = raw
            .into_iter()
            .map(|(x, r)| self.make_point(&x, r))
            .filter(|p| self.in_space(p.coord()))
            .collect();
        pts.sort_by(|a, b| a.point.cmp(&b.point));
        pts.dedup_by(|a, b| a.point == b.point);
        pts
    }

    /// All lifted `(x, R(x))` with heights in `[hlo, hhi]` and
    /// `lo + R·[inset_lo] <= x <= hi − R·[inset_hi]`.
    fn collect_in(
        &self,
        lo: &Rational,
        hi: &Rational,
        inset_lo: bool,
        inset_hi: bool,
        hlo: &BigInt,
        hhi: &BigInt,
    ) -> Result<Vec<(Rational, Rational)>> {
        let mut out = Vec::new();
        if lo > hi || hlo > hhi {
            return Ok(out);
        }
        let fits = |x: &Rational, r: &Rational| {
            let left = if inset_lo { x - r } else { x.clone() };
            let right = if inset_hi { x + r } else { x.clone() };
            *lo <= left && right <= *hi
        };
        let cap = self.max_candidates;
        let overflow = |n: usize| -> Result<()> {
            if n > cap {
                Err(Error::ResourceLimit(format!(
                    "more than {cap} system points with heights {hlo}..={hhi} in [{lo}, {hi}]"
                )))
            } else {
                Ok(())
            }
        };
        match self.kind {
            SystemKind::Rationals => {
                let span = (hi - lo).to_f64();
                let qb = hhi.to_f64().unwrap_or(f64::INFINITY);
                let farey_cost = 0.31 * qb * qb * span + 2.0;
                let scan_cost = (hhi - hlo).to_f64().unwrap_or(f64::INFINITY) + 1.0;
                if scan_cost <= farey_cost {
                    let mut q = hlo.clone();
                    while &q <= hhi {
                        let r = Rational::new(1, &q * &q);
                        let a = if inset_lo { lo + &r } else { lo.clone() };
                        let b = if inset_hi { hi - &r } else { hi.clone() };
                        if a <= b {
                            let qr = Rational::from_integer(q.clone());
                            let mut p = (&a * &qr).ceil();
                            let pend = (&b * &qr).floor();
                            while p <= pend {
                                if p.gcd(&q).is_one() {
                                    out.push((Rational::new(p.clone(), q.clone()), r.clone()));
                                    overflow(out.len())?;
                                }
                                p += 1u32;
                            }
                        }
                        q += 1u32;
                    }
                } else {
                    let rmin = Rational::new(1, hhi * hhi);
                    let a = if inset_lo { lo + &rmin } else { lo.clone() };
                    let b = if inset_hi { hi - &rmin } else { hi.clone() };
                    for f in fractions_in(&to_frac(&a), &to_frac(&b), hhi, cap.saturating_mul(4))? {
                        if &f.q < hlo {
                            continue;
                        }
                        let r = Rational::new(1, &f.q * &f.q);
                        let x = f.to_rational();
                        if fits(&x, &r) {
                            out.push((x, r));
                            overflow(out.len())?;
                        }
                    }
                }
            }
            SystemKind::Dyadics => {
                let j0 = hlo.to_u64().unwrap_or(u64::MAX);
                let j1 = hhi
                    .to_u64()
                    .filter(|&j| j < 1 << 20)
                    .ok_or_else(|| Error::ResourceLimit(format!("dyadic level {hhi} too deep")))?;
                for j in j0..=j1 {
                    let r = Rational::dyadic(1, j as u32);
                    let a = if inset_lo { lo + &r } else { lo.clone() };
                    let b = if inset_hi { hi - &r } else { hi.clone() };
                    if a > b {
                        continue;
                    }
                    let s = Rational::from_integer(BigInt::one() << j);
                    let mut p = (&a * &s).ceil();
                    let pend = (&b * &s).floor();
                    if j > 0 && p.is_even() {
                        p += 1u32;
                    }
                    let step = if j == 0 { 1u32 } else { 2 };
                    while p <= pend {
                        out.push((Rational::new(p.clone(), BigInt::one() << j), r.clone()));
                        overflow(out.len())?;
                        p += step;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Every lifted system point in the closed arc whose ball `B(x, R(x))`
    /// stays inside it, with `R(x)` in band `k`. Coordinates stay lifted.
    pub fn band_in_arc(&self, arc: &Interval, k: &BigInt) -> Result<Vec<WdsPoint>> {
        self.require_line()?;
        let (rl, rh) = self.band_radii(k);
        let Some((hlo, hhi)) = self.heights_for_radii(&rl, &rh) else {
            return Ok(Vec::new());
        };
        let raw = self.collect_in(&arc.lo, &arc.hi, true, true, &hlo, &hhi)?;
        Ok(raw
            .into_iter()
            .map(|(x, r)| WdsPoint {
                point: Point(x),
                radius: r,
            })
            .collect())
    }

    /// All `ξ` with `R(ξ)` in band `k` and `B(ξ, R(ξ)) ⊆ region`, sorted.
    pub fn enumerate_band(&self, region: &Ball, k: &BigInt) -> Result<Vec<WdsPoint>> {
        self.require_line()?;
        if !k.is_positive() {
            return Err(Error::Config(format!("band index must be positive, got {k}")));
        }
        let (rl, rh) = self.band_radii(k);
        let Some((hlo, hhi)) = self.heights_for_radii(&rl, &rh) else {
            return Ok(Vec::new());
        };
        let c = region.center.coord();
        let r = &region.radius;
        let half = Rational::new(1, 2);
        let raw = match self.space.kind {
            SpaceKind::Circle if *r > half => {
                self.collect_in(&Rational::zero(), &Rational::one(), false, false, &hlo, &hhi)?
            }
            SpaceKind::Circle => self.collect_in(&(c - r), &(c + r), true, true, &hlo, &hhi)?,
            _ => {
                let (lo, inset_lo) = if (c - r).is_negative() {
                    (Rational::zero(), false)
                } else {
                    (c - r, true)
                };
                let (hi, inset_hi) = if c + r > Rational::one() {
                    (Rational::one(), false)
                } else {
                    (c + r, true)
                };
                self.collect_in(&lo, &hi, inset_lo, inset_hi, &hlo, &hhi)?
            }
        };
        Ok(self.finish(raw))
    }

    /// All `ξ` with `R(ξ) ∈ [r_lo, r_hi]` and `d(x, ξ) <= dist_bound`.
    pub fn enumerate_near(
        &self,
        x: &Rational,
        r_lo: &Rational,
        r_hi: &Rational,
        dist_bound: &Rational,
    ) -> Result<Vec<WdsPoint>> {
        self.require_line()?;
        if !r_lo.is_positive() || r_lo > r_hi {
            return Err(Error::Config(format!("radius window [{r_lo}, {r_hi}] is not valid")));
        }
        let Some((hlo, hhi)) = self.heights_for_radii(r_lo, r_hi) else {
            return Ok(Vec::new());
        };
        let half = Rational::new(1, 2);
        let b = if self.space.kind == SpaceKind::Circle {
            dist_bound.clone().min(half)
        } else {
            dist_bound.clone()
        };
        let (mut lo, mut hi) = (x - &b, x + &b);
        if self.space.kind != SpaceKind::Circle {
            lo = lo.max(Rational::zero());
            hi = hi.min(Rational::one());
        }
        let raw = self.collect_in(&lo, &hi, false, false, &hlo, &hhi)?;
        Ok(self.finish(raw))
    }

    /// Every `ξ` with `R(ξ) ∈ [r_lo, r_hi]` and `d(x, ξ) <= c·ψ(R(ξ))`
    /// (or `<` when `strict`), paired with its distance, sorted.
    pub fn psi_neighbors(
        &self,
        x: &Rational,
        r_lo: &Rational,
        r_hi: &Rational,
        psi: &ApproxFunction,
        c: &Rational,
        strict: bool,
    ) -> Result<Vec<(WdsPoint, Rational)>> {
        self.require_line()?;
        let Some((hlo, hhi)) = self.heights_for_radii(r_lo, r_hi) else {
            return Ok(Vec::new());
        };
        let x = self.space.normalize(x);
        let accept = |r: &Rational, d: &Rational| match psi.cmp_scaled(c, r, d) {
            Ordering::Greater => true,
            Ordering::Equal => !strict,
            Ordering::Less => false,
        };
        let half = Rational::new(1, 2);
        let mut out: Vec<(WdsPoint, Rational)> = Vec::new();
        match self.kind {
            SystemKind::Rationals => {
                let region = match self.space.kind {
                    SpaceKind::Circle => Region {
                        lo: to_frac(&(&x - &half)),
                        lo_closed: true,
                        hi: to_frac(&(&x + &half)),
                        hi_closed: true,
                    },
                    _ => Region {
                        lo: to_frac(&Rational::zero()),
                        lo_closed: true,
                        hi: to_frac(&Rational::one()),
                        hi_closed: true,
                    },
                };
                let xf = to_frac(&x);
                let precision = psi.precision_bits;
                let window = |m: &BigInt| {
                    let r = Rational::new(1, m * m);
                    let w = psi
                        .eval_bits(&r, precision)
                        .map(|v| &v.hi * c)
                        .unwrap_or_else(|_| half.clone());
                    to_frac(&w.min(half.clone()))
                };
                let keep = |f: &Frac| {
                    let r = Rational::new(1, &f.q * &f.q);
                    let d = (f.to_rational() - &x).abs();
                    accept(&r, &d)
                };
                for f in pruned_search(&xf, region, &hlo, &hhi, window, keep, SEARCH_NODE_LIMIT)? {
                    let r = Rational::new(1, &f.q * &f.q);
                    let y = f.to_rational();
                    let d = (&y - &x).abs();
                    out.push((self.make_point(&y, r), d));
                }
            }
            SystemKind::Dyadics => {
                let j0 = hlo.to_u64().unwrap_or(u64::MAX);
                let j1 = hhi
                    .to_u64()
                    .filter(|&j| j < 1 << 20)
                    .ok_or_else(|| Error::ResourceLimit(format!("dyadic level {hhi} too deep")))?;
                for j in j0..=j1 {
                    let r = Rational::dyadic(1, j as u32);
                    let w = (&psi.eval(&r)?.hi * c).min(half.clone());
                    let lifted: Vec<(Rational, Rational)> =
                        self.collect_in(&(&x - &w), &(&x + &w), false, false, &BigInt::from(j), &BigInt::from(j))?;
                    for (y, r) in lifted {
                        let d = match self.space.kind {
                            SpaceKind::Circle => crate::space::circle_distance(&x, &y),
                            _ => (&y - &x).abs(),
                        };
                        if accept(&r, &d) {
                            out.push((self.make_point(&y, r), d));
                        }
                    }
                }
            }
        }
        out.retain(|(p, _)| self.in_space(p.coord()));
        out.sort_by(|a, b| a.0.point.cmp(&b.0.point));
        out.dedup_by(|a, b| a.0.point == b.0.point);
        Ok(out)
    }

    /// Every system point of the space with height in `[hlo, hhi]`, sorted.
    pub fn points_with_heights(&self, hlo: &BigInt, hhi: &BigInt) -> Result<Vec<WdsPoint>> {
        self.require_line()?;
        let raw = self.collect_in(&Rational::zero(), &Rational::one(), false, false, hlo, hhi)?;
        Ok(self.finish(raw))
    }

    /// Exhaustive minimum of `d(ξ, ζ) / min(R(ξ), R(ζ))` over all pairs of
    /// distinct points with height at most `hmax`.
    pub fn separation_scan(&self, hmax: u64) -> Result<SeparationScan> {
        let lo = if self.kind == SystemKind::Rationals { 1 } else { 0 };
        let pts = self.points_with_heights(&BigInt::from(lo), &BigInt::from(hmax))?;
        Ok(separation_of(&self.space, &pts))
    }

    /// Separation and distribution audit over the given bands and balls.
    pub fn audit(&self, k_range: &[u64], balls: &[Ball]) -> Result<WdsAudit> {
        if k_range.is_empty() {
            return Err(Error::EmptyInput("audit needs at least one band".into()));
        }
        self.require_line()?;
        if self.space.alpha != Exponent::Exact(Rational::one()) {
            return Err(Error::Unsupported("distribution counts need alpha = 1".into()));
        }
        let mut ks = k_range.to_vec();
        ks.sort_unstable();
        ks.dedup();

        // Pairs inside every tested band and across bands k, k' <= 4k: the union
        // of the height windows of all tested bands covers both.
        let mut hlo: Option<BigInt> = None;
        let mut hhi: Option<BigInt> = None;
        for &k in &ks {
            let (rl, rh) = self.band_radii(&BigInt::from(k));
            if let Some((a, b)) = self.heights_for_radii(&rl, &rh) {
                hlo = Some(hlo.map_or(a.clone(), |h| h.min(a)));
                hhi = Some(hhi.map_or(b.clone(), |h| h.max(b)));
            }
        }
        let sep = match (hlo, hhi) {
            (Some(a), Some(b)) => separation_of(&self.space, &self.points_with_heights(&a, &b)?),
            _ => SeparationScan::default(),
        };
        let inv_c = self.c.recip();
        let separation_pass = sep.min_ratio.as_ref().is_none_or(|m| *m >= inv_c);

        let rows_per_ball: Vec<Vec<CountRow>> = balls
            .par_iter()
            .enumerate()
            .map(|(i, ball)| {
                let mu = ball_measure(&self.space, ball);
                ks.iter()
                    .map(|&k| {
                        let observed = self.enumerate_band(ball, &BigInt::from(k))?.len();
                        let required = Rational::from(k as i64) * &mu / &self.c;
                        Ok(CountRow {
                            ball: i,
                            k,
                            observed,
                            passed: required <= observed as i64,
                            required,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        let per_ball_kb: Vec<Option<u64>> = rows_per_ball.iter().map(|rows| tail_pass_start(rows)).collect();
        let counts_table: Vec<CountRow> = rows_per_ball.into_iter().flatten().collect();
        let distribution_pass = counts_table.iter().all(|r| r.passed);
        let estimated_kb = per_ball_kb.iter().try_fold(ks[0], |acc, kb| kb.map(|k| acc.max(k)));
        Ok(WdsAudit {
            system: self.kind,
            c: self.c.clone(),
            passed: separation_pass && distribution_pass,
            min_separation_ratio: sep.min_ratio,
            separation_pairs: sep.pairs,
            separation_pass,
            distribution_pass,
            estimated_kb,
            per_ball_kb,
            counts_table,
        })
    }
}

/// Least `k` in an ascending row list from which every row passes.
fn tail_pass_start(rows: &[CountRow]) -> Option<u64> {
    let mut start = None;
    for r in rows.iter().rev() {
        if r.passed {
            start = Some(r.k);
        } else {
            break;
        }
    }
    start
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationScan {
    pub min_ratio: Option<Rational>,
    pub pairs: u64,
    pub witness: Option<(Rational, Rational)>,
}

/// `(p, q, H)` with `R = 1/H`.
fn small_parts(p: &WdsPoint) -> Option<(i128, i128, i128)> {
    let x = p.coord();
    let h = p.radius.recip();
    if !h.is_integer() {
        return None;
    }
    let lim = BigInt::from(1u64 << 28);
    if x.denom() >= &BigInt::from(1u64 << 14) || h.numer() >= &lim {
        return None;
    }
    Some((x.numer().to_i128()?, x.denom().to_i128()?, h.numer().to_i128()?))
}

/// Exhaustive pairwise separation of a point list.
pub fn separation_of(space: &MetricMeasureSpace, pts: &[WdsPoint]) -> SeparationScan {
    let n = pts.len();
    if n < 2 {
        return SeparationScan::default();
    }
    let pairs = (n as u64) * (n as u64 - 1) / 2;
    let circle = space.kind == SpaceKind::Circle;
    let small: Option<Vec<(i128, i128, i128)>> = pts.iter().map(small_parts).collect();
    let best = if let Some(sp) = small {
        // ratio = dist · max(H) with dist = num/(q q'); kept as (num·H, q q').
        (0..n)
            .into_par_iter()
            .filter_map(|i| {
                let (p1, q1, h1) = sp[i];
                let mut best: Option<(i128, i128, usize)> = None;
                for (j, &(p2, q2, h2)) in sp.iter().enumerate().skip(i + 1) {
                    let den = q1 * q2;
                    let mut num = (p1 * q2 - p2 * q1).abs();
                    if circle {
                        num = num.min(den - num);
                    }
                    let a = num * h1.max(h2);
                    if best.is_none_or(|(bn, bd, _)| a * bd < bn * den) {
                        best = Some((a, den, j));
                    }
                }
                best.map(|(a, d, j)| (a, d, i, j))
            })
            .reduce_with(|x, y| if x.0 * y.1 <= y.0 * x.1 { x } else { y })
            .map(|(a, d, i, j)| (Rational::new(a, d), i, j))
    } else {
        (0..n)
            .into_par_iter()
            .flat_map_iter(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                let d = space.distance(&pts[i].point, &pts[j].point);
                let m = pts[i].radius.clone().min(pts[j].radius.clone());
                (d / m, i, j)
            })
            .reduce_with(|x, y| if x.0 <= y.0 { x } else { y })
    };
    let (min_ratio, witness) = match best {
        Some((r, i, j)) => (Some(r), Some((pts[i].coord().clone(), pts[j].coord().clone()))),
        None => (None, None),
    };
    SeparationScan {
        min_ratio,
        pairs,
        witness,
    }
}
