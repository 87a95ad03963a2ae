//! Classical verifier built on continued fractions.
//!
//! Nothing here calls into the enumeration or construction code: candidate
//! approximants come from Legendre's theorem plus a brute-force scan of the
//! denominators it does not cover, and every comparison with `ψ` is done by
//! a local integer-power test.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psi::ApproxFunction;
use crate::rational::Rational;
use crate::space::SpaceKind;
use crate::wds::{SystemKind, WdsSystem};

/// `a0 + 1/(a1 + 1/(a2 + ...))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContinuedFraction {
    pub a0: BigInt,
    pub partials: Vec<BigInt>,
}

/// Canonical finite expansion by the Euclidean algorithm.
pub fn continued_fraction(x: &Rational) -> ContinuedFraction {
    let mut n = x.numer().clone();
    let mut d = x.denom().clone();
    let (a0, r) = n.div_mod_floor(&d);
    n = d;
    d = r;
    let mut partials = Vec::new();
    while !d.is_zero() {
        let (a, r) = n.div_mod_floor(&d);
        partials.push(a);
        n = d;
        d = r;
    }
    ContinuedFraction { a0, partials }
}

impl ContinuedFraction {
    pub fn reconstruct(&self) -> Rational {
        let mut acc: Option<Rational> = None;
        for a in self.partials.iter().rev() {
            let a = Rational::from_integer(a.clone());
            acc = Some(match acc {
                None => a,
                Some(t) => a + t.recip(),
            });
        }
        let head = Rational::from_integer(self.a0.clone());
        match acc {
            None => head,
            Some(t) => head + t.recip(),
        }
    }

    /// Convergent numerators and denominators by the standard recurrence.
    pub fn convergent_pairs(&self) -> Vec<(BigInt, BigInt)> {
        let mut out = Vec::with_capacity(self.partials.len() + 1);
        let (mut p0, mut q0) = (BigInt::one(), BigInt::zero());
        let (mut p1, mut q1) = (self.a0.clone(), BigInt::one());
        out.push((p1.clone(), q1.clone()));
        for a in &self.partials {
            let p2 = a * &p1 + &p0;
            let q2 = a * &q1 + &q0;
            p0 = std::mem::replace(&mut p1, p2);
            q0 = std::mem::replace(&mut q1, q2);
            out.push((p1.clone(), q1.clone()));
        }
        out
    }
}

pub fn convergents(cf: &ContinuedFraction) -> Vec<Rational> {
    cf.convergent_pairs()
        .into_iter()
        .map(|(p, q)| Rational::new(p, q))
        .collect()
}

/// Convergents of both finite expansions of `x`. The alternate expansion
/// `[..., a_n − 1, 1]` adds `(p_n − p_{n−1})/(q_n − q_{n−1})`.
fn legendre_candidates(x: &Rational) -> Vec<(BigInt, BigInt)> {
    let cf = continued_fraction(x);
    let mut pairs = cf.convergent_pairs();
    let n = pairs.len();
    if n >= 2 {
        let (pn, qn) = pairs[n - 1].clone();
        let (pm, qm) = pairs[n - 2].clone();
        pairs.push((pn - pm, qn - qm));
    } else {
        // x is an integer; the expansion [x − 1; 1] adds x − 1.
        pairs.push((&pairs[0].0 - 1u32, BigInt::one()));
    }
    pairs
}

/// Exact sign of `a·r^(n/d) − v` via `a^d r^n` against `v^d`.
fn psi_vs(psi: &ApproxFunction, r: &Rational, v: &Rational) -> Ordering {
    if !v.is_positive() {
        return Ordering::Greater;
    }
    let n = psi.tau.numer().to_i32().expect("exponent numerator");
    let d = psi.tau.denom().to_i32().expect("exponent denominator");
    let lhs = psi.scale.pow(d) * r.pow(n);
    lhs.cmp(&v.pow(d))
}

fn wrap_distance(kind: SpaceKind, a: &Rational, b: &Rational) -> Rational {
    let diff = (a - b).abs();
    match kind {
        SpaceKind::Circle => {
            let t = diff.fract();
            let u = Rational::one() - &t;
            t.min(u)
        }
        _ => diff,
    }
}

/// How a candidate relates to every true point within the error radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitKind {
    /// `d + e < ψ(R)`.
    Strict,
    /// `d + e = ψ(R)`: a hit for the closed inequality only.
    Boundary,
    /// `d − e < ψ(R) < d + e`.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Approximant {
    pub point: Rational,
    pub radius: Rational,
    pub distance: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub approximant: Approximant,
    pub kind: HitKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactnessVerdict {
    pub x: Rational,
    pub error_radius: Rational,
    pub hits: Vec<Hit>,
    /// `d + e < c·ψ(R)`: every point of the collar is `cψ`-approximated.
    pub violations: Vec<Approximant>,
    /// `d − e < c·ψ(R) <= d + e`.
    pub inconclusive_violations: Vec<Approximant>,
    pub bands_checked: (Rational, Rational),
    pub c_tested: Rational,
    /// The error radius reaches the smallest `ψ` value of the band.
    pub error_dominates: bool,
}

impl ExactnessVerdict {
    pub fn certified_hits(&self) -> usize {
        self.hits
            .iter()
            .filter(|h| matches!(h.kind, HitKind::Strict | HitKind::Boundary))
            .count()
    }

    pub fn strict_hits(&self) -> usize {
        self.hits.iter().filter(|h| h.kind == HitKind::Strict).count()
    }
}

/// Largest number of denominators the scan outside Legendre's range may visit.
pub const BRUTE_FORCE_LIMIT: u64 = 200_000;

/// Every `ξ` with `R(ξ) ∈ band` and `d(x, ξ) < ψ(R(ξ)) + e`, classified.
pub fn classify_exactness(
    x: &Rational,
    error_radius: &Rational,
    system: &WdsSystem,
    psi: &ApproxFunction,
    c: &Rational,
    band: (&Rational, &Rational),
) -> Result<ExactnessVerdict> {
    if system.kind != SystemKind::Rationals {
        return Err(Error::Unsupported(
            "the continued-fraction oracle covers the rationals".into(),
        ));
    }
    if !c.is_positive() || *c >= Rational::one() {
        return Err(Error::Config(format!("c must lie in (0, 1), got {c}")));
    }
    let (r_lo, r_hi) = band;
    if !r_lo.is_positive() || r_lo > r_hi || error_radius.is_negative() {
        return Err(Error::Config(format!("bad band [{r_lo}, {r_hi}] or error radius")));
    }
    let kind = system.space.kind;
    let x = match kind {
        SpaceKind::Circle => x.fract(),
        _ => x.clone(),
    };
    let e = error_radius;
    // Denominators with 1/q² in the band: q² ∈ [1/r_hi, 1/r_lo].
    let qa = {
        let t = r_hi.recip();
        let mut q = crate::rational::isqrt(&t.ceil());
        while Rational::from_integer(&q * &q) < t {
            q += 1u32;
        }
        q.max(BigInt::one())
    };
    let qb = crate::rational::isqrt(&r_lo.recip().floor());

    let mut dens_brute: Vec<BigInt> = Vec::new();
    let mut q = qa.clone();
    // Small denominators where ψ(1/q²) + e may reach 1/(2q²); past the first q
    // with ψ(1/q²) < 1/(4q²) this stays false until e alone exceeds 1/(4q²).
    while q <= qb {
        let r = Rational::new(1, &q * &q);
        let quarter = &r * Rational::new(1, 4);
        if psi_vs(psi, &r, &quarter) == Ordering::Less {
            break;
        }
        dens_brute.push(q.clone());
        q += 1u32;
        if dens_brute.len() as u64 > BRUTE_FORCE_LIMIT {
            return Err(Error::ResourceLimit("oracle small-denominator scan".into()));
        }
    }
    let q_stop = q;
    if e.is_positive() {
        // 1/(4q²) <= e  <=>  q² >= 1/(4e).
        let t = (e * Rational::from(4)).recip();
        let mut qt = crate::rational::isqrt(&t.floor());
        while Rational::from_integer(&qt * &qt) < t {
            qt += 1u32;
        }
        let start = qt.max(q_stop.clone());
        if start <= qb {
            let span = (&qb - &start).to_u64().unwrap_or(u64::MAX);
            if span >= BRUTE_FORCE_LIMIT {
                return Err(Error::ResourceLimit(format!(
                    "error radius {} leaves {span}+ denominators outside Legendre's range",
                    e.to_sci(4, crate::rational::Rounding::Nearest)
                )));
            }
            let mut q = start;
            while q <= qb {
                dens_brute.push(q.clone());
                q += 1u32;
            }
        }
    }

    let mut cand: Vec<(BigInt, BigInt)> = Vec::new();
    for q in &dens_brute {
        let r = Rational::new(1, q * q);
        // For r <= 1, a·r^τ <= a·r^⌊τ⌋.
        let w = &psi.scale * r.pow(psi.tau.floor().to_i32().expect("exponent")) + e;
        let qr = Rational::from_integer(q.clone());
        let mut p = ((&x - &w) * &qr).floor();
        let pend = ((&x + &w) * &qr).ceil();
        while p <= pend {
            if p.gcd(q).is_one() {
                cand.push((p.clone(), q.clone()));
            }
            p += 1u32;
        }
    }
    for (p, q) in legendre_candidates(&x) {
        if q.is_positive() && q >= qa && q <= qb && !dens_brute.contains(&q) {
            cand.push((p, q));
        }
    }

    let mut seen: Vec<Rational> = Vec::new();
    let mut hits = Vec::new();
    let mut violations = Vec::new();
    let mut inconclusive_violations = Vec::new();
    for (p, q) in cand {
        let raw = Rational::new(p, q.clone());
        let point = match kind {
            SpaceKind::Circle => raw.fract(),
            _ => raw,
        };
        if kind != SpaceKind::Circle && (point.is_negative() || point > Rational::one()) {
            continue;
        }
        if seen.contains(&point) {
            continue;
        }
        seen.push(point.clone());
        let radius = Rational::new(1, &q * &q);
        let distance = wrap_distance(kind, &x, &point);
        let far = &distance + e;
        let near = &distance - e;
        // Relevant only when some point of the collar could be a hit.
        if psi_vs(psi, &radius, &near) != Ordering::Greater {
            continue;
        }
        let approximant = Approximant {
            point,
            radius: radius.clone(),
            distance,
        };
        let kind_of_hit = match psi_vs(psi, &radius, &far) {
            Ordering::Greater => HitKind::Strict,
            Ordering::Equal => HitKind::Boundary,
            Ordering::Less => HitKind::Inconclusive,
        };
        // c·ψ(R) > v  <=>  ψ(R) > v/c.
        if psi_vs(psi, &radius, &(&far / c)) == Ordering::Greater {
            violations.push(approximant.clone());
        } else if psi_vs(psi, &radius, &(&near / c)) == Ordering::Greater {
            inconclusive_violations.push(approximant.clone());
        }
        hits.push(Hit {
            approximant,
            kind: kind_of_hit,
        });
    }
    let by_point = |a: &Approximant, b: &Approximant| a.point.cmp(&b.point);
    hits.sort_by(|a, b| by_point(&a.approximant, &b.approximant));
    violations.sort_by(by_point);
    inconclusive_violations.sort_by(by_point);
    let error_dominates = e.is_positive() && psi_vs(psi, r_lo, e) != Ordering::Greater;
    Ok(ExactnessVerdict {
        x,
        error_radius: e.clone(),
        hits,
        violations,
        inconclusive_violations,
        bands_checked: (r_lo.clone(), r_hi.clone()),
        c_tested: c.clone(),
        error_dominates,
    })
}
