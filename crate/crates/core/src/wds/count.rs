//! Exact counts of band points inside short arcs, without listing them.
//!
//! Near a reduced anchor `p/q`, any other fraction with denominator `z` is
//! `p/q + s/(qz)` for a nonzero integer `s`. For a fixed `s` the admissible
//! `z` fill one residue class modulo `q`, so the band points of an arc close
//! to the anchor split into a handful of arithmetic progressions. Each is
//! counted in closed form, with coprimality settled by inclusion-exclusion
//! over the primes of `s`. Dyadic points are counted level by level.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{SystemKind, WdsPoint, WdsSystem};
use crate::error::{Error, Result};
use crate::rational::{isqrt, Rational};
use crate::space::{Interval, Point};

/// Most offsets `s` a single arc may need.
pub const MAX_PROGRESSIONS: usize = 1 << 16;

/// Integer intervals `[lo, hi]`, disjoint and ascending.
type Spans = Vec<(BigInt, BigInt)>;

/// Where the residues of one prime sit.
#[derive(Clone, Debug)]
enum Class {
    None,
    All,
    One(u64),
}

/// Denominators `z_j = r + jq` for `j` in `spans`, giving the points
/// `(p0 + jp)/z_j` of a chart in which they lie right of the anchor.
#[derive(Clone, Debug)]
struct Progression {
    mirrored: bool,
    p: BigInt,
    q: BigInt,
    r: BigInt,
    p0: BigInt,
    spans: Spans,
    classes: Vec<(u64, Class)>,
}

#[derive(Clone, Debug)]
struct DyadicRun {
    j: u32,
    lo: BigInt,
    hi: BigInt,
}

/// Every band point of some arcs, held implicitly.
#[derive(Clone, Debug)]
pub struct BandSet {
    anchor_hits: Vec<WdsPoint>,
    runs: Vec<Progression>,
    dyadic: Vec<DyadicRun>,
}

fn div_ceil(a: &BigInt, b: &BigInt) -> BigInt {
    Integer::div_ceil(a, b)
}

fn intersect(a: &Spans, b: &Spans) -> Spans {
    let mut out = Vec::new();
    let (mut i, mut k) = (0, 0);
    while i < a.len() && k < b.len() {
        let lo = (&a[i].0).max(&b[k].0).clone();
        let hi = (&a[i].1).min(&b[k].1).clone();
        if lo <= hi {
            out.push((lo, hi));
        }
        if a[i].1 < b[k].1 {
            i += 1;
        } else {
            k += 1;
        }
    }
    out
}

/// Integers `z` in `[lo, hi]` with `a z² + b z + c >= 0`.
fn nonneg(a: &BigInt, b: &BigInt, c: &BigInt, lo: &BigInt, hi: &BigInt) -> Spans {
    if lo > hi {
        return Vec::new();
    }
    let whole = || vec![(lo.clone(), hi.clone())];
    if a.is_zero() {
        if b.is_zero() {
            return if c.is_negative() { Vec::new() } else { whole() };
        }
        let span = if b.is_positive() {
            (div_ceil(&-c, b).max(lo.clone()), hi.clone())
        } else {
            (lo.clone(), c.div_floor(&-b).min(hi.clone()))
        };
        return if span.0 <= span.1 { vec![span] } else { Vec::new() };
    }
    if a.is_negative() {
        // f >= 0 exactly where −f − 1 >= 0 fails.
        let outside = nonneg(&-a, &-b, &(-c - 1u32), lo, hi);
        let mut out = Vec::new();
        let mut next = lo.clone();
        for (l, h) in outside {
            if l > next {
                out.push((next.clone(), &l - 1u32));
            }
            next = h + 1u32;
        }
        if &next <= hi {
            out.push((next, hi.clone()));
        }
        return out;
    }
    let disc = b * b - BigInt::from(4) * a * c;
    if disc.is_negative() {
        return whole();
    }
    let f = |z: &BigInt| a * z * z + b * z + c;
    let two_a = a * 2u32;
    let sq = isqrt(&disc);
    let vertex = (-b).div_floor(&two_a);
    let mut left = (-b - &sq).div_floor(&two_a).min(vertex.clone());
    while left < vertex && !f(&(&left + 1u32)).is_negative() {
        left += 1u32;
    }
    while f(&left).is_negative() {
        left -= 1u32;
    }
    let above = &vertex + 1u32;
    let mut right = div_ceil(&(-b + &sq), &two_a).max(above.clone());
    while right > above && !f(&(&right - 1u32)).is_negative() {
        right -= 1u32;
    }
    while f(&right).is_negative() {
        right += 1u32;
    }
    let mut out = Vec::new();
    let first = (lo.clone(), left.min(hi.clone()));
    if first.0 <= first.1 {
        out.push(first);
    }
    let second = (right.max(lo.clone()), hi.clone());
    if second.0 <= second.1 {
        out.push(second);
    }
    out
}

fn primes_of(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn mod_u64(x: &BigInt, m: u64) -> u64 {
    x.mod_floor(&BigInt::from(m)).to_u64().expect("residue fits")
}

fn inv_mod(a: u64, m: u64) -> u64 {
    let e = BigInt::from(a).extended_gcd(&BigInt::from(m));
    mod_u64(&e.x, m)
}

/// Residues `j mod r` solving `a + j b ≡ 0`.
fn linear_class(a: u64, b: u64, r: u64) -> Class {
    if b == 0 {
        if a == 0 {
            Class::All
        } else {
            Class::None
        }
    } else {
        let j = ((r - a) as u128 * inv_mod(b, r) as u128 % r as u128) as u64;
        Class::One(j)
    }
}

fn meet(x: Class, y: Class) -> Class {
    match (x, y) {
        (Class::None, _) | (_, Class::None) => Class::None,
        (Class::All, o) | (o, Class::All) => o,
        (Class::One(a), Class::One(b)) => {
            if a == b {
                Class::One(a)
            } else {
                Class::None
            }
        }
    }
}

/// `#{j in [lo, hi] : j ≡ rho (mod d)}`.
fn count_class(lo: &BigInt, hi: &BigInt, d: u64, rho: u64) -> BigInt {
    if lo > hi {
        return BigInt::zero();
    }
    let d = BigInt::from(d);
    let rho = BigInt::from(rho);
    (hi - &rho).div_floor(&d) - (lo - 1u32 - &rho).div_floor(&d)
}

impl Progression {
    fn z(&self, j: &BigInt) -> BigInt {
        &self.r + j * &self.q
    }

    fn point(&self, j: &BigInt) -> WdsPoint {
        let z = self.z(j);
        let num = &self.p0 + j * &self.p;
        let x = Rational::new(if self.mirrored { -num } else { num }, z.clone());
        WdsPoint {
            point: Point(x),
            radius: Rational::new(1, &z * &z),
        }
    }

    fn coprime(&self, j: &BigInt) -> bool {
        (&self.p0 + j * &self.p).gcd(&self.z(j)).is_one()
    }

    fn count_in(&self, lo: &BigInt, hi: &BigInt) -> BigInt {
        let k = self.classes.len();
        let mut total = BigInt::zero();
        for mask in 0u32..(1 << k) {
            let mut modulus = 1u64;
            let mut residue = 0u64;
            let mut empty = false;
            for (bit, (prime, class)) in self.classes.iter().enumerate() {
                if mask & (1 << bit) == 0 {
                    continue;
                }
                match class {
                    Class::None => {
                        empty = true;
                        break;
                    }
                    Class::All => {}
                    Class::One(rho) => {
                        // Chinese remainder step for the coprime moduli.
                        let m = modulus as u128;
                        let p = *prime as u128;
                        let t = ((*rho as u128 + p - residue as u128 % p) % p)
                            * inv_mod(modulus % prime, *prime) as u128
                            % p;
                        residue = (residue as u128 + m * t) as u64;
                        modulus = (m * p) as u64;
                    }
                }
            }
            if empty {
                continue;
            }
            let n = count_class(lo, hi, modulus, residue);
            if mask.count_ones() % 2 == 0 {
                total += n;
            } else {
                total -= n;
            }
        }
        total
    }

    fn count(&self) -> BigInt {
        self.spans.iter().map(|(lo, hi)| self.count_in(lo, hi)).sum()
    }

    /// Coprime `j` nearest to `from` inside the spans, walking up or down.
    fn walk(&self, from: &BigInt, up: bool) -> Option<BigInt> {
        let ordered: Vec<&(BigInt, BigInt)> = if up {
            self.spans.iter().collect()
        } else {
            self.spans.iter().rev().collect()
        };
        for (lo, hi) in ordered {
            let (a, b) = if up {
                ((lo).max(from).clone(), hi.clone())
            } else {
                (lo.clone(), (hi).min(from).clone())
            };
            if a > b || self.count_in(&a, &b).is_zero() {
                continue;
            }
            let mut j = if up { a } else { b };
            while !self.coprime(&j) {
                if up {
                    j += 1u32;
                } else {
                    j -= 1u32;
                }
            }
            return Some(j);
        }
        None
    }

    /// Least point with coordinate `>= x0` (lifted), if any.
    fn first_at_or_after(&self, anchor: &Rational, x0: &Rational) -> Option<WdsPoint> {
        let qr = Rational::from_integer(self.q.clone());
        if !self.mirrored {
            // Coordinates fall as j grows.
            let j = if x0 <= anchor {
                self.spans.last()?.1.clone()
            } else {
                let off = x0 - anchor;
                let zb = (Rational::from_integer(self.s_of()) / (&qr * &off)).floor();
                (zb - &self.r).div_floor(&self.q)
            };
            self.walk(&j, false).map(|j| self.point(&j))
        } else {
            if x0 >= anchor {
                return None;
            }
            let off = anchor - x0;
            let zb = (Rational::from_integer(self.s_of()) / (&qr * &off)).ceil();
            let j = div_ceil(&(zb - &self.r), &self.q);
            self.walk(&j, true).map(|j| self.point(&j))
        }
    }

    /// The offset `s = p0·q − p·r`.
    fn s_of(&self) -> BigInt {
        &self.p0 * &self.q - &self.p * &self.r
    }
}

/// Progressions right of `p/q` in a chart, for offsets `x − p/q ∈ [l, h]`
/// (widened to the balls `B(x, 1/z²)` when `pad`) and `z ∈ [z1, z2]`.
#[allow(clippy::too_many_arguments)]
fn side(
    p: &BigInt,
    q: &BigInt,
    l: &Rational,
    h: &Rational,
    z1: &BigInt,
    z2: &BigInt,
    pad: bool,
    mirrored: bool,
) -> Result<Vec<Progression>> {
    if !h.is_positive() {
        return Ok(Vec::new());
    }
    let qr = Rational::from_integer(q.clone());
    let s_max = (h * &qr * Rational::from_integer(z2.clone())).floor();
    let s_min = if l.is_positive() {
        (l * &qr * Rational::from_integer(z1.clone())).ceil()
    } else {
        BigInt::zero()
    }
    .max(BigInt::one());
    if s_min > s_max {
        return Ok(Vec::new());
    }
    let n_s = (&s_max - &s_min + 1u32).to_usize().unwrap_or(usize::MAX);
    let s_top = s_max.to_u64().filter(|&s| s <= u32::MAX as u64);
    if n_s > MAX_PROGRESSIONS || s_top.is_none() {
        return Err(Error::ResourceLimit(format!(
            "arc needs offsets {s_min}..={s_max} around a denominator-{} anchor",
            q.bits()
        )));
    }
    let pi = if pad { BigInt::one() } else { BigInt::zero() };
    let (hn, hd) = (h.numer(), h.denom());
    let (ln, ld) = (l.numer(), l.denom());
    let p_inv = if q.is_one() {
        BigInt::zero()
    } else {
        p.mod_floor(q).extended_gcd(q).x.mod_floor(q)
    };
    let mut out = Vec::new();
    let mut s = s_min;
    while s <= s_max {
        let hi_cond = nonneg(&(hn * q), &-(&s * hd), &-(&pi * q * hd), z1, z2);
        let lo_cond = nonneg(&-(ln * q), &(&s * ld), &-(&pi * q * ld), z1, z2);
        let zs = intersect(&hi_cond, &lo_cond);
        if !zs.is_empty() {
            let r = (-&s * &p_inv).mod_floor(q);
            let p0 = (&s + p * &r) / q;
            let spans: Spans = zs
                .into_iter()
                .map(|(a, b)| (div_ceil(&(a - &r), q), (b - &r).div_floor(q)))
                .filter(|(a, b)| a <= b)
                .collect();
            if !spans.is_empty() {
                let su = s.to_u64().expect("offset fits");
                let classes = primes_of(su)
                    .into_iter()
                    .map(|prime| {
                        let zc = linear_class(mod_u64(&r, prime), mod_u64(q, prime), prime);
                        let pc = linear_class(mod_u64(&p0, prime), mod_u64(p, prime), prime);
                        (prime, meet(zc, pc))
                    })
                    .collect();
                out.push(Progression {
                    mirrored,
                    p: p.clone(),
                    q: q.clone(),
                    r,
                    p0,
                    spans,
                    classes,
                });
            }
        }
        s += 1u32;
    }
    Ok(out)
}

impl BandSet {
    /// Exact number of points.
    pub fn count(&self) -> BigInt {
        let mut n = BigInt::from(self.anchor_hits.len());
        for run in &self.runs {
            n += run.count();
        }
        for run in &self.dyadic {
            n += dyadic_count(run);
        }
        n
    }

    /// The point with the least lifted coordinate `>= x0`.
    pub fn first_at_or_after(&self, anchor: &Rational, x0: &Rational) -> Option<WdsPoint> {
        let mut best: Option<WdsPoint> = None;
        let mut offer = |p: WdsPoint| {
            if best.as_ref().is_none_or(|b| p.point < b.point) {
                best = Some(p);
            }
        };
        for p in &self.anchor_hits {
            if p.coord() >= x0 {
                offer(p.clone());
            }
        }
        for run in &self.runs {
            if let Some(p) = run.first_at_or_after(anchor, x0) {
                offer(p);
            }
        }
        for run in &self.dyadic {
            if let Some(p) = dyadic_first(run, x0) {
                offer(p);
            }
        }
        best
    }
}

/// Odd numerators in `[lo, hi]`, every integer at level zero.
fn dyadic_count(run: &DyadicRun) -> BigInt {
    if run.lo > run.hi {
        return BigInt::zero();
    }
    if run.j == 0 {
        return &run.hi - &run.lo + 1u32;
    }
    let two = BigInt::from(2);
    (&run.hi + 1u32).div_floor(&two) - run.lo.div_floor(&two)
}

fn dyadic_first(run: &DyadicRun, x0: &Rational) -> Option<WdsPoint> {
    let scale = BigInt::one() << run.j;
    let mut p = (x0 * Rational::from_integer(scale.clone())).ceil().max(run.lo.clone());
    if run.j > 0 && p.is_even() {
        p += 1u32;
    }
    (p <= run.hi).then(|| WdsPoint {
        point: Point(Rational::new(p, scale)),
        radius: Rational::dyadic(1, run.j),
    })
}

impl WdsSystem {
    /// Band-`k` points of the closed lifted arcs, implicitly. With `pad` a
    /// point counts only when its ball `B(x, R(x))` fits in the arc;
    /// without, membership of `x` suffices. Rationals need a nearby system
    /// point as `anchor`, and arcs far from it exhaust the offset budget.
    pub fn band_set(&self, anchor: &Rational, arcs: &[Interval], k: &BigInt, pad: bool) -> Result<BandSet> {
        let (rl, rh) = self.band_radii(k);
        self.radius_set(anchor, arcs, &rl, &rh, pad)
    }

    /// As [`WdsSystem::band_set`] for radii in `[r_lo, r_hi]`.
    pub fn radius_set(
        &self,
        anchor: &Rational,
        arcs: &[Interval],
        r_lo: &Rational,
        r_hi: &Rational,
        pad: bool,
    ) -> Result<BandSet> {
        let mut set = BandSet {
            anchor_hits: Vec::new(),
            runs: Vec::new(),
            dyadic: Vec::new(),
        };
        let Some((h1, h2)) = self.heights_for_radii(r_lo, r_hi) else {
            return Ok(set);
        };
        match self.kind {
            SystemKind::Rationals => {
                let (p, q) = (anchor.numer(), anchor.denom());
                for arc in arcs {
                    if &arc.lo <= anchor && anchor <= &arc.hi && &h1 <= q && q <= &h2 {
                        let r = Rational::new(1, q * q);
                        let fits = !pad || ((anchor - &r) >= arc.lo && (anchor + &r) <= arc.hi);
                        if fits {
                            set.anchor_hits.push(WdsPoint {
                                point: Point(anchor.clone()),
                                radius: r,
                            });
                        }
                    }
                    if &arc.hi > anchor {
                        set.runs.extend(side(
                            p,
                            q,
                            &(&arc.lo - anchor),
                            &(&arc.hi - anchor),
                            &h1,
                            &h2,
                            pad,
                            false,
                        )?);
                    }
                    if &arc.lo < anchor {
                        let mp = -p;
                        set.runs.extend(side(
                            &mp,
                            q,
                            &(anchor - &arc.hi),
                            &(anchor - &arc.lo),
                            &h1,
                            &h2,
                            pad,
                            true,
                        )?);
                    }
                }
            }
            SystemKind::Dyadics => {
                let j1 = h1.to_u32().unwrap_or(u32::MAX);
                let j2 = h2
                    .to_u32()
                    .filter(|&j| j < 1 << 20)
                    .ok_or_else(|| Error::ResourceLimit(format!("dyadic level {h2} too deep")))?;
                for arc in arcs {
                    for j in j1..=j2 {
                        let scale = Rational::from_integer(BigInt::one() << j);
                        let inset = if pad { BigInt::one() } else { BigInt::zero() };
                        let lo = (&arc.lo * &scale).ceil() + &inset;
                        let hi = (&arc.hi * &scale).floor() - &inset;
                        if lo <= hi {
                            set.dyadic.push(DyadicRun { j, lo, hi });
                        }
                    }
                }
            }
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::MetricMeasureSpace;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn brute(sys: &WdsSystem, arcs: &[Interval], k: &BigInt) -> Vec<Rational> {
        let mut v: Vec<Rational> = arcs
            .iter()
            .flat_map(|a| sys.band_in_arc(a, k).unwrap())
            .map(|p| p.coord().clone())
            .collect();
        v.sort();
        v
    }

    fn walk_all(set: &BandSet, anchor: &Rational, start: &Rational, step: &Rational) -> Vec<Rational> {
        let mut out = Vec::new();
        let mut x0 = start.clone();
        while let Some(p) = set.first_at_or_after(anchor, &x0) {
            x0 = p.coord() + step;
            out.push(p.coord().clone());
        }
        out
    }

    #[test]
    fn quadratic_sets() {
        let b = |v: i64| BigInt::from(v);
        // z² − 5z + 6 >= 0 on [0, 10]: z <= 2 or z >= 3, i.e. everything.
        assert_eq!(
            nonneg(&b(1), &b(-5), &b(6), &b(0), &b(10)),
            vec![(b(0), b(2)), (b(3), b(10))]
        );
        // −z² + 10z − 16 >= 0: 2 <= z <= 8.
        assert_eq!(nonneg(&b(-1), &b(10), &b(-16), &b(0), &b(20)), vec![(b(2), b(8))]);
        assert_eq!(nonneg(&b(0), &b(3), &b(-7), &b(0), &b(5)), vec![(b(3), b(5))]);
        assert!(nonneg(&b(-1), &b(0), &b(-1), &b(-5), &b(5)).is_empty());
    }

    #[test]
    fn annulus_around_a_third_matches_enumeration() {
        let sys = WdsSystem::rationals(MetricMeasureSpace::circle(), Rational::from(3));
        let a = r(1, 3);
        let arcs = vec![
            Interval::new(&a - r(1, 40), &a - r(1, 90)),
            Interval::new(&a + r(1, 90), &a + r(1, 40)),
        ];
        for k in [50i64, 400, 3000, 20000] {
            let k = BigInt::from(k);
            let want = brute(&sys, &arcs, &k);
            let set = sys.band_set(&a, &arcs, &k, true).unwrap();
            assert_eq!(set.count(), BigInt::from(want.len()), "k = {k}");
            let step = Rational::new(1, BigInt::from(10).pow(12));
            assert_eq!(walk_all(&set, &a, &r(0, 1), &step), want, "k = {k}");
        }
    }

    #[test]
    fn dyadic_runs_match_enumeration() {
        let sys = WdsSystem::dyadics(MetricMeasureSpace::circle(), Rational::from(2));
        let arcs = vec![Interval::new(r(1, 7), r(2, 7)), Interval::new(r(5, 7), r(6, 7))];
        for k in [16i64, 256, 4096] {
            let k = BigInt::from(k);
            let want = brute(&sys, &arcs, &k);
            let set = sys.band_set(&Rational::zero(), &arcs, &k, true).unwrap();
            assert_eq!(set.count(), BigInt::from(want.len()));
            assert_eq!(
                walk_all(&set, &Rational::zero(), &r(0, 1), &Rational::dyadic(1, 40)),
                want
            );
        }
    }

    #[test]
    fn far_arcs_exhaust_the_budget() {
        let sys = WdsSystem::rationals(MetricMeasureSpace::circle(), Rational::from(3));
        let arcs = vec![Interval::new(r(1, 2), r(3, 4))];
        let k = BigInt::one() << 80;
        assert!(matches!(
            sys.band_set(&r(1, 3), &arcs, &k, true),
            Err(Error::ResourceLimit(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn counts_agree_with_brute_force(
            q in 2i64..40,
            pn in 1i64..40,
            inner_den in 50i64..400,
            width in 1i64..6,
            k in 10i64..6000,
            pad in any::<bool>(),
        ) {
            let p = pn % q;
            prop_assume!(num_integer::Integer::gcd(&p, &q) == 1);
            let sys = WdsSystem::rationals(MetricMeasureSpace::circle(), Rational::from(3));
            let a = r(p, q);
            let inner = r(1, inner_den);
            let outer = &inner * Rational::from(width + 1);
            let arcs = vec![
                Interval::new(&a - &outer, &a - &inner),
                Interval::new(&a + &inner, &a + &outer),
            ];
            let k = BigInt::from(k);
            let mut want = Vec::new();
            for arc in &arcs {
                let (rl, rh) = sys.band_radii(&k);
                let (h1, h2) = match sys.heights_for_radii(&rl, &rh) { Some(h) => h, None => continue };
                let (h1, h2) = (h1.to_i64().unwrap(), h2.to_i64().unwrap());
                for z in h1..=h2 {
                    let rad = r(1, z * z);
                    let lo = if pad { &arc.lo + &rad } else { arc.lo.clone() };
                    let hi = if pad { &arc.hi - &rad } else { arc.hi.clone() };
                    let zr = Rational::from(z);
                    let mut n = (&lo * &zr).ceil();
                    while Rational::new(n.clone(), BigInt::from(z)) <= hi {
                        if n.gcd(&BigInt::from(z)).is_one() {
                            want.push(Rational::new(n.clone(), BigInt::from(z)));
                        }
                        n += 1u32;
                    }
                }
            }
            want.sort();
            let set = sys.band_set(&a, &arcs, &k, pad).unwrap();
            prop_assert_eq!(set.count(), BigInt::from(want.len()));
            let step = Rational::new(1, BigInt::from(10).pow(15));
            prop_assert_eq!(walk_all(&set, &a, &(&a - Rational::one()), &step), want);
        }
    }
}
