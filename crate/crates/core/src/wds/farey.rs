//! Farey-sequence and Stern–Brocot machinery on raw integer pairs.
//!
//! Hot loops avoid `Rational` so no gcd is paid per step; every fraction
//! produced here is in lowest terms by construction.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// A fraction `p/q` with `q > 0`, not necessarily reduced.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frac {
    pub p: BigInt,
    pub q: BigInt,
}

impl Frac {
    pub fn new(p: BigInt, q: BigInt) -> Self {
        debug_assert!(q.is_positive());
        Frac { p, q }
    }

    pub fn from_rational(r: &Rational) -> Self {
        Frac::new(r.numer().clone(), r.denom().clone())
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(self.p.clone(), self.q.clone())
    }

    pub fn cmp_to(&self, other: &Frac) -> Ordering {
        (&self.p * &other.q).cmp(&(&other.p * &self.q))
    }

    fn floor(&self) -> BigInt {
        self.p.div_floor(&self.q)
    }

    fn is_integer(&self) -> bool {
        (&self.p % &self.q).is_zero()
    }
}

fn max_frac<'a>(a: (&'a Frac, bool), b: (&'a Frac, bool)) -> (&'a Frac, bool) {
    match a.0.cmp_to(b.0) {
        Ordering::Greater => a,
        Ordering::Less => b,
        Ordering::Equal => (a.0, a.1 && b.1),
    }
}

fn min_frac<'a>(a: (&'a Frac, bool), b: (&'a Frac, bool)) -> (&'a Frac, bool) {
    match a.0.cmp_to(b.0) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => (a.0, a.1 && b.1),
    }
}

/// Upper end of an interval in the continued-fraction descent.
enum Upper {
    Finite(Frac, bool),
    Infinite,
}

/// The fraction of least denominator in the interval between `lo` and `hi`
/// (each end open or closed). Returns `None` when the interval is empty or
/// when that denominator exceeds `qmax`.
pub fn simplest_in(lo: &Frac, lo_closed: bool, hi: &Frac, hi_closed: bool, qmax: Option<&BigInt>) -> Option<Frac> {
    match lo.cmp_to(hi) {
        Ordering::Greater => return None,
        Ordering::Equal => {
            if !(lo_closed && hi_closed) {
                return None;
            }
        }
        Ordering::Less => {}
    }
    // x = (m00*y + m01) / (m10*y + m11), y in the current interval.
    let (mut m00, mut m01, mut m10, mut m11) = (BigInt::one(), BigInt::zero(), BigInt::zero(), BigInt::one());
    let mut a = lo.clone();
    let mut a_closed = lo_closed;
    let mut b = Upper::Finite(hi.clone(), hi_closed);
    loop {
        let fl = a.floor();
        let n = if a.is_integer() && a_closed {
            fl.clone()
        } else {
            &fl + 1u32
        };
        let n_inside = match &b {
            Upper::Infinite => true,
            Upper::Finite(bf, bc) => {
                let c = (&n * &bf.q).cmp(&bf.p);
                c == Ordering::Less || (c == Ordering::Equal && *bc)
            }
        };
        if n_inside {
            let q = &m10 * &n + &m11;
            if let Some(qm) = qmax {
                if &q > qm {
                    return None;
                }
            }
            let p = &m00 * &n + &m01;
            return Some(Frac::new(p, q));
        }
        // No integer inside: both ends share the integer part fl.
        let Upper::Finite(bf, bc) = b else {
            unreachable!("an unbounded interval always holds an integer")
        };
        let a_off = Frac::new(&a.p - &fl * &a.q, a.q.clone());
        let b_off = Frac::new(&bf.p - &fl * &bf.q, bf.q.clone());
        let new_lo = Frac::new(b_off.q.clone(), b_off.p.clone());
        let new_hi = if a_off.p.is_zero() {
            Upper::Infinite
        } else {
            Upper::Finite(Frac::new(a_off.q.clone(), a_off.p.clone()), a_closed)
        };
        let n00 = &m00 * &fl + &m01;
        let n10 = &m10 * &fl + &m11;
        m01 = std::mem::replace(&mut m00, n00);
        m11 = std::mem::replace(&mut m10, n10);
        if let Some(qm) = qmax {
            // y' > 1, so the final denominator is at least m10 + m11.
            if &(&m10 + &m11) > qm {
                return None;
            }
        }
        a = new_lo;
        a_closed = bc;
        b = new_hi;
    }
}

fn modinv(a: &BigInt, m: &BigInt) -> BigInt {
    let e = a.mod_floor(m).extended_gcd(m);
    debug_assert!(e.gcd.is_one());
    e.x.mod_floor(m)
}

/// Predecessor of the reduced fraction `c/d` in the Farey sequence of order `n >= d`.
fn farey_pred(c: &BigInt, d: &BigInt, n: &BigInt) -> Frac {
    if d.is_one() {
        return Frac::new(c * n - 1u32, n.clone());
    }
    let b0 = modinv(c, d);
    let b = &b0 + d * ((n - &b0).div_floor(d));
    let a = (&b * c - 1u32) / d;
    Frac::new(a, b)
}

/// Neighbours `L < x < R` in the Farey sequence of order `n`, for `x` not in it.
fn farey_bracket(x: &Frac, n: &BigInt) -> (Frac, Frac) {
    let (u, v) = (&x.p, &x.q);
    let fl = x.floor();
    let (mut p0, mut q0) = (fl.clone(), BigInt::one());
    let (mut p1, mut q1) = (fl + 1u32, BigInt::one());
    loop {
        if &(&q0 + &q1) > n {
            break;
        }
        let mp = &p0 + &p1;
        let mq = &q0 + &q1;
        let below = (&mp * v) < (u * &mq);
        let left_gap = u * &q0 - v * &p0; // x - L, scaled
        let right_gap = v * &p1 - u * &q1; // R - x, scaled
        if below {
            let kx = (&left_gap - 1u32).div_floor(&right_gap);
            let kn = (n - &q0).div_floor(&q1);
            let k = kx.min(kn);
            p0 += &k * &p1;
            q0 += &k * &q1;
        } else {
            let kx = (&right_gap - 1u32).div_floor(&left_gap);
            let kn = (n - &q1).div_floor(&q0);
            let k = kx.min(kn);
            p1 += &k * &p0;
            q1 += &k * &q0;
        }
    }
    (Frac::new(p0, q0), Frac::new(p1, q1))
}

fn reduce(f: &Frac) -> Frac {
    let g = f.p.gcd(&f.q);
    if g.is_one() {
        f.clone()
    } else {
        Frac::new(&f.p / &g, &f.q / &g)
    }
}

/// All reduced fractions with denominator at most `n` in the closed interval
/// `[lo, hi]`, ascending. Fails once more than `cap` terms are produced.
pub fn fractions_in(lo: &Frac, hi: &Frac, n: &BigInt, cap: usize) -> Result<Vec<Frac>> {
    let mut out = Vec::new();
    if lo.cmp_to(hi) == Ordering::Greater || !n.is_positive() {
        return Ok(out);
    }
    let x = reduce(lo);
    let (mut prev, mut cur) = if &x.q <= n {
        (farey_pred(&x.p, &x.q, n), x)
    } else {
        farey_bracket(&x, n)
    };
    while cur.cmp_to(hi) != Ordering::Greater {
        if out.len() >= cap {
            return Err(Error::ResourceLimit(format!(
                "more than {cap} fractions of order {n} in [{}, {}]",
                lo.to_rational(),
                hi.to_rational()
            )));
        }
        let k = (n + &prev.q).div_floor(&cur.q);
        let next = Frac::new(&k * &cur.p - &prev.p, &k * &cur.q - &prev.q);
        prev = std::mem::replace(&mut cur, next);
        out.push(prev.clone());
    }
    Ok(out)
}

/// A search region on the real line with open or closed ends.
#[derive(Clone, Debug)]
pub struct Region {
    pub lo: Frac,
    pub lo_closed: bool,
    pub hi: Frac,
    pub hi_closed: bool,
}

/// Every reduced `p/q` in `region` with `qlo <= q <= qhi` and
/// `|x - p/q| <= window(q)` that also passes `keep`, ascending.
///
/// `window(m)` must bound the admissible half-width for every denominator
/// `q >= m` (so it must be non-increasing). The search splits the region at
/// its simplest fraction and shrinks each side to the window of the smallest
/// denominator still possible there.
pub fn pruned_search<W, K>(
    x: &Frac,
    region: Region,
    qlo: &BigInt,
    qhi: &BigInt,
    window: W,
    mut keep: K,
    max_nodes: usize,
) -> Result<Vec<Frac>>
where
    W: Fn(&BigInt) -> Frac,
    K: FnMut(&Frac) -> bool,
{
    let mut found = Vec::new();
    if qlo > qhi {
        return Ok(found);
    }
    let start_q = if qlo.is_positive() { qlo.clone() } else { BigInt::one() };
    let mut stack: Vec<(Region, BigInt)> = vec![(region, start_q)];
    let mut nodes = 0usize;
    while let Some((reg, qmin)) = stack.pop() {
        nodes += 1;
        if nodes > max_nodes {
            return Err(Error::ResourceLimit(format!(
                "approximation search around {} exceeded {max_nodes} nodes",
                x.to_rational()
            )));
        }
        let w = window(&qmin);
        let wl = Frac::new(&x.p * &w.q - &w.p * &x.q, &x.q * &w.q);
        let wh = Frac::new(&x.p * &w.q + &w.p * &x.q, &x.q * &w.q);
        let (lo, lo_c) = max_frac((&reg.lo, reg.lo_closed), (&wl, true));
        let (hi, hi_c) = min_frac((&reg.hi, reg.hi_closed), (&wh, true));
        let Some(f) = simplest_in(lo, lo_c, hi, hi_c, Some(qhi)) else {
            continue;
        };
        if &f.q >= qlo && keep(&f) {
            found.push(f.clone());
        }
        let next_q = if f.q.is_one() {
            qmin.clone()
        } else {
            (&f.q + 1u32).max(qmin)
        };
        let left = Region {
            lo: lo.clone(),
            lo_closed: lo_c,
            hi: f.clone(),
            hi_closed: false,
        };
        let right = Region {
            lo: f,
            lo_closed: false,
            hi: hi.clone(),
            hi_closed: hi_c,
        };
        stack.push((right, next_q.clone()));
        stack.push((left, next_q));
    }
    found.sort_by(|a, b| a.cmp_to(b));
    Ok(found)
}
