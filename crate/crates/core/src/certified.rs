//! Interval enclosures with directed rounding, used wherever an exact rational
//! form does not exist (fractional powers, logarithms).

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{Rational, Rounding};

/// Default working precision.
pub const DEFAULT_BITS: u32 = 128;
/// Ceiling of the precision escalation ladder.
pub const MAX_BITS: u32 = 1024;

/// A closed enclosure `lo <= value <= hi`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertifiedValue {
    pub lo: Rational,
    pub hi: Rational,
}

impl CertifiedValue {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi, "inverted enclosure {lo} > {hi}");
        CertifiedValue { lo, hi }
    }

    pub fn exact(v: Rational) -> Self {
        CertifiedValue { lo: v.clone(), hi: v }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, v: &Rational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn add(&self, other: &CertifiedValue) -> CertifiedValue {
        CertifiedValue::new(&self.lo + &other.lo, &self.hi + &other.hi)
    }

    /// Product of two nonnegative enclosures.
    pub fn mul_nonneg(&self, other: &CertifiedValue) -> CertifiedValue {
        debug_assert!(!self.lo.is_negative() && !other.lo.is_negative());
        CertifiedValue::new(&self.lo * &other.lo, &self.hi * &other.hi)
    }

    /// Multiplication by an exact scalar of either sign.
    pub fn scale(&self, k: &Rational) -> CertifiedValue {
        let a = &self.lo * k;
        let b = &self.hi * k;
        if k.is_negative() {
            CertifiedValue::new(b, a)
        } else {
            CertifiedValue::new(a, b)
        }
    }

    pub fn neg(&self) -> CertifiedValue {
        CertifiedValue::new(-&self.hi, -&self.lo)
    }

    /// Reciprocal of a strictly positive enclosure.
    pub fn recip(&self) -> CertifiedValue {
        debug_assert!(self.lo.is_positive());
        CertifiedValue::new(self.hi.recip(), self.lo.recip())
    }

    pub fn midpoint_f64(&self) -> f64 {
        ((&self.lo + &self.hi) * Rational::new(1, 2)).to_f64()
    }

    /// Outward-rounded decimal bounds.
    pub fn to_sci(&self, digits: usize) -> (String, String) {
        (
            self.lo.to_sci(digits, Rounding::Down),
            self.hi.to_sci(digits, Rounding::Up),
        )
    }

    /// Snap both ends outward onto the grid `2^-bits`, bounding denominator growth.
    pub fn coarsen(&self, bits: u32) -> CertifiedValue {
        CertifiedValue::new(floor_scaled(&self.lo, bits), ceil_scaled(&self.hi, bits))
    }
}

/// Largest multiple of `2^-bits` at or below `x`.
pub fn floor_scaled(x: &Rational, bits: u32) -> Rational {
    let n = (x.numer() << bits).div_floor(x.denom());
    Rational::new(n, BigInt::one() << bits)
}

/// Smallest multiple of `2^-bits` at or above `x`.
pub fn ceil_scaled(x: &Rational, bits: u32) -> Rational {
    let n = -((-(x.numer() << bits)).div_floor(x.denom()));
    Rational::new(n, BigInt::one() << bits)
}

fn to_biguint(n: &BigInt) -> BigUint {
    n.magnitude().clone()
}

/// Enclosure of `x^(1/n)` for `x > 0`, relative width at most `2^-bits`.
/// Exact when `x` is a perfect `n`-th power.
pub fn root_enclosure(x: &Rational, n: u32, bits: u32) -> CertifiedValue {
    assert!(x.is_positive(), "root of a nonpositive value");
    assert!(n >= 1);
    if n == 1 {
        return CertifiedValue::exact(x.clone());
    }
    let u = to_biguint(x.numer());
    let v = to_biguint(x.denom());
    // Exact fast path: both parts perfect powers.
    let ru = u.nth_root(n);
    let rv = v.nth_root(n);
    if num_traits::pow(ru.clone(), n as usize) == u && num_traits::pow(rv.clone(), n as usize) == v {
        return CertifiedValue::exact(Rational::new(BigInt::from(ru), BigInt::from(rv)));
    }
    // x^(1/n) = (u v^(n-1))^(1/n) / v
    let m = &u * num_traits::pow(v.clone(), (n - 1) as usize);
    let root_bits = m.bits() / n as u64;
    let k = (bits as i64 + 2 - root_bits as i64).max(0) as u32;
    let scaled = &m << (n as u64 * k as u64);
    let r = scaled.nth_root(n);
    let den = BigInt::from(v) << k;
    let lo = Rational::new(BigInt::from(r.clone()), den.clone());
    if num_traits::pow(r.clone(), n as usize) == scaled {
        return CertifiedValue::exact(lo);
    }
    let hi = Rational::new(BigInt::from(r + 1u32), den);
    CertifiedValue::new(lo, hi)
}

/// Enclosure of `x^e` for `x > 0` and rational `e`.
pub fn pow_enclosure(x: &Rational, e: &Rational, bits: u32) -> CertifiedValue {
    assert!(x.is_positive(), "power of a nonpositive base");
    let p = e.numer().clone();
    let q: u32 = e.denom().try_into().expect("exponent denominator must fit in u32");
    let mag: u32 = p.magnitude().try_into().expect("exponent numerator must fit in u32");
    let base = x.pow(mag as i32);
    // One extra guard bit covers the reciprocal step.
    let root = root_enclosure(&base, q, bits + 1);
    if p.sign() == Sign::Minus {
        root.recip()
    } else {
        root
    }
}

/// Fixed-point `2·atanh(z)` enclosure for `0 <= z < 1/2`, scaled by `2^p`.
fn two_atanh_fixed(z: &Rational, p: u32) -> (BigInt, BigInt) {
    if z.is_zero() {
        return (BigInt::zero(), BigInt::zero());
    }
    let one = BigInt::one() << p;
    let zl = (z.numer() << p).div_floor(z.denom());
    let zh = -((-(z.numer() << p)).div_floor(z.denom()));
    let z2l = (&zl * &zl) >> p;
    let z2h = {
        let sq = &zh * &zh;
        let (q, r) = sq.div_rem(&one);
        if r.is_zero() {
            q
        } else {
            q + 1
        }
    };
    let mut tl = zl;
    let mut th = zh;
    let mut sl = BigInt::zero();
    let mut sh = BigInt::zero();
    let mut i: u64 = 0;
    loop {
        let d = BigInt::from(2 * i + 1);
        sl += tl.div_floor(&d);
        sh += -((-&th).div_floor(&d));
        i += 1;
        tl = (&tl * &z2l) >> p;
        let prod = &th * &z2h;
        let (q, r) = prod.div_rem(&one);
        th = if r.is_zero() { q } else { q + 1 };
        if th <= BigInt::from(2) {
            break;
        }
    }
    // Remaining terms sum to at most t_n / (2n+1) / (1 - z^2) <= 2 * t_n.
    sh += &th * 2u32 + 1u32;
    (sl * 2u32, sh * 2u32)
}

/// Enclosure of `ln x` for `x > 0`, absolute width about `2^-bits` times the
/// size of the binary exponent of `x`.
pub fn ln_enclosure(x: &Rational, bits: u32) -> CertifiedValue {
    assert!(x.is_positive(), "log of a nonpositive value");
    let u = x.numer().clone();
    let v = x.denom().clone();
    let mut k = u.bits() as i64 - v.bits() as i64;
    // Normalize so that 2^k <= x < 2^(k+1).
    let ge = |k: i64| -> bool {
        if k >= 0 {
            u >= (&v << (k as u64))
        } else {
            (&u << ((-k) as u64)) >= v
        }
    };
    while !ge(k) {
        k -= 1;
    }
    while ge(k + 1) {
        k += 1;
    }
    let (a, b) = if k >= 0 {
        (u.clone(), &v << (k as u64))
    } else {
        (&u << ((-k) as u64), v.clone())
    };
    let z = Rational::new(&a - &b, &a + &b);
    let guard = 32 + (64 - k.unsigned_abs().leading_zeros());
    let p = bits + guard;
    let (al, ah) = two_atanh_fixed(&z, p);
    let (l2l, l2h) = two_atanh_fixed(&Rational::new(1, 3), p);
    let kb = BigInt::from(k);
    let (kl, kh) = if k >= 0 {
        (&kb * &l2l, &kb * &l2h)
    } else {
        (&kb * &l2h, &kb * &l2l)
    };
    let den = BigInt::one() << p;
    CertifiedValue::new(Rational::new(kl + al, den.clone()), Rational::new(kh + ah, den))
}

/// Decide `a < b` by tightening both enclosures until they separate.
/// Returns `Ok(false)` once `a >= b` is certain.
pub fn decide_less<F, G>(a: F, b: G, start_bits: u32, max_bits: u32, what: &str) -> Result<bool>
where
    F: Fn(u32) -> CertifiedValue,
    G: Fn(u32) -> CertifiedValue,
{
    let mut bits = start_bits.max(16);
    loop {
        let x = a(bits);
        let y = b(bits);
        if x.hi < y.lo {
            return Ok(true);
        }
        if x.lo >= y.hi {
            return Ok(false);
        }
        if bits >= max_bits {
            return Err(Error::PrecisionExhausted {
                bits,
                what: what.to_string(),
            });
        }
        bits = (bits * 2).min(max_bits);
    }
}

/// Certified sum accumulated on a fixed binary grid; lower ends are floored,
/// upper ends ceiled, so the result encloses the true sum.
#[derive(Clone, Debug)]
pub struct FixedSum {
    bits: u32,
    lo: BigInt,
    hi: BigInt,
}

impl FixedSum {
    pub fn new(bits: u32) -> Self {
        FixedSum {
            bits,
            lo: BigInt::zero(),
            hi: BigInt::zero(),
        }
    }

    pub fn add(&mut self, v: &CertifiedValue) {
        self.lo += (v.lo.numer() << self.bits).div_floor(v.lo.denom());
        self.hi += -((-(v.hi.numer() << self.bits)).div_floor(v.hi.denom()));
    }

    pub fn merge(&mut self, other: &FixedSum) {
        assert_eq!(self.bits, other.bits);
        self.lo += &other.lo;
        self.hi += &other.hi;
    }

    pub fn finish(&self) -> CertifiedValue {
        let den = BigInt::one() << self.bits;
        CertifiedValue::new(
            Rational::new(self.lo.clone(), den.clone()),
            Rational::new(self.hi.clone(), den),
        )
    }
}

impl CertifiedValue {
    /// `true` when the whole enclosure is strictly negative.
    pub fn certainly_negative(&self) -> bool {
        self.hi.is_negative()
    }

    pub fn certainly_positive(&self) -> bool {
        self.lo.is_positive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn roots_of_perfect_powers_are_exact() {
        let v = root_enclosure(&r(1, 32), 5, 128);
        assert!(v.is_exact());
        assert_eq!(v.lo, r(1, 2));
        let v = pow_enclosure(&r(1, 4), &r(5, 2), 128);
        assert_eq!(v, CertifiedValue::exact(r(1, 32)));
    }

    #[test]
    fn irrational_root_bracketing_oracle() {
        // Check 3^(-5/2) against integer bracketing: lo^2 <= 3^-5 <= hi^2.
        let v = pow_enclosure(&r(1, 3), &r(5, 2), 128);
        let target = r(1, 243);
        assert!(v.lo.pow(2) <= target && target <= v.hi.pow(2));
        assert!(v.width() <= Rational::dyadic(1, 128));
    }

    #[test]
    fn negative_exponent_is_reciprocal() {
        let v = pow_enclosure(&r(4, 1), &r(-3, 2), 64);
        assert_eq!(v, CertifiedValue::exact(r(1, 8)));
        let w = pow_enclosure(&r(2, 1), &r(-1, 2), 64);
        assert!(w.lo.pow(2) <= r(1, 2) && r(1, 2) <= w.hi.pow(2));
    }

    #[test]
    fn ln_matches_float_and_brackets() {
        for (n, d) in [(2i64, 1i64), (1, 3), (10, 1), (355, 113), (1, 1_000_000)] {
            let x = r(n, d);
            let v = ln_enclosure(&x, 128);
            let f = (n as f64 / d as f64).ln();
            assert!(v.lo.to_f64() <= f + 1e-12 && f - 1e-12 <= v.hi.to_f64());
            assert!(v.width() < Rational::dyadic(1, 100));
        }
        assert_eq!(ln_enclosure(&r(1, 1), 64), CertifiedValue::exact(Rational::zero()));
    }

    #[test]
    fn ln_of_huge_powers_of_two_scales_linearly() {
        let x = Rational::dyadic(1, 1200);
        let v = ln_enclosure(&x, 128);
        let want = -1200.0 * std::f64::consts::LN_2;
        assert!((v.midpoint_f64() - want).abs() < 1e-9);
    }

    #[test]
    fn decide_less_escalates_and_reports_exhaustion() {
        let a = |_b: u32| CertifiedValue::exact(r(1, 3));
        let b = |_b: u32| CertifiedValue::exact(r(1, 2));
        assert!(decide_less(a, b, 128, 1024, "1/3 < 1/2").unwrap());
        let tie = |_b: u32| CertifiedValue::new(r(0, 1), r(1, 1));
        let err = decide_less(tie, tie, 128, 1024, "tie").unwrap_err();
        assert!(matches!(err, Error::PrecisionExhausted { bits: 1024, .. }));
    }

    #[test]
    fn fixed_sum_encloses_exact_sum() {
        let mut s = FixedSum::new(64);
        let mut exact = Rational::zero();
        for q in 1..50i64 {
            let t = r(1, q * q * q);
            exact += &t;
            s.add(&CertifiedValue::exact(t));
        }
        assert!(s.finish().contains(&exact));
    }
}
