//! Exact rational scalar used for every point, distance, radius and measure.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A reduced fraction `num/den` with `den >= 1`. Arithmetic never rounds.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    /// `2^-k`.
    pub fn dyadic(num: impl Into<BigInt>, k: u32) -> Self {
        Rational::new(num, BigInt::one() << k)
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Rational {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Rational {
        Rational(self.0.recip())
    }

    pub fn floor(&self) -> BigInt {
        self.numer().div_floor(self.denom())
    }

    pub fn ceil(&self) -> BigInt {
        -((-self.numer()).div_floor(self.denom()))
    }

    /// `self - floor(self)`, in `[0, 1)`.
    pub fn fract(&self) -> Rational {
        self - &Rational::from_integer(self.floor())
    }

    pub fn pow(&self, exp: i32) -> Rational {
        Rational(num_traits::Pow::pow(&self.0, exp))
    }

    pub fn min(self, other: Rational) -> Rational {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Rational) -> Rational {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Nearest-ish `f64`; `0.0` on underflow of very small magnitudes.
    pub fn to_f64(&self) -> f64 {
        if let Some(v) = self.0.to_f64() {
            if v.is_finite() && (v != 0.0 || self.is_zero()) {
                return v;
            }
        }
        // Fall back to an exponent split so tiny or huge values do not collapse.
        let l2 = self.log2_approx();
        let sign = if self.is_negative() { -1.0 } else { 1.0 };
        sign * l2.exp2()
    }

    /// `log2 |self|` as an `f64` approximation, valid for any nonzero magnitude.
    pub fn log2_approx(&self) -> f64 {
        let n = self.numer().magnitude();
        let d = self.denom().magnitude();
        log2_big(n) - log2_big(d)
    }

    /// Decimal in scientific notation with `digits` significant digits,
    /// rounded in the requested direction.
    pub fn to_sci(&self, digits: usize, rounding: Rounding) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let digits = digits.max(1);
        if self.is_negative() {
            let flipped = match rounding {
                Rounding::Down => Rounding::Up,
                Rounding::Up => Rounding::Down,
                Rounding::Nearest => Rounding::Nearest,
            };
            return format!("-{}", (-self).to_sci(digits, flipped));
        }
        let mut exp10 = (self.log2_approx() * std::f64::consts::LOG10_2).floor() as i64;
        // Correct the estimate so that 10^exp10 <= self < 10^(exp10+1).
        loop {
            let p = pow10(exp10);
            if &p > self {
                exp10 -= 1;
                continue;
            }
            if &pow10(exp10 + 1) <= self {
                exp10 += 1;
                continue;
            }
            break;
        }
        let scale = pow10(digits as i64 - 1 - exp10);
        let scaled = self * &scale;
        let mut mant = match rounding {
            Rounding::Down => scaled.floor(),
            Rounding::Up => scaled.ceil(),
            Rounding::Nearest => (scaled + Rational::new(1, 2)).floor(),
        };
        let limit = num_traits::pow(BigInt::from(10u32), digits);
        if mant >= limit {
            mant /= 10;
            exp10 += 1;
        }
        let s = mant.to_string();
        let (head, tail) = s.split_at(1);
        let tail = tail.trim_end_matches('0');
        if tail.is_empty() {
            format!("{head}e{exp10}")
        } else {
            format!("{head}.{tail}e{exp10}")
        }
    }
}

/// Direction for decimal rendering of exact values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounding {
    Down,
    Up,
    Nearest,
}

fn pow10(e: i64) -> Rational {
    let p = num_traits::pow(BigInt::from(10u32), e.unsigned_abs() as usize);
    if e >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new(BigInt::one(), p)
    }
}

pub(crate) fn log2_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap_or(0.0);
    top.log2() + shift as f64
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `p/q`, an integer, or a finite decimal such as `0.125`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not a rational: {s:?}"));
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            return Ok(Rational::new(p, q));
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let neg = int.starts_with('-');
            let int_part: BigInt = if int.is_empty() || int == "-" {
                BigInt::zero()
            } else {
                int.parse().map_err(|_| bad())?
            };
            let frac_part: BigInt = frac.parse().map_err(|_| bad())?;
            let den = num_traits::pow(BigInt::from(10u32), frac.len());
            let mut v = Rational::from_integer(int_part.abs()) + Rational::new(frac_part, den);
            if neg {
                v = -v;
            }
            return Ok(v);
        }
        let n: BigInt = s.parse().map_err(|_| bad())?;
        Ok(Rational::from_integer(n))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::from_integer(v)
    }
}

impl From<BigInt> for Rational {
    fn from(v: BigInt) -> Self {
        Rational::from_integer(v)
    }
}

impl From<BigRational> for Rational {
    fn from(v: BigRational) -> Self {
        Rational(v)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        self.is_integer() && *self.numer() == BigInt::from(*other)
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.cmp(&Rational::from(*other)))
    }
}

/// Integer square root of a nonnegative big integer (floor).
pub fn isqrt(n: &BigInt) -> BigInt {
    if n.sign() == Sign::Minus {
        panic!("isqrt of a negative number");
    }
    n.sqrt()
}

/// Smallest integer `q >= 1` with `q^2 >= x`.
pub fn ceil_sqrt(x: &Rational) -> BigInt {
    if !x.is_positive() {
        return BigInt::one();
    }
    let mut q = isqrt(&x.ceil());
    while Rational::from_integer(&q * &q) < *x {
        q += 1;
    }
    while q > BigInt::one() && Rational::from_integer((&q - 1u32) * (&q - 1u32)) >= *x {
        q -= 1;
    }
    q.max(BigInt::one())
}

/// Largest integer `q >= 0` with `q^2 <= x`.
pub fn floor_sqrt(x: &Rational) -> BigInt {
    if !x.is_positive() {
        return BigInt::zero();
    }
    let mut q = isqrt(&x.floor());
    while Rational::from_integer((&q + 1u32) * (&q + 1u32)) <= *x {
        q += 1;
    }
    q
}

/// Serde adapters writing big integers as decimal strings.
pub mod bigint_str {
    use num_bigint::BigInt;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }

    pub mod option {
        use num_bigint::BigInt;
        use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(n: &Option<BigInt>, s: S) -> Result<S::Ok, S::Error> {
            match n {
                Some(v) => s.serialize_some(&v.to_string()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigInt>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|s| s.parse().map_err(D::Error::custom))
                .transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_integer_and_decimal() {
        assert_eq!("6/8".parse::<Rational>().unwrap(), Rational::new(3, 4));
        assert_eq!("-2".parse::<Rational>().unwrap(), Rational::from(-2));
        assert_eq!("0.125".parse::<Rational>().unwrap(), Rational::new(1, 8));
        assert_eq!("-1.5".parse::<Rational>().unwrap(), Rational::new(-3, 2));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
    }

    #[test]
    fn display_is_reduced_pq() {
        assert_eq!(Rational::new(10, -4).to_string(), "-5/2");
        assert_eq!(Rational::from(3).to_string(), "3/1");
    }

    #[test]
    fn floor_ceil_fract_on_negatives() {
        let x = Rational::new(-7, 3);
        assert_eq!(x.floor(), BigInt::from(-3));
        assert_eq!(x.ceil(), BigInt::from(-2));
        assert_eq!(x.fract(), Rational::new(2, 3));
    }

    #[test]
    fn sci_rendering_rounds_in_requested_direction() {
        let x = Rational::new(1, 3);
        assert_eq!(x.to_sci(3, Rounding::Down), "3.33e-1");
        assert_eq!(x.to_sci(3, Rounding::Up), "3.34e-1");
        assert_eq!(Rational::from(1000).to_sci(12, Rounding::Nearest), "1e3");
        let tiny = Rational::new(BigInt::one(), BigInt::one() << 3000u32);
        assert!(tiny.to_sci(12, Rounding::Down).ends_with("e-904"));
    }

    #[test]
    fn sqrt_helpers_are_tight() {
        assert_eq!(ceil_sqrt(&Rational::from(32)), BigInt::from(6));
        assert_eq!(floor_sqrt(&Rational::from(128)), BigInt::from(11));
        assert_eq!(ceil_sqrt(&Rational::from(36)), BigInt::from(6));
        assert_eq!(floor_sqrt(&Rational::new(1, 2)), BigInt::from(0));
        assert_eq!(ceil_sqrt(&Rational::new(25, 2)), BigInt::from(4));
    }

    #[test]
    fn tiny_values_keep_an_exponent_in_f64_log() {
        let tiny = Rational::new(BigInt::one(), BigInt::one() << 5000u32);
        assert!((tiny.log2_approx() + 5000.0).abs() < 1e-9);
    }
}
