//! The power-law approximation functions `ψ(x) = a·x^τ`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::certified::{pow_enclosure, CertifiedValue, FixedSum, DEFAULT_BITS, MAX_BITS};
use crate::error::{Error, Result};
use crate::rational::{floor_sqrt, Rational};
use crate::space::SpaceKind;
use crate::wds::{SystemKind, WdsSystem};

/// Largest admissible denominator of the exponent.
pub const MAX_TAU_DENOMINATOR: u32 = 8;

/// `ψ(x) = scale · x^tau` with rational `tau > 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxFunction {
    pub scale: Rational,
    pub tau: Rational,
    pub precision_bits: u32,
}

impl fmt::Display for ApproxFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pow:a={},tau={}", short(&self.scale), short(&self.tau))
    }
}

fn short(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        r.to_string()
    }
}

impl FromStr for ApproxFunction {
    type Err = Error;

    /// Grammar: `pow:a=<rat>,tau=<rat>`; `a` defaults to 1.
    fn from_str(s: &str) -> Result<Self> {
        let body = s
            .trim()
            .strip_prefix("pow:")
            .ok_or_else(|| Error::Parse(format!("psi spec {s:?} must start with \"pow:\"")))?;
        let mut scale = Rational::one();
        let mut tau: Option<Rational> = None;
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("psi field {part:?} is not key=value")))?;
            match k.trim() {
                "a" => scale = v.parse()?,
                "tau" => tau = Some(v.parse()?),
                other => return Err(Error::Parse(format!("unknown psi field {other:?}"))),
            }
        }
        let tau = tau.ok_or_else(|| Error::Parse(format!("psi spec {s:?} lacks tau")))?;
        ApproxFunction::new(scale, tau)
    }
}

impl ApproxFunction {
    pub fn new(scale: Rational, tau: Rational) -> Result<Self> {
        if !scale.is_positive() {
            return Err(Error::Config(format!("psi scale must be positive, got {scale}")));
        }
        if tau <= Rational::one() {
            return Err(Error::Config(format!(
                "psi exponent must exceed 1 so that psi(x)/x -> 0, got {tau}"
            )));
        }
        if tau.denom() > &BigInt::from(MAX_TAU_DENOMINATOR) {
            return Err(Error::Config(format!(
                "psi exponent denominator must be at most {MAX_TAU_DENOMINATOR}, got {tau}"
            )));
        }
        Ok(ApproxFunction {
            scale,
            tau,
            precision_bits: DEFAULT_BITS,
        })
    }

    pub fn power(tau: Rational) -> Result<Self> {
        Self::new(Rational::one(), tau)
    }

    pub fn with_precision(mut self, bits: u32) -> Self {
        self.precision_bits = bits;
        self
    }

    fn tau_parts(&self) -> (u32, u32) {
        let n = self.tau.numer().to_u32().expect("tau numerator");
        let d = self.tau.denom().to_u32().expect("tau denominator");
        (n, d)
    }

    /// Enclosure of `ψ(x)` at the configured precision.
    pub fn eval(&self, x: &Rational) -> Result<CertifiedValue> {
        self.eval_bits(x, self.precision_bits)
    }

    pub fn eval_bits(&self, x: &Rational, bits: u32) -> Result<CertifiedValue> {
        if !x.is_positive() {
            return Err(Error::Config(format!("psi is defined on (0, inf), got {x}")));
        }
        if bits > MAX_BITS {
            return Err(Error::PrecisionExhausted {
                bits,
                what: format!("psi({x})"),
            });
        }
        Ok(pow_enclosure(x, &self.tau, bits).scale(&self.scale))
    }

    /// Exact comparison of `ψ(x)` with `y`.
    pub fn cmp_value(&self, x: &Rational, y: &Rational) -> Ordering {
        if !y.is_positive() {
            return Ordering::Greater;
        }
        let (n, d) = self.tau_parts();
        // a x^(n/d) ? y  <=>  a^d x^n ? y^d
        let lhs = self.scale.pow(d as i32) * x.pow(n as i32);
        let rhs = y.pow(d as i32);
        lhs.cmp(&rhs)
    }

    /// Exact comparison of `c·ψ(x)` with `y`, for `c > 0`.
    pub fn cmp_scaled(&self, c: &Rational, x: &Rational, y: &Rational) -> Ordering {
        self.cmp_value(x, &(y / c))
    }

    /// Lower order at zero, which is `τ` for this family.
    pub fn lower_order_at_zero(&self) -> Rational {
        self.tau.clone()
    }

    /// `log ψ(2^-n) / log 2^-n`, computed from the closed form.
    pub fn numeric_lower_order(&self, n: u32) -> f64 {
        let l2a = self.scale.log2_approx();
        (l2a - n as f64 * self.tau.to_f64()) / -(n as f64)
    }

    /// Exact test of `ψ(ε)/ε < bound`.
    pub fn ratio_below(&self, eps: &Rational, bound: &Rational) -> bool {
        let (n, d) = self.tau_parts();
        // a ε^((n-d)/d) < b  <=>  a^d ε^(n-d) < b^d
        let lhs = self.scale.pow(d as i32) * eps.pow((n - d) as i32);
        lhs < bound.pow(d as i32)
    }

    /// A dyadic `ε₀` with `ψ(ε)/ε < bound` for all `0 < ε <= ε₀`.
    pub fn threshold_for_ratio(&self, bound: &Rational) -> Rational {
        assert!(bound.is_positive(), "ratio bound must be positive");
        let mut good = Rational::one();
        while !self.ratio_below(&good, bound) {
            good = good * Rational::new(1, 2);
        }
        if good == Rational::one() {
            return good;
        }
        let mut bad = &good * Rational::from(2);
        for _ in 0..8 {
            let mid = (&good + &bad) * Rational::new(1, 2);
            if self.ratio_below(&mid, bound) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    }
}

fn totients(lo: u64, hi: u64) -> Vec<u64> {
    // Segmented-free sieve up to hi; windows are small.
    let n = hi as usize;
    let mut phi: Vec<u64> = (0..=hi).collect();
    for p in 2..=n {
        if phi[p] == p as u64 {
            let mut m = p;
            while m <= n {
                phi[m] -= phi[m] / p as u64;
                m += p;
            }
        }
    }
    phi[lo as usize..=n].to_vec()
}

/// Width of the exactly summed initial window in the rationals tail bound.
pub const TAIL_EXACT_WINDOW: u64 = 10_000;

/// Certified upper bound on `Σ_{R(ξ) < threshold} (ψ(R(ξ))/R(ξ))^α` over the
/// ambient space. `lo` is a valid lower bound of the partial sum actually
/// computed, `hi` bounds the full series.
pub fn tail_sum_bound(
    system: &WdsSystem,
    psi: &ApproxFunction,
    alpha: &Rational,
    threshold: &Rational,
) -> Result<CertifiedValue> {
    if !alpha.is_positive() || !threshold.is_positive() {
        return Err(Error::Config("alpha and threshold must be positive".into()));
    }
    let bits = psi.precision_bits;
    let sigma = alpha * (&psi.tau - Rational::one());
    if sigma <= Rational::one() {
        return Err(Error::HypothesisViolated(format!(
            "sum of (psi(R)/R)^alpha diverges for {} with alpha = {alpha}: need alpha*(tau-1) > 1",
            psi
        )));
    }
    let a_alpha = pow_enclosure(&psi.scale, alpha, bits);
    match system.kind {
        SystemKind::Rationals => {
            let s = &sigma * Rational::from(2);
            let q0 = floor_sqrt(&threshold.recip()) + BigInt::one();
            let extra_unit = if system.space.kind == SpaceKind::Interval {
                1u64
            } else {
                0
            };
            let mut sum = FixedSum::new(bits + 32);
            let mut q_tail_from = q0.clone();
            let mut start = q0.clone();
            if start.is_one() {
                // The point(s) of height one carry radius 1 and weight a^α.
                let w = a_alpha.scale(&Rational::from((1 + extra_unit) as i64));
                sum.add(&w);
                start = BigInt::from(2u32);
                q_tail_from = start.clone();
            }
            if let Some(s0) = start.to_u64().filter(|&v| v < TAIL_EXACT_WINDOW) {
                let hi = s0 + TAIL_EXACT_WINDOW - 1;
                let phi = totients(s0, hi);
                let neg_s = -&s;
                for (i, ph) in phi.iter().enumerate() {
                    let q = Rational::from((s0 + i as u64) as i64);
                    let t = pow_enclosure(&q, &neg_s, bits)
                        .mul_nonneg(&a_alpha)
                        .scale(&Rational::from(*ph as i64));
                    sum.add(&t);
                }
                q_tail_from = BigInt::from(hi + 1);
            }
            // Σ_{q >= Q} q^(1-s) <= ∫_{Q-1}^∞ x^(1-s) dx = (Q-1)^(2-s)/(s-2); valid for Q >= 2.
            let base = Rational::from_integer(&q_tail_from - 1u32);
            let tail = pow_enclosure(&base, &(Rational::from(2) - &s), bits)
                .scale(&(&s - Rational::from(2)).recip())
                .mul_nonneg(&a_alpha);
            let partial = sum.finish();
            Ok(CertifiedValue::new(partial.lo.clone(), &partial.hi + &tail.hi))
        }
        SystemKind::Dyadics => {
            // Points of height j: 2^(j-1) for j >= 1 and the single point 0 at j = 0.
            let mut j0 = 0i64;
            while Rational::dyadic(1, j0 as u32) >= *threshold {
                j0 += 1;
            }
            let mut head = CertifiedValue::exact(Rational::zero());
            if j0 == 0 {
                head = a_alpha.clone();
                j0 = 1;
            }
            let e = Rational::one() - &sigma; // r = 2^e < 1
            let two = Rational::from(2);
            let r = pow_enclosure(&two, &e, bits);
            let r_j0 = pow_enclosure(&two, &(&e * Rational::from(j0)), bits);
            let inv_lo = (Rational::one() - &r.lo).recip();
            let inv_hi = (Rational::one() - &r.hi).recip();
            let geo = CertifiedValue::new(&r_j0.lo * &inv_lo, &r_j0.hi * &inv_hi)
                .mul_nonneg(&a_alpha)
                .scale(&Rational::new(1, 2));
            Ok(head.add(&geo))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::MetricMeasureSpace;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn parses_and_prints_spec_grammar() {
        let p: ApproxFunction = "pow:a=1,tau=5/2".parse().unwrap();
        assert_eq!(p.tau, r(5, 2));
        assert_eq!(p.to_string(), "pow:a=1,tau=5/2");
        assert!("pow:tau=1".parse::<ApproxFunction>().is_err());
        assert!("pow:a=1,tau=7/9".parse::<ApproxFunction>().is_err());
        assert!("exp:tau=3".parse::<ApproxFunction>().is_err());
    }

    #[test]
    fn exact_evaluations() {
        let p = ApproxFunction::power(r(5, 2)).unwrap();
        assert_eq!(p.eval(&r(1, 4)).unwrap(), CertifiedValue::exact(r(1, 32)));
        let c = ApproxFunction::power(r(3, 1)).unwrap();
        assert_eq!(c.eval(&r(1, 10)).unwrap(), CertifiedValue::exact(r(1, 1000)));
    }

    #[test]
    fn irrational_evaluation_is_tight() {
        let p = ApproxFunction::power(r(5, 2)).unwrap();
        let v = p.eval(&r(1, 3)).unwrap();
        assert!(!v.is_exact());
        assert!(v.width() <= Rational::dyadic(1, 128));
        // Oracle: lo^2 <= 3^-5 <= hi^2.
        assert!(v.lo.pow(2) <= r(1, 243) && r(1, 243) <= v.hi.pow(2));
    }

    #[test]
    fn exact_comparison_agrees_with_enclosure() {
        let p = ApproxFunction::new(r(7, 1), r(5, 2)).unwrap();
        let x = r(2, 9);
        let v = p.eval(&x).unwrap();
        assert_eq!(p.cmp_value(&x, &v.lo), Ordering::Greater);
        assert_eq!(p.cmp_value(&x, &v.hi), Ordering::Less);
        let e = ApproxFunction::power(r(5, 2)).unwrap();
        assert_eq!(e.cmp_value(&r(1, 4), &r(1, 32)), Ordering::Equal);
    }

    #[test]
    fn lower_order_is_the_exponent() {
        let p = ApproxFunction::power(r(5, 2)).unwrap();
        assert_eq!(p.lower_order_at_zero(), r(5, 2));
        assert_eq!(p.numeric_lower_order(32), 2.5);
        let q = ApproxFunction::new(r(7, 1), r(3, 1)).unwrap();
        assert_eq!(q.lower_order_at_zero(), r(3, 1));
        for n in 1..=64u32 {
            assert!((q.numeric_lower_order(n) - 3.0).abs() <= 3.0 / n as f64 + 1e-12);
        }
    }

    #[test]
    fn thresholds() {
        let p = ApproxFunction::power(r(5, 2)).unwrap();
        let e = p.threshold_for_ratio(&r(1, 4));
        assert!(p.ratio_below(&e, &r(1, 4)));
        assert!(e.to_f64() <= 4f64.powf(-2.0 / 3.0));
        assert!(e >= r(3, 8));
        let sq = ApproxFunction::power(r(2, 1)).unwrap();
        let e = sq.threshold_for_ratio(&r(1, 32));
        assert!(e < r(1, 32) && e > r(1, 64));
        assert_eq!(p.threshold_for_ratio(&r(1, 1)), r(511, 512));
    }

    #[test]
    fn rationals_tail_bound_example() {
        let sys = WdsSystem::rationals(MetricMeasureSpace::circle(), r(2, 1));
        let p = ApproxFunction::power(r(3, 1)).unwrap();
        let b = tail_sum_bound(&sys, &p, &Rational::one(), &r(1, 100)).unwrap();
        assert!(b.hi <= r(1, 200));
        // Dominates a brute-force partial sum over q in 11..=400.
        let mut brute = Rational::zero();
        for q in 11..=400i64 {
            let phi = (1..=q).filter(|p| num_integer::Integer::gcd(p, &q) == 1).count() as i64;
            brute += &r(phi, q.pow(4));
        }
        assert!(brute <= b.hi);
    }

    #[test]
    fn dyadic_tail_bound_closed_form() {
        let sys = WdsSystem::dyadics(MetricMeasureSpace::circle(), Rational::one());
        let p = ApproxFunction::power(r(3, 1)).unwrap();
        for j in [3u32, 10, 40] {
            let b = tail_sum_bound(&sys, &p, &Rational::one(), &Rational::dyadic(1, j)).unwrap();
            assert!(b.contains(&Rational::dyadic(1, j + 1)));
            assert!(b.hi <= Rational::dyadic(1, j));
        }
    }

    #[test]
    fn divergent_regime_is_rejected() {
        let sys = WdsSystem::rationals(MetricMeasureSpace::circle(), r(2, 1));
        let p = ApproxFunction::power(r(2, 1)).unwrap();
        let e = tail_sum_bound(&sys, &p, &Rational::one(), &r(1, 100)).unwrap_err();
        assert!(matches!(e, Error::HypothesisViolated(_)));
    }

    #[test]
    fn tail_bound_is_monotone_in_threshold() {
        let sys = WdsSystem::rationals(MetricMeasureSpace::circle(), r(3, 1));
        let p = ApproxFunction::power(r(5, 2)).unwrap();
        let mut prev: Option<Rational> = None;
        for k in [2i64, 10, 1000, 100_000, 10_000_000_000] {
            let b = tail_sum_bound(&sys, &p, &Rational::one(), &r(1, k)).unwrap().hi;
            if let Some(pv) = &prev {
                assert!(b <= *pv);
            }
            prev = Some(b);
        }
    }
}
