//! Dimension estimators: the mass-distribution lower bound for nested
//! families, exact dyadic box counting, and critical exponents of cover sums.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cantor::ConstructionTrace;
use crate::certified::{ln_enclosure, pow_enclosure, CertifiedValue, FixedSum};
use crate::error::{Error, Result};
use crate::psi::ApproxFunction;
use crate::rational::Rational;
use crate::space::{merge_intervals, Interval};

/// Working precision of the logarithms in the mass-distribution bound.
pub const MDP_BITS: u32 = 128;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdpInput {
    pub alpha: Rational,
    /// `m_1, m_2, ...`
    pub m: Vec<Rational>,
    /// `δ_1, δ_2, ...`
    pub delta: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdpTerm {
    pub l: usize,
    /// Enclosure of `α·log(m_1⋯m_{l−1}) / −log(m_l δ_l^α)`.
    pub bound: CertifiedValue,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdpBound {
    pub terms: Vec<MdpTerm>,
    /// Minimum of the lower ends over the trailing window.
    pub liminf_surrogate: Rational,
    pub window: (usize, usize),
    /// `α/λ(ψ)` when the input came from a trace.
    pub target: Option<Rational>,
}

impl MdpBound {
    pub fn lower_values(&self) -> impl Iterator<Item = &Rational> {
        self.terms.iter().map(|t| &t.bound.lo)
    }
}

fn ln_of(x: &Rational) -> CertifiedValue {
    ln_enclosure(x, MDP_BITS)
}

/// `b_l` for `2 <= l <= l_max` with the trailing-window minimum.
pub fn mdp_lower_bound(input: &MdpInput, l_max: usize) -> Result<MdpBound> {
    if l_max < 2 {
        return Err(Error::IllPosed(format!(
            "the mass-distribution bound needs at least two levels, got {l_max}"
        )));
    }
    if input.m.len() < l_max || input.delta.len() < l_max {
        return Err(Error::IllPosed(format!(
            "l_max = {l_max} exceeds the {} child counts / {} separations supplied",
            input.m.len(),
            input.delta.len()
        )));
    }
    if !input.alpha.is_positive() {
        return Err(Error::IllPosed("alpha must be positive".into()));
    }
    let alpha = &input.alpha;
    for (i, (m, d)) in input.m.iter().zip(&input.delta).enumerate().take(l_max) {
        if *m < Rational::one() || !d.is_positive() {
            return Err(Error::IllPosed(format!("level {}: m = {m}, delta = {d}", i + 1)));
        }
    }
    let ln_m: Vec<CertifiedValue> = input.m[..l_max].par_iter().map(ln_of).collect();
    let ln_d: Vec<CertifiedValue> = input.delta[..l_max].par_iter().map(ln_of).collect();
    let mut terms = Vec::with_capacity(l_max - 1);
    let mut acc = CertifiedValue::exact(Rational::zero());
    for l in 2..=l_max {
        acc = acc.add(&ln_m[l - 2]);
        // −log(m_l δ_l^α) = −(ln m_l + α ln δ_l)
        let den = ln_m[l - 1].add(&ln_d[l - 1].scale(alpha)).neg();
        let exact_unit = *alpha == Rational::one() && &input.m[l - 1] * &input.delta[l - 1] >= Rational::one();
        if exact_unit || !den.lo.is_positive() {
            return Err(Error::IllPosed(format!(
                "m_{l}·delta_{l}^alpha is not certifiably below 1 (log nonpositive)"
            )));
        }
        let num = acc.scale(alpha);
        let lo = if num.lo.is_negative() {
            Rational::zero()
        } else {
            &num.lo / &den.hi
        };
        let hi = &num.hi / &den.lo;
        terms.push(MdpTerm {
            l,
            bound: CertifiedValue::new(lo, hi),
        });
    }
    let w = l_max.div_ceil(3).min(terms.len()).max(1);
    let tail = &terms[terms.len() - w..];
    let liminf_surrogate = tail.iter().map(|t| t.bound.lo.clone()).min().expect("nonempty window");
    Ok(MdpBound {
        window: (tail[0].l, tail[tail.len() - 1].l),
        terms,
        liminf_surrogate,
        target: None,
    })
}

/// `(m_l, δ_l)` of a trace: `m_1 = t_1`, `m_l` the fewest certified
/// admissible children of any level-`(l−1)` annulus, and `δ_l` the bound
/// valid for the whole band of `N_l`.
pub fn mdp_input_of_trace(trace: &ConstructionTrace) -> Result<MdpInput> {
    let mut m = Vec::with_capacity(trace.levels.len());
    let mut delta = Vec::with_capacity(trace.levels.len());
    for (i, level) in trace.levels.iter().enumerate() {
        let ml = if i == 0 {
            Rational::from(level.t as i64)
        } else {
            let up = trace.levels[i - 1]
                .m_certified
                .clone()
                .ok_or_else(|| Error::IllPosed(format!("level {i} lacks its certified child count")))?;
            Rational::from_integer(up)
        };
        m.push(ml);
        delta.push(level.delta_band.clone());
    }
    Ok(MdpInput {
        alpha: trace.config.alpha.clone(),
        m,
        delta,
    })
}

pub fn mdp_bound_of_trace(trace: &ConstructionTrace) -> Result<MdpBound> {
    let input = mdp_input_of_trace(trace)?;
    let mut b = mdp_lower_bound(&input, trace.levels.len())?;
    b.target = Some(&input.alpha / &trace.config.psi.lower_order_at_zero());
    Ok(b)
}

/// Count of dyadic boxes at one scale.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleCount {
    pub k: u32,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxReport {
    pub rows: Vec<ScaleCount>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit, in log₂ units.
    pub residual: f64,
    /// Scales `2^-k` used in the fit.
    pub fit_window: (u32, u32),
}

fn scale_exponent(s: &Rational) -> Result<u32> {
    let inv = s.recip();
    if !s.is_positive() || !inv.is_integer() {
        return Err(Error::Config(format!("scale {s} is not of the form 2^-k")));
    }
    let n = inv.numer();
    let k = n.bits() - 1;
    if BigInt::one() << k != *n {
        return Err(Error::Config(format!("scale {s} is not dyadic")));
    }
    Ok(k as u32)
}

/// Number of distinct integers covered by closed index ranges.
fn count_indices(mut ranges: Vec<(BigInt, BigInt)>) -> u64 {
    ranges.sort();
    let mut total = BigInt::zero();
    let mut cur: Option<(BigInt, BigInt)> = None;
    for (a, b) in ranges {
        match &mut cur {
            Some((_, hi)) if a <= &*hi + 1u32 => {
                if b > *hi {
                    *hi = b;
                }
            }
            _ => {
                if let Some((lo, hi)) = cur.take() {
                    total += hi - lo + 1u32;
                }
                cur = Some((a, b));
            }
        }
    }
    if let Some((lo, hi)) = cur {
        total += hi - lo + 1u32;
    }
    total.to_u64().unwrap_or(u64::MAX)
}

/// Split ranges that leave `[0, 2^k)` so they wrap around the circle.
fn wrap_ranges(ranges: Vec<(BigInt, BigInt)>, k: u32) -> Vec<(BigInt, BigInt)> {
    let n = BigInt::one() << k;
    let mut out = Vec::with_capacity(ranges.len());
    for (a, b) in ranges {
        if &b - &a + 1u32 >= n {
            return vec![(BigInt::zero(), &n - 1u32)];
        }
        let a0 = a.mod_floor(&n);
        let b0 = &a0 + (&b - &a);
        if b0 < n {
            out.push((a0, b0));
        } else {
            out.push((a0, &n - 1u32));
            out.push((BigInt::zero(), b0 - &n));
        }
    }
    out
}

fn fit(rows: &[ScaleCount]) -> Result<BoxReport> {
    let usable: Vec<&ScaleCount> = rows.iter().filter(|r| r.count > 0).collect();
    if usable.len() < 2 {
        return Err(Error::EmptyInput("fewer than two nonempty scales".into()));
    }
    // Drop two scales at each end when enough remain.
    let window: &[&ScaleCount] = if usable.len() >= 7 {
        &usable[2..usable.len() - 2]
    } else {
        &usable
    };
    let xs: Vec<f64> = window.iter().map(|r| r.k as f64).collect();
    let ys: Vec<f64> = window.iter().map(|r| (r.count as f64).log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(BoxReport {
        rows: rows.to_vec(),
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        fit_window: (window[0].k, window[window.len() - 1].k),
    })
}

/// Exact box counts of a union of closed arcs on the dyadic grids
/// `2^-k`, anchored at 0, with a least-squares slope of `log N` against `k`.
pub fn box_count_union(arcs: &[Interval], scales: &[Rational], wrap: bool) -> Result<BoxReport> {
    if arcs.is_empty() {
        return Err(Error::EmptyInput("no arcs to count".into()));
    }
    let merged = merge_intervals(arcs.to_vec());
    let ks: Vec<u32> = scales.iter().map(scale_exponent).collect::<Result<_>>()?;
    let rows: Vec<ScaleCount> = ks
        .par_iter()
        .map(|&k| {
            let s = Rational::from_integer(BigInt::one() << k);
            let ranges: Vec<(BigInt, BigInt)> = merged
                .iter()
                .map(|iv| ((&iv.lo * &s).floor(), (&iv.hi * &s).floor()))
                .collect();
            let ranges = if wrap { wrap_ranges(ranges, k) } else { ranges };
            ScaleCount {
                k,
                count: count_indices(ranges),
            }
        })
        .collect();
    fit(&rows)
}

/// `floor((x + sign·ψ(r)) · 2^k)` decided exactly.
fn psi_endpoint_index(x: &Rational, r: &Rational, psi: &ApproxFunction, plus: bool, k: u32) -> BigInt {
    let s = Rational::from_integer(BigInt::one() << k);
    let w = psi.eval_bits(r, 64).expect("positive radius");
    let (a, b) = if plus {
        (((x + &w.lo) * &s).floor(), ((x + &w.hi) * &s).floor())
    } else {
        (((x - &w.hi) * &s).floor(), ((x - &w.lo) * &s).floor())
    };
    if a == b {
        return a;
    }
    // A grid point g = m/2^k lies inside the enclosure; test which side ψ falls.
    let mut idx = a;
    while idx < b {
        let g = Rational::from_integer(&idx + 1u32) / &s;
        let reached = if plus {
            // x + ψ >= g  <=>  ψ >= g − x
            psi.cmp_value(r, &(&g - x)) != Ordering::Less
        } else {
            // x − ψ >= g  <=>  ψ <= x − g
            let t = x - &g;
            !t.is_negative() && psi.cmp_value(r, &t) != Ordering::Greater
        };
        if !reached {
            break;
        }
        idx += 1u32;
    }
    idx
}

/// Box counts of the scale-matched cover of `W_ψ` by the rationals: at scale
/// `δ = 2^-k` the arcs `[p/q − ψ(q⁻²), p/q + ψ(q⁻²)]` with `δ/2 < ψ(q⁻²) <= δ`
/// and `q <= qmax`, on the circle.
pub fn box_count_wpsi(psi: &ApproxFunction, qmax: u64, ks: &[u32]) -> Result<BoxReport> {
    if ks.is_empty() {
        return Err(Error::EmptyInput("no scales".into()));
    }
    let rows: Vec<ScaleCount> = ks
        .par_iter()
        .map(|&k| {
            let delta = Rational::dyadic(1, k);
            let half = Rational::dyadic(1, k + 1);
            let mut ranges = Vec::new();
            for q in 1..=qmax {
                let r = Rational::new(1, (q as i64) * (q as i64));
                if psi.cmp_value(&r, &delta) == Ordering::Greater {
                    continue;
                }
                if psi.cmp_value(&r, &half) != Ordering::Greater {
                    break;
                }
                for p in 0..q {
                    if p.gcd(&q) != 1 {
                        continue;
                    }
                    let x = Rational::new(p as i64, q as i64);
                    let lo = psi_endpoint_index(&x, &r, psi, false, k);
                    let hi = psi_endpoint_index(&x, &r, psi, true, k);
                    ranges.push((lo, hi));
                }
            }
            ScaleCount {
                k,
                count: count_indices(wrap_ranges(ranges, k)),
            }
        })
        .collect();
    fit(&rows)
}

/// `Σ φ(q)·ψ(q⁻²)^s` over a denominator window, with its exponent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverSum {
    pub s: Rational,
    pub window: (u64, u64),
    pub value: CertifiedValue,
}

/// Precision of the individual cover-sum terms.
pub const COVER_BITS: u32 = 48;

fn totient(n: u64) -> u64 {
    let mut m = n;
    let mut out = n;
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            while m.is_multiple_of(p) {
                m /= p;
            }
            out -= out / p;
        }
        p += 1;
    }
    if m > 1 {
        out -= out / m;
    }
    out
}

/// Certified `Σ_{q ∈ [q_lo, q_hi]} φ(q)·ψ(q⁻²)^s` for the rationals on the
/// circle; the single point of height one counts once.
pub fn cover_sum_upper(psi: &ApproxFunction, s: &Rational, q_window: (u64, u64)) -> Result<CoverSum> {
    if !s.is_positive() {
        return Err(Error::Config(format!("cover exponent must be positive, got {s}")));
    }
    let (lo, hi) = q_window;
    if lo == 0 || lo > hi {
        return Err(Error::Config(format!("bad denominator window [{lo}, {hi}]")));
    }
    // ψ(q⁻²)^s = a^s · q^(−2τs)
    let a_s = pow_enclosure(&psi.scale, s, COVER_BITS);
    let e = -(&psi.tau * s * Rational::from(2));
    let parts: Vec<FixedSum> = (lo..=hi)
        .collect::<Vec<_>>()
        .par_chunks(256)
        .map(|chunk| {
            let mut acc = FixedSum::new(COVER_BITS + 32);
            for &q in chunk {
                let t =
                    pow_enclosure(&Rational::from(q as i64), &e, COVER_BITS).scale(&Rational::from(totient(q) as i64));
                acc.add(&t);
            }
            acc
        })
        .collect();
    let mut total = FixedSum::new(COVER_BITS + 32);
    for p in &parts {
        total.merge(p);
    }
    Ok(CoverSum {
        s: s.clone(),
        window: q_window,
        value: total.finish().mul_nonneg(&a_s),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// Window sums shrink: `s` above the critical exponent.
    AboveCritical,
    /// Window sums grow.
    BelowCritical,
    CriticalWithinTolerance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendReport {
    pub s: Rational,
    pub sums: Vec<CoverSum>,
    pub trend: Trend,
}

/// Dyadic denominator windows `[2^i, 2^(i+1))` used for trend detection.
pub const TREND_WINDOWS: std::ops::RangeInclusive<u32> = 8..=11;

/// Classify `s` by the ratios of successive dyadic-window sums: every ratio
/// `< 1 − tol` is above critical, every ratio `> 1 + tol` below.
pub fn cover_trend(psi: &ApproxFunction, s: &Rational, tol: &Rational) -> Result<TrendReport> {
    let sums: Vec<CoverSum> = TREND_WINDOWS
        .map(|i| cover_sum_upper(psi, s, (1u64 << i, (1u64 << (i + 1)) - 1)))
        .collect::<Result<_>>()?;
    let shrink = Rational::one() - tol;
    let grow = Rational::one() + tol;
    let mut all_shrink = true;
    let mut all_grow = true;
    for w in sums.windows(2) {
        // Certified: hi(next) < (1 − tol)·lo(prev), or lo(next) > (1 + tol)·hi(prev).
        all_shrink &= w[1].value.hi < &shrink * &w[0].value.lo;
        all_grow &= w[1].value.lo > &grow * &w[0].value.hi;
    }
    let trend = match (all_shrink, all_grow) {
        (true, _) => Trend::AboveCritical,
        (_, true) => Trend::BelowCritical,
        _ => Trend::CriticalWithinTolerance,
    };
    Ok(TrendReport {
        s: s.clone(),
        sums,
        trend,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalBracket {
    /// Largest grid exponent classified below critical.
    pub below: Rational,
    /// Smallest grid exponent classified above critical.
    pub above: Rational,
    pub grid: u32,
    pub probes: Vec<(Rational, Trend)>,
}

impl CriticalBracket {
    pub fn contains(&self, s: &Rational) -> bool {
        &self.below <= s && s <= &self.above
    }
}

/// Bracket the critical exponent on the grid `j/grid` inside `(0, alpha]`.
pub fn critical_bracket(psi: &ApproxFunction, alpha: &Rational, tol: &Rational, grid: u32) -> Result<CriticalBracket> {
    let jmax = (alpha * Rational::from(grid as i64))
        .floor()
        .to_i64()
        .unwrap_or(grid as i64);
    let mut probes = Vec::new();
    let mut classify = |j: i64| -> Result<Trend> {
        let s = Rational::new(j, grid as i64);
        let t = cover_trend(psi, &s, tol)?.trend;
        probes.push((s, t));
        Ok(t)
    };
    // Smallest j classified above, assuming monotone classification.
    let (mut lo, mut hi) = (1i64, jmax);
    if classify(hi)? != Trend::AboveCritical {
        return Err(Error::IllPosed(
            "cover sums do not decay even at the ambient dimension".into(),
        ));
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if classify(mid)? == Trend::AboveCritical {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let above = hi;
    // Largest j classified below.
    let (mut lo, mut hi) = (1i64, above - 1);
    if hi < 1 || classify(lo)? != Trend::BelowCritical {
        return Err(Error::IllPosed("no grid exponent is classified below critical".into()));
    }
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if classify(mid)? == Trend::BelowCritical {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    probes.sort_by(|a, b| a.0.cmp(&b.0));
    probes.dedup_by(|a, b| a.0 == b.0);
    Ok(CriticalBracket {
        below: Rational::new(lo, grid as i64),
        above: Rational::new(above, grid as i64),
        grid,
        probes,
    })
}
