//! Exact and sampled checks of a built level.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::band_delta;
use super::offspring;
use super::{AnnulusRecord, ConstructionConfig, ConstructionTrace};
use crate::error::{Error, Result};
use crate::psi::ApproxFunction;
use crate::rational::{bigint_str, Rational};
use crate::space::{circle_distance, circle_offset, MetricMeasureSpace};

/// Outcome of every check on one level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelReport {
    pub l: usize,
    /// Every radius lies in the band of `N_l` and matches the system.
    pub band: bool,
    /// Stored radii sit inside the true ones.
    pub radii_sound: bool,
    /// Centers are at least four times the largest `ψ(R)` apart.
    pub separation: bool,
    pub delta: Option<Rational>,
    pub delta_matches: bool,
    /// `δ_l >= 1/(6C²N_l)`.
    pub delta_floor: bool,
    /// Child-count floor on the certified admissible counts, two kept each.
    pub counts: bool,
    pub min_children: Option<usize>,
    #[serde(with = "bigint_str::option")]
    pub min_admissible: Option<BigInt>,
    /// Stored child censuses agree with a fresh count.
    pub census_matches: bool,
    /// Every kept child has its ball in the parent arcs and passes the
    /// neighbourhood test.
    pub children_admissible: bool,
    pub disjoint: bool,
    pub nested: bool,
    pub sampled_points: usize,
    /// Fewest closed solutions `d(x, ξ) <= ψ(R(ξ))` with `R(ξ) >= 1/(C N_l)`.
    pub min_hits: usize,
    /// The same count with strict inequality.
    pub min_strict_hits: usize,
    pub hits: bool,
    /// Sampled points with some `ξ`, `1/(C N_l) <= R(ξ) <= C/N_{l−1}`,
    /// closer than `c_{l−1} ψ(R(ξ))`.
    pub exactness_violations: usize,
    pub exactness: bool,
}

impl LevelReport {
    pub fn passed(&self) -> bool {
        self.band
            && self.radii_sound
            && self.separation
            && self.delta_matches
            && self.delta_floor
            && self.counts
            && self.census_matches
            && self.children_admissible
            && self.disjoint
            && self.nested
            && self.hits
            && self.exactness
    }
}

pub(crate) struct SeparationStats {
    pub min_gap: Rational,
    pub max_psi: Rational,
    pub delta: Rational,
}

/// Least center distance, largest `ψ(R)` and `δ`, over neighbours in circle
/// order. Given the four-fold separation, the least gap between discs is
/// always realised by neighbours. `None` for a single annulus.
pub(crate) fn separation_stats(
    space: &MetricMeasureSpace,
    psi: &ApproxFunction,
    annuli: &[AnnulusRecord],
) -> Result<Option<SeparationStats>> {
    let mut pts = annuli
        .iter()
        .map(|a| Ok((space.normalize(a.center.coord()), psi.eval(&a.center.radius)?.hi)))
        .collect::<Result<Vec<_>>>()?;
    let max_psi = pts.iter().map(|p| p.1.clone()).max().unwrap_or_else(Rational::zero);
    if pts.len() < 2 {
        return Ok(None);
    }
    pts.sort();
    let n = pts.len();
    let mut min_gap: Option<Rational> = None;
    let mut min_free: Option<Rational> = None;
    for i in 0..n {
        let (a, b) = (&pts[i], &pts[(i + 1) % n]);
        let d = circle_distance(&a.0, &b.0);
        let free = &d - &a.1 - &b.1;
        if min_gap.as_ref().is_none_or(|g| &d < g) {
            min_gap = Some(d);
        }
        if min_free.as_ref().is_none_or(|g| &free < g) {
            min_free = Some(free);
        }
    }
    Ok(Some(SeparationStats {
        min_gap: min_gap.expect("two or more points"),
        max_psi,
        delta: min_free.expect("two or more points") / Rational::from(3),
    }))
}

/// Exact pairwise disjointness of closed arcs owned by distinct annuli.
pub(crate) fn arcs_disjoint(annuli: &[AnnulusRecord]) -> bool {
    let one = Rational::one();
    let mut pieces: Vec<(Rational, Rational, usize)> = Vec::new();
    for (i, a) in annuli.iter().enumerate() {
        for arc in a.arcs() {
            if arc.length() >= one {
                if annuli.len() > 1 {
                    return false;
                }
                continue;
            }
            let shift = Rational::from_integer(arc.lo.floor());
            let lo = &arc.lo - &shift;
            let hi = &arc.hi - &shift;
            if hi <= one {
                pieces.push((lo, hi, i));
            } else {
                pieces.push((lo, one.clone(), i));
                pieces.push((Rational::zero(), hi - &one, i));
            }
        }
    }
    pieces.sort();
    // Largest right end so far, and the largest among other owners.
    let mut top: Option<(Rational, usize)> = None;
    let mut second: Option<(Rational, usize)> = None;
    for (lo, hi, owner) in &pieces {
        let blocking = match (&top, &second) {
            (Some((h, o)), _) if o != owner => Some(h),
            (_, Some((h, _))) => Some(h),
            _ => None,
        };
        if blocking.is_some_and(|h| h >= lo) {
            return false;
        }
        let top_owner = top.as_ref().map(|t| t.1);
        if top_owner == Some(*owner) {
            let t = top.as_mut().expect("owner present");
            if hi > &t.0 {
                t.0 = hi.clone();
            }
        } else if top.as_ref().is_none_or(|t| hi > &t.0) {
            second = top.replace((hi.clone(), *owner));
        } else if second.as_ref().is_none_or(|t| hi > &t.0) {
            second = Some((hi.clone(), *owner));
        }
    }
    // 1 and 0 are the same point of the circle.
    let at_one: Vec<usize> = pieces.iter().filter(|p| p.1 == one).map(|p| p.2).collect();
    let at_zero: Vec<usize> = pieces.iter().filter(|p| p.0.is_zero()).map(|p| p.2).collect();
    !at_one.iter().any(|a| at_zero.iter().any(|b| a != b))
}

/// Every closed disc of `child` lies within the parent annulus.
fn contained_in(child: &AnnulusRecord, parent: &AnnulusRecord) -> bool {
    let o = circle_offset(parent.center.coord(), child.center.coord()).abs();
    &o + &child.outer <= parent.outer && &o - &child.outer >= parent.inner
}

fn sample_seed(seed: u64, l: usize, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((l as u64) << 48) ^ (i as u64)
}

/// Arc endpoints plus `extra` seeded interior points per arc.
pub(crate) fn sample_points(a: &AnnulusRecord, extra: usize, seed: u64) -> Vec<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let scale = Rational::new(1, BigInt::one() << 32);
    for arc in a.arcs() {
        out.push(arc.lo.clone());
        out.push(arc.hi.clone());
        for _ in 0..extra {
            let u: u32 = rng.random();
            out.push(&arc.lo + arc.length() * Rational::from(u as i64) * &scale);
        }
    }
    out
}

struct PointCheck {
    hits: usize,
    strict: usize,
    violation: bool,
}

/// Check level `l` (1-based) of a trace.
pub fn verify_level(trace: &ConstructionTrace, l: usize) -> Result<LevelReport> {
    let cfg = &trace.config;
    if l == 0 || l > trace.levels.len() {
        return Err(Error::Config(format!(
            "level {l} is not in a trace of depth {}",
            trace.levels.len()
        )));
    }
    let space = cfg.space();
    let system = cfg.wds();
    let psi = &cfg.psi;
    let c = &cfg.c;
    let level = &trace.levels[l - 1];
    let n = Rational::from_integer(level.params.n.clone());
    let (r_lo, r_hi) = ((c * &n).recip(), c / &n);
    let c_l = ConstructionConfig::c_of_level(l);

    let band = level.t == level.annuli.len()
        && level.annuli.iter().all(|a| {
            let r = &a.center.radius;
            r_lo <= *r && *r <= r_hi && system.radius_of(a.center.coord()).is_ok_and(|v| &v == r)
        });

    let radii_sound = level.params.c == c_l
        && level.annuli.iter().all(|a| {
            let r = &a.center.radius;
            a.inner <= a.outer
                && psi.cmp_scaled(&c_l, r, &a.inner) != Ordering::Greater
                && psi.cmp_value(r, &a.outer) != Ordering::Less
        });

    let stats = separation_stats(&space, psi, &level.annuli)?;
    let floor = (Rational::from(6) * c.pow(2) * &n).recip();
    let band_ok = band_delta(cfg, &level.params.n)? == level.delta_band && level.delta_band >= floor;
    let (separation, delta, delta_matches, delta_floor) = match &stats {
        Some(s) => (
            s.min_gap >= Rational::from(4) * &s.max_psi,
            Some(s.delta.clone()),
            s.delta == level.delta,
            level.delta >= floor && band_ok,
        ),
        None => (true, None, true, band_ok),
    };

    let (counts, min_children, min_admissible, census_matches, children_admissible) = if l == 1 {
        let ok = level.params.m_required <= level.t as i64 && level.t >= 2;
        (ok, None, None, true, true)
    } else {
        let up = &trace.levels[l - 2];
        let n_up = &up.params.n;
        let kids = trace.children(l - 1);
        let fewest = kids.iter().map(Vec::len).min().unwrap_or(0);
        let need = level.params.m_required.ceil();
        let fresh = up
            .annuli
            .par_iter()
            .map(|a| {
                let band = offspring::band_of(&system, a, &level.params.n)?;
                offspring::census(&system, psi, a, &band, n_up, &level.params.n)
            })
            .collect::<Result<Vec<_>>>()?;
        let matches = up
            .annuli
            .iter()
            .zip(&fresh)
            .all(|(a, f)| a.offspring.as_ref() == Some(f));
        let least = fresh.iter().map(|f| f.admissible.clone()).min();
        let ok = fewest >= 2 && least.as_ref().is_some_and(|m| m >= &need);
        let admissible = level
            .annuli
            .par_iter()
            .map(|a| match a.parent.and_then(|p| up.annuli.get(p)) {
                Some(p) => {
                    Ok(offspring::ball_fits(p, &a.center) && offspring::admissible(&system, psi, p, &a.center, n_up)?)
                }
                None => Ok(false),
            })
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .all(|b| b);
        (ok, Some(fewest), least, matches, admissible)
    };

    let disjoint = arcs_disjoint(&level.annuli);

    let nested = if l == 1 {
        let root = &trace.root;
        level.annuli.iter().all(|a| {
            a.parent.is_none() && circle_distance(root.center.coord(), a.center.coord()) + &a.outer < root.radius
        })
    } else {
        let parents = &trace.levels[l - 2].annuli;
        level.annuli.iter().all(|a| {
            a.parent
                .and_then(|p| parents.get(p))
                .is_some_and(|p| contained_in(a, p))
        })
    };

    let prev = (l >= 2).then(|| {
        let np = Rational::from_integer(trace.levels[l - 2].params.n.clone());
        (c / &np, ConstructionConfig::c_of_level(l - 1))
    });
    let one = Rational::one();
    let checks = level
        .annuli
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let mut out = Vec::new();
            for x in sample_points(a, cfg.interior_samples, sample_seed(cfg.seed, l, i)) {
                let near = system.psi_neighbors(&x, &r_lo, &one, psi, &one, false)?;
                let strict = near
                    .iter()
                    .filter(|(p, d)| psi.cmp_value(&p.radius, d) == Ordering::Greater)
                    .count();
                let violation = prev.as_ref().is_some_and(|(top, c_prev)| {
                    near.iter()
                        .any(|(p, d)| &p.radius <= top && psi.cmp_scaled(c_prev, &p.radius, d) == Ordering::Greater)
                });
                out.push(PointCheck {
                    hits: near.len(),
                    strict,
                    violation,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let checks: Vec<PointCheck> = checks.into_iter().flatten().collect();
    let min_hits = checks.iter().map(|p| p.hits).min().unwrap_or(0);
    let min_strict_hits = checks.iter().map(|p| p.strict).min().unwrap_or(0);
    let exactness_violations = checks.iter().filter(|p| p.violation).count();

    Ok(LevelReport {
        l,
        band,
        radii_sound,
        separation,
        delta,
        delta_matches,
        delta_floor,
        counts,
        min_children,
        min_admissible,
        census_matches,
        children_admissible,
        disjoint,
        nested,
        sampled_points: checks.len(),
        min_hits,
        min_strict_hits,
        hits: !checks.is_empty() && min_hits >= l,
        exactness_violations,
        exactness: exactness_violations == 0,
    })
}

/// Re-run every level check on a stored trace.
pub fn verify_trace(trace: &ConstructionTrace) -> Result<Vec<LevelReport>> {
    (1..=trace.levels.len()).map(|l| verify_level(trace, l)).collect()
}
