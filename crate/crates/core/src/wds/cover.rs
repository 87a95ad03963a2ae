//! Disjoint ball packings of annuli whose five-fold dilations cover the
//! ε-interior.

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::space::{annulus_arcs, annulus_measure, Annulus, Ball, Interval, MetricMeasureSpace, SpaceKind};

/// Packings larger than this are refused.
pub const MAX_COVER_BALLS: usize = 1_000_000;

/// The arcs of an annulus in lifted coordinates, clipped to `[0, 1]` on the
/// interval, with empty pieces dropped.
pub fn annulus_components(space: &MetricMeasureSpace, a: &Annulus) -> Vec<Interval> {
    let arcs = annulus_arcs(a);
    let arcs: Vec<Interval> = match space.kind {
        SpaceKind::Circle => arcs,
        _ => arcs
            .into_iter()
            .filter_map(|iv| {
                let lo = iv.lo.clone().max(Rational::zero());
                let hi = iv.hi.clone().min(Rational::one());
                (lo <= hi).then(|| Interval::new(lo, hi))
            })
            .collect(),
    };
    arcs.into_iter().filter(|iv| iv.length().is_positive()).collect()
}

/// Centers spaced `2r₀` across each ε-interior `[lo + ε, hi − ε]`, with
/// `ε = fraction · (shortest arc)` and `r₀ = ε/5`.
///
/// `fraction` must lie in `(0, 1/4]` so the ε-interior keeps at least half
/// the measure.
pub fn cover_open_set(space: &MetricMeasureSpace, a: &Annulus, fraction: &Rational) -> Result<Vec<Ball>> {
    if annulus_measure(space, a).is_zero() {
        return Err(Error::DegenerateRegion(format!(
            "annulus around {} with radii [{}, {}] has zero measure",
            a.center, a.inner, a.outer
        )));
    }
    if space.kind == SpaceKind::Cantor3 {
        return Err(Error::Unsupported("covering of middle-thirds annuli".into()));
    }
    if !fraction.is_positive() || *fraction > Rational::new(1, 4) {
        return Err(Error::Config(format!(
            "epsilon fraction must lie in (0, 1/4], got {fraction}"
        )));
    }
    let arcs = annulus_components(space, a);
    let shortest = arcs
        .iter()
        .map(Interval::length)
        .min()
        .ok_or_else(|| Error::DegenerateRegion("annulus has no arcs".into()))?;
    let eps = fraction * &shortest;
    let r0 = &eps / Rational::from(5);
    let step = &r0 * Rational::from(2);
    let mut balls = Vec::new();
    for arc in &arcs {
        let end = &arc.hi - &eps;
        let mut x = &arc.lo + &eps;
        while x <= end {
            if balls.len() >= MAX_COVER_BALLS {
                return Err(Error::ResourceLimit(format!(
                    "cover needs more than {MAX_COVER_BALLS} balls"
                )));
            }
            balls.push(Ball::new(space.normalize(&x), r0.clone()));
            x = &x + &step;
        }
    }
    Ok(balls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::circle_distance;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    /// Exact check that the dilations cover `[lo, hi]`: consecutive lifted
    /// centers overlap and the ends are reached.
    fn dilations_cover(centers: &[Rational], radius: &Rational, lo: &Rational, hi: &Rational) -> bool {
        if centers.is_empty() {
            return lo > hi;
        }
        if &centers[0] - radius >= *lo || centers.last().unwrap() + radius <= *hi {
            return false;
        }
        centers.windows(2).all(|w| &w[1] - &w[0] < radius * Rational::from(2))
    }

    #[test]
    fn circle_annulus_cover() {
        let space = MetricMeasureSpace::circle();
        let a = Annulus::new(Rational::zero(), r(1, 10), r(1, 5));
        let balls = cover_open_set(&space, &a, &r(1, 4)).unwrap();
        let eps = r(1, 40);
        let r0 = &eps / Rational::from(5);
        let arcs = annulus_components(&space, &a);
        assert_eq!(arcs.len(), 2);
        for arc in &arcs {
            let lifted: Vec<Rational> = balls
                .iter()
                .map(|b| {
                    let c = b.center.coord().clone();
                    if c > r(1, 2) {
                        c - Rational::one()
                    } else {
                        c
                    }
                })
                .filter(|c| arc.contains(c))
                .collect();
            for c in &lifted {
                assert!(arc.lo <= (c - &eps) && (c + &eps) <= arc.hi);
            }
            assert!(dilations_cover(&lifted, &eps, &(&arc.lo + &eps), &(&arc.hi - &eps)));
        }
        for (i, b1) in balls.iter().enumerate() {
            for b2 in &balls[i + 1..] {
                assert!(circle_distance(b1.center.coord(), b2.center.coord()) >= &r0 * Rational::from(2));
            }
        }
    }

    #[test]
    fn ball_is_one_component() {
        let space = MetricMeasureSpace::circle();
        let a = Annulus::new(r(1, 3), Rational::zero(), r(1, 8));
        assert_eq!(annulus_components(&space, &a).len(), 1);
        assert!(!cover_open_set(&space, &a, &r(1, 8)).unwrap().is_empty());
    }

    #[test]
    fn cantor_gap_is_degenerate() {
        let space = MetricMeasureSpace::cantor3();
        let a = Annulus::new(r(1, 2), r(1, 100), r(1, 10));
        assert!(matches!(
            cover_open_set(&space, &a, &r(1, 4)),
            Err(Error::DegenerateRegion(_))
        ));
    }
}
