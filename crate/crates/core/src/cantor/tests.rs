use super::*;
use crate::space::{circle_distance, circle_offset};
use crate::wds::cover::cover_open_set;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn cfg_c2() -> ConstructionConfig {
    ConstructionConfig {
        c: Rational::from(2),
        ..ConstructionConfig::default()
    }
}

#[test]
fn c_of_level_values() {
    assert_eq!(ConstructionConfig::c_of_level(1), r(1, 2));
    assert_eq!(ConstructionConfig::c_of_level(3), r(7, 8));
}

#[test]
fn child_density_and_tail_rhs_at_c2() {
    let b = Builder::new(cfg_c2()).unwrap();
    let n2 = b.child_density(1);
    assert!(n2.is_exact());
    assert_eq!(n2.lo, r(1, 16));
    let rhs = b.tail_rhs(1);
    assert!(rhs.is_exact());
    assert_eq!(rhs.lo, Rational::dyadic(1, 31));
}

#[test]
fn tau_two_is_rejected_before_work() {
    let cfg = ConstructionConfig {
        psi: crate::psi::ApproxFunction::power(Rational::from(2)).unwrap(),
        ..ConstructionConfig::default()
    };
    assert!(matches!(Builder::new(cfg), Err(Error::HypothesisViolated(_))));
}

#[test]
fn non_circle_is_unsupported() {
    let cfg = ConstructionConfig {
        space: SpaceKind::Interval,
        ..ConstructionConfig::default()
    };
    assert!(matches!(Builder::new(cfg), Err(Error::Unsupported(_))));
}

#[test]
fn whole_circle_band_64() {
    let b = Builder::new(cfg_c2()).unwrap();
    let whole = Ball::new(Rational::zero(), r(1, 2));
    let level = b.first_level_at(&whole, &BigInt::from(64)).unwrap();
    let mut brute = Vec::new();
    for q in 6i64..=11 {
        for p in 0..q {
            if num_integer::Integer::gcd(&p, &q) == 1 {
                brute.push(r(p, q));
            }
        }
    }
    brute.sort();
    let got: Vec<Rational> = level.annuli.iter().map(|a| a.center.coord().clone()).collect();
    assert_eq!(got, brute);
    assert!(level.t >= 32);
    assert_eq!(level.params.m_required, Rational::from(32));
    for a in &level.annuli {
        let psi = b_psi().eval(&a.center.radius).unwrap();
        assert_eq!(a.outer, psi.lo);
        assert_eq!(a.inner, &psi.hi * r(1, 2));
    }
}

fn b_psi() -> crate::psi::ApproxFunction {
    crate::psi::ApproxFunction::power(r(5, 2)).unwrap()
}

#[test]
fn tiny_root_is_a_distribution_failure() {
    let b = Builder::new(ConstructionConfig::default()).unwrap();
    let n = BigInt::from(1u64 << 40);
    let tiny = Ball::new(r(1, 3), Rational::from_integer(n.clone()).recip() * r(1, 10));
    assert!(matches!(
        b.first_level_at(&tiny, &n),
        Err(Error::DistributionFailure(_))
    ));
    let cfg = ConstructionConfig {
        root: Some(Ball::new(r(1, 3), Rational::dyadic(1, 200))),
        levels: 1,
        ..ConstructionConfig::default()
    };
    assert!(matches!(build(&cfg), Err(Error::DistributionFailure(_))));
}

#[test]
fn disjointness_detects_overlap_and_wrap() {
    let mk = |c: Rational, inner: Rational, outer: Rational| AnnulusRecord {
        center: WdsPoint {
            point: crate::space::Point(c),
            radius: r(1, 4),
        },
        inner,
        outer,
        parent: None,
        offspring: None,
    };
    let a = mk(r(1, 10), r(1, 100), r(1, 20));
    let b = mk(r(3, 10), r(1, 100), r(1, 20));
    assert!(verify::arcs_disjoint(&[a.clone(), b.clone()]));
    let touching = mk(r(2, 10), r(1, 100), r(1, 20));
    assert!(!verify::arcs_disjoint(&[a.clone(), touching]));
    let wrap = mk(r(19, 20), r(1, 100), r(3, 20));
    assert!(!verify::arcs_disjoint(&[a.clone(), wrap]));
    let inside_gap = mk(r(1, 10), Rational::zero(), r(1, 200));
    assert!(verify::arcs_disjoint(&[a.clone(), inside_gap.clone()]));
    let far = mk(r(1, 10) + r(1, 50), Rational::zero(), r(1, 1000));
    assert!(!verify::arcs_disjoint(&[a, far]));
}

#[test]
fn covering_route_is_within_direct_route() {
    let space = MetricMeasureSpace::circle();
    let system = WdsSystem::rationals(space.clone(), Rational::from(3));
    let a = Annulus::new(r(1, 3), r(1, 50), r(1, 20));
    let k = BigInt::from(4000);
    let mut direct: Vec<Rational> = Vec::new();
    for arc in annulus_arcs(&a) {
        direct.extend(
            system
                .band_in_arc(&arc, &k)
                .unwrap()
                .into_iter()
                .map(|p| space.normalize(p.coord())),
        );
    }
    direct.sort();
    let balls = cover_open_set(&space, &a, &r(1, 8)).unwrap();
    let mut covered: Vec<Rational> = Vec::new();
    for b in &balls {
        covered.extend(
            system
                .enumerate_band(b, &k)
                .unwrap()
                .into_iter()
                .map(|p| p.coord().clone()),
        );
    }
    covered.sort();
    covered.dedup();
    assert!(!covered.is_empty());
    assert!(covered.iter().all(|x| direct.binary_search(x).is_ok()));
    assert!(covered.len() < direct.len());
}

/// A shallow practical run shared by the slower tests below.
fn two_level_trace() -> &'static ConstructionTrace {
    use std::sync::OnceLock;
    static TRACE: OnceLock<ConstructionTrace> = OnceLock::new();
    TRACE.get_or_init(|| {
        build(&ConstructionConfig {
            levels: 2,
            ..ConstructionConfig::default()
        })
        .unwrap()
    })
}

#[test]
fn two_levels_verify() {
    let t = two_level_trace();
    assert_eq!(t.depth(), 2);
    assert!(t.verified(), "{:#?}", t.verification);
    let p1 = &t.levels[0].params;
    let p2 = &t.levels[1].params;
    let c = &t.config.c;
    let eps0 = t
        .config
        .psi
        .threshold_for_ratio(&(Rational::from(4) * c.pow(3)).recip());
    assert!(rat_of(&p1.n) >= c / &eps0);
    assert!(p1.n >= t.kb.clone().unwrap());
    assert!(rat_of(&p2.n) >= c.pow(2) * rat_of(&p1.n));
    assert!(rat_of(&p2.n) >= c / &p2.eps);
    for comp in &p2.components {
        assert!(p2.n >= comp.value, "{} exceeds N_2", comp.name);
    }
    assert_eq!(
        t.levels[0].m_observed,
        Some(t.children(1).iter().map(Vec::len).min().unwrap())
    );
    assert!(t.verification[1].min_hits >= 2);
    assert_eq!(t.verification[1].exactness_violations, 0);
    assert!(t.tail_certificates.iter().all(|c| c.passed));
}

fn rat_of(n: &BigInt) -> Rational {
    Rational::from_integer(n.clone())
}

#[test]
fn children_nest_exactly() {
    let t = two_level_trace();
    for a in &t.levels[1].annuli {
        let p = &t.levels[0].annuli[a.parent.unwrap()];
        let o = circle_offset(p.center.coord(), a.center.coord()).abs();
        assert!(&o + &a.outer <= p.outer);
        assert!(&o - &a.outer >= p.inner);
    }
}

#[test]
fn trace_round_trips_and_is_deterministic() {
    let t = two_level_trace();
    let s = t.to_json().unwrap();
    let back = ConstructionTrace::from_json(&s).unwrap();
    assert_eq!(&back, t);
    assert_eq!(back.to_json().unwrap(), s);
    let again = build(&t.config).unwrap();
    assert_eq!(again.to_json().unwrap(), s);
}

#[test]
fn samples_follow_chains() {
    let t = two_level_trace();
    let s = sample_limit_points(t, 8, 5).unwrap();
    assert_eq!(s, sample_limit_points(t, 8, 5).unwrap());
    for smp in &s {
        assert_eq!(smp.chain.len(), 2);
        let leaf = &t.levels[1].annuli[smp.chain[1]];
        assert_eq!(smp.error_radius, leaf.outer);
        assert_eq!(leaf.parent, Some(smp.chain[0]));
        let top = &t.levels[0].annuli[smp.chain[0]];
        let d = circle_distance(top.center.coord(), smp.point.coord());
        assert!(top.inner <= d && d <= top.outer);
    }
    let other: Vec<Vec<usize>> = sample_limit_points(t, 8, 6)
        .unwrap()
        .into_iter()
        .map(|s| s.chain)
        .collect();
    let mine: Vec<Vec<usize>> = s.into_iter().map(|s| s.chain).collect();
    assert_ne!(mine, other);
}

#[test]
fn one_level_trace_cannot_be_sampled() {
    let mut t = two_level_trace().clone();
    t.levels.truncate(1);
    assert!(sample_limit_points(&t, 1, 0).is_err());
}

#[test]
fn tampered_trace_fails_verification() {
    let mut t = two_level_trace().clone();
    let a = &mut t.levels[1].annuli[0];
    a.outer = &a.outer * Rational::from(2);
    let rep = verify_level(&t, 2).unwrap();
    assert!(!rep.radii_sound);
    assert!(!rep.passed());
}
