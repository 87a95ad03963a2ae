//! End-to-end runs through the public API: build, persist, re-verify,
//! sample, and check the samples against two independent approximation
//! searches.

use std::sync::OnceLock;

use exact_cantor::cantor::{build, sample_limit_points, verify_trace, ConstructionConfig, ConstructionTrace};
use exact_cantor::dimension::mdp_bound_of_trace;
use exact_cantor::oracle::{classify_exactness, HitKind};
use exact_cantor::Rational;

fn trace() -> &'static ConstructionTrace {
    static T: OnceLock<ConstructionTrace> = OnceLock::new();
    T.get_or_init(|| {
        build(&ConstructionConfig {
            levels: 2,
            seed: 5,
            ..ConstructionConfig::default()
        })
        .expect("two-level build")
    })
}

fn rat(n: &num_bigint::BigInt) -> Rational {
    Rational::from_integer(n.clone())
}

#[test]
fn persisted_trace_reverifies() {
    let t = trace();
    assert!(t.verified(), "{:#?}", t.verification);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.json");
    t.save(&path).unwrap();
    let back = ConstructionTrace::load(&path).unwrap();
    assert_eq!(&back, t);
    assert_eq!(verify_trace(&back).unwrap(), t.verification);
}

#[test]
fn continued_fractions_and_farey_search_agree_on_samples() {
    let t = trace();
    let system = t.config.wds();
    let psi = &t.config.psi;
    let c = &t.config.c;
    let floor = (c * rat(&t.levels[0].params.n)).recip();
    let one = Rational::one();
    for s in sample_limit_points(t, 6, 2).unwrap() {
        let x = s.point.coord();
        // An exact point: no error collar, so every hit is strict or boundary.
        let v = classify_exactness(x, &Rational::zero(), &system, psi, &Rational::new(1, 2), (&floor, &one)).unwrap();
        let mut by_oracle: Vec<Rational> = v
            .hits
            .iter()
            .filter(|h| h.kind == HitKind::Strict)
            .map(|h| h.approximant.point.clone())
            .collect();
        let mut by_search: Vec<Rational> = system
            .psi_neighbors(x, &floor, &one, psi, &one, true)
            .unwrap()
            .into_iter()
            .map(|(p, _)| p.coord().clone())
            .collect();
        by_oracle.sort();
        by_search.sort();
        assert_eq!(by_oracle, by_search, "at {x}");
        // The level-one center is among them.
        let top = &t.levels[0].annuli[s.chain[0]];
        assert!(by_search.contains(top.center.coord()));
    }
}

#[test]
fn samples_are_hit_once_per_level_and_never_too_well() {
    let t = trace();
    let system = t.config.wds();
    let psi = &t.config.psi;
    let c = &t.config.c;
    let lo = (c * rat(&t.levels[1].params.n)).recip();
    let hi = c / rat(&t.levels[0].params.n);
    for s in sample_limit_points(t, 10, 9).unwrap() {
        let v = classify_exactness(
            s.point.coord(),
            &s.error_radius,
            &system,
            psi,
            &ConstructionConfig::c_of_level(1),
            (&lo, &Rational::one()),
        )
        .unwrap();
        assert!(v.certified_hits() >= 2);
        assert!(v.violations.iter().all(|a| a.radius > hi));
    }
}

#[test]
fn mass_distribution_bound_stays_below_the_dimension() {
    let b = mdp_bound_of_trace(trace()).unwrap();
    assert_eq!(b.target, Some(Rational::new(2, 5)));
    assert_eq!(b.terms.len(), 1);
    let t = &b.terms[0].bound;
    assert!(t.lo.is_positive() && t.hi <= Rational::one());
}
