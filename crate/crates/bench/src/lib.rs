//! Fixtures shared by the benchmarks.

use exact_cantor::dimension::MdpInput;
use exact_cantor::{Annulus, MetricMeasureSpace, Rational, WdsSystem};

pub fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

/// The rationals on the circle with the construction's default constant.
pub fn rationals() -> WdsSystem {
    WdsSystem::rationals(MetricMeasureSpace::circle(), Rational::from(3))
}

/// An annulus around 1/3 wide enough to hold thousands of band points.
pub fn annulus_around_a_third() -> Annulus {
    Annulus::new(r(1, 3), r(1, 5000), r(1, 200))
}

/// `m ≡ 2`, `δ_l = 4^-l`.
pub fn geometric_mdp(levels: usize) -> MdpInput {
    MdpInput {
        alpha: Rational::one(),
        m: vec![Rational::from(2); levels],
        delta: (1..=levels).map(|i| Rational::from(4).pow(-(i as i32))).collect(),
    }
}
