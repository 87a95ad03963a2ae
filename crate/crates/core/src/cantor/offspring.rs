//! Admissible children of one annulus: counted exactly, tested one by one.

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::AnnulusRecord;
use crate::certified::pow_enclosure;
use crate::error::Result;
use crate::psi::ApproxFunction;
use crate::rational::{bigint_str, Rational};
use crate::space::{circle_offset, Interval};
use crate::wds::{BandSet, WdsPoint, WdsSystem};

/// Certified size of the admissible child set of one annulus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offspring {
    /// Band points whose balls fit in the annulus.
    #[serde(with = "bigint_str")]
    pub band: BigInt,
    /// Upper bound on those a coarser point could screen off.
    #[serde(with = "bigint_str")]
    pub screened: BigInt,
    /// `band − screened`, floored at zero.
    #[serde(with = "bigint_str")]
    pub admissible: BigInt,
}

fn rat(n: &BigInt) -> Rational {
    Rational::from_integer(n.clone())
}

/// All band-`n_next` points whose balls fit in the parent's arcs.
pub(crate) fn band_of(system: &WdsSystem, parent: &AnnulusRecord, n_next: &BigInt) -> Result<BandSet> {
    system.band_set(parent.center.coord(), &parent.arcs(), n_next, true)
}

/// Count the admissible children of `parent` at band `n_next`.
///
/// A candidate `γ` is screened off by some `η ≠ ξ` with
/// `R(γ) <= R(η) <= C/N_l` and `d(γ, η) < ψ(R(η))`. Separation gives
/// `d(γ, η) >= R(γ)/C`, so only `η` with `ψ(R(η)) > 1/(C² n_next)` can
/// screen; they are few, and the candidates near each are counted.
pub(crate) fn census(
    system: &WdsSystem,
    psi: &ApproxFunction,
    parent: &AnnulusRecord,
    band: &BandSet,
    n_l: &BigInt,
    n_next: &BigInt,
) -> Result<Offspring> {
    let c = &system.c;
    let band_count = band.count();
    let r_min = (c * rat(n_next)).recip();
    let r_cap = c / rat(n_next);
    let r_top = c / rat(n_l);
    let level = &r_min / c / &psi.scale;
    let r_screen = pow_enclosure(&level, &psi.tau.recip(), psi.precision_bits).lo;
    let mut screened = BigInt::zero();
    if r_screen <= r_top {
        let reach = &parent.outer + psi.eval(&r_top)?.hi;
        let center = parent.center.coord();
        for eta in system.enumerate_near(center, &r_screen, &r_top, &reach)? {
            if eta.coord() == center {
                continue;
            }
            let w = psi.eval(&eta.radius)?.hi;
            let arc = Interval::new(eta.coord() - &w, eta.coord() + &w);
            let top = eta.radius.clone().min(r_cap.clone());
            if top >= r_min {
                screened += system.radius_set(eta.coord(), &[arc], &r_min, &top, false)?.count();
            }
        }
    }
    let admissible = (&band_count - &screened).max(BigInt::zero());
    Ok(Offspring {
        band: band_count,
        screened,
        admissible,
    })
}

/// `γ` keeps its distance `ψ(R(η))` from every `η` other than itself and
/// the parent center with `R(γ) <= R(η) <= C/N_l`.
pub(crate) fn admissible(
    system: &WdsSystem,
    psi: &ApproxFunction,
    parent: &AnnulusRecord,
    gamma: &WdsPoint,
    n_l: &BigInt,
) -> Result<bool> {
    let x = system.space.normalize(gamma.coord());
    let r_top = &system.c / rat(n_l);
    let pc = system.space.normalize(parent.center.coord());
    let near = system.psi_neighbors(&x, &gamma.radius, &r_top, psi, &Rational::one(), true)?;
    Ok(near.iter().all(|(p, _)| p.coord() == &x || p.coord() == &pc))
}

/// The ball `B(γ, R(γ))` lies in one of the parent's closed arcs.
pub(crate) fn ball_fits(parent: &AnnulusRecord, gamma: &WdsPoint) -> bool {
    let o = circle_offset(parent.center.coord(), gamma.coord()).abs();
    &o - &gamma.radius >= parent.inner && &o + &gamma.radius <= parent.outer
}
