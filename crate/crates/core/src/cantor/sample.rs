//! Seeded root-to-leaf chains through a trace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ConstructionTrace;
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::space::Point;
use crate::wds::WdsPoint;

/// A chain of annulus indices, one per level, with its deepest center.
///
/// Every point of the limit set below the chain is within `error_radius`
/// of `point`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitSample {
    pub chain: Vec<usize>,
    pub point: Point,
    pub center: WdsPoint,
    pub error_radius: Rational,
}

pub fn sample_limit_points(trace: &ConstructionTrace, count: usize, seed: u64) -> Result<Vec<LimitSample>> {
    let depth = trace.depth();
    if depth < 2 {
        return Err(Error::Config(format!(
            "sampling limit points needs depth >= 2, trace has {depth}"
        )));
    }
    let children: Vec<Vec<Vec<usize>>> = (1..depth).map(|l| trace.children(l)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut i = rng.random_range(0..trace.levels[0].annuli.len());
        let mut chain = vec![i];
        for (l, kids) in children.iter().enumerate() {
            let options = &kids[i];
            if options.is_empty() {
                return Err(Error::Invariant(format!(
                    "annulus {i} at level {} has no children",
                    l + 1
                )));
            }
            i = options[rng.random_range(0..options.len())];
            chain.push(i);
        }
        let leaf = &trace.levels[depth - 1].annuli[i];
        out.push(LimitSample {
            chain,
            point: leaf.center.point.clone(),
            center: leaf.center.clone(),
            error_radius: leaf.outer.clone(),
        });
    }
    Ok(out)
}
