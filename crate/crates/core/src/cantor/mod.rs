//! The nested annulus construction: levels `K_l` of disjoint annuli around
//! system points, each level refining the previous one, with exact
//! verification of the level properties and a persisted trace.

mod engine;
mod offspring;
mod sample;
mod verify;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::certified::CertifiedValue;
use crate::error::{Error, Result};
use crate::psi::ApproxFunction;
use crate::rational::{bigint_str, Rational};
use crate::space::{annulus_arcs, Annulus, Ball, Interval, MetricMeasureSpace, SpaceKind};
use crate::wds::{SystemKind, WdsPoint, WdsSystem, DEFAULT_MAX_CANDIDATES};

pub use engine::{build, Builder};
pub use offspring::Offspring;
pub use sample::{sample_limit_points, LimitSample};
pub use verify::{verify_level, verify_trace, LevelReport};

/// Version tag written into every trace.
pub const TRACE_FORMAT: &str = "trace-v1";

/// Whether the level-growth floor needed for the dimension estimate is
/// enforced or only reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Strict,
    Practical,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strict => "strict",
            Mode::Practical => "practical",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "strict" => Ok(Mode::Strict),
            "practical" => Ok(Mode::Practical),
            other => Err(Error::Parse(format!(
                "unknown mode {other:?}; expected strict or practical"
            ))),
        }
    }
}

/// Everything that determines a construction run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionConfig {
    pub space: SpaceKind,
    pub system: SystemKind,
    pub psi: ApproxFunction,
    pub alpha: Rational,
    pub beta: Rational,
    pub c: Rational,
    /// Fixed root ball; drawn from the seed when absent.
    pub root: Option<Ball>,
    pub mode: Mode,
    pub levels: usize,
    pub seed: u64,
    /// Children kept per parent from the admissible set.
    pub branching: usize,
    /// Slack in the level-growth floor, in `(0, 1)`.
    pub dimension_slack: Rational,
    /// Random interior points per annulus arc checked by verification.
    pub interior_samples: usize,
    /// Lower bound imposed on `N_1`; it can only raise the computed floor.
    #[serde(with = "bigint_str::option")]
    pub n1_override: Option<BigInt>,
    /// Largest admissible bit length of any `N_l`.
    pub max_n_bits: u64,
    /// Cap on the points of a single band enumeration.
    pub max_candidates: usize,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        ConstructionConfig {
            space: SpaceKind::Circle,
            system: SystemKind::Rationals,
            psi: ApproxFunction::power(Rational::new(5, 2)).expect("valid default exponent"),
            alpha: Rational::one(),
            beta: Rational::one(),
            c: Rational::from(3),
            root: None,
            mode: Mode::Practical,
            levels: 4,
            seed: 1,
            branching: 3,
            dimension_slack: Rational::new(1, 2),
            interior_samples: 2,
            n1_override: None,
            max_n_bits: 16_384,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

impl ConstructionConfig {
    pub fn space(&self) -> MetricMeasureSpace {
        MetricMeasureSpace::of_kind(self.space)
    }

    pub fn wds(&self) -> WdsSystem {
        WdsSystem::new(self.system, self.space(), self.c.clone()).with_max_candidates(self.max_candidates)
    }

    /// `c_l = 1 − 2^-l`.
    pub fn c_of_level(l: usize) -> Rational {
        Rational::one() - Rational::dyadic(1, l as u32)
    }
}

/// One named lower bound entering the choice of `N_l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NComponent {
    pub name: String,
    #[serde(with = "bigint_str")]
    pub value: BigInt,
}

/// The level-growth floor at one level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthFloor {
    /// First term; absent at level one.
    #[serde(with = "bigint_str::option")]
    pub term1: Option<BigInt>,
    #[serde(with = "bigint_str")]
    pub term2: BigInt,
    pub satisfied: bool,
    pub enforced: bool,
}

/// Constants of one level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelParams {
    pub l: usize,
    /// `N_l`.
    #[serde(with = "bigint_str")]
    pub n: BigInt,
    /// The ratio threshold `ε_{l−1}` that entered `N_l`.
    pub eps: Rational,
    /// `c_l`.
    pub c: Rational,
    /// `n_{l+1}`.
    pub n_next: CertifiedValue,
    /// Child-count floor: total count at level one, per parent afterwards.
    pub m_required: Rational,
    /// Children kept per parent; the whole band at level one.
    pub target: usize,
    pub components: Vec<NComponent>,
    pub growth_floor: GrowthFloor,
    /// Times `N_l` was doubled because some parent came up short.
    pub retries: u32,
}

/// A stored annulus `A(ξ, inner, outer)` with its parent at the level above.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnulusRecord {
    pub center: WdsPoint,
    pub inner: Rational,
    pub outer: Rational,
    pub parent: Option<usize>,
    /// Admissible children at the next band, filled once it is chosen.
    #[serde(default)]
    pub offspring: Option<Offspring>,
}

impl AnnulusRecord {
    pub fn annulus(&self) -> Annulus {
        Annulus::new(self.center.coord().clone(), self.inner.clone(), self.outer.clone())
    }

    /// Closed arcs in lifted coordinates around the center.
    pub fn arcs(&self) -> Vec<Interval> {
        annulus_arcs(&self.annulus())
    }
}

/// One level `K_l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSet {
    pub params: LevelParams,
    pub annuli: Vec<AnnulusRecord>,
    pub t: usize,
    /// `δ_l` over the kept annuli, a third of the least gap between discs.
    pub delta: Rational,
    /// Lower bound on `δ_l` over every admissible point of the band,
    /// `(1/(C²N_l) − 2ψ(C/N_l))/3`.
    pub delta_band: Rational,
    /// Fewest kept children of any annulus here, once the next level exists.
    pub m_observed: Option<usize>,
    /// Fewest certified admissible children of any annulus here.
    #[serde(with = "bigint_str::option")]
    pub m_certified: Option<BigInt>,
    /// Picked candidates discarded by the neighbourhood test.
    pub skipped: usize,
    /// Parents that kept fewer children than the target.
    pub short_parents: usize,
}

/// One rung of the distribution check on the root ball.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbRow {
    #[serde(with = "bigint_str")]
    pub k: BigInt,
    pub observed: usize,
    pub required: Rational,
    pub passed: bool,
}

/// Certified tail sum `Σ_{R(ξ) < C/N_l} (ψ(R)/R)^α` against its bound.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailCertificate {
    pub l: usize,
    pub threshold: Rational,
    pub bound: CertifiedValue,
    pub rhs: CertifiedValue,
    pub passed: bool,
}

/// The persisted record of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionTrace {
    pub format: String,
    pub config: ConstructionConfig,
    pub root: Ball,
    pub root_attempts: u32,
    #[serde(with = "bigint_str::option")]
    pub kb: Option<BigInt>,
    pub kb_audit: Vec<KbRow>,
    pub levels: Vec<LevelSet>,
    pub verification: Vec<LevelReport>,
    pub tail_certificates: Vec<TailCertificate>,
    pub warnings: Vec<String>,
}

impl ConstructionTrace {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// True when every level passed every check and every tail certificate holds.
    pub fn verified(&self) -> bool {
        self.verification.len() == self.levels.len()
            && self.verification.iter().all(LevelReport::passed)
            && self.tail_certificates.iter().all(|t| t.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: ConstructionTrace = serde_json::from_str(s)?;
        if t.format != TRACE_FORMAT {
            return Err(Error::Parse(format!("unsupported trace format {:?}", t.format)));
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Child indices of each annulus at level `l` (1-based).
    pub fn children(&self, l: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.levels[l - 1].annuli.len()];
        if let Some(next) = self.levels.get(l) {
            for (i, a) in next.annuli.iter().enumerate() {
                if let Some(p) = a.parent {
                    out[p].push(i);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests;
