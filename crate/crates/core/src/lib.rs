//! Exact-arithmetic construction of Cantor sets of exactly ψ-approximable
//! points for well-distributed point systems, with audits and dimension
//! estimates.

pub mod cantor;
pub mod certified;
pub mod dimension;
pub mod error;
pub mod oracle;
pub mod psi;
pub mod rational;
pub mod space;
pub mod wds;

pub use cantor::{ConstructionConfig, ConstructionTrace, LevelSet, Mode};
pub use certified::CertifiedValue;
pub use error::{Error, Result};
pub use psi::ApproxFunction;
pub use rational::Rational;
pub use space::{Annulus, Ball, Interval, MetricMeasureSpace, Point, SpaceKind};
pub use wds::{SystemKind, WdsAudit, WdsPoint, WdsSystem};
