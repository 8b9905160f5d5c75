//! Inverse statements: when `Q(F_a, τ)` is not small, most of `a` lies near a
//! low-rank progression. This module fits such progressions, plants test
//! instances with known structure, and assembles constant-free reports for
//! the structural bounds.

mod fit;
mod plant;
mod structure;
mod thm2;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use fit::{fit_gap, FitConfig};
pub use plant::{plant, PlantSpec, PlantedInstance};
pub use structure::{verify_thm3, verify_thm4, StructureConfig, StructureReport};
pub use thm2::{default_n_prime, verify_thm2, Thm2Config, Thm2Params};

use crate::concentration;
use crate::dist;
use crate::gap::{self, CoverageReport, SymmetricGAP};
use crate::report::BoundReport;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid plant specification: {0}")]
    DegenerateSpec(String),
    #[error("n' = {n_prime} must lie in [1, n = {n}]")]
    NPrimeOutOfRange { n_prime: usize, n: usize },
    #[error("expected {expected} per-coordinate values, got {got}")]
    CoordinateCount { expected: usize, got: usize },
    #[error("need τ_j ≥ δ_j ≥ 0 (coordinate {0})")]
    ToleranceOrder(usize),
    #[error("rank cap {rank_cap} is below the dimension {dim}")]
    RankBelowDimension { rank_cap: usize, dim: usize },
    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error(transparent)]
    Gap(#[from] gap::Error),
    #[error(transparent)]
    Dist(#[from] dist::Error),
    #[error(transparent)]
    Concentration(#[from] concentration::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Outcome of a constructive check of an existence statement. A search that
/// finds nothing says so; it never claims the statement is false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    WitnessFound,
    NotFound,
    /// Some hypothesis failed; no structural claim applies.
    HypothesesFail,
}

/// The fitted progression of one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateFit {
    pub gap: SymmetricGAP,
    pub cardinality: usize,
    /// `Q(F_a^{(j)}, τ)` when computed.
    pub q: Option<f64>,
    /// `max{q_j^{-1} ρ_n^{-1} (n')^{-1/2}, 1}` when computed.
    pub bound_component: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversePrincipleReport {
    /// The fitted progression in `Rᵈ` (product of the coordinate fits).
    pub gap: SymmetricGAP,
    /// Recount of the entries of `a` close to `gap` in the max norm.
    pub coverage: CoverageReport,
    pub rank: usize,
    /// `|K|`, by enumeration.
    pub cardinality: usize,
    pub coordinates: Vec<CoordinateFit>,
    pub params: BTreeMap<String, serde_json::Value>,
    pub flags: BTreeMap<String, bool>,
    pub bounds: Vec<BoundReport>,
    pub verdict: Verdict,
}

impl InversePrincipleReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}
