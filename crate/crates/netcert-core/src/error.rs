use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),

    #[error("unknown party {0:?}")]
    UnknownParty(String),

    #[error("unknown source {0:?}")]
    UnknownSource(String),

    #[error("{what} must be at least {min}, got {got}")]
    SizeBelowMinimum {
        what: &'static str,
        min: usize,
        got: usize,
    },

    #[error("invalid tuple set: {0}")]
    InvalidTupleSet(String),

    #[error("enumeration needs {needed} assignments, cap is {cap}")]
    EnumerationCap { needed: u128, cap: u128 },

    #[error("global dimension {needed} exceeds cap {cap}")]
    DimensionCap { needed: u128, cap: u128 },

    #[error("marginal over an empty party subset")]
    EmptyPartySubset,

    #[error("coarse-graining map is not total: party {party} has no image for {outcome}")]
    NonTotalMapping { party: String, outcome: String },

    #[error("distributions are not comparable: {0}")]
    AlphabetMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("matrix for party {party} is not unitary (defect {defect:.3e})")]
    NonUnitary { party: String, defect: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("measurement for party {party} does not resolve the identity (defect {defect:.3e})")]
    IncompleteMeasurement { party: String, defect: f64 },

    #[error("no revealing event for party {party} with view {view}")]
    MissingRevealingEvent { party: String, view: String },

    #[error(
        "revealing events disagree for party {party}, view {view}: spread {spread:.3e} \
         (wiring or strategy bug)"
    )]
    CrossConsistency {
        party: String,
        view: String,
        spread: f64,
    },

    #[error("rank-deficient parameter matrix (residual {residual:.3e}); re-draw parameters")]
    RankDeficient { residual: f64 },

    #[error("simplex did not converge within {pivots} pivots")]
    SolverStall { pivots: usize },

    #[error("verification mode unavailable: {0}")]
    ModeUnavailable(&'static str),

    #[error("preconditions not met: {0}")]
    Preconditions(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
