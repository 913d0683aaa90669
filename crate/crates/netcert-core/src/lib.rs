//! Certification engine for network nonlocality from color-matching
//! strategies.
//!
//! A network is a set of independent sources wired to parties. A
//! color-matching (CM) strategy has every source take a color uniformly —
//! classically, or as a coherent superposition — while every party either
//! reports her view of the adjacent colors when it extends to a tuple of a
//! global compatible set, or an ambiguous outcome. This crate computes the
//! resulting classical and quantum distributions, decides the graph
//! preconditions (ECS, PFIS), checks the Finner inequality with its equality
//! set, assembles the hidden-variable feasibility program over the
//! all-ambiguous block, and searches refinement unitaries whose program is
//! infeasible — emitting a machine-checkable Farkas certificate that no
//! classical model exists.
//!
//! Module map:
//! - [`net`]: networks, validation, ECS, PFIS, `K_n`/`G_m` generators
//! - [`dist`]: exact/float probability tables and their operations
//! - [`classical`]: tuple sets, the decohered CM distribution, hidden patterns
//! - [`quantum`]: source states, CM measurements, Born-rule evaluation
//! - [`finner`]: Finner inequality reports with exact equality detection
//! - [`lp`] / [`simplex`]: feasibility solver and Farkas certificates
//! - [`rigidity`]: revealing events, r-values, the hidden-variable program
//! - [`search`]: seeded search over refinement unitaries
//! - [`interval`]: outward-rounded interval arithmetic for certificate checks

pub mod classical;
pub mod dist;
pub mod error;
pub mod finner;
pub mod interval;
pub mod jsonfmt;
pub mod lp;
pub mod net;
pub(crate) mod par;
pub mod quantum;
pub mod rigidity;
pub mod search;
pub mod simplex;

pub use classical::{
    compute_pcolor, enumerate_hidden_patterns, ColorAssignment, CompatibilityIndex,
    HiddenPatternSet, TupleSet,
};
pub use dist::{Distribution, Mode, Outcome, Prob};
pub use error::Error;
pub use finner::{finner_check, FinnerEntry, FinnerReport, DEFAULT_FINNER_TOL};
pub use interval::{ComplexInterval, Interval};
pub use lp::{
    feasibility_margin, solve_feasibility, verify_certificate, FarkasCertificate,
    FeasibilityOutcome, LpInstance, LpRow, RowTag, VerifyMode, DEFAULT_LP_TOL,
};
pub use net::{
    check_ecs, fig1_network, make_gm, make_kn, parallel_sources_network, solve_pfis, Color,
    EcsReport, FinnerWeights, Network, Party, Source,
};
pub use quantum::{
    born_distribution, build_cm_measurement, build_global_state, cm_global_state,
    cm_source_state, gram_schmidt_columns, refinements_from_json, refinements_to_json,
    GlobalState, IntervalState, Measurement, RefinementChoice, RefinementUnitary, SourceState,
    Wiring,
};
pub use rigidity::{
    build_lp, compute_r_values, find_revealing_completions, plan_revealing, CertifyOutcome,
    CertifyResult, CmPipeline, RValues, RevealingEvent, RevealingPlan,
};
pub use search::{
    infeasibility_margin, parametrize_unitary, search_nonlocal, SearchConfig, SearchReport,
    TrajectoryPoint,
};

pub type Result<T> = std::result::Result<T, Error>;

/// Default cap on brute-force enumerations over the `C^m` color assignments.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Default cap on the global Hilbert-space dimension `C^(total legs)`.
pub const DEFAULT_DIMENSION_CAP: u128 = 10_000_000;
