//! Learning cost-aware treatment regimes as ordered decision lists.
//!
//! A regime is a list of `if pattern then treatment` rules with a default.
//! Evaluating it against a subject costs the features its rules inspect, and
//! the assigned treatment carries its own cost. Learning trades expected
//! outcome against both costs, using doubly-robust outcome scores estimated
//! from observational data and a Monte-Carlo tree search over rule sequences.
//!
//! Everything numeric is generic over [`Scalar`]; the `*F64` aliases below
//! are what most callers want. Estimators additionally need
//! [`num_traits::Float`].

pub mod cover;
pub mod error;
pub mod estimators;
pub mod mining;
pub mod model;
pub mod objective;
pub mod pipeline;
pub mod scalar;
pub mod search;
pub mod synthetic;

pub use error::{Error, Result};
pub use estimators::{
    dr_scores, fit_outcome, fit_outcome_with, fit_propensity, OutcomeConfig, OutcomeEstimate,
    OutcomeModel, PropensityConfig, PropensityEstimate, PropensityModel, ScoreMatrix,
};
pub use mining::{discretize, mine_patterns, Discretizer, MiningConfig, PatternPool};
pub use model::{
    assessment_cost, assign, partition, satisfies, treatment_cost, Dataset, DecisionList,
    FeatureDescriptor, FeatureKind, FeatureMask, FeatureSpace, Operator, Pattern, Predicate, Rule,
    SubjectRecord, TreatmentId, TreatmentSpace, Value,
};
pub use pipeline::{build_pool, learn, prepare, search_prepared, LearnConfig, Learned, Prepared};
pub use objective::{
    compute_metrics, objective, objective_terms, Lambdas, ObjectiveTerms, OutcomeSource,
    RegimeMetrics,
};
pub use scalar::Scalar;
pub use search::{
    exhaustive_search, uct_search, ActionSpec, RulePool, SearchConfig, SearchOutcome,
    SearchProblem, SearchState, SearchStats,
};

pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type FeatureSpaceF64 = FeatureSpace<f64>;
pub type TreatmentSpaceF64 = TreatmentSpace<f64>;
pub type ScoreMatrixF64 = ScoreMatrix<f64>;
pub type ScoreMatrixF32 = ScoreMatrix<f32>;
pub type LambdasF64 = Lambdas<f64>;
pub type RegimeMetricsF64 = RegimeMetrics<f64>;
pub type SearchOutcomeF64 = SearchOutcome<f64>;
pub type PropensityModelF64 = PropensityModel<f64>;
pub type OutcomeModelF64 = OutcomeModel<f64>;
