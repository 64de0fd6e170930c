//! Nuisance models and the doubly-robust score matrix.
//!
//! The propensity model is a multinomial logit and the outcome model a set
//! of per-treatment ridge regressions, both over the same one-hot/standardized
//! encoding. Either can be swapped for anything implementing
//! [`PropensityEstimate`] / [`OutcomeEstimate`] when building scores.

mod encoding;
mod linalg;
mod outcome;
mod propensity;
mod scores;

pub use encoding::{Column, FeatureEncoder};
pub use outcome::{fit_outcome, fit_outcome_with, OutcomeConfig, OutcomeModel};
pub use propensity::{fit_propensity, PropensityConfig, PropensityModel};
pub use scores::{
    dr_scores, ConstantOutcome, FixedPropensity, OutcomeEstimate, PropensityEstimate,
    ScoreMatrix, ZeroOutcome, DEFAULT_CLIP_FLOOR,
};
