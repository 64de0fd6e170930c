use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate feature name '{0}'")]
    DuplicateFeature(String),
    #[error("duplicate treatment name '{0}'")]
    DuplicateTreatment(String),
    #[error("cost of '{0}' must be a finite non-negative number")]
    InvalidCost(String),
    #[error("feature '{0}' has an empty value domain")]
    EmptyDomain(String),
    #[error("at most {max} features are supported, got {got}")]
    TooManyFeatures { max: usize, got: usize },
    #[error("treatment space is empty")]
    NoTreatments,
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("record {record}: {reason}")]
    InvalidRecord { record: usize, reason: String },
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("invalid decision list: {0}")]
    InvalidList(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("treatment '{0}' is never observed and its model cannot be fitted")]
    UnfittableTreatment(String),
    #[error("search state is terminal; rule actions cannot be applied")]
    TerminalState,
    #[error("combinatorial budget exceeded: {needed} evaluations needed, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("pattern {0} of the list is not in the base pool")]
    PatternNotInPool(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
