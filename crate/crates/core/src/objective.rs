//! Population-level terms of the objective and the reporting metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{OutcomeEstimate, ScoreMatrix};
use crate::model::{self, Dataset, DecisionList, TreatmentId};
use crate::scalar::{self, Scalar};

/// Non-negative weights on expected outcome, assessment cost and treatment
/// cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambdas<T> {
    pub outcome: T,
    pub assessment: T,
    pub treatment: T,
}

impl<T: Scalar> Lambdas<T> {
    pub fn new(outcome: T, assessment: T, treatment: T) -> Result<Self> {
        let z = T::zero();
        if !(outcome >= z && assessment >= z && treatment >= z) {
            return Err(Error::Config("lambda weights must be non-negative".into()));
        }
        Ok(Lambdas { outcome, assessment, treatment })
    }

    pub fn ones() -> Self {
        Lambdas { outcome: T::one(), assessment: T::one(), treatment: T::one() }
    }

    pub fn scaled(self, k: T) -> Self {
        Lambdas {
            outcome: self.outcome * k,
            assessment: self.assessment * k,
            treatment: self.treatment * k,
        }
    }
}

fn mean<T: Scalar>(values: impl IntoIterator<Item = T>, n: usize) -> T {
    scalar::sum(values) / T::from_count(n)
}

/// Doubly-robust expected outcome: `(1/N) Σ_i o(i, π(x_i))`.
pub fn g1<T: Scalar>(list: &DecisionList, data: &Dataset<T>, scores: &ScoreMatrix<T>) -> T {
    let values = data.records().iter().enumerate().map(|(i, r)| scores.get(i, list.assign(&r.x)));
    mean(values, data.len())
}

/// Expected assessment cost: `(1/N) Σ_i ψ(x_i)`.
pub fn g2<T: Scalar>(list: &DecisionList, data: &Dataset<T>) -> T {
    let values = data.records().iter().map(|r| model::assessment_cost(list, &r.x, data.features()));
    mean(values, data.len())
}

/// Expected treatment cost: `(1/N) Σ_i d'(π(x_i))`.
pub fn g3<T: Scalar>(list: &DecisionList, data: &Dataset<T>) -> T {
    let values = data.records().iter().map(|r| model::treatment_cost(list, &r.x, data.treatments()));
    mean(values, data.len())
}

/// The three terms and the weighted objective for one list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms<T> {
    pub g1: T,
    pub g2: T,
    pub g3: T,
    pub value: T,
}

pub fn objective_terms<T: Scalar>(
    list: &DecisionList,
    data: &Dataset<T>,
    scores: &ScoreMatrix<T>,
    lambdas: &Lambdas<T>,
) -> ObjectiveTerms<T> {
    let (g1, g2, g3) = (g1(list, data, scores), g2(list, data), g3(list, data));
    let value = lambdas.outcome * g1 - lambdas.assessment * g2 - lambdas.treatment * g3;
    ObjectiveTerms { g1, g2, g3, value }
}

/// `λ1·g1 − λ2·g2 − λ3·g3`.
pub fn objective<T: Scalar>(
    list: &DecisionList,
    data: &Dataset<T>,
    scores: &ScoreMatrix<T>,
    lambdas: &Lambdas<T>,
) -> T {
    objective_terms(list, data, scores, lambdas).value
}

/// Where the average outcome of a regime comes from.
#[derive(Clone, Copy, Debug)]
pub enum OutcomeSource<'a, T> {
    /// `ŷ(x_i, π(x_i))` for every subject.
    Predicted,
    /// The observed `y_i` when `π(x_i) = a_i`, otherwise `ŷ(x_i, π(x_i))`.
    FactualWhenObserved,
    /// Known potential outcomes, one row of `m` values per subject.
    Potential(&'a [Vec<T>]),
}

impl<T> OutcomeSource<'_, T> {
    pub fn label(&self) -> &'static str {
        match self {
            OutcomeSource::Predicted => "predicted",
            OutcomeSource::FactualWhenObserved => "factual_when_observed",
            OutcomeSource::Potential(_) => "potential_outcomes",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeMetrics<T> {
    pub avg_outcome: T,
    pub avg_assess_cost: T,
    pub avg_treat_cost: T,
    /// Mean number of distinct features evaluated per subject.
    pub avg_num_characs: T,
    /// Number of rules, not counting the default.
    pub list_len: usize,
}

pub fn compute_metrics<T: Scalar>(
    list: &DecisionList,
    data: &Dataset<T>,
    outcome: &impl OutcomeEstimate<T>,
    source: OutcomeSource<'_, T>,
) -> Result<RegimeMetrics<T>> {
    if let OutcomeSource::Potential(rows) = source {
        let m = data.treatments().len();
        if rows.len() != data.len() || rows.iter().any(|r| r.len() != m) {
            return Err(Error::Config("potential outcomes must be an N x m table".into()));
        }
    }
    let n = data.len();
    let outcome_of = |i: usize, t: TreatmentId| -> T {
        let r = data.record(i);
        match source {
            OutcomeSource::Predicted => outcome.predict(&r.x, t),
            OutcomeSource::FactualWhenObserved if r.treatment == t => r.outcome,
            OutcomeSource::FactualWhenObserved => outcome.predict(&r.x, t),
            OutcomeSource::Potential(rows) => rows[i][t.0],
        }
    };
    let assigned: Vec<TreatmentId> = data.records().iter().map(|r| list.assign(&r.x)).collect();
    Ok(RegimeMetrics {
        avg_outcome: mean(assigned.iter().enumerate().map(|(i, &t)| outcome_of(i, t)), n),
        avg_assess_cost: g2(list, data),
        avg_treat_cost: g3(list, data),
        avg_num_characs: mean(
            data.records().iter().map(|r| T::from_count(list.evaluated_features(&r.x).count())),
            n,
        ),
        list_len: list.len(),
    })
}
