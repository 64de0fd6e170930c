use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, TreatmentId, Value};
use crate::scalar::Scalar;

pub const DEFAULT_CLIP_FLOOR: f64 = 0.01;

/// `ω̂(x, ·)`: a probability vector over treatments.
pub trait PropensityEstimate<T> {
    fn propensities(&self, x: &[Value]) -> Vec<T>;
}

/// `ŷ(x, a)`.
pub trait OutcomeEstimate<T> {
    fn predict(&self, x: &[Value], t: TreatmentId) -> T;
}

impl<T, P: PropensityEstimate<T> + ?Sized> PropensityEstimate<T> for &P {
    fn propensities(&self, x: &[Value]) -> Vec<T> {
        (**self).propensities(x)
    }
}

impl<T, O: OutcomeEstimate<T> + ?Sized> OutcomeEstimate<T> for &O {
    fn predict(&self, x: &[Value], t: TreatmentId) -> T {
        (**self).predict(x, t)
    }
}

/// Same propensity vector for every subject.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPropensity<T>(pub Vec<T>);

impl<T: Scalar> PropensityEstimate<T> for FixedPropensity<T> {
    fn propensities(&self, _x: &[Value]) -> Vec<T> {
        self.0.clone()
    }
}

/// `ŷ ≡ 0`, which turns the doubly-robust score into plain IPW.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ZeroOutcome;

impl<T: Scalar> OutcomeEstimate<T> for ZeroOutcome {
    fn predict(&self, _x: &[Value], _t: TreatmentId) -> T {
        T::zero()
    }
}

/// A per-treatment constant prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantOutcome<T>(pub Vec<T>);

impl<T: Scalar> OutcomeEstimate<T> for ConstantOutcome<T> {
    fn predict(&self, _x: &[Value], t: TreatmentId) -> T {
        self.0[t.0]
    }
}

/// Doubly-robust scores `o(i, a)` for every subject and treatment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix<T> {
    n: usize,
    m: usize,
    values: Vec<T>,
    clip_floor: T,
}

impl<T: Scalar> ScoreMatrix<T> {
    /// Wraps precomputed scores, one row of `m` entries per subject.
    pub fn from_rows(rows: Vec<Vec<T>>, clip_floor: T) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::Config("score rows must be non-empty and rectangular".into()));
        }
        Ok(ScoreMatrix { n, m, values: rows.into_iter().flatten().collect(), clip_floor })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn clip_floor(&self) -> T {
        self.clip_floor
    }

    pub fn get(&self, i: usize, t: TreatmentId) -> T {
        self.values[i * self.m + t.0]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    /// `max_t o(i, t)`.
    pub fn best(&self, i: usize) -> T {
        self.row(i).iter().copied().fold(self.row(i)[0], T::max_of)
    }
}

/// `o(i,a) = 1(a_i = a) / max(ω̂(x_i, a), ε) · (y_i − ŷ(x_i, a)) + ŷ(x_i, a)`.
pub fn dr_scores<T: Scalar>(
    data: &Dataset<T>,
    propensity: &impl PropensityEstimate<T>,
    outcome: &impl OutcomeEstimate<T>,
    clip_floor: T,
) -> Result<ScoreMatrix<T>> {
    let half = T::one() / (T::one() + T::one());
    if !(clip_floor > T::zero() && clip_floor < half) {
        return Err(Error::Config("propensity clip floor must lie in (0, 0.5)".into()));
    }
    let m = data.treatments().len();
    let mut values = Vec::with_capacity(data.len() * m);
    for r in data.records() {
        let observed = r.treatment;
        let w = propensity.propensities(&r.x);
        if w.len() != m {
            return Err(Error::Config(format!(
                "propensity model returned {} probabilities for {m} treatments",
                w.len()
            )));
        }
        for t in data.treatments().ids() {
            let yhat = outcome.predict(&r.x, t);
            let o = if t == observed {
                (r.outcome - yhat) / w[t.0].max_of(clip_floor) + yhat
            } else {
                yhat
            };
            values.push(o);
        }
    }
    Ok(ScoreMatrix { n: data.len(), m, values, clip_floor })
}
