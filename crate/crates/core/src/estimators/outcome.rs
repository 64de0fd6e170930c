use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::encoding::FeatureEncoder;
use super::linalg::solve_psd;
use super::scores::OutcomeEstimate;
use crate::error::{Error, Result};
use crate::model::{Dataset, TreatmentId, Value};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeConfig {
    /// Ridge penalty on slopes; intercepts are never penalized.
    pub ridge: f64,
    /// One regression with treatment dummies and shared slopes instead of a
    /// separate regression per treatment.
    pub pooled: bool,
}

impl Default for OutcomeConfig {
    fn default() -> Self {
        OutcomeConfig { ridge: 1e-6, pooled: false }
    }
}

/// Linear outcome model `ŷ(x, a) = β_a · [1, e(x)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel<T> {
    pub encoder: FeatureEncoder,
    pub coefficients: Vec<Vec<T>>,
    pub pooled: bool,
}

impl<T: Float + Scalar> OutcomeModel<T> {
    pub fn predict(&self, x: &[Value], t: TreatmentId) -> T {
        let mut z = Vec::with_capacity(self.encoder.width() + 1);
        self.encoder.design_row(x, &mut z);
        self.coefficients[t.0].iter().zip(&z).fold(T::zero(), |acc, (&b, &v)| acc + b * v)
    }
}

impl<T: Float + Scalar> OutcomeEstimate<T> for OutcomeModel<T> {
    fn predict(&self, x: &[Value], t: TreatmentId) -> T {
        OutcomeModel::predict(self, x, t)
    }
}

pub fn fit_outcome<T: Float + Scalar>(data: &Dataset<T>, ridge: f64) -> Result<OutcomeModel<T>> {
    fit_outcome_with(data, &OutcomeConfig { ridge, pooled: false })
}

/// Ridge least squares via the normal equations.
pub fn fit_outcome_with<T: Float + Scalar>(
    data: &Dataset<T>,
    config: &OutcomeConfig,
) -> Result<OutcomeModel<T>> {
    if !(config.ridge >= 0.0) {
        return Err(Error::Config("ridge must be non-negative".into()));
    }
    let encoder = FeatureEncoder::fit(data);
    let rows = encoder.design(data);
    let m = data.treatments().len();
    let width = encoder.width() + 1;
    let ridge = T::from(config.ridge).unwrap();
    let ys: Vec<T> = data.records().iter().map(|r| r.outcome).collect();
    let labels: Vec<usize> = data.records().iter().map(|r| r.treatment.0).collect();
    let grand_mean = ys.iter().fold(T::zero(), |a, &y| a + y) / T::from_count(ys.len());

    let coefficients = if config.pooled {
        // [1, e(x), 1(a = 1), …, 1(a = m-1)]
        let k = width + m - 1;
        let design = rows.iter().zip(&labels).map(|(z, &a)| {
            let mut row = z.clone();
            row.extend((1..m).map(|t| if t == a { T::one() } else { T::zero() }));
            row
        });
        let beta = least_squares(design, &ys, k, |j| (1..width).contains(&j), ridge);
        (0..m)
            .map(|t| {
                let mut b = beta[..width].to_vec();
                if t > 0 {
                    b[0] = b[0] + beta[width + t - 1];
                }
                b
            })
            .collect()
    } else {
        (0..m)
            .map(|t| {
                let idx: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] == t).collect();
                if idx.is_empty() {
                    log::warn!(
                        "treatment '{}' has no observations; predicting the grand mean",
                        data.treatments().names()[t]
                    );
                    let mut b = vec![T::zero(); width];
                    b[0] = grand_mean;
                    return b;
                }
                let y: Vec<T> = idx.iter().map(|&i| ys[i]).collect();
                least_squares(idx.iter().map(|&i| rows[i].clone()), &y, width, |j| j > 0, ridge)
            })
            .collect()
    };
    Ok(OutcomeModel { encoder, coefficients, pooled: config.pooled })
}

fn least_squares<T: Float>(
    design: impl Iterator<Item = Vec<T>>,
    y: &[T],
    k: usize,
    penalized: impl Fn(usize) -> bool,
    ridge: T,
) -> Vec<T> {
    let mut xtx = vec![T::zero(); k * k];
    let mut xty = vec![T::zero(); k];
    for (row, &yi) in design.zip(y) {
        for a in 0..k {
            if row[a] == T::zero() {
                continue;
            }
            xty[a] = xty[a] + row[a] * yi;
            for b in 0..k {
                xtx[a * k + b] = xtx[a * k + b] + row[a] * row[b];
            }
        }
    }
    for j in 0..k {
        if penalized(j) {
            xtx[j * k + j] = xtx[j * k + j] + ridge;
        }
    }
    solve_psd(&xtx, &xty, k)
}
