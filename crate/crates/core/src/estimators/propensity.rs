use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::encoding::FeatureEncoder;
use super::scores::PropensityEstimate;
use crate::error::{Error, Result};
use crate::model::{Dataset, Value};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropensityConfig {
    /// L2 penalty on non-intercept coefficients.
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls to this value.
    pub tol: f64,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        PropensityConfig { l2: 0.0, max_iter: 5000, tol: 1e-6 }
    }
}

/// Multinomial logit `P(A = a | x)` with treatment 0 as the reference
/// category (its coefficient row is identically zero).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel<T> {
    pub encoder: FeatureEncoder,
    /// `m` rows of `1 + q` coefficients, intercept first.
    pub coefficients: Vec<Vec<T>>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: T,
}

impl<T: Float + Scalar> PropensityModel<T> {
    pub fn predict(&self, x: &[Value]) -> Vec<T> {
        let mut z = Vec::with_capacity(self.encoder.width() + 1);
        self.encoder.design_row(x, &mut z);
        let mut out = vec![T::zero(); self.coefficients.len()];
        softmax_into(&self.coefficients, &z, &mut out);
        out
    }
}

impl<T: Float + Scalar> PropensityEstimate<T> for PropensityModel<T> {
    fn propensities(&self, x: &[Value]) -> Vec<T> {
        self.predict(x)
    }
}

fn softmax_into<T: Float>(coef: &[Vec<T>], z: &[T], out: &mut [T]) {
    let mut max = T::neg_infinity();
    for (o, beta) in out.iter_mut().zip(coef) {
        let s = beta.iter().zip(z).fold(T::zero(), |acc, (&b, &v)| acc + b * v);
        *o = s;
        max = max.max(s);
    }
    let mut total = T::zero();
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

struct Problem<'a, T> {
    rows: &'a [Vec<T>],
    labels: Vec<usize>,
    m: usize,
    width: usize,
    l2: T,
}

impl<T: Float + Scalar> Problem<'_, T> {
    /// Penalized mean negative log-likelihood and, optionally, its gradient
    /// over the free rows `1..m` flattened row-major.
    fn eval(&self, coef: &[Vec<T>], grad: Option<&mut [T]>) -> T {
        let n = T::from_count(self.rows.len());
        let mut p = vec![T::zero(); self.m];
        let mut nll = T::zero();
        let mut g = grad;
        if let Some(g) = g.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
        for (z, &a) in self.rows.iter().zip(&self.labels) {
            softmax_into(coef, z, &mut p);
            nll = nll - p[a].max(T::min_positive_value()).ln();
            if let Some(g) = g.as_deref_mut() {
                for t in 1..self.m {
                    let r = p[t] - if t == a { T::one() } else { T::zero() };
                    let row = &mut g[(t - 1) * self.width..t * self.width];
                    for (gj, &zj) in row.iter_mut().zip(z) {
                        *gj = *gj + r * zj;
                    }
                }
            }
        }
        let mut penalty = T::zero();
        for beta in &coef[1..] {
            for &b in &beta[1..] {
                penalty = penalty + b * b;
            }
        }
        if let Some(g) = g {
            for t in 1..self.m {
                for j in 0..self.width {
                    let gj = &mut g[(t - 1) * self.width + j];
                    *gj = *gj / n;
                    if j > 0 {
                        *gj = *gj + self.l2 * coef[t][j];
                    }
                }
            }
        }
        nll / n + self.l2 * penalty / (T::one() + T::one())
    }
}

/// Fits the multinomial logit by full-batch gradient descent with a
/// backtracking (Armijo) line search.
pub fn fit_propensity<T: Float + Scalar>(
    data: &Dataset<T>,
    config: &PropensityConfig,
) -> Result<PropensityModel<T>> {
    let treatments = data.treatments();
    let m = treatments.len();
    if m < 2 {
        return Err(Error::UnfittableTreatment(treatments.name(crate::TreatmentId(0)).into()));
    }
    if let Some(t) = data.treatment_counts().iter().position(|&c| c == 0) {
        return Err(Error::UnfittableTreatment(treatments.names()[t].clone()));
    }
    if !(config.l2 >= 0.0) || config.tol <= 0.0 {
        return Err(Error::Config("l2 must be >= 0 and tol > 0".into()));
    }
    let encoder = FeatureEncoder::fit(data);
    let rows = encoder.design(data);
    let width = encoder.width() + 1;
    let problem = Problem {
        rows: &rows,
        labels: data.records().iter().map(|r| r.treatment.0).collect(),
        m,
        width,
        l2: T::from(config.l2).unwrap(),
    };

    let mut coef = vec![vec![T::zero(); width]; m];
    // start the intercepts at the log frequency ratios
    let counts = data.treatment_counts();
    for t in 1..m {
        coef[t][0] = T::from((counts[t] as f64 / counts[0] as f64).ln()).unwrap();
    }
    let free = (m - 1) * width;
    let mut grad = vec![T::zero(); free];
    let mut value = problem.eval(&coef, Some(&mut grad));
    let tol = T::from(config.tol).unwrap();
    let mut step = T::one();
    let mut iterations = 0;
    let mut gnorm = norm(&grad);
    let mut trial = coef.clone();
    while gnorm > tol && iterations < config.max_iter {
        iterations += 1;
        let g2 = gnorm * gnorm;
        let half = T::from(0.5).unwrap();
        let mut accepted = false;
        for _ in 0..60 {
            for t in 1..m {
                for j in 0..width {
                    trial[t][j] = coef[t][j] - step * grad[(t - 1) * width + j];
                }
            }
            let v = problem.eval(&trial, None);
            if v <= value - half * step * g2 {
                accepted = true;
                break;
            }
            step = step * half;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut coef, &mut trial);
        value = problem.eval(&coef, Some(&mut grad));
        gnorm = norm(&grad);
        step = (step + step).min(T::from(64.0).unwrap());
    }
    let converged = gnorm <= tol;
    if !converged {
        log::warn!(
            "propensity model stopped after {iterations} iterations with gradient norm {:?}",
            gnorm
        );
    }
    Ok(PropensityModel { encoder, coefficients: coef, iterations, converged, gradient_norm: gnorm })
}

fn norm<T: Float>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}
