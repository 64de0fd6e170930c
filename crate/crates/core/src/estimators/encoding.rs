use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::model::{Dataset, FeatureKind, FeatureSpace, Value};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Column {
    /// `1(x_f = level)`; level 0 of every feature is the reference.
    Indicator { feature: usize, level: u32 },
    /// `(x_f - mean) / scale`.
    Numeric { feature: usize, mean: f64, scale: f64 },
}

/// Design-matrix encoding shared by the propensity and outcome models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub columns: Vec<Column>,
}

impl FeatureEncoder {
    pub fn fit<T: Scalar>(data: &Dataset<T>) -> Self {
        Self::fit_space(data.features(), |f| {
            data.records().iter().map(move |r| match r.x[f] {
                Value::Number(v) => v,
                Value::Level(l) => l as f64,
            })
        })
    }

    fn fit_space<T: Scalar, I: Iterator<Item = f64>>(
        space: &FeatureSpace<T>,
        values: impl Fn(usize) -> I,
    ) -> Self {
        let mut columns = Vec::new();
        for (f, desc) in space.descriptors().iter().enumerate() {
            match desc.kind {
                FeatureKind::Numeric => {
                    let v: Vec<f64> = values(f).collect();
                    let n = v.len().max(1) as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
                    columns.push(Column::Numeric { feature: f, mean, scale });
                }
                _ => {
                    for level in 1..desc.levels.len() as u32 {
                        columns.push(Column::Indicator { feature: f, level });
                    }
                }
            }
        }
        FeatureEncoder { columns }
    }

    /// Number of encoded columns, excluding the intercept.
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Appends `[1, e_1(x), …, e_q(x)]` to `out`.
    pub fn design_row<T: Float>(&self, x: &[Value], out: &mut Vec<T>) {
        out.push(T::one());
        for c in &self.columns {
            let v = match *c {
                Column::Indicator { feature, level } => match x[feature] {
                    Value::Level(l) if l == level => 1.0,
                    _ => 0.0,
                },
                Column::Numeric { feature, mean, scale } => match x[feature] {
                    Value::Number(v) => (v - mean) / scale,
                    Value::Level(l) => (l as f64 - mean) / scale,
                },
            };
            out.push(T::from(v).unwrap_or_else(T::nan));
        }
    }

    pub fn design<T: Float + Scalar>(&self, data: &Dataset<T>) -> Vec<Vec<T>> {
        data.records()
            .iter()
            .map(|r| {
                let mut row = Vec::with_capacity(self.width() + 1);
                self.design_row(&r.x, &mut row);
                row
            })
            .collect()
    }
}
