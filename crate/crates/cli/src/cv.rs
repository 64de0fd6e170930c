//! K-fold cross-validation of the full learning path.

use costregime::{compute_metrics, learn, Dataset, LearnConfig, OutcomeSource, RegimeMetrics};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::ListDoc;
use crate::split::{fold_assignment, subset};

/// The regime-level columns of the results table, as reals so they can be
/// averaged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub avg_outcome: f64,
    pub avg_assess_cost: f64,
    pub avg_treat_cost: f64,
    pub avg_num_characs: f64,
    pub list_len: f64,
}

impl From<RegimeMetrics<f64>> for MetricsRow {
    fn from(m: RegimeMetrics<f64>) -> Self {
        MetricsRow {
            avg_outcome: m.avg_outcome,
            avg_assess_cost: m.avg_assess_cost,
            avg_treat_cost: m.avg_treat_cost,
            avg_num_characs: m.avg_num_characs,
            list_len: m.list_len as f64,
        }
    }
}

impl MetricsRow {
    fn columns(&self) -> [f64; 5] {
        [self.avg_outcome, self.avg_assess_cost, self.avg_treat_cost, self.avg_num_characs, self.list_len]
    }

    fn from_columns(c: [f64; 5]) -> Self {
        MetricsRow {
            avg_outcome: c[0],
            avg_assess_cost: c[1],
            avg_treat_cost: c[2],
            avg_num_characs: c[3],
            list_len: c[4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub objective: f64,
    pub metrics: MetricsRow,
    pub list: ListDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub outcome_source: String,
    pub mean: MetricsRow,
    /// Sample standard deviation across folds.
    pub std: MetricsRow,
}

pub fn summarize(rows: &[MetricsRow]) -> (MetricsRow, MetricsRow) {
    let k = rows.len() as f64;
    let mut mean = [0.0; 5];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.columns()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k);
    let mut var = [0.0; 5];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r.columns()).zip(mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.map(|s| if rows.len() > 1 { (s / (k - 1.0)).sqrt() } else { 0.0 });
    (MetricsRow::from_columns(mean), MetricsRow::from_columns(std))
}

/// `factual` switches the test-fold outcome from model predictions to the
/// observed outcome wherever the regime agrees with the logged treatment.
pub fn cross_validate(
    data: &Dataset<f64>,
    folds: usize,
    seed: u64,
    config: &LearnConfig,
    factual: bool,
) -> Result<CvReport> {
    let fold = fold_assignment(data, folds, seed)?;
    let mut results = Vec::with_capacity(folds);
    for k in 0..folds {
        let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| fold[i] == k);
        let train = subset(data, &train_idx, &format!("fold {k} training"))?;
        let test = data.subset(&test_idx)?;
        let learned = learn(&train, config)?;
        let source = if factual { OutcomeSource::FactualWhenObserved } else { OutcomeSource::Predicted };
        let metrics = compute_metrics(&learned.list, &test, &learned.outcome, source)?;
        results.push(FoldResult {
            fold: k,
            train_size: train.len(),
            test_size: test.len(),
            objective: learned.terms.value,
            metrics: metrics.into(),
            list: ListDoc::from_list(&learned.list, data.features(), data.treatments()),
        });
    }
    let rows: Vec<MetricsRow> = results.iter().map(|r| r.metrics).collect();
    let (mean, std) = summarize(&rows);
    let source = if factual { OutcomeSource::<f64>::FactualWhenObserved } else { OutcomeSource::Predicted };
    Ok(CvReport { folds: results, outcome_source: source.label().to_string(), mean, std })
}
