//! Coordinate ascent over the three weights, maximizing the validation
//! outcome subject to average-cost constraints.

use std::collections::HashMap;

use costregime::objective::{g1, g2, g3};
use costregime::{dr_scores, prepare, search_prepared, Dataset, DecisionList, Lambdas, LearnConfig, ScoreMatrix};
use serde::{Deserialize, Serialize};

use crate::config::{Constraints, TuningConfig};
use crate::error::{CliError, Result};

pub const COORDINATES: [&str; 3] = ["outcome", "assessment", "treatment"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub cycle: usize,
    /// Weight being varied, or `start`.
    pub coordinate: String,
    pub lambdas: Lambdas<f64>,
    pub avg_outcome: f64,
    pub avg_assess_cost: f64,
    pub avg_treat_cost: f64,
    pub feasible: bool,
    pub accepted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationMetrics {
    /// Doubly-robust estimate with models fitted on the training split.
    pub avg_outcome: f64,
    pub avg_assess_cost: f64,
    pub avg_treat_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub lambdas: Lambdas<f64>,
    pub list: DecisionList,
    pub validation: ValidationMetrics,
    pub cycles: usize,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

#[derive(Clone)]
struct Eval {
    list: DecisionList,
    metrics: ValidationMetrics,
    feasible: bool,
}

impl Eval {
    fn score(&self) -> f64 {
        if self.feasible {
            self.metrics.avg_outcome
        } else {
            f64::NEG_INFINITY
        }
    }
}

fn with(lam: Lambdas<f64>, j: usize, v: f64) -> Lambdas<f64> {
    let mut out = lam;
    *[&mut out.outcome, &mut out.assessment, &mut out.treatment][j] = v;
    out
}

struct Tuner<'a> {
    train: &'a Dataset<f64>,
    validation: &'a Dataset<f64>,
    constraints: &'a Constraints,
    learn: &'a LearnConfig,
    prepared: costregime::Prepared<f64>,
    val_scores: ScoreMatrix<f64>,
    cache: HashMap<[u64; 3], Eval>,
    trace: Vec<TraceEntry>,
}

impl Tuner<'_> {
    fn eval(&mut self, lam: Lambdas<f64>, cycle: usize, coordinate: &str) -> Result<f64> {
        let key = [lam.outcome.to_bits(), lam.assessment.to_bits(), lam.treatment.to_bits()];
        if !self.cache.contains_key(&key) {
            let (list, _, _) = search_prepared(self.train, &self.prepared, &lam, &self.learn.search)?;
            let metrics = ValidationMetrics {
                avg_outcome: g1(&list, self.validation, &self.val_scores),
                avg_assess_cost: g2(&list, self.validation),
                avg_treat_cost: g3(&list, self.validation),
            };
            let feasible = self.constraints.admits(metrics.avg_assess_cost, metrics.avg_treat_cost);
            self.cache.insert(key, Eval { list, metrics, feasible });
        }
        let e = &self.cache[&key];
        self.trace.push(TraceEntry {
            cycle,
            coordinate: coordinate.to_string(),
            lambdas: lam,
            avg_outcome: e.metrics.avg_outcome,
            avg_assess_cost: e.metrics.avg_assess_cost,
            avg_treat_cost: e.metrics.avg_treat_cost,
            feasible: e.feasible,
            accepted: false,
        });
        Ok(e.score())
    }

    /// Best `(value, score, trace index)` found by bracketing coordinate `j`
    /// inside `(lower, upper)`.
    fn coordinate(&mut self, base: Lambdas<f64>, j: usize, cycle: usize, cfg: &TuningConfig) -> Result<(f64, f64, usize)> {
        let name = COORDINATES[j];
        let mut best = (f64::NAN, f64::NEG_INFINITY, usize::MAX);
        let mut probe = |t: &mut Self, v: f64| -> Result<f64> {
            let s = t.eval(with(base, j, v), cycle, name)?;
            if best.2 == usize::MAX || s > best.1 {
                best = (v, s, t.trace.len() - 1);
            }
            Ok(s)
        };
        let (mut lo, mut hi) = (cfg.lower, cfg.upper);
        for _ in 0..cfg.steps {
            let mid = 0.5 * (lo + hi);
            let h = (hi - lo) / 8.0;
            let left = probe(self, mid - h)?;
            let right = probe(self, mid + h)?;
            if right > left + cfg.tol {
                lo = mid;
            } else if left > right + cfg.tol {
                hi = mid;
            } else {
                let g = cfg.grid_points;
                let pts: Vec<f64> = (1..=g).map(|k| lo + (hi - lo) * k as f64 / (g + 1) as f64).collect();
                let mut arg = 0;
                let mut top = f64::NEG_INFINITY;
                for (k, &v) in pts.iter().enumerate() {
                    let s = probe(self, v)?;
                    if k == 0 || s > top {
                        top = s;
                        arg = k;
                    }
                }
                let (a, b) = (if arg == 0 { lo } else { pts[arg - 1] }, if arg + 1 == g { hi } else { pts[arg + 1] });
                lo = a;
                hi = b;
            }
        }
        Ok(best)
    }
}

pub fn tune_lambdas(
    train: &Dataset<f64>,
    validation: &Dataset<f64>,
    constraints: &Constraints,
    learn: &LearnConfig,
    cfg: &TuningConfig,
) -> Result<TuneResult> {
    let prepared = prepare(train, learn)?;
    let val_scores = dr_scores(validation, &prepared.propensity, &prepared.outcome, learn.clip_floor)?;
    let mut t = Tuner {
        train,
        validation,
        constraints,
        learn,
        prepared,
        val_scores,
        cache: HashMap::new(),
        trace: Vec::new(),
    };
    let mut current = cfg.start;
    let mut score = t.eval(current, 0, "start")?;
    let first = t.trace.len() - 1;
    t.trace[first].accepted = t.trace[first].feasible;
    let mut cycles = 0;
    for cycle in 1..=cfg.max_cycles {
        cycles = cycle;
        let mut improved = false;
        for j in 0..3 {
            let (v, s, at) = t.coordinate(current, j, cycle, cfg)?;
            if s > score + cfg.tol && s.is_finite() {
                current = with(current, j, v);
                score = s;
                t.trace[at].accepted = true;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    if !score.is_finite() {
        return Err(CliError::Infeasible { trace: t.trace });
    }
    let key = [current.outcome.to_bits(), current.assessment.to_bits(), current.treatment.to_bits()];
    let chosen = t.cache[&key].clone();
    Ok(TuneResult {
        lambdas: current,
        list: chosen.list,
        validation: chosen.metrics,
        cycles,
        evaluations: t.cache.len(),
        trace: t.trace,
    })
}
