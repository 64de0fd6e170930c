use std::path::PathBuf;

use costregime::estimators::DEFAULT_CLIP_FLOOR;
use costregime::{Lambdas, LearnConfig, MiningConfig, OutcomeConfig, PropensityConfig, SearchConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Upper limits on validation-set averages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub max_avg_assess_cost: Option<f64>,
    pub max_avg_treat_cost: Option<f64>,
}

impl Constraints {
    pub fn admits(&self, assess: f64, treat: f64) -> bool {
        self.max_avg_assess_cost.is_none_or(|m| assess <= m) && self.max_avg_treat_cost.is_none_or(|m| treat <= m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub max_cycles: usize,
    /// Minimum gain in validation outcome that counts as an improvement.
    pub tol: f64,
    pub steps: usize,
    pub grid_points: usize,
    pub lower: f64,
    pub upper: f64,
    pub start: Lambdas<f64>,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            max_cycles: 5,
            tol: 1e-9,
            steps: 12,
            grid_points: 9,
            lower: 0.0,
            upper: 1000.0,
            start: Lambdas::ones(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub costs: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub lambdas: Lambdas<f64>,
    pub mining: MiningConfig,
    pub max_patterns: Option<usize>,
    pub search: SearchConfig,
    pub clip_floor: f64,
    pub ridge: f64,
    pub l2: f64,
    pub pooled_outcome: bool,
    pub validation_fraction: f64,
    pub folds: usize,
    pub constraints: Constraints,
    pub tuning: TuningConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            costs: None,
            out: None,
            seed: 0,
            lambdas: Lambdas::ones(),
            mining: MiningConfig { min_support: 10, ..Default::default() },
            max_patterns: None,
            search: SearchConfig::default(),
            clip_floor: DEFAULT_CLIP_FLOOR,
            ridge: OutcomeConfig::default().ridge,
            l2: PropensityConfig::default().l2,
            pooled_outcome: false,
            validation_fraction: 0.05,
            folds: 10,
            constraints: Constraints::default(),
            tuning: TuningConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(CliError::config(m));
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return fail("validation fraction must lie in (0, 1)");
        }
        if self.folds < 2 {
            return fail("at least 2 folds are needed");
        }
        if !(self.clip_floor > 0.0 && self.clip_floor < 0.5) {
            return fail("clip floor must lie in (0, 0.5)");
        }
        if !(self.ridge >= 0.0 && self.l2 >= 0.0) {
            return fail("ridge and l2 penalties must be non-negative");
        }
        let lam = &self.lambdas;
        Lambdas::new(lam.outcome, lam.assessment, lam.treatment)?;
        let t = &self.tuning;
        if !(t.lower >= 0.0 && t.lower < t.upper && t.upper.is_finite()) {
            return fail("tuning interval must satisfy 0 <= lower < upper");
        }
        if t.steps == 0 || t.grid_points == 0 || t.max_cycles == 0 {
            return fail("tuning steps, grid points and cycles must be positive");
        }
        if self.mining.max_pattern_len == 0 {
            return fail("maximum pattern length must be positive");
        }
        Ok(())
    }

    pub fn learn_config(&self) -> LearnConfig {
        LearnConfig {
            lambdas: self.lambdas,
            mining: self.mining.clone(),
            max_patterns: self.max_patterns,
            search: SearchConfig { seed: self.seed, ..self.search.clone() },
            clip_floor: self.clip_floor,
            propensity: PropensityConfig { l2: self.l2, ..Default::default() },
            outcome: OutcomeConfig { ridge: self.ridge, pooled: self.pooled_outcome },
        }
    }

    pub fn require_inputs(&self) -> Result<(PathBuf, PathBuf)> {
        match (&self.data, &self.costs) {
            (Some(d), Some(c)) => Ok((d.clone(), c.clone())),
            _ => Err(CliError::config("both --data and --costs are required")),
        }
    }

    pub fn require_out(&self) -> Result<PathBuf> {
        self.out.clone().ok_or_else(|| CliError::config("an output directory is required (--out)"))
    }
}
