//! Fit nuisance models, score, mine, search: the whole learning path on one
//! training set.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::{
    dr_scores, fit_outcome_with, fit_propensity, OutcomeConfig, OutcomeModel, PropensityConfig,
    PropensityModel, ScoreMatrix, DEFAULT_CLIP_FLOOR,
};
use crate::mining::{mine_patterns, Discretizer, MiningConfig};
use crate::model::{Dataset, DecisionList};
use crate::objective::{objective_terms, Lambdas, ObjectiveTerms};
use crate::scalar::Scalar;
use crate::search::{uct_search, RulePool, SearchConfig, SearchProblem, SearchStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub lambdas: Lambdas<f64>,
    pub mining: MiningConfig,
    /// Keep only this many mined patterns, highest support first.
    pub max_patterns: Option<usize>,
    pub search: SearchConfig,
    pub clip_floor: f64,
    pub propensity: PropensityConfig,
    pub outcome: OutcomeConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            lambdas: Lambdas::ones(),
            mining: MiningConfig::default(),
            max_patterns: None,
            search: SearchConfig::default(),
            clip_floor: DEFAULT_CLIP_FLOOR,
            propensity: PropensityConfig::default(),
            outcome: OutcomeConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Learned<T> {
    pub list: DecisionList,
    pub terms: ObjectiveTerms<T>,
    pub pool: RulePool,
    pub discretizer: Discretizer,
    pub propensity: PropensityModel<T>,
    pub outcome: OutcomeModel<T>,
    pub scores: ScoreMatrix<T>,
    pub stats: SearchStats,
}

/// Candidate rules for `data`: mine over binned features, lift the patterns
/// back to raw features and cross them with every treatment.
pub fn build_pool<T: Scalar>(
    data: &Dataset<T>,
    mining: &MiningConfig,
    max_patterns: Option<usize>,
) -> Result<(RulePool, Discretizer)> {
    let disc = Discretizer::fit(data, mining)?;
    let binned = disc.apply(data)?;
    let mut mined = mine_patterns(&binned, mining)?.entries;
    if let Some(k) = max_patterns {
        let mut order: Vec<usize> = (0..mined.len()).collect();
        order.sort_by(|&a, &b| mined[b].support.cmp(&mined[a].support));
        let mut keep = vec![false; mined.len()];
        order.into_iter().take(k).for_each(|i| keep[i] = true);
        let mut i = 0;
        mined.retain(|_| {
            i += 1;
            keep[i - 1]
        });
    }
    let lifted = mined.iter().map(|e| disc.lift(&e.pattern)).collect::<Result<Vec<_>>>()?;
    Ok((RulePool::cross(lifted, data.treatments().len()), disc))
}

/// Everything in the learning path that does not depend on the weights.
#[derive(Clone, Debug)]
pub struct Prepared<T> {
    pub pool: RulePool,
    pub discretizer: Discretizer,
    pub propensity: PropensityModel<T>,
    pub outcome: OutcomeModel<T>,
    pub scores: ScoreMatrix<T>,
}

pub fn prepare<T: Float + Scalar>(data: &Dataset<T>, config: &LearnConfig) -> Result<Prepared<T>> {
    let propensity = fit_propensity(data, &config.propensity)?;
    let outcome = fit_outcome_with(data, &config.outcome)?;
    let floor = T::from(config.clip_floor).unwrap();
    let scores = dr_scores(data, &propensity, &outcome, floor)?;
    let (pool, discretizer) = build_pool(data, &config.mining, config.max_patterns)?;
    Ok(Prepared { pool, discretizer, propensity, outcome, scores })
}

/// Search over a prepared pool with the given weights.
pub fn search_prepared<T: Float + Scalar>(
    data: &Dataset<T>,
    prepared: &Prepared<T>,
    lambdas: &Lambdas<f64>,
    search: &SearchConfig,
) -> Result<(DecisionList, ObjectiveTerms<T>, SearchStats)> {
    let lambdas = Lambdas::new(
        T::from(lambdas.outcome).unwrap(),
        T::from(lambdas.assessment).unwrap(),
        T::from(lambdas.treatment).unwrap(),
    )?;
    let problem = SearchProblem::new(data, &prepared.scores, &prepared.pool, lambdas)?;
    let found = uct_search(&problem, search)?;
    let terms = objective_terms(&found.list, data, &prepared.scores, &lambdas);
    Ok((found.list, terms, found.stats))
}

pub fn learn<T: Float + Scalar>(data: &Dataset<T>, config: &LearnConfig) -> Result<Learned<T>> {
    let prepared = prepare(data, config)?;
    let (list, terms, stats) = search_prepared(data, &prepared, &config.lambdas, &config.search)?;
    let Prepared { pool, discretizer, propensity, outcome, scores } = prepared;
    Ok(Learned { list, terms, pool, discretizer, propensity, outcome, scores, stats })
}
