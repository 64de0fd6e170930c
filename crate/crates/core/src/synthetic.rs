//! Synthetic observational data with known propensities and potential
//! outcomes.
//!
//! Features are binary or categorical. Both the outcome mean and the
//! treatment logits are linear in the one-hot indicators of every
//! non-reference level, in feature order. An optional product of two
//! indicators can be added to the outcome to make a linear outcome model
//! misspecified.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{OutcomeEstimate, PropensityEstimate};
use crate::model::{
    Dataset, DecisionList, FeatureDescriptor, FeatureSpace, SubjectRecord, TreatmentId, TreatmentSpace, Value,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    /// Two levels named "0" and "1" make a binary feature.
    pub levels: Vec<String>,
    pub probabilities: Vec<f64>,
    pub cost: f64,
}

impl FeatureSpec {
    pub fn binary(name: impl Into<String>, p_one: f64, cost: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            levels: vec!["0".into(), "1".into()],
            probabilities: vec![1.0 - p_one, p_one],
            cost,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: &[(&str, f64)], cost: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            levels: levels.iter().map(|(l, _)| l.to_string()).collect(),
            probabilities: levels.iter().map(|(_, p)| *p).collect(),
            cost,
        }
    }

    fn descriptor(&self) -> FeatureDescriptor {
        if self.levels == ["0", "1"] {
            FeatureDescriptor::binary(self.name.clone())
        } else {
            FeatureDescriptor::categorical(self.name.clone(), self.levels.clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSpec {
    pub name: String,
    pub cost: f64,
}

/// `feature = level` as an indicator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub feature: usize,
    pub level: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub a: Indicator,
    pub b: Indicator,
    /// Per treatment.
    pub coefficients: Vec<f64>,
}

/// `μ(x, a) = baseline[a] + effects[a] · e(x) (+ interaction)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub baseline: Vec<f64>,
    pub effects: Vec<Vec<f64>>,
    pub noise_std: f64,
    pub interaction: Option<Interaction>,
}

/// Multinomial logit with treatment 0 as reference: row `a` holds the
/// intercept then one coefficient per indicator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropensitySpec {
    pub coefficients: Vec<Vec<f64>>,
}

impl PropensitySpec {
    /// All coefficients zero: uniform assignment.
    pub fn zeroed(&self) -> Self {
        PropensitySpec { coefficients: self.coefficients.iter().map(|r| vec![0.0; r.len()]).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub features: Vec<FeatureSpec>,
    pub treatments: Vec<TreatmentSpec>,
    pub outcome: OutcomeSpec,
    pub propensity: PropensitySpec,
}

/// What the generator knows and an analyst would not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub propensities: Vec<Vec<f64>>,
    /// Noise-free `μ(x_i, a)` for every treatment.
    pub potential: Vec<Vec<f64>>,
}

fn indicators(features: &[FeatureSpec], x: &[Value], out: &mut Vec<f64>) {
    out.clear();
    for (f, spec) in features.iter().enumerate() {
        let level = match x[f] {
            Value::Level(l) => l,
            Value::Number(_) => unreachable!("synthetic features are discrete"),
        };
        out.extend((1..spec.levels.len() as u32).map(|l| if l == level { 1.0 } else { 0.0 }));
    }
}

fn width(features: &[FeatureSpec]) -> usize {
    features.iter().map(|f| f.levels.len() - 1).sum()
}

/// Ground-truth models usable wherever an estimate is expected.
#[derive(Clone, Debug)]
pub struct TrueModel<'a, S> {
    pub features: &'a [FeatureSpec],
    pub spec: &'a S,
}

impl OutcomeSpec {
    pub fn mean(&self, features: &[FeatureSpec], x: &[Value], t: TreatmentId) -> f64 {
        let mut e = Vec::new();
        indicators(features, x, &mut e);
        let mut mu = self.baseline[t.0] + self.effects[t.0].iter().zip(&e).map(|(b, v)| b * v).sum::<f64>();
        if let Some(int) = &self.interaction {
            let on = |ind: Indicator| x[ind.feature] == Value::Level(ind.level);
            if on(int.a) && on(int.b) {
                mu += int.coefficients[t.0];
            }
        }
        mu
    }
}

impl PropensitySpec {
    pub fn probabilities(&self, features: &[FeatureSpec], x: &[Value]) -> Vec<f64> {
        let mut e = Vec::new();
        indicators(features, x, &mut e);
        let logits: Vec<f64> = self
            .coefficients
            .iter()
            .map(|row| row[0] + row[1..].iter().zip(&e).map(|(b, v)| b * v).sum::<f64>())
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        exp.into_iter().map(|v| v / total).collect()
    }
}

impl OutcomeEstimate<f64> for TrueModel<'_, OutcomeSpec> {
    fn predict(&self, x: &[Value], t: TreatmentId) -> f64 {
        self.spec.mean(self.features, x, t)
    }
}

impl PropensityEstimate<f64> for TrueModel<'_, PropensitySpec> {
    fn propensities(&self, x: &[Value]) -> Vec<f64> {
        self.spec.probabilities(self.features, x)
    }
}

impl GeneratorConfig {
    pub fn true_outcome(&self) -> TrueModel<'_, OutcomeSpec> {
        TrueModel { features: &self.features, spec: &self.outcome }
    }

    pub fn true_propensity(&self) -> TrueModel<'_, PropensitySpec> {
        TrueModel { features: &self.features, spec: &self.propensity }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        let (m, q) = (self.treatments.len(), width(&self.features));
        if m == 0 {
            return Err(Error::NoTreatments);
        }
        for f in &self.features {
            let total: f64 = f.probabilities.iter().sum();
            if f.levels.is_empty()
                || f.levels.len() != f.probabilities.len()
                || f.probabilities.iter().any(|&p| !(p >= 0.0))
                || (total - 1.0).abs() > 1e-9
            {
                return bad(format!("feature '{}' needs one probability per level summing to 1", f.name));
            }
        }
        let o = &self.outcome;
        if !(o.noise_std >= 0.0) {
            return bad("noise std must be non-negative".into());
        }
        if o.baseline.len() != m || o.effects.len() != m || o.effects.iter().any(|r| r.len() != q) {
            return bad(format!("outcome spec must have {m} baselines and {m} rows of {q} effects"));
        }
        if let Some(int) = &o.interaction {
            let ok = |ind: Indicator| {
                self.features.get(ind.feature).is_some_and(|f| (ind.level as usize) < f.levels.len())
            };
            if !ok(int.a) || !ok(int.b) || int.coefficients.len() != m {
                return bad("interaction refers to an unknown indicator or has the wrong width".into());
            }
        }
        let p = &self.propensity.coefficients;
        if p.len() != m || p.iter().any(|r| r.len() != q + 1) || p[0].iter().any(|&c| c != 0.0) {
            return bad(format!("propensity spec must have {m} rows of {} with row 0 all zero", q + 1));
        }
        if p.iter().flatten().any(|c| !c.is_finite()) {
            return bad("propensity coefficients must be finite".into());
        }
        Ok(())
    }

    pub fn feature_space(&self) -> Result<FeatureSpace<f64>> {
        FeatureSpace::new(
            self.features.iter().map(FeatureSpec::descriptor).collect(),
            self.features.iter().map(|f| f.cost).collect(),
        )
    }

    pub fn treatment_space(&self) -> Result<TreatmentSpace<f64>> {
        TreatmentSpace::new(
            self.treatments.iter().map(|t| t.name.clone()).collect(),
            self.treatments.iter().map(|t| t.cost).collect(),
        )
    }

    /// Asthma-flavoured costs (examinations 1 to 6, treatments 10 and 15)
    /// with synthetic coefficients keeping every outcome mean in [0, 100].
    pub fn preset(n: usize) -> Self {
        let features = vec![
            FeatureSpec::categorical("age_group", &[("child", 0.3), ("adult", 0.5), ("senior", 0.2)], 1.0),
            FeatureSpec::binary("smoker", 0.3, 1.0),
            FeatureSpec::binary("wheezing", 0.4, 2.0),
            FeatureSpec::binary("allergy_test", 0.35, 4.0),
            FeatureSpec::categorical("spirometry", &[("normal", 0.5), ("mild", 0.3), ("severe", 0.2)], 4.0),
            FeatureSpec::binary("chest_xray", 0.2, 6.0),
        ];
        let treatments = vec![
            TreatmentSpec { name: "quick_relief".into(), cost: 10.0 },
            TreatmentSpec { name: "controller".into(), cost: 15.0 },
        ];
        // columns: adult, senior, smoker, wheezing, allergy, mild, severe, xray
        let outcome = OutcomeSpec {
            baseline: vec![62.0, 52.0],
            effects: vec![
                vec![2.0, -5.0, -6.0, -10.0, -3.0, -10.0, -26.0, -4.0],
                vec![2.0, -3.0, -4.0, 4.0, 6.0, 8.0, 12.0, -8.0],
            ],
            noise_std: 5.0,
            interaction: None,
        };
        let propensity = PropensitySpec {
            coefficients: vec![vec![0.0; 9], vec![-0.4, 0.0, 0.3, 0.5, 1.0, 0.2, 0.4, 1.2, 0.0]],
        };
        GeneratorConfig { n, features, treatments, outcome, propensity }
    }

    /// The preset plus a smoker-and-wheezing interaction a linear model
    /// cannot represent.
    pub fn misspecified_preset(n: usize) -> Self {
        let mut cfg = Self::preset(n);
        cfg.outcome.interaction = Some(Interaction {
            a: Indicator { feature: 1, level: 1 },
            b: Indicator { feature: 2, level: 1 },
            coefficients: vec![-8.0, 10.0],
        });
        cfg
    }

    /// `p` binary features with costs cycling through 1, 2, 4, 6, `m`
    /// treatments costing 10, 15, 20, … and random coefficients drawn from
    /// `seed`, scaled so outcome means stay in [0, 100].
    pub fn random_binary(n: usize, p: usize, m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0ef);
        let costs = [1.0, 2.0, 4.0, 6.0];
        let features = (0..p)
            .map(|f| FeatureSpec::binary(format!("x{}", f + 1), rng.random_range(0.2..0.8), costs[f % 4]))
            .collect();
        let treatments =
            (0..m).map(|t| TreatmentSpec { name: format!("T{}", t + 1), cost: 10.0 + 5.0 * t as f64 }).collect();
        let scale = 40.0 / p.max(1) as f64;
        let effects = (0..m).map(|_| (0..p).map(|_| rng.random_range(-scale..scale)).collect()).collect();
        let baseline = (0..m).map(|_| rng.random_range(45.0..55.0)).collect();
        let mut coefficients = vec![vec![0.0; p + 1]];
        for _ in 1..m {
            let mut row = vec![rng.random_range(-0.5..0.5)];
            row.extend((0..p).map(|_| rng.random_range(-1.5 / (p as f64).sqrt()..1.5 / (p as f64).sqrt())));
            coefficients.push(row);
        }
        GeneratorConfig {
            n,
            features,
            treatments,
            outcome: OutcomeSpec { baseline, effects, noise_std: 5.0, interaction: None },
            propensity: PropensitySpec { coefficients },
        }
    }
}

/// Draws `config.n` subjects: features independently from their level
/// distributions, the treatment from the true propensities, and the outcome
/// as `μ(x, a)` plus Gaussian noise.
pub fn generate(config: &GeneratorConfig, seed: u64) -> Result<(Dataset<f64>, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<WeightedIndex<f64>> = config
        .features
        .iter()
        .map(|f| WeightedIndex::new(&f.probabilities).map_err(|e| Error::Config(format!("{}: {e}", f.name))))
        .collect::<Result<_>>()?;
    let noise = Normal::new(0.0, config.outcome.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let truth_o = config.true_outcome();
    let truth_p = config.true_propensity();
    let mut records = Vec::with_capacity(config.n);
    let mut truth = GroundTruth { propensities: Vec::with_capacity(config.n), potential: Vec::with_capacity(config.n) };
    for _ in 0..config.n {
        let x: Vec<Value> = levels.iter().map(|d| Value::Level(d.sample(&mut rng) as u32)).collect();
        let w = truth_p.propensities(&x);
        let a = WeightedIndex::new(&w).map_err(|e| Error::Config(e.to_string()))?.sample(&mut rng);
        let mu: Vec<f64> = (0..config.treatments.len()).map(|t| truth_o.predict(&x, TreatmentId(t))).collect();
        let y = mu[a] + if config.outcome.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        records.push(SubjectRecord { x, treatment: TreatmentId(a), outcome: y });
        truth.propensities.push(w);
        truth.potential.push(mu);
    }
    let data = Dataset::new(config.feature_space()?, config.treatment_space()?, records)?;
    Ok((data, truth))
}

/// `(1/N) Σ_i μ(x_i, π(x_i))`.
pub fn true_policy_value(list: &DecisionList, data: &Dataset<f64>, truth: &GroundTruth) -> f64 {
    let total: f64 = data
        .records()
        .iter()
        .zip(&truth.potential)
        .map(|(r, mu)| mu[list.assign(&r.x).0])
        .sum();
    total / data.len() as f64
}

/// Mean of the per-subject best potential outcome.
pub fn oracle_value(truth: &GroundTruth) -> f64 {
    let total: f64 = truth.potential.iter().map(|mu| mu.iter().copied().fold(f64::NEG_INFINITY, f64::max)).sum();
    total / truth.potential.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Pattern, Predicate, Rule};

    #[test]
    fn presets_validate_and_stay_in_range() {
        for cfg in [GeneratorConfig::preset(2000), GeneratorConfig::misspecified_preset(2000), GeneratorConfig::random_binary(2000, 15, 3, 4)] {
            cfg.validate().unwrap();
            let (data, truth) = generate(&cfg, 9).unwrap();
            assert_eq!(data.len(), 2000);
            for (w, mu) in truth.propensities.iter().zip(&truth.potential) {
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(w.iter().all(|&p| p > 0.0 && p < 1.0));
                assert!(mu.iter().all(|&v| (0.0..=100.0).contains(&v)), "{mu:?}");
            }
        }
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = GeneratorConfig::preset(500);
        assert_eq!(generate(&cfg, 3).unwrap(), generate(&cfg, 3).unwrap());
        assert_ne!(generate(&cfg, 3).unwrap().0, generate(&cfg, 4).unwrap().0);
    }

    #[test]
    fn uniform_assignment_frequencies() {
        let mut cfg = GeneratorConfig::random_binary(10_000, 4, 3, 1);
        cfg.propensity = cfg.propensity.zeroed();
        let (data, _) = generate(&cfg, 17).unwrap();
        let sd = (10_000.0_f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in data.treatment_counts() {
            assert!((c as f64 - 10_000.0 / 3.0).abs() <= 3.0 * sd, "{c}");
        }
    }

    #[test]
    fn noiseless_outcomes_are_means() {
        let mut cfg = GeneratorConfig::misspecified_preset(300);
        cfg.outcome.noise_std = 0.0;
        let (data, truth) = generate(&cfg, 2).unwrap();
        for (r, mu) in data.records().iter().zip(&truth.potential) {
            assert_eq!(r.outcome, mu[r.treatment.0]);
        }
    }

    #[test]
    fn policy_values() {
        let cfg = GeneratorConfig::preset(1000);
        let (data, truth) = generate(&cfg, 5).unwrap();
        let always = DecisionList::default_only(TreatmentId(1));
        let mean1 = truth.potential.iter().map(|mu| mu[1]).sum::<f64>() / 1000.0;
        assert!((true_policy_value(&always, &data, &truth) - mean1).abs() < 1e-9);
        let severe = Pattern::new(vec![Predicate::eq_level(4, 2)], data.features()).unwrap();
        let list = DecisionList::new(vec![Rule::new(severe, TreatmentId(1))], TreatmentId(0));
        assert!(true_policy_value(&list, &data, &truth) <= oracle_value(&truth));
        assert!(true_policy_value(&always, &data, &truth) <= oracle_value(&truth));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = GeneratorConfig::preset(10);
        cfg.outcome.noise_std = -1.0;
        assert!(matches!(generate(&cfg, 0), Err(Error::Config(_))));
        let mut cfg = GeneratorConfig::preset(10);
        cfg.propensity.coefficients[0][0] = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = GeneratorConfig::preset(10);
        cfg.features[1].probabilities = vec![0.5, 0.6];
        assert!(cfg.validate().is_err());
    }
}
