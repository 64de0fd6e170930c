//! Self-checks of the library against independent recomputation.

use costregime::cover::verify_cover_objective;
use costregime::estimators::{FixedPropensity, ZeroOutcome};
use costregime::synthetic::{generate, GeneratorConfig};
use costregime::{
    build_pool, dr_scores, exhaustive_search, mine_patterns, objective, uct_search, ActionSpec, Dataset,
    DecisionList, FeatureDescriptor, FeatureSpace, Lambdas, MiningConfig, Pattern, Predicate, Rule, RulePool,
    ScoreMatrix, SearchConfig, SearchProblem, SubjectRecord, TreatmentId, TreatmentSpace, Value,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

struct Instance {
    data: Dataset<f64>,
    scores: ScoreMatrix<f64>,
    pool: RulePool,
    lambdas: Lambdas<f64>,
}

fn instance(seed: u64) -> Result<Instance> {
    let cfg = GeneratorConfig::random_binary(40, 4, 2, seed);
    let (data, _) = generate(&cfg, seed)?;
    let scores = dr_scores(&data, &cfg.true_propensity(), &cfg.true_outcome(), 0.01)?;
    let mining = MiningConfig { min_support: 3, max_pattern_len: 2, ..Default::default() };
    let (pool, _) = build_pool(&data, &mining, Some(6))?;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let w = [0.5, 1.0, 2.0];
    let lambdas = Lambdas::new(1.0, w[r.random_range(0..3)], w[r.random_range(0..3)])?;
    Ok(Instance { data, scores, pool, lambdas })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn hand_case() -> Result<Check> {
    let fs = FeatureSpace::new(vec![FeatureDescriptor::binary("f1"), FeatureDescriptor::binary("f2")], vec![1.0, 2.0])?;
    let ts = TreatmentSpace::new(vec!["T1".into(), "T2".into()], vec![10.0, 15.0])?;
    let rec = |a, b, t, y| SubjectRecord { x: vec![Value::Level(a), Value::Level(b)], treatment: TreatmentId(t), outcome: y };
    let data = Dataset::new(fs, ts, vec![rec(1, 0, 0, 80.0), rec(0, 1, 1, 60.0), rec(1, 1, 0, 100.0)])?;
    let scores = dr_scores(&data, &FixedPropensity(vec![0.5, 0.5]), &ZeroOutcome, 0.01)?;
    let pat = Pattern::new(vec![Predicate::eq_level(0, 1)], data.features())?;
    let list = DecisionList::new(vec![Rule::new(pat, TreatmentId(0))], TreatmentId(1));
    let value = objective(&list, &data, &scores, &Lambdas::ones());
    let expected = 160.0 - 1.0 - 35.0 / 3.0;
    Ok(Check {
        name: "hand_case".into(),
        passed: close(value, expected),
        cases: 1,
        detail: format!("objective {value:.6}, expected {expected:.6}"),
    })
}

fn path_rewards(seeds: &[u64]) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for &s in seeds {
        let inst = instance(s)?;
        let problem = SearchProblem::new(&inst.data, &inst.scores, &inst.pool, inst.lambdas)?;
        let mut r = ChaCha8Rng::seed_from_u64(s ^ 1);
        let mut state = problem.initial_state();
        let mut total = 0.0;
        while !state.is_terminal() {
            let a = if inst.pool.is_empty() || r.random_bool(0.3) {
                ActionSpec::Default(TreatmentId(r.random_range(0..2)))
            } else {
                ActionSpec::Rule(r.random_range(0..inst.pool.len()))
            };
            total += problem.apply(&mut state, a)?;
        }
        let list = problem.decision_list(state.prefix())?;
        let direct = objective(&list, &inst.data, &inst.scores, &inst.lambdas);
        worst = worst.max((total - direct).abs() / direct.abs().max(1.0));
    }
    Ok(Check {
        name: "path_rewards_sum_to_objective".into(),
        passed: worst <= 1e-9,
        cases: seeds.len(),
        detail: format!("worst relative gap {worst:.3e}"),
    })
}

fn search_vs_exhaustive(seeds: &[u64]) -> Result<Check> {
    let (mut exact, mut ok) = (0, true);
    for &s in seeds {
        let inst = instance(s)?;
        let problem = SearchProblem::new(&inst.data, &inst.scores, &inst.pool, inst.lambdas)?;
        let best = exhaustive_search(&problem, 2, u128::MAX)?;
        let cfg = SearchConfig { iterations: 3000, max_list_len: 2, seed: s, ..Default::default() };
        let found = uct_search(&problem, &cfg)?;
        ok &= found.value <= best.value + 1e-9 && close(found.value, objective(&found.list, &inst.data, &inst.scores, &inst.lambdas));
        exact += close(found.value, best.value) as usize;
    }
    Ok(Check {
        name: "search_bounded_by_exhaustive".into(),
        passed: ok,
        cases: seeds.len(),
        detail: format!("optimum reached in {exact}/{}", seeds.len()),
    })
}

fn cover_equivalence(seeds: &[u64]) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &s in seeds {
        let inst = instance(s)?;
        let base = inst.pool.patterns().to_vec();
        if base.is_empty() {
            continue;
        }
        let mut r = ChaCha8Rng::seed_from_u64(s ^ 2);
        let len = r.random_range(1..=base.len().min(3));
        let mut picked: Vec<usize> = Vec::new();
        while picked.len() < len {
            let k = r.random_range(0..base.len());
            if !picked.contains(&k) {
                picked.push(k);
            }
        }
        let rules = picked.iter().map(|&k| Rule::new(base[k].clone(), TreatmentId(r.random_range(0..2)))).collect();
        let list = DecisionList::new(rules, TreatmentId(r.random_range(0..2)));
        let c = verify_cover_objective(&list, &base, &inst.data, &inst.scores, &inst.lambdas)?;
        worst = worst.max(c.difference / c.objective.abs().max(1.0));
        cases += 1;
    }
    Ok(Check {
        name: "cover_weight_matches_objective".into(),
        passed: worst <= 1e-9,
        cases,
        detail: format!("worst relative gap {worst:.3e}"),
    })
}

fn mining_support(seeds: &[u64]) -> Result<Check> {
    let mut bad = 0;
    let mut total = 0;
    for &s in seeds {
        let inst = instance(s)?;
        let cfg = MiningConfig { min_support: 4, max_pattern_len: 3, ..Default::default() };
        for e in mine_patterns(&inst.data, &cfg)?.entries {
            let count = inst.data.records().iter().filter(|r| e.pattern.matches(&r.x)).count();
            bad += (count != e.support || count < cfg.min_support) as usize;
            total += 1;
        }
    }
    Ok(Check {
        name: "mined_support_counts".into(),
        passed: bad == 0,
        cases: seeds.len(),
        detail: format!("{total} patterns, {bad} wrong"),
    })
}

pub fn run(seed: u64, cases: usize) -> Result<VerifyReport> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..cases).map(|_| r.random()).collect();
    let checks = vec![
        hand_case()?,
        path_rewards(&seeds)?,
        search_vs_exhaustive(&seeds)?,
        cover_equivalence(&seeds)?,
        mining_support(&seeds)?,
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { seed, passed, checks })
}
