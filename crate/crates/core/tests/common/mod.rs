#![allow(dead_code)]

use std::collections::BTreeSet;

use costregime::estimators::ScoreMatrix;
use costregime::{
    Dataset, DecisionList, FeatureDescriptor, FeatureSpace, Lambdas, Pattern, Predicate, Rule,
    RulePool, Scalar, SubjectRecord, TreatmentId, TreatmentSpace, Value,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub data: Dataset<f64>,
    pub scores: ScoreMatrix<f64>,
    pub patterns: Vec<Pattern>,
    pub pool: RulePool,
    pub lambdas: Lambdas<f64>,
    pub max_len: usize,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Binary features with small integer costs, integer-valued outcomes and
/// scores drawn independently per subject.
pub fn random_data<R: Rng>(rng: &mut R, n: usize, p: usize, m: usize) -> Dataset<f64> {
    let fs = FeatureSpace::new(
        (0..p).map(|f| FeatureDescriptor::binary(format!("f{}", f + 1))).collect(),
        (0..p).map(|_| rng.random_range(0..=6) as f64).collect(),
    )
    .unwrap();
    let ts = TreatmentSpace::new(
        (0..m).map(|t| format!("T{}", t + 1)).collect(),
        (0..m).map(|_| rng.random_range(0..=20) as f64).collect(),
    )
    .unwrap();
    let mut recs: Vec<SubjectRecord<f64>> = (0..n)
        .map(|_| SubjectRecord {
            x: (0..p).map(|_| Value::Level(rng.random_range(0..2))).collect(),
            treatment: TreatmentId(rng.random_range(0..m)),
            outcome: rng.random_range(0..=100) as f64,
        })
        .collect();
    for t in 0..m.min(n) {
        recs[t].treatment = TreatmentId(t);
    }
    Dataset::new(fs, ts, recs).unwrap()
}

pub fn random_pattern<R: Rng>(rng: &mut R, p: usize, max_len: usize) -> Pattern {
    let mut feats: Vec<usize> = (0..p).collect();
    feats.shuffle(rng);
    let len = rng.random_range(1..=max_len.min(p));
    Pattern::unchecked(feats[..len].iter().map(|&f| Predicate::eq_level(f, rng.random_range(0..2))).collect())
        .unwrap()
}

pub fn distinct_patterns<R: Rng>(rng: &mut R, p: usize, count: usize) -> Vec<Pattern> {
    let mut out: Vec<Pattern> = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < 1000 {
        tries += 1;
        let c = random_pattern(rng, p, 2);
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// N ≤ 40, p ≤ 4, at most 5 patterns crossed with 2 treatments, lists of
/// at most 3 rules.
pub fn small_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let n = r.random_range(8..=40);
    let p = r.random_range(2..=4);
    let data = random_data(&mut r, n, p, 2);
    let rows: Vec<Vec<f64>> =
        (0..n).map(|_| (0..2).map(|_| r.random_range(0..=200) as f64).collect()).collect();
    let scores = ScoreMatrix::from_rows(rows, 0.01).unwrap();
    let patterns = distinct_patterns(&mut r, p, 5);
    let pool = RulePool::cross(patterns.clone(), 2);
    let weights = [0.5, 1.0, 2.0];
    let lambdas = Lambdas::new(1.0, weights[r.random_range(0..3)], weights[r.random_range(0..3)]).unwrap();
    let max_len = r.random_range(1..=3);
    Instance { data, scores, patterns, pool, lambdas, max_len }
}

pub fn random_list<R: Rng>(rng: &mut R, patterns: &[Pattern], m: usize, max_rules: usize) -> DecisionList {
    let len = rng.random_range(0..=max_rules);
    let rules = (0..len)
        .map(|_| {
            let c = patterns[rng.random_range(0..patterns.len())].clone();
            Rule::new(c, TreatmentId(rng.random_range(0..m)))
        })
        .collect();
    DecisionList::new(rules, TreatmentId(rng.random_range(0..m)))
}

/// First-match routing straight from the predicate values: rule index or
/// `None` for the default.
pub fn naive_route(list: &DecisionList, x: &[Value]) -> Option<usize> {
    list.rules.iter().position(|rule| {
        rule.condition.predicates().iter().all(|p| match (x[p.feature], p.value) {
            (Value::Level(a), Value::Level(b)) => a == b,
            _ => panic!("instances are categorical"),
        })
    })
}

/// Features inspected along the route, as an explicit set.
pub fn naive_features(list: &DecisionList, x: &[Value]) -> BTreeSet<usize> {
    let upto = naive_route(list, x).map_or(list.rules.len(), |j| j + 1);
    list.rules[..upto]
        .iter()
        .flat_map(|r| r.condition.predicates().iter().map(|p| p.feature))
        .collect()
}

pub fn naive_psi<T: Scalar>(list: &DecisionList, x: &[Value], fs: &FeatureSpace<T>) -> T {
    naive_features(list, x).into_iter().fold(T::zero(), |acc, f| acc + fs.cost(f))
}

pub fn naive_phi<T: Scalar>(list: &DecisionList, x: &[Value], ts: &TreatmentSpace<T>) -> T {
    let t = naive_route(list, x).map_or(list.default, |j| list.rules[j].treatment);
    ts.cost(t)
}

pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Three subjects, two binary features costing 1 and 2, treatments costing
/// 10 and 15.
pub fn d3<T: Scalar>() -> Dataset<T> {
    let c = |v: i32| T::from_i32(v).unwrap();
    let features = FeatureSpace::new(
        vec![FeatureDescriptor::binary("f1"), FeatureDescriptor::binary("f2")],
        vec![c(1), c(2)],
    )
    .unwrap();
    let treatments = TreatmentSpace::new(vec!["T1".into(), "T2".into()], vec![c(10), c(15)]).unwrap();
    let rec = |a: u32, b: u32, t: usize, y: i32| SubjectRecord {
        x: vec![Value::Level(a), Value::Level(b)],
        treatment: TreatmentId(t),
        outcome: c(y),
    };
    Dataset::new(features, treatments, vec![rec(1, 0, 0, 80), rec(0, 1, 1, 60), rec(1, 1, 0, 100)]).unwrap()
}

pub fn eq(feature: usize, level: u32) -> Pattern {
    Pattern::unchecked(vec![Predicate::eq_level(feature, level)]).unwrap()
}
