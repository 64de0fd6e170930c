//! Candidate pattern pool: numeric binning followed by Apriori over
//! `(feature = level)` items.

use std::collections::{BTreeMap, HashSet};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Dataset, FeatureDescriptor, FeatureKind, FeatureSpace, Operator, Pattern, Predicate, Value,
};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    /// Minimum number of records a pattern must cover.
    pub min_support: usize,
    pub max_pattern_len: usize,
    /// Cut points per numeric feature name. Numeric features without an
    /// entry are binned at their empirical quartiles.
    #[serde(default)]
    pub numeric_bins: BTreeMap<String, Vec<f64>>,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig { min_support: 1, max_pattern_len: 2, numeric_bins: BTreeMap::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinedPattern {
    pub pattern: Pattern,
    pub support: usize,
}

/// Frequent patterns ordered by length, then lexicographically by
/// `(feature, level)` items.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternPool {
    pub entries: Vec<MinedPattern>,
}

impl PatternPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn patterns(&self) -> impl Iterator<Item = &Pattern> {
        self.entries.iter().map(|e| &e.pattern)
    }
}

/// Per-feature cut points learned from (or supplied for) a dataset.
///
/// Bins are left-closed, right-open: a value equal to a cut point falls in
/// the bin above it, and values outside the outer cuts go to the edge bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    /// `cuts[f]` is `Some` for every numeric feature of the source space.
    pub cuts: Vec<Option<Vec<f64>>>,
}

impl Discretizer {
    pub fn fit<T: Scalar>(data: &Dataset<T>, config: &MiningConfig) -> Result<Self> {
        let space = data.features();
        for name in config.numeric_bins.keys() {
            match space.index_of(name) {
                Some(f) if space.descriptor(f).kind == FeatureKind::Numeric => {}
                _ => {
                    return Err(Error::Config(format!(
                        "cut points given for '{name}', which is not a numeric feature"
                    )))
                }
            }
        }
        let mut cuts = Vec::with_capacity(space.len());
        for (f, desc) in space.descriptors().iter().enumerate() {
            if desc.kind != FeatureKind::Numeric {
                cuts.push(None);
                continue;
            }
            let c = match config.numeric_bins.get(&desc.name) {
                Some(c) => {
                    if c.is_empty() {
                        return Err(Error::Config(format!("empty cut list for '{}'", desc.name)));
                    }
                    if c.iter().any(|v| !v.is_finite()) || c.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::Config(format!(
                            "cut points for '{}' must be finite and strictly increasing",
                            desc.name
                        )));
                    }
                    c.clone()
                }
                None => quartile_cuts(data.records().iter().map(|r| match r.x[f] {
                    Value::Number(v) => v,
                    Value::Level(l) => l as f64,
                })),
            };
            cuts.push(Some(c));
        }
        Ok(Discretizer { cuts })
    }

    pub fn bin(cuts: &[f64], v: f64) -> u32 {
        cuts.partition_point(|&c| c <= v) as u32
    }

    pub fn bin_labels(cuts: &[f64]) -> Vec<String> {
        if cuts.is_empty() {
            return vec!["(-inf,inf)".into()];
        }
        let mut labels = Vec::with_capacity(cuts.len() + 1);
        labels.push(format!("(-inf,{})", cuts[0]));
        for w in cuts.windows(2) {
            labels.push(format!("[{},{})", w[0], w[1]));
        }
        labels.push(format!("[{},inf)", cuts[cuts.len() - 1]));
        labels
    }

    /// The binned feature space; costs are unchanged.
    pub fn space<T: Scalar>(&self, space: &FeatureSpace<T>) -> Result<FeatureSpace<T>> {
        let descriptors = space
            .descriptors()
            .iter()
            .zip(&self.cuts)
            .map(|(d, c)| match c {
                Some(c) => FeatureDescriptor::categorical(d.name.clone(), Self::bin_labels(c)),
                None => d.clone(),
            })
            .collect();
        FeatureSpace::new(descriptors, space.costs().to_vec())
    }

    pub fn apply<T: Scalar>(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        if self.cuts.len() != data.features().len() {
            return Err(Error::Config("discretizer was fitted on a different feature space".into()));
        }
        if self.cuts.iter().all(Option::is_none) {
            return Ok(data.clone());
        }
        let space = self.space(data.features())?;
        let records = data
            .records()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                for (v, c) in r.x.iter_mut().zip(&self.cuts) {
                    if let (Some(c), Value::Number(n)) = (c, *v) {
                        *v = Value::Level(Self::bin(c, n));
                    }
                }
                r
            })
            .collect();
        Dataset::new(space, data.treatments().clone(), records)
    }

    /// Rewrites a pattern over binned levels as interval predicates on the
    /// original numeric feature, so lists can be applied to raw data.
    pub fn lift(&self, pattern: &Pattern) -> Result<Pattern> {
        let mut out = Vec::with_capacity(pattern.len() * 2);
        for p in pattern.predicates() {
            let cuts = self.cuts.get(p.feature).and_then(Option::as_ref);
            match (cuts, p.op, p.value) {
                (Some(c), Operator::Eq, Value::Level(b)) => {
                    let b = b as usize;
                    if b > c.len() {
                        return Err(Error::InvalidPattern(format!("bin {b} out of range")));
                    }
                    if b > 0 {
                        out.push(Predicate::new(p.feature, Operator::Ge, Value::Number(c[b - 1])));
                    }
                    if b < c.len() {
                        out.push(Predicate::new(p.feature, Operator::Lt, Value::Number(c[b])));
                    }
                    if c.is_empty() {
                        out.push(Predicate::new(
                            p.feature,
                            Operator::Ge,
                            Value::Number(f64::NEG_INFINITY),
                        ));
                    }
                }
                (Some(_), _, _) => {
                    return Err(Error::InvalidPattern(
                        "only equality predicates on bins can be lifted".into(),
                    ))
                }
                (None, _, _) => out.push(*p),
            }
        }
        Pattern::unchecked(out)
    }
}

/// Type-7 empirical quartiles, deduplicated into strictly increasing cuts.
fn quartile_cuts(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut cuts: Vec<f64> = Vec::with_capacity(3);
    if n == 0 {
        return cuts;
    }
    for q in [0.25, 0.5, 0.75] {
        let h = (n - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let c = v[lo] + (h - lo as f64) * (v[hi] - v[lo]);
        // a cut at the minimum would leave the lowest bin empty
        if c > v[0] && cuts.last().is_none_or(|&last| c > last) {
            cuts.push(c);
        }
    }
    cuts
}

/// Replaces numeric features with bin-label categoricals.
pub fn discretize<T: Scalar>(data: &Dataset<T>, config: &MiningConfig) -> Result<Dataset<T>> {
    Discretizer::fit(data, config)?.apply(data)
}

type Item = (usize, u32);

/// All conjunctions of equality items with support ≥ `min_support` and at
/// most `max_pattern_len` items, one item per feature.
pub fn mine_patterns<T: Scalar>(data: &Dataset<T>, config: &MiningConfig) -> Result<PatternPool> {
    if config.min_support == 0 {
        return Err(Error::Config("min_support must be at least 1".into()));
    }
    if config.max_pattern_len == 0 {
        return Err(Error::Config("max_pattern_len must be at least 1".into()));
    }
    let space = data.features();
    if let Some(d) = space.descriptors().iter().find(|d| d.kind == FeatureKind::Numeric) {
        return Err(Error::Config(format!(
            "numeric feature '{}' must be discretized before mining",
            d.name
        )));
    }
    let n = data.len();
    let mut pool = PatternPool::default();
    if config.min_support > n {
        return Ok(pool);
    }

    let mut level: Vec<(Vec<Item>, FixedBitSet)> = Vec::new();
    for (f, desc) in space.descriptors().iter().enumerate() {
        let mut tids = vec![FixedBitSet::with_capacity(n); desc.levels.len()];
        for (i, r) in data.records().iter().enumerate() {
            if let Value::Level(l) = r.x[f] {
                tids[l as usize].insert(i);
            }
        }
        for (l, t) in tids.into_iter().enumerate() {
            if t.count_ones(..) >= config.min_support {
                level.push((vec![(f, l as u32)], t));
            }
        }
    }

    let mut k = 1;
    while !level.is_empty() {
        for (items, tids) in &level {
            let preds = items.iter().map(|&(f, l)| Predicate::eq_level(f, l)).collect();
            pool.entries.push(MinedPattern {
                pattern: Pattern::unchecked(preds)?,
                support: tids.count_ones(..),
            });
        }
        if k == config.max_pattern_len {
            break;
        }
        let frequent: HashSet<&[Item]> = level.iter().map(|(items, _)| items.as_slice()).collect();
        let mut next = Vec::new();
        for a in 0..level.len() {
            let (ia, ta) = &level[a];
            for (ib, tb) in &level[a + 1..] {
                if ia[..k - 1] != ib[..k - 1] {
                    // siblings share a prefix and are contiguous in sorted order
                    break;
                }
                let (last_a, last_b) = (ia[k - 1], ib[k - 1]);
                if last_a.0 == last_b.0 {
                    continue;
                }
                let mut cand = ia.clone();
                cand.push(last_b);
                let all_subsets_frequent = (0..k - 1).all(|drop| {
                    let sub: Vec<Item> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != drop)
                        .map(|(_, &it)| it)
                        .collect();
                    frequent.contains(sub.as_slice())
                });
                if !all_subsets_frequent {
                    continue;
                }
                let mut tids = ta.clone();
                tids.intersect_with(tb);
                if tids.count_ones(..) >= config.min_support {
                    next.push((cand, tids));
                }
            }
        }
        level = next;
        k += 1;
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::d3;
    use crate::model::{SubjectRecord, TreatmentId, TreatmentSpace};

    fn items(p: &Pattern) -> Vec<Item> {
        p.predicates()
            .iter()
            .map(|q| match q.value {
                Value::Level(l) => (q.feature, l),
                Value::Number(_) => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn d3_support_two() {
        let cfg = MiningConfig { min_support: 2, max_pattern_len: 2, ..Default::default() };
        let pool = mine_patterns(&d3::<f64>(), &cfg).unwrap();
        let got: Vec<_> = pool.entries.iter().map(|e| (items(&e.pattern), e.support)).collect();
        assert_eq!(got, vec![(vec![(0, 1)], 2), (vec![(1, 1)], 2)]);
    }

    #[test]
    fn d3_support_one() {
        let cfg = MiningConfig { min_support: 1, max_pattern_len: 2, ..Default::default() };
        let pool = mine_patterns(&d3::<f64>(), &cfg).unwrap();
        let got: Vec<_> = pool.entries.iter().map(|e| items(&e.pattern)).collect();
        assert_eq!(
            got,
            vec![
                vec![(0, 0)],
                vec![(0, 1)],
                vec![(1, 0)],
                vec![(1, 1)],
                vec![(0, 0), (1, 1)],
                vec![(0, 1), (1, 0)],
                vec![(0, 1), (1, 1)],
            ]
        );
        assert!(pool.entries.iter().all(|e| !e.pattern.is_empty()));
    }

    #[test]
    fn support_above_n_gives_empty_pool() {
        let cfg = MiningConfig { min_support: 4, max_pattern_len: 2, ..Default::default() };
        assert!(mine_patterns(&d3::<f64>(), &cfg).unwrap().is_empty());
    }

    fn ages(values: &[f64]) -> Dataset<f64> {
        let fs = FeatureSpace::new(
            vec![FeatureDescriptor::numeric("Age"), FeatureDescriptor::binary("b")],
            vec![1.0, 1.0],
        )
        .unwrap();
        let ts = TreatmentSpace::new(vec!["T1".into(), "T2".into()], vec![0.0, 0.0]).unwrap();
        let records = values
            .iter()
            .map(|&v| SubjectRecord {
                x: vec![Value::Number(v), Value::Level(0)],
                treatment: TreatmentId(0),
                outcome: 0.0,
            })
            .collect();
        Dataset::new(fs, ts, records).unwrap()
    }

    #[test]
    fn binning_convention() {
        let data = ages(&[45.0, 30.0, 10.0, 50.0, 99.0]);
        let mut cfg = MiningConfig::default();
        cfg.numeric_bins.insert("Age".into(), vec![30.0, 50.0]);
        let out = discretize(&data, &cfg).unwrap();
        let desc = out.features().descriptor(0);
        assert_eq!(desc.levels, vec!["(-inf,30)", "[30,50)", "[50,inf)"]);
        let bins: Vec<_> = out.records().iter().map(|r| r.x[0]).collect();
        assert_eq!(
            bins,
            vec![Value::Level(1), Value::Level(1), Value::Level(0), Value::Level(2), Value::Level(2)]
        );
        assert_eq!(out.len(), data.len());
        assert_eq!(out.record(3).treatment, data.record(3).treatment);
    }

    #[test]
    fn empty_cut_list_is_rejected() {
        let mut cfg = MiningConfig::default();
        cfg.numeric_bins.insert("Age".into(), vec![]);
        assert!(matches!(discretize(&ages(&[1.0]), &cfg), Err(Error::Config(_))));
        cfg.numeric_bins.insert("Age".into(), vec![2.0, 1.0]);
        assert!(matches!(discretize(&ages(&[1.0]), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn no_numeric_features_is_identity() {
        let d = d3::<f64>();
        assert_eq!(discretize(&d, &MiningConfig::default()).unwrap(), d);
    }

    #[test]
    fn quartiles_by_default() {
        let data = ages(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let disc = Discretizer::fit(&data, &MiningConfig::default()).unwrap();
        assert_eq!(disc.cuts[0], Some(vec![2.0, 3.0, 4.0]));
        let constant = ages(&[7.0, 7.0]);
        let disc = Discretizer::fit(&constant, &MiningConfig::default()).unwrap();
        assert_eq!(disc.cuts[0], Some(vec![]));
    }

    #[test]
    fn lifted_patterns_agree_with_bins() {
        let data = ages(&[5.0, 29.9, 30.0, 49.0, 50.0, 80.0]);
        let mut cfg = MiningConfig::default();
        cfg.numeric_bins.insert("Age".into(), vec![30.0, 50.0]);
        let disc = Discretizer::fit(&data, &cfg).unwrap();
        let binned = disc.apply(&data).unwrap();
        for b in 0..3 {
            let p = Pattern::unchecked(vec![Predicate::eq_level(0, b)]).unwrap();
            let lifted = disc.lift(&p).unwrap();
            for (raw, bin) in data.records().iter().zip(binned.records()) {
                assert_eq!(p.matches(&bin.x), lifted.matches(&raw.x));
            }
        }
    }
}
