//! Weighted exact-cover view of the list objective.
//!
//! A decision list over base patterns `c_1..c_L` is equivalent to the
//! unordered set of rules `(c_j ∧ ¬c_1 ∧ … ∧ ¬c_{j−1}, a_j)` plus
//! `(¬c_1 ∧ … ∧ ¬c_L, a_0)`, which covers every subject exactly once. Giving
//! each augmented rule the weight Ψ below makes `−ΣΨ` equal the objective.
//! Nothing here solves the cover problem; it is a bookkeeping cross-check.

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ScoreMatrix;
use crate::model::{Dataset, DecisionList, FeatureMask, Pattern, TreatmentId, Value};
use crate::objective::{objective, Lambdas};
use crate::scalar::Scalar;

/// Largest base pool the augmented construction accepts.
pub const MAX_BASE_PATTERNS: usize = 8;

/// A conjunction of at most one base pattern and the negations of others,
/// referring to base patterns by index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedRule {
    pub positive: Option<usize>,
    /// Sorted, distinct.
    pub negated: Vec<usize>,
    pub treatment: TreatmentId,
    pub features: FeatureMask,
}

impl AugmentedRule {
    fn new(base: &[Pattern], positive: Option<usize>, mut negated: Vec<usize>, treatment: TreatmentId) -> Self {
        negated.sort_unstable();
        negated.dedup();
        let features = positive
            .iter()
            .chain(&negated)
            .fold(FeatureMask::EMPTY, |acc, &k| acc.union(base[k].feature_set()));
        AugmentedRule { positive, negated, treatment, features }
    }

    pub fn matches(&self, base: &[Pattern], x: &[Value]) -> bool {
        self.positive.is_none_or(|k| base[k].matches(x)) && self.negated.iter().all(|&k| !base[k].matches(x))
    }

    pub fn display(&self, base: &[Pattern], features: &crate::model::FeatureSpace<impl Scalar>) -> String {
        let mut parts: Vec<String> = self.positive.iter().map(|&k| format!("({})", base[k].display(features))).collect();
        parts.extend(self.negated.iter().map(|&k| format!("not ({})", base[k].display(features))));
        format!("{} -> {}", parts.join(" and "), self.treatment)
    }
}

/// Size of the augmented pool for `k` base patterns and `m` treatments.
pub fn augmented_pool_size(k: usize, m: usize) -> u128 {
    if k == 0 {
        return 0;
    }
    let k128 = k as u128;
    m as u128 * (k128 * (1u128 << (k - 1)) + (1u128 << k) - 1)
}

/// For every treatment: each base pattern with each subset of negations of
/// the other patterns, then every non-empty combination of negations alone.
pub fn build_augmented_pool(base: &[Pattern], treatments: usize) -> Result<Vec<AugmentedRule>> {
    let k = base.len();
    if k > MAX_BASE_PATTERNS {
        return Err(Error::BudgetExceeded {
            needed: augmented_pool_size(k, treatments),
            budget: augmented_pool_size(MAX_BASE_PATTERNS, treatments),
        });
    }
    let mut out = Vec::new();
    for t in (0..treatments).map(TreatmentId) {
        for p in 0..k {
            let others: Vec<usize> = (0..k).filter(|&q| q != p).collect();
            for subset in 0..(1usize << others.len()) {
                let neg = others.iter().enumerate().filter(|(b, _)| subset >> b & 1 == 1).map(|(_, &q)| q);
                out.push(AugmentedRule::new(base, Some(p), neg.collect(), t));
            }
        }
        for subset in 1..(1usize << k) {
            let neg = (0..k).filter(|b| subset >> b & 1 == 1).collect();
            out.push(AugmentedRule::new(base, None, neg, t));
        }
    }
    Ok(out)
}

/// `Ψ(j) = Σ_{i ⊨ c_j} [−λ1/N·o(i,a_j) + λ2/N·Σ_{e∈c_j} d(e) + λ3/N·d'(a_j)]`.
pub fn psi_weight<T: Scalar>(
    rule: &AugmentedRule,
    base: &[Pattern],
    data: &Dataset<T>,
    scores: &ScoreMatrix<T>,
    lambdas: &Lambdas<T>,
) -> T {
    let n = T::from_count(data.len());
    let assess = data.features().mask_cost(rule.features);
    let treat = data.treatments().cost(rule.treatment);
    let mut total = T::zero();
    for (i, r) in data.records().iter().enumerate() {
        if rule.matches(base, &r.x) {
            total += -(lambdas.outcome / n) * scores.get(i, rule.treatment)
                + lambdas.assessment / n * assess
                + lambdas.treatment / n * treat;
        }
    }
    total
}

/// Candidate augmented rules with their weights over subjects `0..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverInstance<T> {
    pub universe: usize,
    pub rules: Vec<AugmentedRule>,
    pub weights: Vec<T>,
    coverage: Vec<FixedBitSet>,
}

impl<T: Scalar> CoverInstance<T> {
    pub fn new(
        rules: Vec<AugmentedRule>,
        base: &[Pattern],
        data: &Dataset<T>,
        scores: &ScoreMatrix<T>,
        lambdas: &Lambdas<T>,
    ) -> Self {
        let weights = rules.iter().map(|r| psi_weight(r, base, data, scores, lambdas)).collect();
        let coverage = rules
            .iter()
            .map(|rule| {
                let mut s = FixedBitSet::with_capacity(data.len());
                for (i, r) in data.records().iter().enumerate() {
                    s.set(i, rule.matches(base, &r.x));
                }
                s
            })
            .collect();
        CoverInstance { universe: data.len(), rules, weights, coverage }
    }

    /// Subjects rule `j` covers.
    pub fn covered(&self, j: usize) -> &FixedBitSet {
        &self.coverage[j]
    }

    /// True when the selected rules cover every subject exactly once.
    pub fn is_exact_cover(&self, selection: &[usize]) -> bool {
        let mut seen = FixedBitSet::with_capacity(self.universe);
        for &j in selection {
            if !seen.is_disjoint(&self.coverage[j]) {
                return false;
            }
            seen.union_with(&self.coverage[j]);
        }
        seen.count_ones(..) == self.universe
    }

    pub fn total_weight(&self, selection: &[usize]) -> T {
        crate::scalar::sum(selection.iter().map(|&j| self.weights[j]))
    }
}

/// The cover a list induces: rule `j` becomes `c_j ∧ ¬c_1 ∧ … ∧ ¬c_{j−1}`,
/// the default `¬c_1 ∧ … ∧ ¬c_L`.
pub fn list_to_cover(list: &DecisionList, base: &[Pattern]) -> Result<Vec<AugmentedRule>> {
    let mut idx = Vec::with_capacity(list.len());
    for (j, rule) in list.rules.iter().enumerate() {
        match base.iter().position(|p| *p == rule.condition) {
            Some(k) => idx.push(k),
            None => return Err(Error::PatternNotInPool(j)),
        }
    }
    let mut out: Vec<AugmentedRule> = list
        .rules
        .iter()
        .enumerate()
        .map(|(j, rule)| AugmentedRule::new(base, Some(idx[j]), idx[..j].to_vec(), rule.treatment))
        .collect();
    out.push(AugmentedRule::new(base, None, idx, list.default));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverCheck<T> {
    pub objective: T,
    /// `−Σ_{j∈cover} Ψ(j)`.
    pub negated_weight: T,
    pub difference: f64,
}

pub fn verify_cover_objective<T: Scalar>(
    list: &DecisionList,
    base: &[Pattern],
    data: &Dataset<T>,
    scores: &ScoreMatrix<T>,
    lambdas: &Lambdas<T>,
) -> Result<CoverCheck<T>> {
    let cover = list_to_cover(list, base)?;
    let objective = objective(list, data, scores, lambdas);
    let total = crate::scalar::sum(cover.iter().map(|r| psi_weight(r, base, data, scores, lambdas)));
    let negated_weight = -total;
    let difference = (objective - negated_weight).to_f64_lossy().abs();
    Ok(CoverCheck { objective, negated_weight, difference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{dr_scores, FixedPropensity, ZeroOutcome};
    use crate::model::fixtures::{d3, eq, pi, pi2};
    use crate::model::Rule;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn inputs() -> (Dataset<Q>, ScoreMatrix<Q>, Vec<Pattern>) {
        let data = d3::<Q>();
        let half = Ratio::new(1, 2);
        let scores = dr_scores(&data, &FixedPropensity(vec![half, half]), &ZeroOutcome, Ratio::new(1, 100)).unwrap();
        (data, scores, vec![eq(0, 1), eq(1, 1)])
    }

    #[test]
    fn pool_sizes() {
        let base = vec![eq(0, 1), eq(1, 1)];
        let pool = build_augmented_pool(&base, 2).unwrap();
        assert_eq!(pool.len(), 14);
        assert_eq!(pool.len() as u128, augmented_pool_size(2, 2));
        let distinct: std::collections::HashSet<_> =
            pool.iter().map(|r| (r.positive, r.negated.clone(), r.treatment)).collect();
        assert_eq!(distinct.len(), 14);
        let one = build_augmented_pool(&base[..1], 1).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!((one[0].positive, one[0].negated.clone()), (Some(0), vec![]));
        assert_eq!((one[1].positive, one[1].negated.clone()), (None, vec![0]));
        assert!(build_augmented_pool(&[], 3).unwrap().is_empty());
        let nine: Vec<Pattern> = (0..9).map(|k| eq(k % 2, (k / 2) as u32 % 2)).collect();
        assert!(matches!(build_augmented_pool(&nine, 1), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn psi_hand_cases() {
        let (data, scores, base) = inputs();
        let lam = Lambdas::ones();
        let r = AugmentedRule::new(&base, Some(0), vec![], TreatmentId(0));
        assert_eq!(psi_weight(&r, &base, &data, &scores, &lam), Ratio::new(-338, 3));
        let r = AugmentedRule::new(&base, None, vec![0], TreatmentId(1));
        assert_eq!(psi_weight(&r, &base, &data, &scores, &lam), Ratio::new(-104, 3));
        // f1 = 1 and not (f1 = 1) holds for nobody
        let r = AugmentedRule::new(&base, Some(0), vec![0], TreatmentId(1));
        assert_eq!(psi_weight(&r, &base, &data, &scores, &lam), Q::from(0));
    }

    #[test]
    fn list_cover_round_trip() {
        let (data, scores, base) = inputs();
        let cover = list_to_cover(&pi(), &base).unwrap();
        assert_eq!(cover.len(), 2);
        assert_eq!((cover[0].positive, cover[0].negated.clone()), (Some(0), vec![]));
        assert_eq!((cover[1].positive, cover[1].negated.clone(), cover[1].treatment), (None, vec![0], TreatmentId(1)));
        let instance = CoverInstance::new(cover, &base, &data, &scores, &Lambdas::ones());
        assert!(instance.is_exact_cover(&[0, 1]));
        assert!(!instance.is_exact_cover(&[0]));
        assert!(!instance.is_exact_cover(&[0, 0, 1]));

        let check = verify_cover_objective(&pi(), &base, &data, &scores, &Lambdas::ones()).unwrap();
        assert_eq!(check.objective, Ratio::new(442, 3));
        assert_eq!(check.negated_weight, check.objective);
        for list in [pi2(), DecisionList::default_only(TreatmentId(1))] {
            let check = verify_cover_objective(&list, &base, &data, &scores, &Lambdas::ones()).unwrap();
            assert_eq!(check.difference, 0.0);
        }
        let stray = DecisionList::new(vec![Rule::new(eq(0, 0), TreatmentId(0))], TreatmentId(1));
        assert_eq!(list_to_cover(&stray, &base), Err(Error::PatternNotInPool(0)));
    }

    #[test]
    fn list_covers_live_in_the_augmented_pool() {
        let base = vec![eq(0, 1), eq(1, 1)];
        let pool = build_augmented_pool(&base, 2).unwrap();
        for rule in list_to_cover(&pi2(), &base).unwrap() {
            assert!(pool.contains(&rule));
        }
    }
}
