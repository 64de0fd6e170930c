//! Decision-list construction as a finite, undiscounted MDP.
//!
//! A state records, per subject, the features that routing it requires and
//! the treatment it has been assigned (if any). A rule action assigns its
//! treatment to every still-unassigned subject matching the pattern and adds
//! the pattern's features to the requirements of every unassigned subject; a
//! default action assigns all remaining subjects and ends the episode.
//!
//! Summing the immediate rewards along any episode gives exactly the
//! weighted objective of the resulting list. The assessment term only
//! charges features a subject has not already been charged for, which is
//! what makes that identity hold when two rules share a feature.

mod exhaustive;
mod uct;

use std::cmp::Ordering;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ScoreMatrix;
use crate::model::{Dataset, DecisionList, FeatureMask, Pattern, Rule, TreatmentId};
use crate::objective::Lambdas;
use crate::scalar::{self, Scalar};

pub use exhaustive::{best_completion, exhaustive_search, ExhaustiveOutcome, DEFAULT_BUDGET};
pub use uct::{uct_search, SearchConfig, SearchOutcome, SearchStats, TracePoint};

/// Candidate rules `L`: distinct patterns and the `(pattern, treatment)`
/// pairs built from them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RulePool {
    patterns: Vec<Pattern>,
    rules: Vec<(usize, TreatmentId)>,
}

impl RulePool {
    /// Pool from explicit rules; identical patterns are shared and duplicate
    /// rules dropped.
    pub fn from_rules(rules: impl IntoIterator<Item = Rule>) -> Self {
        let mut pool = RulePool::default();
        for r in rules {
            let p = pool.intern(r.condition);
            if !pool.rules.contains(&(p, r.treatment)) {
                pool.rules.push((p, r.treatment));
            }
        }
        pool
    }

    /// Every pattern paired with every treatment, pattern-major.
    pub fn cross(patterns: impl IntoIterator<Item = Pattern>, treatments: usize) -> Self {
        let mut pool = RulePool::default();
        for pattern in patterns {
            let before = pool.patterns.len();
            let p = pool.intern(pattern);
            if p < before {
                continue;
            }
            pool.rules.extend((0..treatments).map(|t| (p, TreatmentId(t))));
        }
        pool
    }

    fn intern(&mut self, pattern: Pattern) -> usize {
        match self.patterns.iter().position(|q| *q == pattern) {
            Some(p) => p,
            None => {
                self.patterns.push(pattern);
                self.patterns.len() - 1
            }
        }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn pattern_of(&self, rule: usize) -> usize {
        self.rules[rule].0
    }

    pub fn treatment_of(&self, rule: usize) -> TreatmentId {
        self.rules[rule].1
    }

    pub fn rule(&self, rule: usize) -> Rule {
        let (p, t) = self.rules[rule];
        Rule::new(self.patterns[p].clone(), t)
    }

    pub fn rules(&self) -> impl Iterator<Item = Rule> + '_ {
        (0..self.rules.len()).map(|k| self.rule(k))
    }
}

/// An MDP action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionSpec {
    /// Append rule `k` of the pool.
    Rule(usize),
    /// Close the list with this default treatment.
    Default(TreatmentId),
}

impl ActionSpec {
    fn sort_key(self) -> (u8, usize) {
        match self {
            ActionSpec::Default(t) => (0, t.0),
            ActionSpec::Rule(k) => (1, k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Step {
    mask: FeatureMask,
    treatment: Option<TreatmentId>,
}

/// Per-subject required-feature masks `τ_i` and assignments `σ_i`.
///
/// All unassigned subjects share one mask (every rule action adds its
/// features to all of them), so only assigned subjects store their own, via
/// the step that assigned them.
#[derive(Clone, Debug)]
pub struct SearchState {
    step_of: Vec<u16>,
    steps: Vec<Step>,
    unassigned: FixedBitSet,
    unassigned_count: usize,
    open_mask: FeatureMask,
    prefix: Vec<ActionSpec>,
    rule_count: usize,
    assigned_hash: u64,
}

impl SearchState {
    pub fn n(&self) -> usize {
        self.step_of.len()
    }

    pub fn required(&self, i: usize) -> FeatureMask {
        match self.step_of[i] {
            0 => self.open_mask,
            k => self.steps[k as usize - 1].mask,
        }
    }

    pub fn assigned(&self, i: usize) -> Option<TreatmentId> {
        match self.step_of[i] {
            0 => None,
            k => self.steps[k as usize - 1].treatment,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.unassigned_count == 0
    }

    pub fn unassigned(&self) -> &FixedBitSet {
        &self.unassigned
    }

    pub fn unassigned_count(&self) -> usize {
        self.unassigned_count
    }

    /// Actions taken from the initial state.
    pub fn prefix(&self) -> &[ActionSpec] {
        &self.prefix
    }

    /// Rule actions in the prefix.
    pub fn rule_count(&self) -> usize {
        self.rule_count
    }

    /// Hash of the per-subject `(τ_i, σ_i)` pairs only; two prefixes that
    /// produce identical pairs share a key.
    pub fn canonical_key(&self) -> u64 {
        if self.unassigned_count == 0 {
            self.assigned_hash
        } else {
            self.assigned_hash ^ mix(mask_hash(self.open_mask) ^ 0x5bd1_e995_7f4a_7c15)
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mask_hash(mask: FeatureMask) -> u64 {
    mix(mix(mask.0 as u64) ^ (mask.0 >> 64) as u64)
}

/// Pure-data summary of a candidate rule action from some state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuleEffect<T> {
    /// `|U'|`: unassigned subjects the rule would capture.
    pub captured: usize,
    pub reward: T,
    /// Upper bound on the reward still obtainable after the action.
    pub bound_after: T,
}

/// Data, scores, pool and weights for one search, with per-pattern coverage
/// precomputed.
pub struct SearchProblem<'a, T> {
    data: &'a Dataset<T>,
    scores: &'a ScoreMatrix<T>,
    pool: &'a RulePool,
    lambdas: Lambdas<T>,
    coverage: Vec<FixedBitSet>,
    best: Vec<T>,
    salts: Vec<u64>,
    n: T,
}

impl<'a, T: Scalar> SearchProblem<'a, T> {
    pub fn new(
        data: &'a Dataset<T>,
        scores: &'a ScoreMatrix<T>,
        pool: &'a RulePool,
        lambdas: Lambdas<T>,
    ) -> Result<Self> {
        if scores.n() != data.len() || scores.m() != data.treatments().len() {
            return Err(Error::Config(format!(
                "score matrix is {}x{} but the dataset has {} subjects and {} treatments",
                scores.n(),
                scores.m(),
                data.len(),
                data.treatments().len()
            )));
        }
        for k in 0..pool.len() {
            if !data.treatments().contains(pool.treatment_of(k)) {
                return Err(Error::InvalidList(format!("pool rule {k} uses an unknown treatment")));
            }
        }
        let coverage = pool
            .patterns()
            .iter()
            .map(|p| {
                let mut set = FixedBitSet::with_capacity(data.len());
                for (i, r) in data.records().iter().enumerate() {
                    if p.matches(&r.x) {
                        set.insert(i);
                    }
                }
                set
            })
            .collect();
        let best = (0..data.len()).map(|i| scores.best(i)).collect();
        let salts = (0..data.len() as u64).map(|i| mix(i.wrapping_add(0x9e37_79b9_7f4a_7c15))).collect();
        Ok(SearchProblem {
            data,
            scores,
            pool,
            lambdas,
            coverage,
            best,
            salts,
            n: T::from_count(data.len()),
        })
    }

    pub fn data(&self) -> &'a Dataset<T> {
        self.data
    }

    pub fn scores(&self) -> &'a ScoreMatrix<T> {
        self.scores
    }

    pub fn pool(&self) -> &'a RulePool {
        self.pool
    }

    pub fn lambdas(&self) -> &Lambdas<T> {
        &self.lambdas
    }

    pub fn treatments(&self) -> impl Iterator<Item = TreatmentId> {
        self.data.treatments().ids()
    }

    /// Subjects matching rule `k`'s pattern.
    pub fn coverage(&self, rule: usize) -> &FixedBitSet {
        &self.coverage[self.pool.pattern_of(rule)]
    }

    /// The empty list: nothing required, nothing assigned.
    pub fn initial_state(&self) -> SearchState {
        let n = self.data.len();
        let mut unassigned = FixedBitSet::with_capacity(n);
        unassigned.insert_range(..);
        SearchState {
            step_of: vec![0; n],
            steps: Vec::new(),
            unassigned,
            unassigned_count: n,
            open_mask: FeatureMask::EMPTY,
            prefix: Vec::new(),
            rule_count: 0,
            assigned_hash: 0,
        }
    }

    fn subject_hash(&self, i: usize, mask: FeatureMask, t: TreatmentId) -> u64 {
        mix(self.salts[i] ^ mask_hash(mask) ^ mix(t.0 as u64 + 1))
    }

    fn check_action(&self, state: &SearchState, action: ActionSpec) -> Result<()> {
        if state.is_terminal() {
            return Err(Error::TerminalState);
        }
        match action {
            ActionSpec::Rule(k) if k >= self.pool.len() => {
                Err(Error::Config(format!("rule {k} is not in the pool")))
            }
            ActionSpec::Default(t) if !self.data.treatments().contains(t) => {
                Err(Error::Config(format!("unknown treatment {t}")))
            }
            _ => Ok(()),
        }
    }

    /// Immediate reward of `action` from `state`:
    /// `λ1/N Σ_{U'} o(i,t) − λ2/N Σ_{U^c} d(Q \ τ_i) − λ3/N |U'| d'(t)`.
    pub fn reward(&self, state: &SearchState, action: ActionSpec) -> Result<T> {
        self.check_action(state, action)?;
        Ok(match action {
            ActionSpec::Rule(k) => self.rule_effect(state, k, false).reward,
            ActionSpec::Default(t) => self.default_reward(state, t),
        })
    }

    fn rule_effect(&self, state: &SearchState, k: usize, with_bound: bool) -> RuleEffect<T> {
        let t = self.pool.treatment_of(k);
        let pattern = &self.pool.patterns()[self.pool.pattern_of(k)];
        let mut outcome = T::zero();
        let mut captured_best = T::zero();
        let mut captured = 0;
        for i in state.unassigned.intersection(self.coverage(k)) {
            outcome += self.scores.get(i, t);
            if with_bound {
                captured_best += self.best[i];
            }
            captured += 1;
        }
        let new_features = pattern.feature_set().difference(state.open_mask);
        let assess = T::from_count(state.unassigned_count) * self.data.features().mask_cost(new_features);
        let treat = T::from_count(captured) * self.data.treatments().cost(t);
        let lam = &self.lambdas;
        let reward = lam.outcome * outcome / self.n
            - lam.assessment * assess / self.n
            - lam.treatment * treat / self.n;
        let bound_after = if with_bound {
            self.upper_bound(state) - lam.outcome * captured_best / self.n
        } else {
            T::zero()
        };
        RuleEffect { captured, reward, bound_after }
    }

    fn default_reward(&self, state: &SearchState, t: TreatmentId) -> T {
        let outcome = scalar::sum(state.unassigned.ones().map(|i| self.scores.get(i, t)));
        let treat = T::from_count(state.unassigned_count) * self.data.treatments().cost(t);
        self.lambdas.outcome * outcome / self.n - self.lambdas.treatment * treat / self.n
    }

    /// The best default action from `state` and its reward.
    pub fn best_default(&self, state: &SearchState) -> (TreatmentId, T) {
        let mut best = (TreatmentId(0), self.default_reward(state, TreatmentId(0)));
        for t in self.treatments().skip(1) {
            let r = self.default_reward(state, t);
            if r > best.1 {
                best = (t, r);
            }
        }
        best
    }

    /// Reward, capture count and post-action bound of rule `k` from `state`.
    pub fn effect(&self, state: &SearchState, k: usize) -> RuleEffect<T> {
        self.rule_effect(state, k, true)
    }

    /// `λ1/N Σ_{i∈U^c} max_t o(i,t)`: no remaining subject pays for
    /// anything and each gets its best score.
    pub fn upper_bound(&self, state: &SearchState) -> T {
        let total = scalar::sum(state.unassigned.ones().map(|i| self.best[i]));
        self.lambdas.outcome * total / self.n
    }

    /// Applies `action` in place and returns its reward.
    pub fn apply(&self, state: &mut SearchState, action: ActionSpec) -> Result<T> {
        self.check_action(state, action)?;
        let reward = self.reward(state, action)?;
        let (q, t, captured): (FeatureMask, TreatmentId, FixedBitSet) = match action {
            ActionSpec::Rule(k) => {
                let mut u = state.unassigned.clone();
                u.intersect_with(self.coverage(k));
                let q = self.pool.patterns()[self.pool.pattern_of(k)].feature_set();
                state.rule_count += 1;
                (q, self.pool.treatment_of(k), u)
            }
            ActionSpec::Default(t) => (FeatureMask::EMPTY, t, state.unassigned.clone()),
        };
        state.open_mask = state.open_mask.union(q);
        state.steps.push(Step { mask: state.open_mask, treatment: Some(t) });
        let step = u16::try_from(state.steps.len()).expect("list too long for a search state");
        for i in captured.ones() {
            state.step_of[i] = step;
            state.assigned_hash = state
                .assigned_hash
                .wrapping_add(self.subject_hash(i, state.open_mask, t));
        }
        state.unassigned.difference_with(&captured);
        state.unassigned_count -= captured.count_ones(..);
        state.prefix.push(action);
        Ok(reward)
    }

    /// The successor state; `state` is left untouched.
    pub fn transition(&self, state: &SearchState, action: ActionSpec) -> Result<SearchState> {
        let mut next = state.clone();
        self.apply(&mut next, action)?;
        Ok(next)
    }

    /// Sum of rewards collected so far, recomputed from the per-subject
    /// state alone.
    pub fn state_value(&self, state: &SearchState) -> T {
        let mut outcome = T::zero();
        let mut assess = T::zero();
        let mut treat = T::zero();
        for i in 0..state.n() {
            assess += self.data.features().mask_cost(state.required(i));
            if let Some(t) = state.assigned(i) {
                outcome += self.scores.get(i, t);
                treat += self.data.treatments().cost(t);
            }
        }
        let lam = &self.lambdas;
        lam.outcome * outcome / self.n - lam.assessment * assess / self.n - lam.treatment * treat / self.n
    }

    /// Actions available from `state`.
    ///
    /// Defaults are always available. A rule is dropped when the list is at
    /// `max_list_len`, when it would capture no unassigned subject, and, with
    /// `prune`, when `path_value + reward + bound_after` falls below both the
    /// incumbent and the best default completion from `state`.
    pub fn applicable_actions(
        &self,
        state: &SearchState,
        max_list_len: usize,
        prune: bool,
        incumbent: Option<T>,
        path_value: T,
    ) -> Vec<ActionSpec> {
        if state.is_terminal() {
            return Vec::new();
        }
        let mut out: Vec<ActionSpec> = self.treatments().map(ActionSpec::Default).collect();
        if state.rule_count >= max_list_len {
            return out;
        }
        let threshold = prune.then(|| {
            let by_default = path_value + self.best_default(state).1;
            incumbent.map_or(by_default, |inc| inc.max_of(by_default))
        });
        for k in 0..self.pool.len() {
            if state.unassigned.is_disjoint(self.coverage(k)) {
                continue;
            }
            if let Some(threshold) = threshold {
                let e = self.effect(state, k);
                if path_value + e.reward + e.bound_after < threshold {
                    continue;
                }
            }
            out.push(ActionSpec::Rule(k));
        }
        out
    }

    /// The list a terminal action sequence describes. A sequence ending in
    /// a rule (one that captured every remaining subject) gets that rule's
    /// treatment as a default; its group is empty.
    pub fn decision_list(&self, actions: &[ActionSpec]) -> Result<DecisionList> {
        let mut rules = Vec::new();
        for (j, a) in actions.iter().enumerate() {
            match *a {
                ActionSpec::Rule(k) => rules.push(self.pool.rule(k)),
                ActionSpec::Default(t) if j + 1 == actions.len() => {
                    return Ok(DecisionList::new(rules, t))
                }
                ActionSpec::Default(_) => break,
            }
        }
        match rules.last() {
            Some(last) if !actions.iter().any(|a| matches!(a, ActionSpec::Default(_))) => {
                let t = last.treatment;
                Ok(DecisionList::new(rules, t))
            }
            _ => Err(Error::InvalidList("action sequence does not end with a single default".into())),
        }
    }
}

/// Orders candidate lists: higher value first, then fewer rules, then the
/// lexicographically smaller action sequence.
pub(crate) fn better<T: Scalar>(
    value: T,
    actions: &[ActionSpec],
    incumbent_value: T,
    incumbent_actions: &[ActionSpec],
) -> bool {
    match value.partial_cmp(&incumbent_value) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Equal) => {
            let key = |a: &[ActionSpec]| (a.len(), a.iter().map(|x| x.sort_key()).collect::<Vec<_>>());
            key(actions) < key(incumbent_actions)
        }
        _ => false,
    }
}
