//! Monte-Carlo tree search with UCB-1 selection over a transposition table.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{better, ActionSpec, SearchProblem, SearchState};
use crate::error::Result;
use crate::model::{DecisionList, TreatmentId};
use crate::objective::objective;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub iterations: usize,
    /// UCB-1 exploration constant.
    pub exploration: f64,
    /// Maximum number of rules, not counting the default.
    pub max_list_len: usize,
    pub prune: bool,
    pub seed: u64,
    /// Divides mean episode values before the UCB term; when absent values
    /// are rescaled by the running min/max of observed episodes.
    pub reward_scale: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            iterations: 50_000,
            exploration: 1.414,
            max_list_len: 10,
            prune: true,
            seed: 0,
            reward_scale: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub iterations: usize,
    pub nodes: usize,
    pub pruned_actions: usize,
    pub terminal_evaluations: usize,
    /// Each time the incumbent improved.
    pub incumbent_trace: Vec<TracePoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome<T> {
    pub list: DecisionList,
    /// Objective of `list`, recomputed from scratch.
    pub value: T,
    pub actions: Vec<ActionSpec>,
    pub stats: SearchStats,
}

struct Edge<T> {
    action: ActionSpec,
    /// `path + r + bound_after`; `None` for defaults.
    optimistic: Option<T>,
    blocked: bool,
    visits: u32,
    total: f64,
}

struct Node<T> {
    visits: u32,
    path_value: T,
    /// `path_value` plus the best default reward.
    by_default: T,
    cursor: usize,
    edges: Vec<Edge<T>>,
}

struct Incumbent<T> {
    value: T,
    actions: Vec<ActionSpec>,
}

struct Search<'p, 'a, T> {
    problem: &'p SearchProblem<'a, T>,
    config: &'p SearchConfig,
    nodes: HashMap<u64, Node<T>>,
    incumbent: Incumbent<T>,
    stats: SearchStats,
    rng: ChaCha8Rng,
    lo: f64,
    hi: f64,
    iteration: usize,
}

/// Runs UCT and returns the best list found. With zero iterations this is
/// the best default-only list.
pub fn uct_search<T: Scalar>(
    problem: &SearchProblem<'_, T>,
    config: &SearchConfig,
) -> Result<SearchOutcome<T>> {
    let root = problem.initial_state();
    let mut incumbent: Option<Incumbent<T>> = None;
    for t in problem.treatments() {
        let actions = vec![ActionSpec::Default(t)];
        let value = evaluate(problem, &actions)?;
        if incumbent.as_ref().is_none_or(|inc| better(value, &actions, inc.value, &inc.actions)) {
            incumbent = Some(Incumbent { value, actions });
        }
    }
    let incumbent = incumbent.expect("at least one treatment");
    let mut search = Search {
        problem,
        config,
        nodes: HashMap::new(),
        stats: SearchStats {
            incumbent_trace: vec![TracePoint { iteration: 0, value: incumbent.value.to_f64_lossy() }],
            ..Default::default()
        },
        incumbent,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
        iteration: 0,
    };
    let root_key = root.canonical_key();
    search.nodes.insert(root_key, search.make_node(&root, T::zero()));
    for it in 1..=config.iterations {
        search.iteration = it;
        search.episode(&root, root_key)?;
    }
    search.stats.iterations = config.iterations;
    search.stats.nodes = search.nodes.len();
    let Incumbent { value, actions } = search.incumbent;
    Ok(SearchOutcome { list: problem.decision_list(&actions)?, value, actions, stats: search.stats })
}

fn evaluate<T: Scalar>(problem: &SearchProblem<'_, T>, actions: &[ActionSpec]) -> Result<T> {
    let list = problem.decision_list(actions)?;
    Ok(objective(&list, problem.data(), problem.scores(), problem.lambdas()))
}

impl<T: Scalar> Search<'_, '_, T> {
    fn make_node(&self, state: &SearchState, path_value: T) -> Node<T> {
        let by_default = if self.config.prune && !state.is_terminal() {
            path_value + self.problem.best_default(state).1
        } else {
            path_value
        };
        Node { visits: 0, path_value, by_default, cursor: 0, edges: Vec::new() }
    }

    fn threshold(&self, node: &Node<T>) -> T {
        self.incumbent.value.max_of(node.by_default)
    }

    fn action_count(&self, state: &SearchState) -> usize {
        let m = self.problem.data().treatments().len();
        if state.rule_count() < self.config.max_list_len {
            m + self.problem.pool().len()
        } else {
            m
        }
    }

    fn action_at(&self, idx: usize) -> ActionSpec {
        let m = self.problem.data().treatments().len();
        if idx < m {
            ActionSpec::Default(TreatmentId(idx))
        } else {
            ActionSpec::Rule(idx - m)
        }
    }

    /// Index of the edge to follow from the node at `key`, expanding an
    /// untried action first. `None` when every action is blocked.
    fn select(&mut self, key: u64, state: &SearchState) -> Option<usize> {
        let problem = self.problem;
        let prune = self.config.prune;
        let count = self.action_count(state);
        let mut node = self.nodes.remove(&key).expect("node present");
        let threshold = self.threshold(&node);
        if prune {
            for e in node.edges.iter_mut().filter(|e| !e.blocked) {
                if e.optimistic.is_some_and(|o| o < threshold) {
                    e.blocked = true;
                    self.stats.pruned_actions += 1;
                }
            }
        }
        let mut chosen = None;
        while node.cursor < count {
            let action = self.action_at(node.cursor);
            node.cursor += 1;
            let optimistic = match action {
                ActionSpec::Default(_) => None,
                ActionSpec::Rule(k) => {
                    if state.unassigned().is_disjoint(problem.coverage(k)) {
                        continue;
                    }
                    if !prune {
                        None
                    } else {
                        let e = problem.effect(state, k);
                        let o = node.path_value + e.reward + e.bound_after;
                        if o < threshold {
                            self.stats.pruned_actions += 1;
                            continue;
                        }
                        Some(o)
                    }
                }
            };
            node.edges.push(Edge { action, optimistic, blocked: false, visits: 0, total: 0.0 });
            chosen = Some(node.edges.len() - 1);
            break;
        }
        if chosen.is_none() {
            let ln_n = f64::from(node.visits.max(1)).ln();
            let mut best = f64::NEG_INFINITY;
            let rules_open = state.rule_count() < self.config.max_list_len;
            let live = |e: &&Edge<T>| !e.blocked && (rules_open || matches!(e.action, ActionSpec::Default(_)));
            for (j, e) in node.edges.iter().enumerate().filter(|(_, e)| live(e)) {
                let mean = e.total / f64::from(e.visits.max(1));
                let q = match self.config.reward_scale {
                    Some(scale) => mean / scale,
                    None if self.hi > self.lo => (mean - self.lo) / (self.hi - self.lo),
                    None => 0.5,
                };
                let score = q + self.config.exploration * (ln_n / f64::from(e.visits.max(1))).sqrt();
                if score > best {
                    best = score;
                    chosen = Some(j);
                }
            }
        }
        self.nodes.insert(key, node);
        chosen
    }

    fn episode(&mut self, root: &SearchState, root_key: u64) -> Result<()> {
        let problem = self.problem;
        let mut state = root.clone();
        let mut key = root_key;
        let mut value = T::zero();
        let mut path: Vec<(u64, usize)> = Vec::new();
        loop {
            if state.is_terminal() {
                self.terminal(&state, value)?;
                break;
            }
            let Some(j) = self.select(key, &state) else {
                // only reachable when pruning has closed every rule and the
                // node was entered below its own threshold; finish greedily
                let (t, r) = problem.best_default(&state);
                problem.apply(&mut state, ActionSpec::Default(t))?;
                value += r;
                self.terminal(&state, value)?;
                break;
            };
            let action = self.nodes[&key].edges[j].action;
            value += problem.apply(&mut state, action)?;
            path.push((key, j));
            let child = state.canonical_key();
            if !self.nodes.contains_key(&child) {
                let node = self.make_node(&state, value);
                self.nodes.insert(child, node);
                value = self.rollout(&mut state, value)?;
                break;
            }
            key = child;
        }
        let v = value.to_f64_lossy();
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
        if let Some(root) = self.nodes.get_mut(&root_key) {
            if path.is_empty() {
                root.visits += 1;
            }
        }
        for (k, j) in path {
            let node = self.nodes.get_mut(&k).expect("node on path");
            node.visits += 1;
            let e = &mut node.edges[j];
            e.visits += 1;
            e.total += v;
        }
        Ok(())
    }

    fn rollout(&mut self, state: &mut SearchState, mut value: T) -> Result<T> {
        let problem = self.problem;
        let m = problem.data().treatments().len();
        let rules = problem.pool().len();
        while !state.is_terminal() {
            let mut action = None;
            if state.rule_count() < self.config.max_list_len && rules > 0 && self.rng.random_bool(0.5) {
                for _ in 0..64 {
                    let k = self.rng.random_range(0..rules);
                    if !state.unassigned().is_disjoint(problem.coverage(k)) {
                        action = Some(ActionSpec::Rule(k));
                        break;
                    }
                }
                if action.is_none() {
                    let live: Vec<usize> = (0..rules)
                        .filter(|&k| !state.unassigned().is_disjoint(problem.coverage(k)))
                        .collect();
                    if !live.is_empty() {
                        action = Some(ActionSpec::Rule(live[self.rng.random_range(0..live.len())]));
                    }
                }
            }
            let action =
                action.unwrap_or_else(|| ActionSpec::Default(TreatmentId(self.rng.random_range(0..m))));
            value += problem.apply(state, action)?;
        }
        self.terminal(state, value)?;
        Ok(value)
    }

    fn terminal(&mut self, state: &SearchState, value: T) -> Result<()> {
        self.stats.terminal_evaluations += 1;
        let (v, inc) = (value.to_f64_lossy(), self.incumbent.value.to_f64_lossy());
        if v < inc - 1e-9 * inc.abs().max(1.0) {
            return Ok(());
        }
        let actions = state.prefix();
        let exact = evaluate(self.problem, actions)?;
        if better(exact, actions, self.incumbent.value, &self.incumbent.actions) {
            let improved = exact > self.incumbent.value;
            self.incumbent = Incumbent { value: exact, actions: actions.to_vec() };
            if improved {
                self.stats
                    .incumbent_trace
                    .push(TracePoint { iteration: self.iteration, value: exact.to_f64_lossy() });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{dr_scores, FixedPropensity, ZeroOutcome};
    use crate::model::fixtures::{d3, eq};
    use crate::objective::Lambdas;
    use crate::search::{exhaustive_search, RulePool};

    #[test]
    fn zero_iterations_returns_best_default() {
        let data = d3::<f64>();
        let scores = dr_scores(&data, &FixedPropensity(vec![0.5, 0.5]), &ZeroOutcome, 0.01).unwrap();
        let pool = RulePool::cross([eq(0, 1), eq(1, 1)], 2);
        let problem = SearchProblem::new(&data, &scores, &pool, Lambdas::ones()).unwrap();
        let cfg = SearchConfig { iterations: 0, ..Default::default() };
        let out = uct_search(&problem, &cfg).unwrap();
        // T1 everywhere: 360/3 - 10 = 110 beats T2: 120/3 - 15 = 25
        assert_eq!(out.list, DecisionList::default_only(TreatmentId(0)));
        assert!((out.value - 110.0).abs() < 1e-9);
    }

    #[test]
    fn finds_the_optimum_on_d3() {
        let data = d3::<f64>();
        let scores = dr_scores(&data, &FixedPropensity(vec![0.5, 0.5]), &ZeroOutcome, 0.01).unwrap();
        let pool = RulePool::cross([eq(0, 1), eq(1, 1), eq(0, 0), eq(1, 0)], 2);
        let problem = SearchProblem::new(&data, &scores, &pool, Lambdas::ones()).unwrap();
        let exact = exhaustive_search(&problem, 3, crate::search::DEFAULT_BUDGET).unwrap();
        for prune in [false, true] {
            let cfg = SearchConfig { iterations: 2000, max_list_len: 3, prune, seed: 5, ..Default::default() };
            let out = uct_search(&problem, &cfg).unwrap();
            assert!((out.value - exact.value).abs() < 1e-9, "{} vs {}", out.value, exact.value);
            let again = uct_search(&problem, &cfg).unwrap();
            assert_eq!(out.actions, again.actions);
            assert_eq!(out.stats, again.stats);
        }
    }
}
