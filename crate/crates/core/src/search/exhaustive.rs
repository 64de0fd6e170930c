//! Brute-force enumeration of every list built from distinct pool rules,
//! scored with the closed-form objective rather than MDP rewards.

use super::{better, ActionSpec, SearchProblem, SearchState};
use crate::error::{Error, Result};
use crate::model::DecisionList;
use crate::objective::objective;
use crate::scalar::Scalar;

/// Default cap on the number of lists scored.
pub const DEFAULT_BUDGET: u128 = 5_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustiveOutcome<T> {
    pub list: DecisionList,
    pub value: T,
    pub actions: Vec<ActionSpec>,
    pub evaluations: u128,
}

/// Best list with at most `max_list_len` rules.
pub fn exhaustive_search<T: Scalar>(
    problem: &SearchProblem<'_, T>,
    max_list_len: usize,
    budget: u128,
) -> Result<ExhaustiveOutcome<T>> {
    best_completion(problem, &problem.initial_state(), max_list_len, budget)
}

/// Best list whose action sequence extends `state`'s prefix, adding only
/// rules not already in it.
pub fn best_completion<T: Scalar>(
    problem: &SearchProblem<'_, T>,
    state: &SearchState,
    max_list_len: usize,
    budget: u128,
) -> Result<ExhaustiveOutcome<T>> {
    if state.is_terminal() {
        return Err(Error::TerminalState);
    }
    let used: Vec<usize> = state
        .prefix()
        .iter()
        .filter_map(|a| match a {
            ActionSpec::Rule(k) => Some(*k),
            ActionSpec::Default(_) => None,
        })
        .collect();
    let free: Vec<usize> = (0..problem.pool().len()).filter(|k| !used.contains(k)).collect();
    let depth = max_list_len.saturating_sub(state.rule_count()).min(free.len());
    let m = problem.data().treatments().len() as u128;
    let mut needed: u128 = 0;
    let mut perms: u128 = 1;
    for l in 0..=depth {
        if l > 0 {
            perms = perms.saturating_mul((free.len() - l + 1) as u128);
        }
        needed = needed.saturating_add(perms.saturating_mul(m));
    }
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut walk = Walk {
        problem,
        free: &free,
        taken: vec![false; free.len()],
        actions: state.prefix().to_vec(),
        depth,
        best: None,
        evaluations: 0,
    };
    walk.visit(0)?;
    let (value, actions) = walk.best.expect("at least one default");
    Ok(ExhaustiveOutcome {
        list: problem.decision_list(&actions)?,
        value,
        actions,
        evaluations: walk.evaluations,
    })
}

struct Walk<'p, 'a, T> {
    problem: &'p SearchProblem<'a, T>,
    free: &'p [usize],
    taken: Vec<bool>,
    actions: Vec<ActionSpec>,
    depth: usize,
    best: Option<(T, Vec<ActionSpec>)>,
    evaluations: u128,
}

impl<T: Scalar> Walk<'_, '_, T> {
    fn visit(&mut self, level: usize) -> Result<()> {
        let p = self.problem;
        for t in p.treatments() {
            self.actions.push(ActionSpec::Default(t));
            let list = p.decision_list(&self.actions)?;
            let value = objective(&list, p.data(), p.scores(), p.lambdas());
            self.evaluations += 1;
            if self.best.as_ref().is_none_or(|(v, a)| better(value, &self.actions, *v, a)) {
                self.best = Some((value, self.actions.clone()));
            }
            self.actions.pop();
        }
        if level == self.depth {
            return Ok(());
        }
        for j in 0..self.free.len() {
            if self.taken[j] {
                continue;
            }
            self.taken[j] = true;
            self.actions.push(ActionSpec::Rule(self.free[j]));
            self.visit(level + 1)?;
            self.actions.pop();
            self.taken[j] = false;
        }
        Ok(())
    }
}
