mod common;

use common::*;
use costregime::cover::{build_augmented_pool, list_to_cover};
use costregime::estimators::{dr_scores, ZeroOutcome};
use costregime::objective::g1;
use costregime::synthetic::{generate, true_policy_value, GeneratorConfig};
use costregime::{
    assessment_cost, mine_patterns, objective, partition, uct_search, ActionSpec, DecisionList,
    MiningConfig, Rule, SearchConfig, SearchProblem, TreatmentId,
};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_a_disjoint_cover_consistent_with_assign(seed in any::<u64>()) {
        let inst = small_instance(seed);
        let list = random_list(&mut rng(seed), &inst.patterns, 2, 4);
        let part = partition(&list, &inst.data);
        let mut seen = vec![0; inst.data.len()];
        for (j, group) in part.groups.iter().enumerate() {
            for &i in group {
                seen[i] += 1;
                prop_assert_eq!(list.assign(&inst.data.record(i).x), list.rules[j].treatment);
            }
        }
        for &i in &part.default_group {
            seen[i] += 1;
            prop_assert_eq!(list.assign(&inst.data.record(i).x), list.default);
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn assessment_grows_along_prefixes(seed in any::<u64>()) {
        let inst = small_instance(seed);
        let list = random_list(&mut rng(seed), &inst.patterns, 2, 5);
        let fs = inst.data.features();
        for r in inst.data.records() {
            let route = list.route(&r.x);
            let mut last = 0.0;
            for j in 0..=list.rules.len() {
                let prefix = DecisionList::new(list.rules[..j].to_vec(), list.default);
                let psi = assessment_cost(&prefix, &r.x, fs);
                // the subject matches the same rule (or a later one) in every longer prefix
                if route.is_none_or(|k| k >= j) || prefix.route(&r.x) == route {
                    prop_assert!(psi >= last);
                    last = psi;
                }
            }
        }
    }

    #[test]
    fn objective_is_linear_in_the_weights(seed in any::<u64>(), k in 0.01f64..100.0) {
        let inst = small_instance(seed);
        let list = random_list(&mut rng(seed), &inst.patterns, 2, 4);
        let base = objective(&list, &inst.data, &inst.scores, &inst.lambdas);
        let scaled = objective(&list, &inst.data, &inst.scores, &inst.lambdas.scaled(k));
        prop_assert!(relative_close(scaled, k * base, 1e-12));
    }

    #[test]
    fn rewards_sum_to_the_objective(seed in any::<u64>()) {
        let inst = small_instance(seed);
        let problem = SearchProblem::new(&inst.data, &inst.scores, &inst.pool, inst.lambdas).unwrap();
        let mut r = rng(seed);
        let mut state = problem.initial_state();
        let mut total = 0.0;
        let mut assigned = 0;
        while !state.is_terminal() {
            let action = if r.random_bool(0.25) {
                ActionSpec::Default(TreatmentId(r.random_range(0..2)))
            } else {
                ActionSpec::Rule(r.random_range(0..inst.pool.len()))
            };
            let before: Vec<_> = (0..state.n()).map(|i| state.assigned(i)).collect();
            total += problem.apply(&mut state, action).unwrap();
            let now = inst.data.len() - state.unassigned_count();
            prop_assert!(now >= assigned);
            if matches!(action, ActionSpec::Default(_)) {
                prop_assert!(now > assigned);
            }
            for (i, b) in before.iter().enumerate() {
                if b.is_some() {
                    prop_assert_eq!(*b, state.assigned(i));
                }
            }
            assigned = now;
        }
        let list = problem.decision_list(state.prefix()).unwrap();
        prop_assert!(relative_close(total, objective(&list, &inst.data, &inst.scores, &inst.lambdas), 1e-9));
    }

    #[test]
    fn search_never_beats_the_exhaustive_optimum(seed in 0u64..500) {
        let inst = small_instance(seed);
        let problem = SearchProblem::new(&inst.data, &inst.scores, &inst.pool, inst.lambdas).unwrap();
        let best = costregime::exhaustive_search(&problem, inst.max_len, u128::MAX).unwrap();
        let cfg = SearchConfig { iterations: 200, max_list_len: inst.max_len, seed, ..Default::default() };
        let found = uct_search(&problem, &cfg).unwrap();
        prop_assert!(found.value <= best.value + 1e-9);
        prop_assert!(found.list.len() <= inst.max_len);
        prop_assert_eq!(found.value, objective(&found.list, &inst.data, &inst.scores, &inst.lambdas));
    }

    #[test]
    fn mining_is_deterministic_and_supported(seed in any::<u64>(), min_support in 1usize..6) {
        let mut r = rng(seed);
        let n = r.random_range(1..60);
        let data = random_data(&mut r, n, 4, 2);
        let cfg = MiningConfig { min_support, max_pattern_len: 3, ..Default::default() };
        let a = mine_patterns(&data, &cfg).unwrap();
        prop_assert_eq!(&a, &mine_patterns(&data, &cfg).unwrap());
        for e in &a.entries {
            prop_assert!(e.support >= min_support);
            prop_assert_eq!(e.support, data.records().iter().filter(|x| e.pattern.matches(&x.x)).count());
        }
    }

    #[test]
    fn list_covers_come_from_the_augmented_pool(seed in any::<u64>()) {
        let inst = small_instance(seed);
        let mut r = rng(seed);
        // distinct base patterns keep every element inside the pool; the
        // default-only list maps to the empty conjunction, which is outside it
        let mut order: Vec<usize> = (0..inst.patterns.len()).collect();
        order.sort_by_key(|_| r.random::<u32>());
        let len = r.random_range(1..=order.len().min(3));
        let rules: Vec<Rule> = order[..len]
            .iter()
            .map(|&k| Rule::new(inst.patterns[k].clone(), TreatmentId(r.random_range(0..2))))
            .collect();
        let list = DecisionList::new(rules, TreatmentId(r.random_range(0..2)));
        let pool = build_augmented_pool(&inst.patterns, 2).unwrap();
        for rule in list_to_cover(&list, &inst.patterns).unwrap() {
            prop_assert!(pool.contains(&rule));
        }
    }
}

#[test]
fn transposed_prefixes_share_a_key_and_future() {
    let data = d3::<f64>();
    let scores = costregime::ScoreMatrix::from_rows(vec![vec![160.0, 0.0], vec![0.0, 120.0], vec![200.0, 0.0]], 0.01)
        .unwrap();
    let pool = costregime::RulePool::from_rules([
        Rule::new(eq(0, 1), TreatmentId(0)),
        Rule::new(eq(0, 0), TreatmentId(1)),
        Rule::new(eq(1, 1), TreatmentId(1)),
    ]);
    let problem = SearchProblem::new(&data, &scores, &pool, costregime::Lambdas::ones()).unwrap();
    let s0 = problem.initial_state();
    let run = |actions: &[ActionSpec]| {
        let mut s = s0.clone();
        for &a in actions {
            problem.apply(&mut s, a).unwrap();
        }
        s
    };
    let ab = run(&[ActionSpec::Rule(0), ActionSpec::Rule(1)]);
    let ba = run(&[ActionSpec::Rule(1), ActionSpec::Rule(0)]);
    assert_eq!(ab.canonical_key(), ba.canonical_key());
    assert_eq!(problem.state_value(&ab), problem.state_value(&ba));
    let a = run(&[ActionSpec::Rule(0)]);
    let c = run(&[ActionSpec::Rule(2)]);
    for d in 0..2 {
        let tail = ActionSpec::Default(TreatmentId(d));
        let stepped = problem.reward(&a, tail).unwrap() + problem.state_value(&a);
        assert!(relative_close(stepped, problem.state_value(&problem.transition(&a, tail).unwrap()), 1e-12));
    }
    assert_ne!(a.canonical_key(), c.canonical_key());
}

#[test]
fn ipw_with_true_propensities_tracks_the_policy_value() {
    let cfg = GeneratorConfig::preset(20_000);
    let (data, truth) = generate(&cfg, 77).unwrap();
    let severe = costregime::Pattern::new(vec![costregime::Predicate::eq_level(4, 2)], data.features()).unwrap();
    let list = DecisionList::new(vec![Rule::new(severe, TreatmentId(1))], TreatmentId(0));
    let scores = dr_scores(&data, &cfg.true_propensity(), &ZeroOutcome, 0.01).unwrap();
    let gap = (g1(&list, &data, &scores) - true_policy_value(&list, &data, &truth)).abs();
    assert!(gap < 2.0, "{gap}");
}
