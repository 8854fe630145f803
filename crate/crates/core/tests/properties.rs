use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use expectiled::dual::{
    brute_force_dual, event_scenario, optimal_scenario, optimal_scenario_with,
    scenario_in_density_set, scenario_value, Boundary,
};
use expectiled::preferences::{beta_sweep, evaluate, rank};
use expectiled::solvers::{
    als_minimize, als_objective, balance_gap, cross_check, expectile_balance, iterative_reweighting,
};
use expectiled::{
    apply_utility, disappointment_set, distribution, expectile_value, fosd_compare, Agent,
    DisappointmentSet, Dominance, FiniteSpace, OutcomeAct, SolverConfig, UtilityAct,
};

const BETAS: [f64; 7] = [-0.9, -0.5, 0.0, 0.5, 1.0, 5.0, 50.0];

fn space_strategy(max_states: usize) -> impl Strategy<Value = Arc<FiniteSpace>> {
    prop::collection::vec(0.05f64..1.0, 1..=max_states).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        let labels = (0..raw.len()).map(|i| format!("s{i}")).collect();
        FiniteSpace::new(labels, raw.iter().map(|p| p / total).collect()).unwrap()
    })
}

fn act_strategy(max_states: usize) -> impl Strategy<Value = UtilityAct> {
    space_strategy(max_states).prop_flat_map(|space| {
        let n = space.len();
        // integer-valued draws produce ties regularly
        let values = prop::collection::vec(
            prop_oneof![(-100.0f64..100.0), (-5i32..5).prop_map(f64::from)],
            n,
        );
        values.prop_map(move |v| UtilityAct::new(space.clone(), v).unwrap())
    })
}

fn beta_strategy() -> impl Strategy<Value = f64> {
    prop::sample::select(BETAS.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn four_way_agreement(u in act_strategy(12), beta in beta_strategy()) {
        let report = cross_check(&u, beta, &SolverConfig::for_act(&u)).unwrap();
        prop_assert!(report.max_discrepancy <= 1e-9, "{report:?}");
    }

    #[test]
    fn gap_strictly_decreasing(u in act_strategy(10), beta in beta_strategy()) {
        prop_assume!(!u.is_constant());
        let (lo, hi) = (u.min(), u.max());
        let grid: Vec<f64> = (0..=40).map(|k| lo + (hi - lo) * k as f64 / 40.0).collect();
        for pair in grid.windows(2) {
            prop_assert!(balance_gap(&u, beta, pair[0]) > balance_gap(&u, beta, pair[1]));
        }
    }

    #[test]
    fn monotone_in_beta(u in act_strategy(10)) {
        let values: Vec<f64> = BETAS.iter().map(|&b| expectile_value(&u, b).unwrap()).collect();
        for pair in values.windows(2) {
            prop_assert!(pair[0] >= pair[1] - 1e-12);
        }
        let sweep = beta_sweep(&u, &BETAS).unwrap();
        for pair in sweep.windows(2) {
            prop_assert!(pair[0].1 >= pair[1].1 - 1e-12);
        }
    }

    #[test]
    fn limits(u in act_strategy(10)) {
        prop_assert_eq!(expectile_value(&u, 0.0).unwrap(), u.mean());
        let slack = 1e-3 * u.range();
        prop_assert!(expectile_value(&u, 1e6).unwrap() - u.min() <= slack);
        prop_assert!(u.max() - expectile_value(&u, -1.0 + 1e-6).unwrap() <= slack);
    }

    #[test]
    fn trace_monotone_within_step_bound(u in act_strategy(12), beta in beta_strategy()) {
        let (_, trace) = iterative_reweighting(&u, beta).unwrap();
        prop_assert!(trace.converged);
        let vs: Vec<f64> = trace.values().collect();
        for pair in vs.windows(2) {
            if beta >= 0.0 {
                prop_assert!(pair[1] <= pair[0]);
            } else {
                prop_assert!(pair[1] >= pair[0]);
            }
        }
        if !u.is_constant() {
            prop_assert!(trace.steps < u.distinct_values().len());
        }
        for step in &trace.iterates {
            let total: f64 = step.masses.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn first_order_condition(u in act_strategy(12), beta in beta_strategy()) {
        prop_assume!(!u.is_constant());
        let v = als_minimize(&u, beta, &SolverConfig::for_act(&u)).unwrap();
        let h = 1e-7 * u.range();
        let slope = (als_objective(&u, beta, v + h) - als_objective(&u, beta, v - h)) / (2.0 * h);
        prop_assert!(slope.abs() <= 1e-6 * (1.0 + beta) * u.range(), "slope {slope} at {v}");
    }

    #[test]
    fn negation_duality(u in act_strategy(12), beta in beta_strategy()) {
        let dual_beta = -beta / (1.0 + beta);
        let cfg = SolverConfig::for_act(&u);
        let lhs = expectile_value(&u.neg(), beta).unwrap();
        let rhs = -expectile_balance(&u, dual_beta, &cfg).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn distribution_is_permutation_invariant(u in act_strategy(8), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut perm: Vec<usize> = (0..u.len()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let permuted = u.permuted(&perm).unwrap();
        let a = distribution(&u);
        let b = distribution(&permuted);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.0, y.0);
            prop_assert!((x.1 - y.1).abs() < 1e-15);
        }
        prop_assert!((expectile_value(&u, 2.0).unwrap() - expectile_value(&permuted, 2.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fosd_reflexive(u in act_strategy(8)) {
        prop_assert_eq!(fosd_compare(&u, &u).unwrap(), Dominance::EqualInLaw);
    }

    #[test]
    fn disappointment_set_monotone_in_reference(u in act_strategy(8), a in -120.0f64..120.0, b in -120.0f64..120.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(disappointment_set(&u, lo).is_subset(&disappointment_set(&u, hi)));
    }

    #[test]
    fn dual_optimum_and_bounds(u in act_strategy(9), beta in beta_strategy()) {
        let target = expectile_value(&u, beta).unwrap();
        let q = optimal_scenario(&u, beta).unwrap();
        prop_assert!((scenario_value(&u, &q).unwrap() - target).abs() <= 1e-10);
        let weak = optimal_scenario_with(&u, beta, Boundary::Weak).unwrap();
        prop_assert!((scenario_value(&u, &weak).unwrap() - target).abs() <= 1e-10);

        let (brute, _) = brute_force_dual(&u, beta).unwrap();
        prop_assert!((brute - target).abs() <= 1e-9);

        let n = u.len();
        for mask in 0..(1u64 << n) {
            let event = DisappointmentSet::from_mask(n, mask);
            let scenario = event_scenario(u.space(), &event, beta).unwrap();
            prop_assert!(scenario_in_density_set(&scenario, beta));
            let value = scenario_value(&u, &scenario).unwrap();
            if beta >= 0.0 {
                prop_assert!(value >= target - 1e-10);
            } else {
                prop_assert!(value <= target + 1e-10);
            }
        }
    }

    #[test]
    fn pointwise_improvement_is_strictly_better(u in act_strategy(8), bump in 0.01f64..10.0, at in 0usize..8, beta in beta_strategy()) {
        let at = at % u.len();
        let mut values = u.values().to_vec();
        values[at] += bump;
        let better = UtilityAct::new(u.space().clone(), values).unwrap();
        prop_assert_eq!(fosd_compare(&better, &u).unwrap(), Dominance::DominatesStrictly);
        prop_assert!(expectile_value(&better, beta).unwrap() > expectile_value(&u, beta).unwrap());
    }
}

fn outcome_acts(
    space: &Arc<FiniteSpace>,
    rows: &[Vec<usize>],
    labels: &[String],
) -> Vec<(String, OutcomeAct)> {
    rows.iter()
        .enumerate()
        .map(|(k, row)| {
            let outcomes = row
                .iter()
                .map(|&i| labels[i % labels.len()].clone())
                .collect();
            (
                format!("act{k}"),
                OutcomeAct::new(space.clone(), outcomes).unwrap(),
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn affine_representation_invariance(
        utils in prop::collection::vec(-20.0f64..20.0, 2..6),
        rows in prop::collection::vec(prop::collection::vec(0usize..6, 4), 1..6),
        a in 0.1f64..10.0,
        b in -10.0f64..10.0,
        beta in beta_strategy(),
    ) {
        let labels: Vec<String> = (0..utils.len()).map(|i| format!("o{i}")).collect();
        let table: BTreeMap<String, f64> = labels.iter().cloned().zip(utils.iter().copied()).collect();
        let agent = Agent::new(beta, table).unwrap();
        let moved = agent.affine_transformed(a, b).unwrap();
        let space = FiniteSpace::uniform(4).unwrap();
        let acts = outcome_acts(&space, &rows, &labels);
        for (_, act) in &acts {
            let v = evaluate(act, &agent).unwrap();
            let w = evaluate(act, &moved).unwrap();
            prop_assert!((w - (a * v + b)).abs() <= 1e-9 * (1.0 + w.abs()));
        }
        // Strict orderings survive the transformation.
        let values: Vec<f64> = acts.iter().map(|(_, x)| evaluate(x, &agent).unwrap()).collect();
        let moved_values: Vec<f64> = acts.iter().map(|(_, x)| evaluate(x, &moved).unwrap()).collect();
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] > values[j] + 1e-9 {
                    prop_assert!(moved_values[i] > moved_values[j]);
                }
            }
        }
        let classes = rank(&acts, &agent).unwrap();
        prop_assert!(classes.windows(2).all(|w| w[0].value() > w[1].value()));
    }

    #[test]
    fn sophistication_through_utility(
        utils in prop::collection::vec(-20.0f64..20.0, 2..6),
        row in prop::collection::vec(0usize..6, 4),
        beta in beta_strategy(),
    ) {
        let labels: Vec<String> = (0..utils.len()).map(|i| format!("o{i}")).collect();
        let table: BTreeMap<String, f64> = labels.iter().cloned().zip(utils.iter().copied()).collect();
        let agent = Agent::new(beta, table).unwrap();
        let space = FiniteSpace::uniform(4).unwrap();
        let best = labels.iter().max_by(|x, y| agent.utility()[*x].total_cmp(&agent.utility()[*y])).unwrap().clone();
        let x = &outcome_acts(&space, std::slice::from_ref(&row), &labels)[0].1;
        let mut improved = x.outcomes().to_vec();
        improved[0] = best;
        let y = OutcomeAct::new(space.clone(), improved).unwrap();
        let (ux, uy) = (apply_utility(x, &agent).unwrap(), apply_utility(&y, &agent).unwrap());
        if fosd_compare(&uy, &ux).unwrap() == Dominance::DominatesStrictly {
            prop_assert!(evaluate(&y, &agent).unwrap() > evaluate(x, &agent).unwrap());
        }
    }
}
