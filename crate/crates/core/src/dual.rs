//! Maxmin representation of the expectile.
//!
//! For `beta >= 0` the expectile is the smallest expected utility over the
//! event distortions that inflate the probability of an event `D` by
//! `1 + beta` and renormalize; for `beta <= 0` it is the largest. The
//! optimizing event is the disappointment set itself.

use std::cmp::Ordering;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    check_beta, disappointment_set, DisappointmentSet, FiniteSpace, Scenario, UtilityAct,
};
use crate::solvers::expectile_value;

/// Default cap on the number of states for exhaustive event enumeration.
pub const ENUMERATION_GUARD: usize = 24;

/// Hard ceiling even with an override; masks are 64-bit.
const ENUMERATION_CEILING: usize = 40;

/// Whether the optimizing event uses `U < v` or `U <= v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Strict,
    Weak,
}

/// Density `(1_{D^c} + (1 + beta) 1_D) / (1 + beta P(D))`.
pub fn event_scenario(
    space: &Arc<FiniteSpace>,
    event: &DisappointmentSet,
    beta: f64,
) -> Result<Scenario> {
    check_beta(beta)?;
    if let Some(index) = event.iter().find(|&i| i >= space.len()) {
        return Err(Error::StateIndex {
            index,
            len: space.len(),
        });
    }
    let norm = 1.0 + beta * space.prob_of(event);
    let density = (0..space.len())
        .map(|i| {
            if event.contains(i) {
                (1.0 + beta) / norm
            } else {
                1.0 / norm
            }
        })
        .collect();
    Scenario::new(space.clone(), density)
}

/// Expected value of `act` under `scenario`.
pub fn scenario_value(act: &UtilityAct, scenario: &Scenario) -> Result<f64> {
    if !act.space().same_as(scenario.space()) {
        return Err(Error::SpaceMismatch);
    }
    Ok(act
        .values()
        .iter()
        .zip(act.probs())
        .zip(scenario.density())
        .map(|((u, p), d)| p * d * u)
        .sum())
}

/// The event scenario built on the act's own disappointment set.
pub fn optimal_scenario(act: &UtilityAct, beta: f64) -> Result<Scenario> {
    optimal_scenario_with(act, beta, Boundary::Strict)
}

pub fn optimal_scenario_with(act: &UtilityAct, beta: f64, boundary: Boundary) -> Result<Scenario> {
    let v = expectile_value(act, beta)?;
    let event = match boundary {
        Boundary::Strict => disappointment_set(act, v),
        Boundary::Weak => {
            let members = (0..act.len()).filter(|&i| act.values()[i] <= v).collect();
            DisappointmentSet::new(act.len(), members)?
        }
    };
    event_scenario(act.space(), &event, beta)
}

/// Value of the event scenario for the event encoded by `mask`, computed
/// without materializing the scenario.
fn event_value(values: &[f64], probs: &[f64], beta: f64, mask: u64) -> f64 {
    let (mut p_event, mut weighted) = (0.0, 0.0);
    for (i, (&u, &p)) in values.iter().zip(probs).enumerate() {
        if mask >> i & 1 == 1 {
            p_event += p;
            weighted += (1.0 + beta) * p * u;
        } else {
            weighted += p * u;
        }
    }
    weighted / (1.0 + beta * p_event)
}

fn check_enumerable(n: usize, limit: usize) -> Result<()> {
    let limit = limit.min(ENUMERATION_CEILING);
    if n > limit {
        return Err(Error::EnumerationGuard { states: n, limit });
    }
    Ok(())
}

/// Exhaustive optimum over all `2^n` event scenarios: the minimum for
/// `beta >= 0`, the maximum for `beta < 0`. Among events within rounding of
/// the optimum, the lexicographically smallest index set is returned.
pub fn brute_force_dual(act: &UtilityAct, beta: f64) -> Result<(f64, DisappointmentSet)> {
    brute_force_dual_with_limit(act, beta, ENUMERATION_GUARD)
}

pub fn brute_force_dual_with_limit(
    act: &UtilityAct,
    beta: f64,
    limit: usize,
) -> Result<(f64, DisappointmentSet)> {
    check_beta(beta)?;
    let n = act.len();
    check_enumerable(n, limit)?;
    let (values, probs) = (act.values(), act.probs());
    let better = |a: f64, b: f64| if beta >= 0.0 { a < b } else { a > b };

    let count = 1u64 << n;
    let mut best = event_value(values, probs, beta, 0);
    for mask in 1..count {
        let value = event_value(values, probs, beta, mask);
        if better(value, best) {
            best = value;
        }
    }

    let tie_tol = 1e-12 * act.range().max(1.0).max(best.abs());
    let mut chosen: Option<DisappointmentSet> = None;
    for mask in 0..count {
        if (event_value(values, probs, beta, mask) - best).abs() <= tie_tol {
            let event = DisappointmentSet::from_mask(n, mask);
            if chosen
                .as_ref()
                .is_none_or(|c| event.members() < c.members())
            {
                chosen = Some(event);
            }
        }
    }
    Ok((best, chosen.expect("the optimum is attained by some event")))
}

/// Every event with its scenario value, ordered by event size and then
/// lexicographically.
pub fn event_table(
    act: &UtilityAct,
    beta: f64,
    limit: usize,
) -> Result<Vec<(DisappointmentSet, f64)>> {
    check_beta(beta)?;
    let n = act.len();
    check_enumerable(n, limit)?;
    let mut rows: Vec<(DisappointmentSet, f64)> = (0..1u64 << n)
        .map(|mask| {
            let event = DisappointmentSet::from_mask(n, mask);
            let value = event_value(act.values(), act.probs(), beta, mask);
            (event, value)
        })
        .collect();
    rows.sort_by(|a, b| match a.0.len().cmp(&b.0.len()) {
        Ordering::Equal => a.0.members().cmp(b.0.members()),
        other => other,
    });
    Ok(rows)
}

/// `max(1 + beta, 1 / (1 + beta))`, the admissible spread of a density.
pub fn density_ratio_bound(beta: f64) -> f64 {
    (1.0 + beta).max(1.0 / (1.0 + beta))
}

/// Whether the scenario's density is strictly positive with
/// `max / min <= density_ratio_bound(beta)`.
pub fn scenario_in_density_set(scenario: &Scenario, beta: f64) -> bool {
    let d = scenario.density();
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lo > 0.0 && hi / lo <= density_ratio_bound(beta) + 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(values: &[f64]) -> UtilityAct {
        UtilityAct::new(FiniteSpace::uniform(values.len()).unwrap(), values.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn event_scenario_examples() {
        let s = FiniteSpace::uniform(3).unwrap();
        let d0 = DisappointmentSet::new(3, vec![0]).unwrap();
        let q = event_scenario(&s, &d0, 1.0).unwrap();
        assert!(close(&q.measure(), &[0.5, 0.25, 0.25], 1e-15));
        assert!(close(q.density(), &[1.5, 0.75, 0.75], 1e-15));
        let empty = event_scenario(&s, &DisappointmentSet::empty(), 4.0).unwrap();
        assert!(close(empty.density(), &[1.0; 3], 0.0));
        let full = event_scenario(&s, &DisappointmentSet::full(3), 4.0).unwrap();
        assert!(close(full.density(), &[1.0; 3], 1e-15));
    }

    #[test]
    fn optimal_scenario_examples() {
        let u = act(&[0.0, 3.0, 6.0]);
        let q = optimal_scenario(&u, 1.0).unwrap();
        assert!(close(&q.measure(), &[0.5, 0.25, 0.25], 1e-15));
        assert!((scenario_value(&u, &q).unwrap() - 2.25).abs() < 1e-12);

        let c = act(&[2.0; 4]);
        let qc = optimal_scenario(&c, 3.0).unwrap();
        assert!(close(qc.density(), &[1.0; 4], 0.0));
        assert!((scenario_value(&c, &qc).unwrap() - 2.0).abs() < 1e-15);

        let w = act(&[1.0, -2.0, 8.0]);
        assert!(close(
            optimal_scenario(&w, 0.0).unwrap().density(),
            &[1.0; 3],
            1e-15
        ));
    }

    #[test]
    fn scenario_value_examples() {
        let u = act(&[0.0, 3.0, 6.0]);
        let base = Scenario::base(u.space().clone());
        assert!((scenario_value(&u, &base).unwrap() - 3.0).abs() < 1e-15);
        let other = act(&[1.0, 2.0]);
        assert_eq!(
            scenario_value(&other, &base).unwrap_err(),
            Error::SpaceMismatch
        );
    }

    #[test]
    fn brute_force_worked_example() {
        let u = act(&[0.0, 3.0, 6.0]);
        let (v, event) = brute_force_dual(&u, 1.0).unwrap();
        assert!((v - 2.25).abs() < 1e-12);
        assert_eq!(event.members(), &[0]);

        let table = event_table(&u, 1.0, ENUMERATION_GUARD).unwrap();
        let expected = [3.0, 2.25, 3.0, 3.75, 2.4, 3.0, 3.6, 3.0];
        let got: Vec<f64> = table.iter().map(|r| r.1).collect();
        assert!(close(&got, &expected, 1e-12));
        let order: Vec<Vec<usize>> = table.iter().map(|r| r.0.members().to_vec()).collect();
        assert_eq!(
            order,
            vec![
                vec![],
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 1, 2]
            ]
        );
    }

    #[test]
    fn brute_force_ties() {
        let u = act(&[1.0, 4.0, -2.0, 7.0]);
        let (v, event) = brute_force_dual(&u, 0.0).unwrap();
        assert!((v - u.mean()).abs() < 1e-12);
        assert!(event.is_empty());

        let single = act(&[5.0]);
        let (v, event) = brute_force_dual(&single, 2.0).unwrap();
        assert_eq!(v, 5.0);
        assert!(event.is_empty());
    }

    #[test]
    fn enumeration_guard() {
        let big = act(&[0.0; 25]);
        assert!(matches!(
            brute_force_dual(&big, 1.0),
            Err(Error::EnumerationGuard {
                states: 25,
                limit: 24
            })
        ));
    }

    #[test]
    fn density_set_membership() {
        let s = FiniteSpace::uniform(2).unwrap();
        let q = Scenario::new(s.clone(), vec![1.5, 0.5]).unwrap();
        assert!(!scenario_in_density_set(&q, 1.0));
        assert!(scenario_in_density_set(&Scenario::base(s.clone()), 1.0));
        assert!(scenario_in_density_set(&Scenario::base(s.clone()), -0.9));
        for beta in [-0.9, -0.5, 0.0, 1.0, 5.0] {
            for mask in 0..4u64 {
                let e = DisappointmentSet::from_mask(2, mask);
                assert!(scenario_in_density_set(
                    &event_scenario(&s, &e, beta).unwrap(),
                    beta
                ));
            }
        }
    }
}
