//! Agent-level evaluation of outcome acts.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{apply_utility, check_beta, Agent, FiniteSpace, OutcomeAct, UtilityAct};
use crate::rng::trial_rng;
use crate::solvers::expectile_value;

/// Values closer than this are ranked as indifferent.
pub const INDIFFERENCE_TOL: f64 = 1e-10;

/// Tolerance for matching a certainty equivalent to a utility table entry.
pub const CE_MATCH_TOL: f64 = 1e-9;

/// Expectiled utility of an outcome act.
pub fn evaluate(act: &OutcomeAct, agent: &Agent) -> Result<f64> {
    let u = apply_utility(act, agent)?;
    expectile_value(&u, agent.beta())
}

/// A group of alternatives whose values agree within [`INDIFFERENCE_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct IndifferenceClass {
    pub members: Vec<(String, f64)>,
}

impl IndifferenceClass {
    pub fn value(&self) -> f64 {
        self.members[0].1
    }
}

/// Orders `(name, value)` pairs from best to worst, grouping near-ties.
/// Members of a class keep their input order.
pub fn rank_values(items: Vec<(String, f64)>) -> Result<Vec<IndifferenceClass>> {
    if items.is_empty() {
        return Err(Error::NoActs);
    }
    let mut indexed: Vec<(usize, String, f64)> = items
        .into_iter()
        .enumerate()
        .map(|(i, (name, v))| (i, name, v))
        .collect();
    indexed.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    let mut classes: Vec<Vec<(usize, String, f64)>> = Vec::new();
    for item in indexed {
        match classes.last_mut() {
            Some(class) if class[0].2 - item.2 <= INDIFFERENCE_TOL => class.push(item),
            _ => classes.push(vec![item]),
        }
    }
    Ok(classes
        .into_iter()
        .map(|mut class| {
            class.sort_by_key(|m| m.0);
            IndifferenceClass {
                members: class.into_iter().map(|(_, n, v)| (n, v)).collect(),
            }
        })
        .collect())
}

pub fn rank(acts: &[(String, OutcomeAct)], agent: &Agent) -> Result<Vec<IndifferenceClass>> {
    let values = acts
        .iter()
        .map(|(name, act)| Ok((name.clone(), evaluate(act, agent)?)))
        .collect::<Result<Vec<_>>>()?;
    rank_values(values)
}

/// Util value of the act, plus the first outcome label (in table order)
/// whose utility matches it.
pub fn certainty_equivalent(act: &OutcomeAct, agent: &Agent) -> Result<(f64, Option<String>)> {
    let value = evaluate(act, agent)?;
    Ok((value, matching_label(agent, value)))
}

pub fn matching_label(agent: &Agent, value: f64) -> Option<String> {
    agent
        .utility()
        .iter()
        .find(|(_, &u)| (u - value).abs() <= CE_MATCH_TOL)
        .map(|(label, _)| label.clone())
}

/// Utility of the preference midpoint of two outcomes.
pub fn midpoint_value(x: &str, y: &str, agent: &Agent) -> Result<f64> {
    Ok(0.5 * agent.utility_of(x)? + 0.5 * agent.utility_of(y)?)
}

/// Expectile of `act` at each coefficient, in input order.
pub fn beta_sweep(act: &UtilityAct, betas: &[f64]) -> Result<Vec<(f64, f64)>> {
    betas
        .iter()
        .map(|&beta| {
            check_beta(beta)?;
            Ok((beta, expectile_value(act, beta)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentComparison {
    /// `u_A = slope * u_B + intercept` on every label and `slope > 0`.
    pub affine_related: bool,
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    /// `beta_A` compared with `beta_B`.
    pub beta_order: Ordering,
    pub trials: usize,
    /// Sampled pairs where A weakly prefers the act to the sure outcome but
    /// B strictly prefers the sure outcome.
    pub violations: usize,
    pub empirical_relation_holds: bool,
}

impl AgentComparison {
    pub fn verdict(&self) -> &'static str {
        if !self.affine_related {
            return "utilities are not related by an increasing affine map";
        }
        match self.beta_order {
            Ordering::Greater => "A more disappointment averse than B",
            Ordering::Less => "B more disappointment averse than A",
            Ordering::Equal => "A and B equally disappointment averse",
        }
    }
}

/// Compares two agents: affine relation between utility tables, order of
/// the coefficients, and a sampled check that whenever A weakly prefers an
/// act to a sure outcome, so does B.
pub fn compare_agents(
    a: &Agent,
    b: &Agent,
    space: &Arc<FiniteSpace>,
    trials: usize,
    seed: u64,
) -> Result<AgentComparison> {
    let labels_a: BTreeSet<&String> = a.utility().keys().collect();
    let labels_b: BTreeSet<&String> = b.utility().keys().collect();
    if labels_a != labels_b {
        return Err(Error::Precondition(
            "agents must share the same outcome labels".into(),
        ));
    }
    let labels: Vec<String> = labels_a.into_iter().cloned().collect();
    let (slope, intercept, max_residual) = fit_affine(a, b, &labels)?;
    let range_a = spread(a);
    let affine_related = slope > 0.0 && max_residual <= 1e-9 * range_a.max(1.0);

    let slack = 1e-9 * spread(b).max(1.0);
    let mut violations = 0;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let outcomes = (0..space.len())
            .map(|_| labels[rng.gen_range(0..labels.len())].clone())
            .collect();
        let act = OutcomeAct::new(space.clone(), outcomes)?;
        let sure = &labels[rng.gen_range(0..labels.len())];
        let prefers_a = evaluate(&act, a)? >= a.utility_of(sure)?;
        let prefers_b = evaluate(&act, b)? >= b.utility_of(sure)? - slack;
        if prefers_a && !prefers_b {
            violations += 1;
        }
    }

    Ok(AgentComparison {
        affine_related,
        slope,
        intercept,
        max_residual,
        beta_order: a.beta().total_cmp(&b.beta()),
        trials,
        violations,
        empirical_relation_holds: violations == 0,
    })
}

fn spread(agent: &Agent) -> f64 {
    let vals = agent.utility().values();
    let hi = vals.clone().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Exact solve through B's two most separated utilities, then the largest
/// residual over all labels.
fn fit_affine(a: &Agent, b: &Agent, labels: &[String]) -> Result<(f64, f64, f64)> {
    let ub = |l: &String| b.utility()[l];
    let ua = |l: &String| a.utility()[l];
    let lo = labels
        .iter()
        .min_by(|x, y| ub(x).total_cmp(&ub(y)))
        .ok_or(Error::DegenerateUtility)?;
    let hi = labels
        .iter()
        .max_by(|x, y| ub(x).total_cmp(&ub(y)))
        .ok_or(Error::DegenerateUtility)?;
    if ub(hi) == ub(lo) {
        return Err(Error::DegenerateUtility);
    }
    let slope = (ua(hi) - ua(lo)) / (ub(hi) - ub(lo));
    let intercept = ua(lo) - slope * ub(lo);
    let max_residual = labels
        .iter()
        .map(|l| (ua(l) - (slope * ub(l) + intercept)).abs())
        .fold(0.0, f64::max);
    Ok((slope, intercept, max_residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn table(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn outcomes(space: &Arc<FiniteSpace>, labels: &[&str]) -> OutcomeAct {
        OutcomeAct::new(
            space.clone(),
            labels.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    fn base_agent(beta: f64) -> Agent {
        Agent::new(
            beta,
            table(&[("lo", 0.0), ("mid", 3.0), ("hi", 6.0), ("m", 2.25)]),
        )
        .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let s = FiniteSpace::uniform(3).unwrap();
        let x = outcomes(&s, &["lo", "mid", "hi"]);
        assert!((evaluate(&x, &base_agent(1.0)).unwrap() - 2.25).abs() < 1e-12);
        assert!((evaluate(&x, &base_agent(0.0)).unwrap() - 3.0).abs() < 1e-12);
        let c = outcomes(&s, &["hi", "hi", "hi"]);
        assert_eq!(evaluate(&c, &base_agent(4.0)).unwrap(), 6.0);
        let bad = outcomes(&s, &["lo", "nope", "hi"]);
        assert_eq!(
            evaluate(&bad, &base_agent(1.0)).unwrap_err(),
            Error::MissingLabel("nope".into())
        );
    }

    #[test]
    fn rank_examples() {
        let s = FiniteSpace::uniform(3).unwrap();
        let acts = vec![
            ("A".to_string(), outcomes(&s, &["lo", "mid", "hi"])),
            ("B".to_string(), outcomes(&s, &["hi", "mid", "lo"])),
            ("C".to_string(), outcomes(&s, &["mid", "mid", "mid"])),
        ];
        let ranked = rank(&acts, &base_agent(1.0)).unwrap();
        assert_eq!(ranked.len(), 2);
        assert_eq!(ranked[0].members[0].0, "C");
        let tie: Vec<&str> = ranked[1].members.iter().map(|m| m.0.as_str()).collect();
        assert_eq!(tie, ["A", "B"]);
        assert!((ranked[1].value() - 2.25).abs() < 1e-12);

        let flat = rank(&acts, &base_agent(0.0)).unwrap();
        assert_eq!(flat.len(), 1);
        assert_eq!(flat[0].members.len(), 3);
        assert_eq!(rank(&[], &base_agent(0.0)).unwrap_err(), Error::NoActs);
    }

    #[test]
    fn certainty_equivalent_examples() {
        let s = FiniteSpace::uniform(3).unwrap();
        let x = outcomes(&s, &["lo", "mid", "hi"]);
        let (v, label) = certainty_equivalent(&x, &base_agent(1.0)).unwrap();
        assert!((v - 2.25).abs() < 1e-12);
        assert_eq!(label.as_deref(), Some("m"));

        let c = outcomes(&s, &["lo"; 3]);
        assert_eq!(
            certainty_equivalent(&c, &base_agent(1.0)).unwrap(),
            (0.0, Some("lo".into()))
        );

        let no_m = Agent::new(1.0, table(&[("lo", 0.0), ("mid", 3.0), ("hi", 6.0)])).unwrap();
        let (v, label) = certainty_equivalent(&x, &no_m).unwrap();
        assert!((v - 2.25).abs() < 1e-12);
        assert!(label.is_none());
    }

    #[test]
    fn midpoint_examples() {
        let agent = Agent::new(0.0, table(&[("x", 0.0), ("y", 6.0), ("a", 1.0)])).unwrap();
        assert_eq!(midpoint_value("x", "y", &agent).unwrap(), 3.0);
        assert_eq!(midpoint_value("y", "y", &agent).unwrap(), 6.0);
        assert_eq!(midpoint_value("a", "x", &agent).unwrap(), 0.5);
        assert!(midpoint_value("x", "z", &agent).is_err());
    }

    #[test]
    fn sweep_examples() {
        let u = UtilityAct::new(FiniteSpace::uniform(3).unwrap(), vec![0.0, 3.0, 6.0]).unwrap();
        let sweep = beta_sweep(&u, &[-0.5, 0.0, 1.0]).unwrap();
        let expected = [3.75, 3.0, 2.25];
        for ((_, v), e) in sweep.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
        let c = UtilityAct::constant(FiniteSpace::uniform(4).unwrap(), 1.5).unwrap();
        assert!(beta_sweep(&c, &[-0.9, 0.0, 50.0])
            .unwrap()
            .iter()
            .all(|&(_, v)| v == 1.5));
        assert!(matches!(
            beta_sweep(&u, &[-1.5]),
            Err(Error::InvalidBeta(_))
        ));
    }

    #[test]
    fn compare_examples() {
        let s = FiniteSpace::uniform(4).unwrap();
        let ub = table(&[("a", 0.0), ("b", 1.0), ("c", 2.5), ("d", 4.0)]);
        let b = Agent::new(1.0, ub.clone()).unwrap();
        let a = b
            .affine_transformed(2.0, 1.0)
            .unwrap()
            .with_beta(2.0)
            .unwrap();
        let report = compare_agents(&a, &b, &s, 1000, 7).unwrap();
        assert!(report.affine_related);
        assert!((report.slope - 2.0).abs() < 1e-12);
        assert!((report.intercept - 1.0).abs() < 1e-12);
        assert_eq!(report.beta_order, Ordering::Greater);
        assert!(report.empirical_relation_holds);
        assert_eq!(report.verdict(), "A more disappointment averse than B");

        let same = compare_agents(&b, &b, &s, 200, 1).unwrap();
        assert!(same.affine_related && same.empirical_relation_holds);
        assert_eq!(same.beta_order, Ordering::Equal);

        let flipped = b.affine_transformed(-1.0, 0.0).unwrap();
        let report = compare_agents(&flipped, &b, &s, 10, 1).unwrap();
        assert!(!report.affine_related);
        assert!(report.slope < 0.0);

        let flat = Agent::new(0.0, table(&[("a", 1.0), ("b", 1.0)])).unwrap();
        assert_eq!(
            compare_agents(&flat, &flat, &s, 1, 0).unwrap_err(),
            Error::DegenerateUtility
        );
    }

    #[test]
    fn less_averse_agent_breaks_the_relation() {
        let s = FiniteSpace::uniform(4).unwrap();
        let u = table(&[("a", 0.0), ("b", 1.0), ("c", 2.5), ("d", 4.0)]);
        let a = Agent::new(0.0, u.clone()).unwrap();
        let b = Agent::new(5.0, u).unwrap();
        let report = compare_agents(&a, &b, &s, 1000, 3).unwrap();
        assert!(!report.empirical_relation_holds);
        assert_eq!(report.verdict(), "B more disappointment averse than A");
    }
}
