//! Finite probability spaces and the objects that live on them: acts in
//! utils or outcome labels, agents, alternative measures, and disappointment
//! sets.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Accepted deviation of a probability vector's total from 1 before it is
/// renormalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Probabilities closer than this are treated as equal when comparing
/// survival functions.
const SURVIVAL_TOL: f64 = 1e-12;

/// Rejects `beta <= -1` (with a machine-epsilon guard) and non-finite input.
pub fn check_beta(beta: f64) -> Result<f64> {
    if beta.is_finite() && 1.0 + beta > f64::EPSILON {
        Ok(beta)
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

/// A finite set of labeled states with strictly positive probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl FiniteSpace {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Arc<Self>> {
        if labels.len() != probs.len() {
            return Err(Error::LabelCount {
                labels: labels.len(),
                probs: probs.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::EmptySpace);
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        for (label, &prob) in labels.iter().zip(&probs) {
            if !(prob.is_finite() && prob > 0.0) {
                return Err(Error::NonPositiveProbability {
                    label: label.clone(),
                    prob,
                });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::ProbabilitySum {
                sum,
                tol: NORMALIZATION_TOL,
            });
        }
        // Vectors already normalized up to rounding are kept bit-for-bit, so
        // normalizing twice changes nothing.
        let probs = if (sum - 1.0).abs() <= probs.len() as f64 * f64::EPSILON {
            probs
        } else {
            probs.into_iter().map(|p| p / sum).collect()
        };
        Ok(Arc::new(FiniteSpace { labels, probs }))
    }

    /// `n` equally likely states labeled `s0`, `s1`, ...
    pub fn uniform(n: usize) -> Result<Arc<Self>> {
        let labels = (0..n).map(|i| format!("s{i}")).collect();
        Self::uniform_labeled(labels)
    }

    pub fn uniform_labeled(labels: Vec<String>) -> Result<Arc<Self>> {
        let n = labels.len();
        let probs = vec![1.0 / n as f64; n];
        Self::new(labels, probs)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.probs[0];
        self.probs.iter().all(|&p| p == first)
    }

    pub fn prob_of(&self, set: &DisappointmentSet) -> f64 {
        set.iter().map(|i| self.probs[i]).sum()
    }

    /// Reorders states (and their probabilities): new state `k` is old state
    /// `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Arc<Self>> {
        check_permutation(perm, self.len())?;
        let labels = perm.iter().map(|&i| self.labels[i].clone()).collect();
        let probs = perm.iter().map(|&i| self.probs[i]).collect();
        Ok(Arc::new(FiniteSpace { labels, probs }))
    }

    /// Same space in the sense that matters for every computation: the same
    /// probability vector.
    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || self.probs == other.probs
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: perm.len(),
        });
    }
    let mut seen = vec![false; n];
    for &i in perm {
        if i >= n || seen[i] {
            return Err(Error::StateIndex { index: i, len: n });
        }
        seen[i] = true;
    }
    Ok(())
}

/// A simple random variable in utils: one finite value per state.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityAct {
    space: Arc<FiniteSpace>,
    values: Vec<f64>,
}

impl UtilityAct {
    pub fn new(space: Arc<FiniteSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index, value });
        }
        Ok(UtilityAct { space, values })
    }

    pub fn constant(space: Arc<FiniteSpace>, c: f64) -> Result<Self> {
        let n = space.len();
        Self::new(space, vec![c; n])
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        self.space.probs()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(self.space.probs())
            .map(|(v, p)| v * p)
            .sum()
    }

    /// Distinct values in increasing order.
    pub fn distinct_values(&self) -> Vec<f64> {
        let mut vals = self.values.clone();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        vals
    }

    /// Statewise image under `f`; fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.space.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn shift(&self, c: f64) -> Result<Self> {
        self.map(|v| v + c)
    }

    pub fn scale(&self, lambda: f64) -> Result<Self> {
        self.map(|v| lambda * v)
    }

    pub fn neg(&self) -> Self {
        UtilityAct {
            space: self.space.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.space.same_as(&other.space) {
            return Err(Error::SpaceMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.space.clone(), values)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// The same act carried to the permuted space: new state `k` is old
    /// state `perm[k]`, probability included, so the law is unchanged.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let space = self.space.permuted(perm)?;
        let values = perm.iter().map(|&i| self.values[i]).collect();
        Ok(UtilityAct { space, values })
    }
}

/// An act given as one outcome label per state.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeAct {
    space: Arc<FiniteSpace>,
    outcomes: Vec<String>,
}

impl OutcomeAct {
    pub fn new(space: Arc<FiniteSpace>, outcomes: Vec<String>) -> Result<Self> {
        if outcomes.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: outcomes.len(),
            });
        }
        Ok(OutcomeAct { space, outcomes })
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }
}

/// A disappointment-averse decision maker: coefficient `beta` and a utility
/// table over outcome labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    beta: f64,
    utility: BTreeMap<String, f64>,
}

impl Agent {
    pub fn new(beta: f64, utility: BTreeMap<String, f64>) -> Result<Self> {
        check_beta(beta)?;
        for (label, &value) in &utility {
            if !value.is_finite() {
                return Err(Error::NonFiniteUtility {
                    label: label.clone(),
                    value,
                });
            }
        }
        Ok(Agent { beta, utility })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Expectile asymmetry level `1 / (2 + beta)`.
    pub fn alpha(&self) -> f64 {
        1.0 / (2.0 + self.beta)
    }

    pub fn utility(&self) -> &BTreeMap<String, f64> {
        &self.utility
    }

    pub fn utility_of(&self, label: &str) -> Result<f64> {
        self.utility
            .get(label)
            .copied()
            .ok_or_else(|| Error::MissingLabel(label.to_owned()))
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Agent::new(beta, self.utility.clone())
    }

    /// Utility table replaced by `a * u + b`.
    pub fn affine_transformed(&self, a: f64, b: f64) -> Result<Self> {
        let utility = self
            .utility
            .iter()
            .map(|(k, &u)| (k.clone(), a * u + b))
            .collect();
        Agent::new(self.beta, utility)
    }
}

/// An alternative probability measure on a space, stored as its density
/// against the base probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    space: Arc<FiniteSpace>,
    density: Vec<f64>,
}

impl Scenario {
    pub fn new(space: Arc<FiniteSpace>, density: Vec<f64>) -> Result<Self> {
        if density.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: density.len(),
            });
        }
        if let Some((index, &value)) = density
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d >= 0.0))
        {
            return Err(Error::NegativeDensity { index, value });
        }
        let total: f64 = density.iter().zip(space.probs()).map(|(d, p)| d * p).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::DensityMass { total });
        }
        Ok(Scenario { space, density })
    }

    /// The base measure itself (density identically 1).
    pub fn base(space: Arc<FiniteSpace>) -> Self {
        let n = space.len();
        Scenario {
            space,
            density: vec![1.0; n],
        }
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Probability of each state under the scenario.
    pub fn measure(&self) -> Vec<f64> {
        self.density
            .iter()
            .zip(self.space.probs())
            .map(|(d, p)| d * p)
            .collect()
    }
}

/// A set of state indices, kept sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DisappointmentSet {
    members: Vec<usize>,
}

impl DisappointmentSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(space_len: usize, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let Some(&index) = members.iter().find(|&&i| i >= space_len) {
            return Err(Error::StateIndex {
                index,
                len: space_len,
            });
        }
        Ok(DisappointmentSet { members })
    }

    /// The set whose members are the set bits of `mask`.
    pub fn from_mask(space_len: usize, mask: u64) -> Self {
        let members = (0..space_len).filter(|i| mask >> i & 1 == 1).collect();
        DisappointmentSet { members }
    }

    pub fn full(space_len: usize) -> Self {
        DisappointmentSet {
            members: (0..space_len).collect(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.binary_search(&index).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    pub fn complement(&self, space_len: usize) -> Self {
        DisappointmentSet {
            members: (0..space_len).filter(|&i| !self.contains(i)).collect(),
        }
    }

    /// Labels of the members in `space`.
    pub fn labels<'a>(&'a self, space: &'a FiniteSpace) -> impl Iterator<Item = &'a str> + 'a {
        self.iter().map(move |i| space.label(i))
    }
}

impl fmt::Display for DisappointmentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// States whose value falls strictly below `v`.
pub fn disappointment_set(act: &UtilityAct, v: f64) -> DisappointmentSet {
    let members = act
        .values
        .iter()
        .enumerate()
        .filter(|(_, &u)| u < v)
        .map(|(i, _)| i)
        .collect();
    DisappointmentSet { members }
}

/// Composes an outcome act with the agent's utility table.
pub fn apply_utility(act: &OutcomeAct, agent: &Agent) -> Result<UtilityAct> {
    let values = act
        .outcomes
        .iter()
        .map(|label| agent.utility_of(label))
        .collect::<Result<Vec<_>>>()?;
    UtilityAct::new(act.space.clone(), values)
}

/// Law of an act: increasing distinct values with their total probability.
pub fn distribution(act: &UtilityAct) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = act
        .values
        .iter()
        .copied()
        .zip(act.space.probs().iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (v, p) in pairs {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += p,
            _ => out.push((v, p)),
        }
    }
    out
}

/// Outcome of a first-order stochastic dominance comparison of `U` against
/// `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    DominatesStrictly,
    DominatesWeakly,
    Dominated,
    EqualInLaw,
    Incomparable,
}

/// Compares the survival functions `t -> P(U >= t)` and `t -> P(V >= t)` at
/// every jump point of either act.
///
/// `DominatesWeakly` and `Dominated` are reported for the weak and strict
/// cases alike; the strict case of `U` over `V` is `DominatesStrictly`.
pub fn fosd_compare(u: &UtilityAct, v: &UtilityAct) -> Result<Dominance> {
    if !u.space.same_as(&v.space) {
        return Err(Error::SpaceMismatch);
    }
    let du = distribution(u);
    let dv = distribution(v);
    let mut jumps: Vec<f64> = du.iter().chain(&dv).map(|&(x, _)| x).collect();
    jumps.sort_by(f64::total_cmp);
    jumps.dedup();

    let survival = |dist: &[(f64, f64)], t: f64| -> f64 {
        dist.iter().filter(|&&(x, _)| x >= t).map(|&(_, p)| p).sum()
    };
    let (mut above, mut below) = (false, false);
    for &t in &jumps {
        match compare_prob(survival(&du, t), survival(&dv, t)) {
            Ordering::Greater => above = true,
            Ordering::Less => below = true,
            Ordering::Equal => {}
        }
    }
    Ok(match (above, below) {
        (false, false) => Dominance::EqualInLaw,
        (true, false) => Dominance::DominatesStrictly,
        (false, true) => Dominance::Dominated,
        (true, true) => Dominance::Incomparable,
    })
}

fn compare_prob(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= SURVIVAL_TOL {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(values: &[f64]) -> UtilityAct {
        UtilityAct::new(FiniteSpace::uniform(values.len()).unwrap(), values.to_vec()).unwrap()
    }

    #[test]
    fn space_validation() {
        let labels = |n: usize| (0..n).map(|i| format!("s{i}")).collect::<Vec<_>>();
        assert_eq!(
            FiniteSpace::new(vec![], vec![]).unwrap_err(),
            Error::EmptySpace
        );
        assert!(matches!(
            FiniteSpace::new(labels(2), vec![0.5, 0.0]),
            Err(Error::NonPositiveProbability { .. })
        ));
        assert!(matches!(
            FiniteSpace::new(labels(2), vec![0.5, 0.6]),
            Err(Error::ProbabilitySum { .. })
        ));
        assert!(matches!(
            FiniteSpace::new(vec!["a".into(), "a".into()], vec![0.5, 0.5]),
            Err(Error::DuplicateLabel(_))
        ));
        let s = FiniteSpace::new(labels(3), vec![0.2, 0.3, 0.5 + 5e-10]).unwrap();
        let total: f64 = s.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        let again = FiniteSpace::new(labels(3), s.probs().to_vec()).unwrap();
        assert_eq!(again.probs(), s.probs());
    }

    #[test]
    fn utility_act_rejects_non_finite() {
        let s = FiniteSpace::uniform(2).unwrap();
        assert!(matches!(
            UtilityAct::new(s.clone(), vec![1.0, f64::NAN]),
            Err(Error::NonFiniteValue { index: 1, .. })
        ));
        assert!(UtilityAct::new(s, vec![1.0]).is_err());
    }

    #[test]
    fn beta_guard() {
        assert!(check_beta(-1.0).is_err());
        assert!(check_beta(-1.0 + 1e-17).is_err());
        assert!(check_beta(-1.0 + 1e-6).is_ok());
        assert!(check_beta(f64::INFINITY).is_err());
        assert!(check_beta(1e6).is_ok());
        let agent = Agent::new(1.0, BTreeMap::new()).unwrap();
        assert!((agent.alpha() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn disappointment_set_examples() {
        let u = act(&[0.0, 3.0, 6.0]);
        assert_eq!(disappointment_set(&u, 2.25).members(), &[0]);
        assert_eq!(disappointment_set(&u, 7.0).members(), &[0, 1, 2]);
        let c = act(&[4.0, 4.0, 4.0]);
        assert!(disappointment_set(&c, 4.0).is_empty());
        // ties are not disappointing
        assert_eq!(disappointment_set(&u, 3.0).members(), &[0]);
    }

    #[test]
    fn apply_utility_examples() {
        let s = FiniteSpace::uniform(2).unwrap();
        let table: BTreeMap<String, f64> = [("a".to_string(), 1.0), ("b".to_string(), 0.0)].into();
        let agent = Agent::new(0.0, table).unwrap();
        let x = OutcomeAct::new(s.clone(), vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(apply_utility(&x, &agent).unwrap().values(), &[1.0, 0.0]);

        let s3 = FiniteSpace::uniform(3).unwrap();
        let agent5 = Agent::new(0.0, [("a".to_string(), 5.0)].into()).unwrap();
        let c = OutcomeAct::new(s3, vec!["a".into(); 3]).unwrap();
        assert_eq!(apply_utility(&c, &agent5).unwrap().values(), &[5.0; 3]);

        let missing = OutcomeAct::new(s, vec!["a".into(), "c".into()]).unwrap();
        assert_eq!(
            apply_utility(&missing, &agent).unwrap_err(),
            Error::MissingLabel("c".into())
        );
    }

    #[test]
    fn fosd_examples() {
        assert_eq!(
            fosd_compare(&act(&[1.0, 2.0]), &act(&[0.0, 2.0])).unwrap(),
            Dominance::DominatesStrictly
        );
        assert_eq!(
            fosd_compare(&act(&[0.0, 2.0]), &act(&[1.0, 2.0])).unwrap(),
            Dominance::Dominated
        );
        assert_eq!(
            fosd_compare(&act(&[0.0, 3.0, 6.0]), &act(&[6.0, 3.0, 0.0])).unwrap(),
            Dominance::EqualInLaw
        );
        assert_eq!(
            fosd_compare(&act(&[0.0, 10.0]), &act(&[1.0, 2.0])).unwrap(),
            Dominance::Incomparable
        );
        assert_eq!(
            fosd_compare(&act(&[0.0, 1.0]), &act(&[0.0, 1.0, 2.0])).unwrap_err(),
            Error::SpaceMismatch
        );
    }

    #[test]
    fn distribution_examples() {
        let third = 1.0 / 3.0;
        let d = distribution(&act(&[3.0, 3.0, 0.0]));
        assert_eq!(d.len(), 2);
        assert_eq!(d[0], (0.0, third));
        assert_eq!(d[1].0, 3.0);
        assert!((d[1].1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(distribution(&act(&[7.0, 7.0])), vec![(7.0, 1.0)]);
        assert_eq!(
            distribution(&act(&[0.0, 3.0, 6.0])),
            vec![(0.0, third), (3.0, third), (6.0, third)]
        );
    }

    #[test]
    fn set_helpers() {
        let d = DisappointmentSet::from_mask(4, 0b1010);
        assert_eq!(d.members(), &[1, 3]);
        assert_eq!(d.complement(4).members(), &[0, 2]);
        assert_eq!(d.to_string(), "{1,3}");
        assert!(DisappointmentSet::new(3, vec![3]).is_err());
        let s = FiniteSpace::uniform(4).unwrap();
        assert!((s.prob_of(&d) - 0.5).abs() < 1e-15);
    }
}
