//! Executable checks for the structural properties of the expectiled value
//! and for the hedging and stacking axioms.
//!
//! Every check draws its random acts from a per-trial ChaCha stream, so a
//! report's `seed` is enough to replay any failure.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{
    check_beta, disappointment_set, fosd_compare, DisappointmentSet, Dominance, FiniteSpace,
    UtilityAct,
};
use crate::rng::{random_act, random_permutation, random_proper_event, trial_rng};
use crate::solvers::expectile_value;

/// Absolute tolerance for indifference in the preconditions of the axiom
/// checks.
pub const PRECONDITION_TOL: f64 = 1e-10;

/// Size of the perturbation used by the continuity check.
pub const PERTURBATION: f64 = 1e-9;

/// Random acts are drawn with utilities in `[-ACT_SCALE, ACT_SCALE]`.
const ACT_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropertyId {
    LawInvariance,
    StrongMonotonicity,
    ConstantAdditivity,
    PositiveHomogeneity,
    /// Superadditivity for `beta >= 0`, subadditivity for `beta <= 0`.
    Superadditivity,
    Continuity,
    ConcordantAdditivity,
    DisappointmentHedging,
    DisappointmentStacking,
}

impl PropertyId {
    pub const ALL: [PropertyId; 9] = [
        PropertyId::LawInvariance,
        PropertyId::StrongMonotonicity,
        PropertyId::ConstantAdditivity,
        PropertyId::PositiveHomogeneity,
        PropertyId::Superadditivity,
        PropertyId::Continuity,
        PropertyId::ConcordantAdditivity,
        PropertyId::DisappointmentHedging,
        PropertyId::DisappointmentStacking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PropertyId::LawInvariance => "law_invariance",
            PropertyId::StrongMonotonicity => "strong_monotonicity",
            PropertyId::ConstantAdditivity => "constant_additivity",
            PropertyId::PositiveHomogeneity => "positive_homogeneity",
            PropertyId::Superadditivity => "superadditivity",
            PropertyId::Continuity => "continuity",
            PropertyId::ConcordantAdditivity => "concordant_additivity",
            PropertyId::DisappointmentHedging => "disappointment_hedging",
            PropertyId::DisappointmentStacking => "disappointment_stacking",
        }
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PropertyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        PropertyId::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::UnknownProperty(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub property: PropertyId,
    pub beta: f64,
    pub trials: usize,
    pub failures: usize,
    pub worst_violation: f64,
    pub seed: u64,
    /// Index of the first failing trial, for replay.
    pub first_failure: Option<usize>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct TrialOutcome {
    failed: bool,
    violation: f64,
}

impl TrialOutcome {
    /// Fails when `violation` exceeds `tol`.
    fn within(violation: f64, tol: f64) -> Self {
        let violation = violation.max(0.0);
        TrialOutcome {
            failed: violation > tol,
            violation,
        }
    }
}

/// Runs `trials` seeded trials of one property on `space`.
pub fn run_property(
    property: PropertyId,
    space: &Arc<FiniteSpace>,
    beta: f64,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<PropertyReport> {
    check_beta(beta)?;
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let mut report = PropertyReport {
        property,
        beta,
        trials,
        failures: 0,
        worst_violation: 0.0,
        seed,
        first_failure: None,
    };
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let outcome = run_trial(property, space, beta, tol, &mut rng)?;
        report.worst_violation = report.worst_violation.max(outcome.violation);
        if outcome.failed {
            report.failures += 1;
            report.first_failure.get_or_insert(trial);
        }
    }
    Ok(report)
}

fn run_trial<R: Rng>(
    property: PropertyId,
    space: &Arc<FiniteSpace>,
    beta: f64,
    tol: f64,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let e = |act: &UtilityAct| expectile_value(act, beta);
    let x = random_act(rng, space, -ACT_SCALE, ACT_SCALE);
    Ok(match property {
        PropertyId::LawInvariance => {
            let perm = random_permutation(rng, space.len());
            let y = if space.is_uniform() {
                let values = perm.iter().map(|&i| x.values()[i]).collect();
                UtilityAct::new(space.clone(), values)?
            } else {
                x.permuted(&perm)?
            };
            TrialOutcome::within((e(&y)? - e(&x)?).abs(), tol)
        }
        PropertyId::StrongMonotonicity => {
            let n = space.len();
            let bumped = rng.gen_range(0..n);
            let shifts: Vec<f64> = (0..n)
                .map(|i| {
                    if i == bumped {
                        rng.gen_range(0.1..5.0)
                    } else if rng.gen_bool(0.5) {
                        rng.gen_range(0.0..5.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let y = UtilityAct::new(
                space.clone(),
                x.values().iter().zip(&shifts).map(|(a, b)| a + b).collect(),
            )?;
            let strictly = fosd_compare(&y, &x)? == Dominance::DominatesStrictly;
            let gain = e(&y)? - e(&x)?;
            TrialOutcome {
                failed: !strictly || gain <= 0.0,
                violation: (-gain).max(0.0),
            }
        }
        PropertyId::ConstantAdditivity => {
            let m = rng.gen_range(-50.0..50.0);
            TrialOutcome::within((e(&x.shift(m)?)? - e(&x)? - m).abs(), tol)
        }
        PropertyId::PositiveHomogeneity => {
            let lambda = rng.gen_range(0.01..10.0);
            TrialOutcome::within((e(&x.scale(lambda)?)? - lambda * e(&x)?).abs(), tol)
        }
        PropertyId::Superadditivity => {
            let y = random_act(rng, space, -ACT_SCALE, ACT_SCALE);
            let surplus = e(&x.add(&y)?)? - e(&x)? - e(&y)?;
            let violation = if beta >= 0.0 { -surplus } else { surplus };
            TrialOutcome::within(violation, tol)
        }
        PropertyId::Continuity => {
            let noisy = UtilityAct::new(
                space.clone(),
                x.values()
                    .iter()
                    .map(|v| v + rng.gen_range(-PERTURBATION..=PERTURBATION))
                    .collect(),
            )?;
            TrialOutcome::within((e(&noisy)? - e(&x)?).abs() - PERTURBATION, tol)
        }
        PropertyId::ConcordantAdditivity => {
            let (w, y) = concordant_pair(space, beta, rng)?;
            let (ew, ey) = (e(&w)?, e(&y)?);
            if disappointment_set(&w, ew) != disappointment_set(&y, ey) {
                return Err(Error::Precondition(
                    "generated acts do not share a disappointment set".into(),
                ));
            }
            TrialOutcome::within((e(&w.add(&y)?)? - ew - ey).abs(), tol)
        }
        PropertyId::DisappointmentHedging | PropertyId::DisappointmentStacking => {
            let (w, xx) = concordant_pair(space, beta, rng)?;
            let raw = random_act(rng, space, -ACT_SCALE, ACT_SCALE);
            let y = raw.shift(e(&xx)? - e(&raw)?)?;
            let slack = if property == PropertyId::DisappointmentHedging {
                hedging_slack(&w, &xx, &y, beta)?
            } else {
                stacking_slack(&w, &xx, &y, beta)?
            };
            TrialOutcome::within(slack, tol)
        }
    })
}

/// Two acts sharing a random disappointment set, each shifted by a random
/// constant. On a one-state space both are constants.
fn concordant_pair<R: Rng>(
    space: &Arc<FiniteSpace>,
    beta: f64,
    rng: &mut R,
) -> Result<(UtilityAct, UtilityAct)> {
    if space.len() < 2 {
        let a = UtilityAct::constant(space.clone(), rng.gen_range(-ACT_SCALE..ACT_SCALE))?;
        let b = UtilityAct::constant(space.clone(), rng.gen_range(-ACT_SCALE..ACT_SCALE))?;
        return Ok((a, b));
    }
    let event = random_proper_event(rng, space.len());
    let w = act_with_disappointment_set(space, &event, beta, rng)?
        .shift(rng.gen_range(-ACT_SCALE..ACT_SCALE))?;
    let x = act_with_disappointment_set(space, &event, beta, rng)?
        .shift(rng.gen_range(-ACT_SCALE..ACT_SCALE))?;
    Ok((w, x))
}

/// An act `W` with `E_beta[W] = 0` whose negative states are exactly
/// `event`: positive draws `p` off the event, `-lambda * q` on it, with
/// `lambda` chosen so that elation and weighted disappointment balance at 0.
pub fn gen_act_with_disappointment_set(
    space: &Arc<FiniteSpace>,
    event: &DisappointmentSet,
    beta: f64,
    seed: u64,
) -> Result<UtilityAct> {
    let mut rng = trial_rng(seed, 0);
    act_with_disappointment_set(space, event, beta, &mut rng)
}

fn act_with_disappointment_set<R: Rng>(
    space: &Arc<FiniteSpace>,
    event: &DisappointmentSet,
    beta: f64,
    rng: &mut R,
) -> Result<UtilityAct> {
    let draws: Vec<f64> = (0..space.len()).map(|_| rng.gen_range(0.5..10.0)).collect();
    act_from_draws(space, event, beta, &draws)
}

/// Deterministic core of the construction: `draws[i]` is `p_i` off the
/// event and `q_i` on it.
pub fn act_from_draws(
    space: &Arc<FiniteSpace>,
    event: &DisappointmentSet,
    beta: f64,
    draws: &[f64],
) -> Result<UtilityAct> {
    check_beta(beta)?;
    if event.is_empty() || event.len() >= space.len() {
        return Err(Error::ImproperEvent);
    }
    if draws.len() != space.len() {
        return Err(Error::LengthMismatch {
            expected: space.len(),
            got: draws.len(),
        });
    }
    if draws.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::Precondition(
            "draws must be strictly positive".into(),
        ));
    }
    let probs = space.probs();
    let (mut elation, mut shortfall) = (0.0, 0.0);
    for (i, (&d, &p)) in draws.iter().zip(probs).enumerate() {
        if event.contains(i) {
            shortfall += p * d;
        } else {
            elation += p * d;
        }
    }
    let lambda = elation / ((1.0 + beta) * shortfall);
    let values = draws
        .iter()
        .enumerate()
        .map(|(i, &d)| if event.contains(i) { -lambda * d } else { d })
        .collect();
    UtilityAct::new(space.clone(), values)
}

/// `scale * (X - E_beta[X])`: expectile zero, same disappointment set as `X`
/// for any `scale > 0`.
pub fn concordant_with(act: &UtilityAct, beta: f64, scale: f64) -> Result<UtilityAct> {
    if !(scale > 0.0) {
        return Err(Error::Precondition("scale must be positive".into()));
    }
    let v = expectile_value(act, beta)?;
    act.map(|u| scale * (u - v))
}

fn require_indifferent(a: f64, b: f64, what: &str) -> Result<()> {
    if (a - b).abs() > PRECONDITION_TOL {
        return Err(Error::Precondition(format!(
            "{what} are not indifferent ({a} vs {b})"
        )));
    }
    Ok(())
}

fn require_same_set(a: &UtilityAct, ea: f64, b: &UtilityAct, eb: f64, what: &str) -> Result<()> {
    if disappointment_set(a, ea) != disappointment_set(b, eb) {
        return Err(Error::Precondition(format!(
            "{what} do not share their disappointment states"
        )));
    }
    Ok(())
}

/// Amount by which the hedging inequality is violated (`<= 0` when it holds).
fn hedging_slack(w: &UtilityAct, x: &UtilityAct, y: &UtilityAct, beta: f64) -> Result<f64> {
    let e = |act: &UtilityAct| expectile_value(act, beta);
    let (ew, ex, ey) = (e(w)?, e(x)?, e(y)?);
    require_indifferent(ex, ey, "X and Y")?;
    require_same_set(w, ew, x, ex, "W and X")?;
    let mix_x = e(&w.zip_with(x, |a, b| 0.5 * a + 0.5 * b)?)?;
    let mix_y = e(&w.zip_with(y, |a, b| 0.5 * a + 0.5 * b)?)?;
    Ok(if beta >= 0.0 {
        mix_x - mix_y
    } else {
        mix_y - mix_x
    })
}

/// Disappointment hedging: for `X ~ Y` and `W` sharing `X`'s disappointment
/// states, the even mixture of `W` with `X` is not better than with `Y`
/// (`beta >= 0`), or not worse (`beta <= 0`). Precondition failures are
/// errors, not `false`.
pub fn check_disappointment_hedging(
    w: &UtilityAct,
    x: &UtilityAct,
    y: &UtilityAct,
    beta: f64,
    tol: f64,
) -> Result<bool> {
    check_beta(beta)?;
    Ok(hedging_slack(w, x, y, beta)? <= tol)
}

fn stacking_slack(z: &UtilityAct, u: &UtilityAct, v: &UtilityAct, beta: f64) -> Result<f64> {
    let e = |act: &UtilityAct| expectile_value(act, beta);
    let (ez, eu, ev) = (e(z)?, e(u)?, e(v)?);
    require_indifferent(eu, ev, "U and V")?;
    require_same_set(z, ez, u, eu, "Z and U")?;
    let stacked = e(&z.add(u)?)?;
    let spread = e(&z.add(v)?)?;
    let order = if beta >= 0.0 {
        stacked - spread
    } else {
        spread - stacked
    };
    let additivity = (stacked - ez - eu).abs();
    Ok(order.max(additivity))
}

/// Disappointment stacking: adding to `Z` an act `U` with the same
/// disappointment states is not better than adding an indifferent `V`
/// (reversed for `beta <= 0`), and `E[Z + U] = E[Z] + E[U]`.
pub fn check_disappointment_stacking(
    z: &UtilityAct,
    u: &UtilityAct,
    v: &UtilityAct,
    beta: f64,
    tol: f64,
) -> Result<bool> {
    check_beta(beta)?;
    Ok(stacking_slack(z, u, v, beta)? <= tol)
}

/// Recovers the coefficient from the value of a bet paying `ux` on `event`
/// and `uy` elsewhere.
pub fn infer_beta(
    space: &FiniteSpace,
    event: &DisappointmentSet,
    observed: f64,
    ux: f64,
    uy: f64,
) -> Result<f64> {
    if let Some(index) = event.iter().find(|&i| i >= space.len()) {
        return Err(Error::StateIndex {
            index,
            len: space.len(),
        });
    }
    infer_beta_from_probability(space.prob_of(event), observed, ux, uy)
}

pub fn infer_beta_from_probability(pe: f64, observed: f64, ux: f64, uy: f64) -> Result<f64> {
    if !(pe > 0.0 && pe < 1.0) {
        return Err(Error::ImproperEvent);
    }
    if !(ux > uy) {
        return Err(Error::UnorderedOutcomes { ux, uy });
    }
    if !(observed > uy && observed < ux) {
        return Err(Error::ObservedOutOfRange { observed, ux, uy });
    }
    let t = (observed - uy) / (ux - uy);
    Ok(pe * (1.0 - t) / ((1.0 - pe) * t) - 1.0)
}

/// Stock functionals used to exercise [`fingerprint_functional`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceFunctional {
    Expectile(f64),
    Mean,
    Max,
    /// `E[X] - E|X - E[X]| / 2`.
    MeanAbsDeviation,
    /// Value at the second state (the first if there is only one).
    StateValue,
}

impl ReferenceFunctional {
    pub fn evaluate(&self, act: &UtilityAct) -> f64 {
        match *self {
            ReferenceFunctional::Expectile(beta) => expectile_value(act, beta).unwrap_or(f64::NAN),
            ReferenceFunctional::Mean => act.mean(),
            ReferenceFunctional::Max => act.max(),
            ReferenceFunctional::MeanAbsDeviation => {
                let m = act.mean();
                let mad: f64 = act
                    .values()
                    .iter()
                    .zip(act.probs())
                    .map(|(u, p)| p * (u - m).abs())
                    .sum();
                m - 0.5 * mad
            }
            ReferenceFunctional::StateValue => act.values()[1.min(act.len() - 1)],
        }
    }
}

impl FromStr for ReferenceFunctional {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mean" => Ok(ReferenceFunctional::Mean),
            "max" => Ok(ReferenceFunctional::Max),
            "mad" | "mean-abs-deviation" => Ok(ReferenceFunctional::MeanAbsDeviation),
            "median-like" | "state-value" => Ok(ReferenceFunctional::StateValue),
            other => {
                let beta = other
                    .strip_prefix("expectile:")
                    .and_then(|b| b.parse::<f64>().ok())
                    .ok_or_else(|| format!("unknown functional `{other}`"))?;
                check_beta(beta).map_err(|e| e.to_string())?;
                Ok(ReferenceFunctional::Expectile(beta))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub verdict: Verdict,
    /// Coefficient inferred from the probe bet, if it fell inside the bet's
    /// payoff range.
    pub beta_hat: Option<f64>,
    /// Act on which the evaluator departed from the inferred expectile.
    pub witness: Option<UtilityAct>,
    pub discrepancy: f64,
    pub trials_run: usize,
}

/// Tests whether a black-box evaluator behaves like some `E_beta`.
///
/// A unit bet on the first half of the states pins down a candidate
/// coefficient; random acts are then compared against the expectile at that
/// coefficient.
pub fn fingerprint_functional(
    evaluator: &dyn Fn(&UtilityAct) -> f64,
    space: &Arc<FiniteSpace>,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<Fingerprint> {
    let n = space.len();
    if n < 2 {
        return Err(Error::Precondition(
            "fingerprinting needs at least two states".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let call = |act: &UtilityAct| -> Result<f64> {
        let v = evaluator(act);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteEvaluation(v))
        }
    };

    let event = DisappointmentSet::new(n, (0..n / 2).collect())?;
    let probe = UtilityAct::new(
        space.clone(),
        (0..n)
            .map(|i| if event.contains(i) { 1.0 } else { 0.0 })
            .collect(),
    )?;
    let observed = call(&probe)?;
    let beta_hat = match infer_beta(space, &event, observed, 1.0, 0.0) {
        Ok(beta) => beta,
        Err(Error::ObservedOutOfRange { .. }) => {
            return Ok(Fingerprint {
                verdict: Verdict::Inconsistent,
                beta_hat: None,
                discrepancy: f64::INFINITY,
                witness: Some(probe),
                trials_run: 0,
            })
        }
        Err(e) => return Err(e),
    };

    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let act = random_act(&mut rng, space, -ACT_SCALE, ACT_SCALE);
        let gap = (call(&act)? - expectile_value(&act, beta_hat)?).abs();
        worst = worst.max(gap);
        if gap > tol {
            return Ok(Fingerprint {
                verdict: Verdict::Inconsistent,
                beta_hat: Some(beta_hat),
                witness: Some(act),
                discrepancy: gap,
                trials_run: trial + 1,
            });
        }
    }
    Ok(Fingerprint {
        verdict: Verdict::Consistent,
        beta_hat: Some(beta_hat),
        witness: None,
        discrepancy: worst,
        trials_run: trials,
    })
}
