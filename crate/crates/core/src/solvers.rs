//! Four independent routes to the expectiled utility `E_beta[U]`.
//!
//! * [`expectile_balance`]: root of the elation/disappointment balance gap.
//! * [`gul_fixed_point`]: root of `v -> E[k_v(U)] - v` with Gul's transform.
//! * [`iterative_reweighting`]: finite reweighting of disappointing masses.
//! * [`als_minimize`]: minimizer of the asymmetric quadratic loss.
//!
//! The two root problems are piecewise linear in `v` with kinks at the act's
//! values, so bisection only has to isolate one linear piece; a single secant
//! step then lands on the root.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{check_beta, disappointment_set, UtilityAct};

/// Largest pairwise disagreement tolerated by a cross-check, relative to
/// `max(1, range(U))`.
pub const CROSS_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            abs_tol: 1e-12,
            rel_tol: 0.0,
            max_iter: 200,
        }
    }
}

impl SolverConfig {
    /// Default configuration with `abs_tol = 1e-12 * max(1, range(U))`.
    pub fn for_act(act: &UtilityAct) -> Self {
        SolverConfig {
            abs_tol: 1e-12 * act.range().max(1.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::InvalidConfig("abs_tol must be positive"));
        }
        if !(self.rel_tol >= 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidConfig("rel_tol must be nonnegative"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1"));
        }
        Ok(())
    }

    fn width_tol(&self, at: f64) -> f64 {
        self.abs_tol + self.rel_tol * at.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Balance,
    Gul,
    Iterative,
    Als,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Balance,
        Algorithm::Gul,
        Algorithm::Iterative,
        Algorithm::Als,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Balance => "balance",
            Algorithm::Gul => "gul",
            Algorithm::Iterative => "iterative",
            Algorithm::Als => "als",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

/// One row of the reweighting procedure: the reference value and the masses
/// that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub v: f64,
    pub masses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub iterates: Vec<TraceStep>,
    pub converged: bool,
    pub steps: usize,
}

impl ConvergenceTrace {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.iterates.iter().map(|s| s.v)
    }
}

/// Asymmetric quadratic loss: `s^2` for `s >= 0`, `(1 + beta) s^2` otherwise.
pub fn loss(s: f64, beta: f64) -> f64 {
    if s >= 0.0 {
        s * s
    } else {
        (1.0 + beta) * s * s
    }
}

/// `v -> E[loss(U - v)]`, the objective minimized by [`als_minimize`].
pub fn als_objective(act: &UtilityAct, beta: f64, v: f64) -> f64 {
    act.values()
        .iter()
        .zip(act.probs())
        .map(|(&u, &p)| p * loss(u - v, beta))
        .sum()
}

/// `g(v) = E[(U - v)^+] - (1 + beta) E[(v - U)^+]`.
pub fn balance_gap(act: &UtilityAct, beta: f64, v: f64) -> f64 {
    let (mut elation, mut disappointment) = (0.0, 0.0);
    for (&u, &p) in act.values().iter().zip(act.probs()) {
        if u > v {
            elation += p * (u - v);
        } else {
            disappointment += p * (v - u);
        }
    }
    elation - (1.0 + beta) * disappointment
}

/// Gul's transform: elating utilities are pulled toward the reference `v`.
pub fn gul_transform(u: f64, v: f64, beta: f64) -> f64 {
    if u >= v {
        (u + beta * v) / (1.0 + beta)
    } else {
        u
    }
}

fn gul_residual(act: &UtilityAct, beta: f64, v: f64) -> f64 {
    let ev: f64 = act
        .values()
        .iter()
        .zip(act.probs())
        .map(|(&u, &p)| p * gul_transform(u, v, beta))
        .sum();
    ev - v
}

/// Root of a continuous, decreasing, piecewise-linear `f` whose kinks lie in
/// `knots` (sorted, distinct, at least two), with `f(first) > 0 > f(last)`.
fn piecewise_linear_root(
    solver: &'static str,
    f: impl Fn(f64) -> f64,
    knots: &[f64],
    cfg: &SolverConfig,
) -> Result<f64> {
    let (mut lo, mut hi) = (knots[0], knots[knots.len() - 1]);
    let (mut f_lo, mut f_hi) = (f(lo), f(hi));
    if f_lo <= 0.0 {
        return Ok(lo);
    }
    if f_hi >= 0.0 {
        return Ok(hi);
    }
    for _ in 0..cfg.max_iter {
        let has_interior_knot = knots.iter().any(|&k| k > lo && k < hi);
        if !has_interior_knot || hi - lo <= cfg.width_tol(lo) {
            let root = lo + f_lo * (hi - lo) / (f_lo - f_hi);
            return Ok(root.clamp(lo, hi));
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        } else if f_mid > 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Err(Error::IterationBudget {
        solver,
        iterations: cfg.max_iter,
        lo,
        hi,
    })
}

fn prepare(act: &UtilityAct, beta: f64, cfg: &SolverConfig) -> Result<Option<f64>> {
    check_beta(beta)?;
    cfg.validate()?;
    Ok(act.is_constant().then(|| act.values()[0]))
}

/// Expectile as the unique root of [`balance_gap`] on `[min U, max U]`.
pub fn expectile_balance(act: &UtilityAct, beta: f64, cfg: &SolverConfig) -> Result<f64> {
    if let Some(c) = prepare(act, beta, cfg)? {
        return Ok(c);
    }
    let knots = act.distinct_values();
    piecewise_linear_root("balance", |v| balance_gap(act, beta, v), &knots, cfg)
}

/// Expectile as the solution of `v = E[k_v(U)]`, solved as a root problem on
/// `h(v) = E[k_v(U)] - v` rather than by Picard iteration.
pub fn gul_fixed_point(act: &UtilityAct, beta: f64, cfg: &SolverConfig) -> Result<f64> {
    if let Some(c) = prepare(act, beta, cfg)? {
        return Ok(c);
    }
    let knots = act.distinct_values();
    piecewise_linear_root("gul", |v| gul_residual(act, beta, v), &knots, cfg)
}

fn reweight(act: &UtilityAct, beta: f64, reference: f64) -> (f64, Vec<f64>) {
    let weights: Vec<f64> = act
        .values()
        .iter()
        .zip(act.probs())
        .map(|(&u, &p)| if u < reference { (1.0 + beta) * p } else { p })
        .collect();
    let total: f64 = weights.iter().sum();
    let masses: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let v = masses.iter().zip(act.values()).map(|(m, u)| m * u).sum();
    (v, masses)
}

/// Starts from the mean and repeatedly inflates the mass of states strictly
/// below the current value by `1 + beta`, renormalizing, until the set of
/// disappointing states stops changing.
///
/// Each row of the trace records `v^(k)` and the masses it was computed
/// with; `steps` counts reweightings. For a nonconstant act the values move
/// monotonically (down for `beta > 0`, up for `beta < 0`) and the number of
/// steps is at most the number of distinct values minus one.
pub fn iterative_reweighting(act: &UtilityAct, beta: f64) -> Result<(f64, ConvergenceTrace)> {
    check_beta(beta)?;
    let probs = act.probs().to_vec();
    if act.is_constant() {
        let c = act.values()[0];
        return Ok((c, single_row(c, probs)));
    }
    let mean = act.mean();
    if beta == 0.0 {
        return Ok((mean, single_row(mean, probs)));
    }

    let max_steps = act.distinct_values().len();
    let mut iterates = vec![TraceStep {
        v: mean,
        masses: probs,
    }];
    let mut v = mean;
    let mut set = disappointment_set(act, v);
    let mut converged = false;
    while iterates.len() <= max_steps {
        let (next, masses) = reweight(act, beta, v);
        let next_set = disappointment_set(act, next);
        // Exact arithmetic keeps D_k nested; a reversal is a rounding flip at
        // a tie, where the value is already final.
        let reversed = if beta > 0.0 {
            !next_set.is_subset(&set)
        } else {
            !set.is_subset(&next_set)
        };
        if reversed {
            converged = true;
            break;
        }
        iterates.push(TraceStep { v: next, masses });
        v = next;
        if next_set == set {
            converged = true;
            break;
        }
        set = next_set;
    }
    let steps = iterates.len() - 1;
    Ok((
        v,
        ConvergenceTrace {
            iterates,
            converged,
            steps,
        },
    ))
}

fn single_row(v: f64, masses: Vec<f64>) -> ConvergenceTrace {
    ConvergenceTrace {
        iterates: vec![TraceStep { v, masses }],
        converged: true,
        steps: 0,
    }
}

/// Minimizer of `v -> E[loss(U - v)]`.
///
/// The objective is a convex quadratic on each piece between consecutive
/// distinct values. A binary search over pieces locates the one whose own
/// quadratic minimizer falls inside it; one probe per iteration.
pub fn als_minimize(act: &UtilityAct, beta: f64, cfg: &SolverConfig) -> Result<f64> {
    if let Some(c) = prepare(act, beta, cfg)? {
        return Ok(c);
    }
    let knots = act.distinct_values();
    // Minimizer of the quadratic that agrees with the objective on piece j:
    // states at or below knots[j] carry weight 1 + beta.
    let piece_argmin = |j: usize| -> f64 {
        let split = knots[j];
        let (mut num, mut den) = (0.0, 0.0);
        for (&u, &p) in act.values().iter().zip(act.probs()) {
            let w = if u <= split { (1.0 + beta) * p } else { p };
            num += w * u;
            den += w;
        }
        num / den
    };

    let (mut lo, mut hi) = (0isize, knots.len() as isize - 2);
    let mut probes = 0;
    while lo <= hi {
        if probes == cfg.max_iter {
            return Err(Error::IterationBudget {
                solver: "als",
                iterations: cfg.max_iter,
                lo: knots[lo as usize],
                hi: knots[hi as usize + 1],
            });
        }
        probes += 1;
        let mid = lo + (hi - lo) / 2;
        let j = mid as usize;
        let c = piece_argmin(j);
        if c < knots[j] {
            hi = mid - 1;
        } else if c > knots[j + 1] {
            lo = mid + 1;
        } else {
            return Ok(c);
        }
    }
    // Neighbouring pieces both point at the shared knot.
    Ok(knots[(lo as usize).min(knots.len() - 1)])
}

/// Closed form for a two-outcome bet paying `ux` on an event of probability
/// `pe` and `uy <= ux` otherwise.
pub fn binary_closed_form(pe: f64, ux: f64, uy: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(0.0..=1.0).contains(&pe) {
        return Err(Error::EventProbability(pe));
    }
    if ux < uy {
        return Err(Error::UnorderedOutcomes { ux, uy });
    }
    let pd = 1.0 - pe;
    let denom = 1.0 + beta * pd;
    Ok(pe * ux / denom + (1.0 + beta) * pd * uy / denom)
}

pub fn solve(act: &UtilityAct, beta: f64, algorithm: Algorithm, cfg: &SolverConfig) -> Result<f64> {
    match algorithm {
        Algorithm::Balance => expectile_balance(act, beta, cfg),
        Algorithm::Gul => gul_fixed_point(act, beta, cfg),
        Algorithm::Iterative => iterative_reweighting(act, beta).map(|(v, _)| v),
        Algorithm::Als => als_minimize(act, beta, cfg),
    }
}

/// Values from all four algorithms and their largest pairwise gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    pub balance: f64,
    pub gul: f64,
    pub iterative: f64,
    pub als: f64,
    pub max_discrepancy: f64,
}

impl CrossCheck {
    pub fn values(&self) -> [f64; 4] {
        [self.balance, self.gul, self.iterative, self.als]
    }
}

/// Runs every algorithm; never fails on disagreement.
pub fn cross_check(act: &UtilityAct, beta: f64, cfg: &SolverConfig) -> Result<CrossCheck> {
    let balance = expectile_balance(act, beta, cfg)?;
    let gul = gul_fixed_point(act, beta, cfg)?;
    let (iterative, _) = iterative_reweighting(act, beta)?;
    let als = als_minimize(act, beta, cfg)?;
    let vals = [balance, gul, iterative, als];
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CrossCheck {
        balance,
        gul,
        iterative,
        als,
        max_discrepancy: hi - lo,
    })
}

/// Expectiled value of `act`. Uses the reweighting procedure; with
/// `cross_check` set, also runs the other three algorithms and fails if any
/// pair differs by more than `CROSS_CHECK_TOL * max(1, range(U))`.
pub fn expectile(
    act: &UtilityAct,
    beta: f64,
    cfg: &SolverConfig,
    cross_check: bool,
) -> Result<f64> {
    if !cross_check {
        cfg.validate()?;
        return iterative_reweighting(act, beta).map(|(v, _)| v);
    }
    let report = self::cross_check(act, beta, cfg)?;
    if report.max_discrepancy > CROSS_CHECK_TOL * act.range().max(1.0) {
        return Err(Error::CrossCheckDivergence {
            balance: report.balance,
            gul: report.gul,
            iterative: report.iterative,
            als: report.als,
            max_discrepancy: report.max_discrepancy,
        });
    }
    Ok(report.iterative)
}

/// [`expectile`] with the default configuration and no cross-check.
pub fn expectile_value(act: &UtilityAct, beta: f64) -> Result<f64> {
    iterative_reweighting(act, beta).map(|(v, _)| v)
}
