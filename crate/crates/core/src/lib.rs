//! Expectiled utility: evaluation of risky acts by a disappointment-averse
//! decision maker.
//!
//! An act's value is the expectile `E_beta[u(X)]`, the unique `v` with
//! `E[(U - v)^+] = (1 + beta) E[(v - U)^+]`. The crate computes it four
//! independent ways ([`solvers`]), exposes its maxmin representation over
//! distorted probability measures ([`dual`]), and checks its structural
//! properties with seeded random trials ([`axiom_lab`]).

pub mod axiom_lab;
pub mod dual;
pub mod error;
pub mod model;
pub mod preferences;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{
    apply_utility, disappointment_set, distribution, fosd_compare, Agent, DisappointmentSet,
    Dominance, FiniteSpace, OutcomeAct, Scenario, UtilityAct,
};
pub use solvers::{expectile, expectile_value, Algorithm, ConvergenceTrace, SolverConfig};
