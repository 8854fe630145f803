use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability space must contain at least one state")]
    EmptySpace,
    #[error("probability of state `{label}` must be strictly positive and finite, got {prob}")]
    NonPositiveProbability { label: String, prob: f64 },
    #[error("probabilities sum to {sum}, which is not 1 within {tol:e}")]
    ProbabilitySum { sum: f64, tol: f64 },
    #[error("state labels and probabilities differ in length ({labels} vs {probs})")]
    LabelCount { labels: usize, probs: usize },
    #[error("duplicate state label `{0}`")]
    DuplicateLabel(String),
    #[error("act has {got} values but the space has {expected} states")]
    LengthMismatch { expected: usize, got: usize },
    #[error("value at state {index} is not finite ({value})")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("utility of outcome `{label}` is not finite ({value})")]
    NonFiniteUtility { label: String, value: f64 },
    #[error("outcome `{0}` has no entry in the utility table")]
    MissingLabel(String),
    #[error("disappointment coefficient must be finite and greater than -1, got {0}")]
    InvalidBeta(f64),
    #[error("acts are defined on different probability spaces")]
    SpaceMismatch,
    #[error("scenario density at state {index} is negative or not finite ({value})")]
    NegativeDensity { index: usize, value: f64 },
    #[error("scenario density integrates to {total} instead of 1")]
    DensityMass { total: f64 },
    #[error("state index {index} is out of range for a space of {len} states")]
    StateIndex { index: usize, len: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("{solver} exhausted {iterations} iterations; last bracket [{lo}, {hi}]")]
    IterationBudget {
        solver: &'static str,
        iterations: usize,
        lo: f64,
        hi: f64,
    },
    #[error(
        "solvers disagree by {max_discrepancy:e} (balance {balance}, gul {gul}, iterative {iterative}, als {als})"
    )]
    CrossCheckDivergence {
        balance: f64,
        gul: f64,
        iterative: f64,
        als: f64,
        max_discrepancy: f64,
    },
    #[error("event probability {0} lies outside [0, 1]")]
    EventProbability(f64),
    #[error("utility of the good outcome ({ux}) is below that of the bad outcome ({uy})")]
    UnorderedOutcomes { ux: f64, uy: f64 },
    #[error("observed value {observed} is not strictly between {uy} and {ux}")]
    ObservedOutOfRange { observed: f64, ux: f64, uy: f64 },
    #[error("enumeration over {states} states exceeds the guard of {limit}")]
    EnumerationGuard { states: usize, limit: usize },
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("disappointment set must be nonempty and proper")]
    ImproperEvent,
    #[error("evaluator returned a non-finite value ({0})")]
    NonFiniteEvaluation(f64),
    #[error("utility table needs at least two distinct utility values")]
    DegenerateUtility,
    #[error("list of acts is empty")]
    NoActs,
}
