use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use expectiled::axiom_lab::{
    fingerprint_functional, infer_beta_from_probability, run_property, PropertyId,
    ReferenceFunctional, Verdict,
};
use expectiled::dual::{
    brute_force_dual_with_limit, event_scenario, event_table, scenario_value, ENUMERATION_GUARD,
};
use expectiled::preferences::{beta_sweep, compare_agents, matching_label};
use expectiled::solvers::{cross_check, iterative_reweighting, solve, CROSS_CHECK_TOL};
use expectiled::{
    disappointment_set, Agent, Algorithm, DisappointmentSet, Error as ModelError, FiniteSpace,
    SolverConfig, UtilityAct,
};

use crate::canonical;
use crate::input::{self, ActKind, InputError, Model};

const DEFAULT_BETAS: [f64; 6] = [-0.9, -0.5, 0.0, 0.5, 1.0, 5.0];

#[derive(Debug, Parser)]
#[command(
    name = "expectiled",
    version,
    about = "Evaluate risky acts by their expectiled utility"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Value, disappointment set and worst-case scenario of every act.
    Eval(EvalArgs),
    /// Iterates of the reweighting procedure.
    Trace(TraceArgs),
    /// Optimal distorted measure, optionally with the full event table.
    Dual(DualArgs),
    /// Seeded property and axiom checks.
    Axioms(AxiomArgs),
    /// Value of every act across a list of coefficients.
    Sweep(SweepArgs),
    /// Coefficient implied by the value of a two-outcome bet.
    InferBeta(InferArgs),
    /// Compare the disappointment aversion of two agents.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Balance,
    Gul,
    Iterative,
    Als,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Balance => Algorithm::Balance,
            AlgorithmArg::Gul => Algorithm::Gul,
            AlgorithmArg::Iterative => Algorithm::Iterative,
            AlgorithmArg::Als => Algorithm::Als,
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON document or CSV table of acts.
    pub input: PathBuf,
    /// Disappointment coefficient; overrides the agent section.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "iterative")]
    pub algorithm: AlgorithmArg,
    /// Run all four algorithms and fail on disagreement.
    #[arg(long)]
    pub cross_check: bool,
    /// Absolute solver tolerance (default 1e-12 * max(1, range)).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DualArgs {
    #[command(flatten)]
    pub common: Common,
    /// Enumerate every event scenario.
    #[arg(long)]
    pub brute_force: bool,
    /// Lift the 24-state enumeration guard.
    #[arg(long)]
    pub allow_large: bool,
}

#[derive(Debug, Args)]
pub struct AxiomArgs {
    /// Take the probability space from this document instead of --states.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of equally likely states.
    #[arg(long, default_value_t = 6)]
    pub states: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Restrict to these properties (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub property: Vec<String>,
    /// Fingerprint a reference functional instead of running the property
    /// suite: mean, max, mad, median-like, or expectile:<beta>.
    #[arg(long)]
    pub fingerprint: Option<String>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub betas: Vec<f64>,
    /// Emit a two-column `beta value` table per act.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Probability of the event on which the bet pays `ux`.
    #[arg(long)]
    pub p_event: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub observed: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub ux: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub uy: f64,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Agent A: JSON object with `beta` and `utility`.
    pub agent_a: PathBuf,
    /// Agent B.
    pub agent_b: PathBuf,
    /// Take the probability space from this document instead of --states.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub states: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Input(String),
    NonConvergence(String),
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Divergence(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::NonConvergence(m) | CliError::Divergence(m) => m,
        }
    }
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::IterationBudget { .. } => CliError::NonConvergence(e.to_string()),
            ModelError::CrossCheckDivergence { .. } => CliError::Divergence(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

/// Rendered report and whether every check in it passed.
pub struct Report {
    pub text: String,
    pub passed: bool,
}

impl Report {
    fn ok(text: String) -> Self {
        Report { text, passed: true }
    }
}

pub fn execute(cli: Cli) -> Result<Report, CliError> {
    match cli.command {
        Command::Eval(args) => eval(args),
        Command::Trace(args) => trace(args),
        Command::Dual(args) => dual(args),
        Command::Axioms(args) => axioms(args),
        Command::Sweep(args) => sweep(args),
        Command::InferBeta(args) => infer(args),
        Command::Compare(args) => compare(args),
    }
}

struct Loaded {
    model: Model,
    beta: f64,
    agent: Option<Agent>,
    acts: Vec<(String, UtilityAct)>,
}

fn load(common: &Common) -> Result<Loaded, CliError> {
    let model = input::load(&common.input)?;
    let (beta, agent) = match (common.beta, &model.agent) {
        (Some(beta), Some(agent)) => (beta, Some(agent.with_beta(beta)?)),
        (Some(beta), None) => (expectiled::model::check_beta(beta)?, None),
        (None, Some(agent)) => (agent.beta(), Some(agent.clone())),
        (None, None) => {
            return Err(CliError::Input(
                "no disappointment coefficient: pass --beta or add an agent section".into(),
            ))
        }
    };
    let acts = model.utility_acts(agent.as_ref())?;
    if acts.is_empty() {
        return Err(CliError::Input(
            "acts: the document contains no acts".into(),
        ));
    }
    Ok(Loaded {
        model,
        beta,
        agent,
        acts,
    })
}

fn labels(space: &FiniteSpace, set: &DisappointmentSet) -> Value {
    Value::from(set.labels(space).map(Value::from).collect::<Vec<_>>())
}

fn floats(xs: &[f64]) -> Value {
    Value::from(xs.to_vec())
}

fn render(format: Format, json: Value, table: impl FnOnce() -> String) -> String {
    match format {
        Format::Json => canonical::to_string(&json),
        Format::Table => table(),
    }
}

fn set_text(space: &FiniteSpace, set: &DisappointmentSet) -> String {
    format!("{{{}}}", set.labels(space).collect::<Vec<_>>().join(","))
}

fn list_text(xs: &[f64]) -> String {
    format!(
        "({})",
        xs.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )
}

/// Left-aligned columns separated by two spaces.
fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let mut s = String::new();
        for (k, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if k + 1 == cells.len() {
                s.push_str(cell);
            } else {
                s.push_str(&format!("{cell:<w$}  "));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

fn eval(args: EvalArgs) -> Result<Report, CliError> {
    let loaded = load(&args.common)?;
    let space = loaded.model.space.clone();
    let beta = loaded.beta;
    let algorithm = Algorithm::from(args.algorithm);

    let mut rows_json = Vec::new();
    let mut rows_text = Vec::new();
    for (k, (name, act)) in loaded.acts.iter().enumerate() {
        let mut cfg = SolverConfig::for_act(act);
        if let Some(tol) = args.tol {
            cfg.abs_tol = tol;
        }
        if let Some(max_iter) = args.max_iter {
            cfg.max_iter = max_iter;
        }
        let value = solve(act, beta, algorithm, &cfg)?;
        let set = disappointment_set(act, value);
        let scenario = event_scenario(&space, &set, beta)?;

        let mut row = Map::new();
        row.insert("name".into(), json!(name));
        row.insert("value".into(), json!(value));
        row.insert("disappointment_set".into(), labels(&space, &set));
        row.insert("density".into(), floats(scenario.density()));
        row.insert("scenario".into(), floats(&scenario.measure()));
        row.insert(
            "scenario_value".into(),
            json!(scenario_value(act, &scenario)?),
        );
        if let (ActKind::Outcomes(_), Some(agent)) = (&loaded.model.acts[k].kind, &loaded.agent) {
            row.insert(
                "certainty_equivalent".into(),
                json!(matching_label(agent, value)),
            );
        }
        let mut text_row = vec![
            name.clone(),
            value.to_string(),
            set_text(&space, &set),
            list_text(&scenario.measure()),
        ];
        if args.cross_check {
            let report = cross_check(act, beta, &cfg)?;
            if report.max_discrepancy > CROSS_CHECK_TOL * act.range().max(1.0) {
                return Err(ModelError::CrossCheckDivergence {
                    balance: report.balance,
                    gul: report.gul,
                    iterative: report.iterative,
                    als: report.als,
                    max_discrepancy: report.max_discrepancy,
                }
                .into());
            }
            row.insert(
                "cross_check".into(),
                json!({
                    "balance": report.balance,
                    "gul": report.gul,
                    "iterative": report.iterative,
                    "als": report.als,
                    "max_discrepancy": report.max_discrepancy,
                }),
            );
            text_row.push(format!("{:.3e}", report.max_discrepancy));
        }
        rows_json.push(Value::Object(row));
        rows_text.push(text_row);
    }

    let doc = json!({
        "command": "eval",
        "beta": beta,
        "algorithm": algorithm.name(),
        "states": space.labels(),
        "probs": space.probs(),
        "acts": rows_json,
    });
    let text = render(args.common.format, doc, || {
        let mut headers = vec!["act", "value", "disappointment", "scenario"];
        if args.cross_check {
            headers.push("max_discrepancy");
        }
        format!(
            "beta = {beta}, algorithm = {algorithm}\n{}",
            table(&headers, &rows_text)
        )
    });
    Ok(Report::ok(text))
}

fn trace(args: TraceArgs) -> Result<Report, CliError> {
    let loaded = load(&args.common)?;
    let beta = loaded.beta;
    let mut acts_json = Vec::new();
    let mut text = format!("beta = {beta}\n");
    for (name, act) in &loaded.acts {
        let (value, trace) = iterative_reweighting(act, beta)?;
        let rows: Vec<Value> = trace
            .iterates
            .iter()
            .enumerate()
            .map(|(k, step)| json!({"step": k, "v": step.v, "masses": step.masses}))
            .collect();
        acts_json.push(json!({
            "name": name,
            "value": value,
            "steps": trace.steps,
            "converged": trace.converged,
            "rows": rows,
        }));
        let rows_text: Vec<Vec<String>> = trace
            .iterates
            .iter()
            .enumerate()
            .map(|(k, step)| vec![k.to_string(), step.v.to_string(), list_text(&step.masses)])
            .collect();
        text.push_str(&format!(
            "\n{name}: {value} after {} step(s)\n",
            trace.steps
        ));
        text.push_str(&table(&["step", "v", "masses"], &rows_text));
    }
    let doc = json!({
        "command": "trace",
        "beta": beta,
        "states": loaded.model.space.labels(),
        "acts": acts_json,
    });
    Ok(Report::ok(render(args.common.format, doc, || text)))
}

fn dual(args: DualArgs) -> Result<Report, CliError> {
    let loaded = load(&args.common)?;
    let space = loaded.model.space.clone();
    let beta = loaded.beta;
    let limit = if args.allow_large {
        usize::MAX
    } else {
        ENUMERATION_GUARD
    };
    if args.brute_force && space.len() > limit {
        return Err(CliError::Input(format!(
            "space.states: {} states exceed the enumeration guard of {ENUMERATION_GUARD}; pass --allow-large",
            space.len()
        )));
    }
    let mut acts_json = Vec::new();
    let mut text = format!("beta = {beta}\n");
    for (name, act) in &loaded.acts {
        let value = expectiled::expectile_value(act, beta)?;
        let set = disappointment_set(act, value);
        let scenario = event_scenario(&space, &set, beta)?;
        let attained = scenario_value(act, &scenario)?;
        let mut row = Map::new();
        row.insert("name".into(), json!(name));
        row.insert("value".into(), json!(value));
        row.insert("optimal_event".into(), labels(&space, &set));
        row.insert("density".into(), floats(scenario.density()));
        row.insert("scenario".into(), floats(&scenario.measure()));
        row.insert("scenario_value".into(), json!(attained));
        text.push_str(&format!(
            "\n{name}: value {value}, optimal event {}, Q* {}, E^Q* {attained}\n",
            set_text(&space, &set),
            list_text(&scenario.measure())
        ));
        if args.brute_force {
            let (best, best_event) = brute_force_dual_with_limit(act, beta, limit)?;
            let rows = event_table(act, beta, limit)?;
            let table_json: Vec<Value> = rows
                .iter()
                .map(|(event, v)| json!({"event": labels(&space, event), "value": v}))
                .collect();
            row.insert(
                "brute_force".into(),
                json!({
                    "optimum": if beta >= 0.0 { "min" } else { "max" },
                    "value": best,
                    "event": labels(&space, &best_event),
                    "table": table_json,
                }),
            );
            let rows_text: Vec<Vec<String>> = rows
                .iter()
                .map(|(event, v)| vec![set_text(&space, event), v.to_string()])
                .collect();
            text.push_str(&table(&["event", "value"], &rows_text));
            text.push_str(&format!(
                "brute-force {}: {best} at {}\n",
                if beta >= 0.0 { "min" } else { "max" },
                set_text(&space, &best_event)
            ));
        }
        acts_json.push(Value::Object(row));
    }
    let doc = json!({
        "command": "dual",
        "beta": beta,
        "states": space.labels(),
        "acts": acts_json,
    });
    Ok(Report::ok(render(args.common.format, doc, || text)))
}

fn axiom_space(input: &Option<PathBuf>, states: usize) -> Result<Arc<FiniteSpace>, CliError> {
    match input {
        Some(path) => Ok(input::load(path)?.space),
        None => FiniteSpace::uniform(states).map_err(|e| CliError::Input(format!("--states: {e}"))),
    }
}

fn axioms(args: AxiomArgs) -> Result<Report, CliError> {
    if args.trials == 0 {
        return Err(CliError::Input("--trials: must be at least 1".into()));
    }
    let space = axiom_space(&args.input, args.states)?;

    if let Some(name) = &args.fingerprint {
        let functional: ReferenceFunctional = name
            .parse()
            .map_err(|e: String| CliError::Input(format!("--fingerprint: {e}")))?;
        let evaluator = move |act: &UtilityAct| functional.evaluate(act);
        let fp = fingerprint_functional(&evaluator, &space, args.trials, args.seed, args.tol)?;
        let consistent = fp.verdict == Verdict::Consistent;
        let verdict = if consistent {
            "consistent"
        } else {
            "inconsistent"
        };
        let doc = json!({
            "command": "axioms",
            "fingerprint": name,
            "verdict": verdict,
            "beta_hat": fp.beta_hat,
            "witness": fp.witness.as_ref().map(|w| w.values().to_vec()),
            "discrepancy": if fp.discrepancy.is_finite() { json!(fp.discrepancy) } else { Value::Null },
            "trials_run": fp.trials_run,
            "seed": args.seed,
        });
        let text = render(args.format, doc, || {
            let mut s = format!("fingerprint {name}: {verdict}\n");
            if let Some(b) = fp.beta_hat {
                s.push_str(&format!("inferred beta: {b}\n"));
            }
            if let Some(w) = &fp.witness {
                s.push_str(&format!("witness act: {}\n", list_text(w.values())));
            }
            s
        });
        return Ok(Report {
            text,
            passed: consistent,
        });
    }

    let betas = if args.beta.is_empty() {
        DEFAULT_BETAS.to_vec()
    } else {
        args.beta.clone()
    };
    let properties = if args.property.is_empty() {
        PropertyId::ALL.to_vec()
    } else {
        args.property
            .iter()
            .map(|p| {
                p.parse::<PropertyId>()
                    .map_err(|e| CliError::Input(format!("--property: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?
    };

    let mut reports = Vec::new();
    for &beta in &betas {
        for &property in &properties {
            reports.push(run_property(
                property,
                &space,
                beta,
                args.trials,
                args.seed,
                args.tol,
            )?);
        }
    }
    let passed = reports.iter().all(|r| r.passed());
    let reports_json: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "property": r.property.name(),
                "beta": r.beta,
                "trials": r.trials,
                "failures": r.failures,
                "worst_violation": r.worst_violation,
                "seed": r.seed,
                "first_failure": r.first_failure,
            })
        })
        .collect();
    let doc = json!({
        "command": "axioms",
        "states": space.labels(),
        "probs": space.probs(),
        "trials": args.trials,
        "seed": args.seed,
        "tol": args.tol,
        "passed": passed,
        "reports": reports_json,
    });
    let text = render(args.format, doc, || {
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|r| {
                vec![
                    r.property.name().to_string(),
                    r.beta.to_string(),
                    r.trials.to_string(),
                    r.failures.to_string(),
                    format!("{:.3e}", r.worst_violation),
                    if r.passed() {
                        "pass".into()
                    } else {
                        "FAIL".into()
                    },
                ]
            })
            .collect();
        format!(
            "seed = {}, {} state(s)\n{}",
            args.seed,
            space.len(),
            table(
                &["property", "beta", "trials", "failures", "worst", "status"],
                &rows
            )
        )
    });
    Ok(Report { text, passed })
}

fn sweep(args: SweepArgs) -> Result<Report, CliError> {
    let common = Common {
        beta: args.common.beta.or(Some(0.0)),
        input: args.common.input.clone(),
        format: args.common.format,
    };
    let loaded = load(&common)?;
    let mut acts_json = Vec::new();
    let mut text = String::new();
    for (name, act) in &loaded.acts {
        let rows = beta_sweep(act, &args.betas)?;
        acts_json.push(json!({
            "name": name,
            "rows": rows.iter().map(|(b, v)| json!({"beta": b, "value": v})).collect::<Vec<_>>(),
        }));
        if args.plot {
            text.push_str(&format!("# {name}\n"));
            for (b, v) in &rows {
                text.push_str(&format!("{b}\t{v}\n"));
            }
        } else {
            let rows_text: Vec<Vec<String>> = rows
                .iter()
                .map(|(b, v)| vec![b.to_string(), v.to_string()])
                .collect();
            text.push_str(&format!(
                "{name}\n{}",
                table(&["beta", "value"], &rows_text)
            ));
        }
    }
    let doc = json!({"command": "sweep", "acts": acts_json});
    let format = if args.plot {
        Format::Table
    } else {
        common.format
    };
    Ok(Report::ok(render(format, doc, || text)))
}

fn infer(args: InferArgs) -> Result<Report, CliError> {
    let beta = infer_beta_from_probability(args.p_event, args.observed, args.ux, args.uy)?;
    let doc = json!({
        "command": "infer-beta",
        "p_event": args.p_event,
        "observed": args.observed,
        "ux": args.ux,
        "uy": args.uy,
        "beta": beta,
    });
    Ok(Report::ok(render(args.format, doc, || {
        format!("beta = {beta}\n")
    })))
}

fn compare(args: CompareArgs) -> Result<Report, CliError> {
    let a = input::load_agent(&args.agent_a)?;
    let b = input::load_agent(&args.agent_b)?;
    let space = axiom_space(&args.input, args.states)?;
    let report = compare_agents(&a, &b, &space, args.trials, args.seed)?;
    let order = match report.beta_order {
        std::cmp::Ordering::Greater => "greater",
        std::cmp::Ordering::Less => "less",
        std::cmp::Ordering::Equal => "equal",
    };
    let doc = json!({
        "command": "compare",
        "affine_related": report.affine_related,
        "slope": report.slope,
        "intercept": report.intercept,
        "max_residual": report.max_residual,
        "beta_a": a.beta(),
        "beta_b": b.beta(),
        "beta_order": order,
        "trials": report.trials,
        "seed": args.seed,
        "violations": report.violations,
        "empirical_relation_holds": report.empirical_relation_holds,
        "verdict": report.verdict(),
    });
    let text = render(args.format, doc, || {
        format!(
            "{}\nu_A = {} * u_B + {} (max residual {:e}, affine: {})\nbeta_A = {}, beta_B = {}\nsampled relation holds: {} ({} violation(s) in {} trials)\n",
            report.verdict(),
            report.slope,
            report.intercept,
            report.max_residual,
            report.affine_related,
            a.beta(),
            b.beta(),
            report.empirical_relation_holds,
            report.violations,
            report.trials
        )
    });
    Ok(Report::ok(text))
}
