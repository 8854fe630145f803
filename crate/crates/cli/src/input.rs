//! Input documents: a JSON file with `space`, `acts` and `agent` sections,
//! or a CSV table of utility acts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use expectiled::{Agent, Error as ModelError, FiniteSpace, OutcomeAct, UtilityAct};

/// Invalid input, located by a path into the document such as
/// `space.states[2].prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError {
    pub path: String,
    pub message: String,
}

impl InputError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        InputError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for InputError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub states: Vec<StateDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utils: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub beta: f64,
    #[serde(default)]
    pub utility: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDoc {
    pub space: SpaceDoc,
    #[serde(default)]
    pub acts: Vec<ActDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentDoc>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActKind {
    Utils(UtilityAct),
    Outcomes(OutcomeAct),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedAct {
    pub name: String,
    pub kind: ActKind,
}

/// A validated input document.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub space: Arc<FiniteSpace>,
    pub acts: Vec<NamedAct>,
    pub agent: Option<Agent>,
}

impl Model {
    /// Acts in utils, applying the agent's table to outcome acts.
    pub fn utility_acts(
        &self,
        agent: Option<&Agent>,
    ) -> Result<Vec<(String, UtilityAct)>, InputError> {
        self.acts
            .iter()
            .enumerate()
            .map(|(k, act)| {
                let u = match &act.kind {
                    ActKind::Utils(u) => u.clone(),
                    ActKind::Outcomes(x) => {
                        let agent = agent.ok_or_else(|| {
                            InputError::new(
                                format!("acts[{k}].outcomes"),
                                "outcome acts need an agent utility table",
                            )
                        })?;
                        expectiled::apply_utility(x, agent)
                            .map_err(|e| InputError::new(format!("acts[{k}].outcomes"), e))?
                    }
                };
                Ok((act.name.clone(), u))
            })
            .collect()
    }

    pub fn to_doc(&self) -> InputDoc {
        let states = self
            .space
            .labels()
            .iter()
            .zip(self.space.probs())
            .map(|(label, &p)| StateDoc {
                label: label.clone(),
                prob: Some(p),
            })
            .collect();
        let acts = self
            .acts
            .iter()
            .map(|a| match &a.kind {
                ActKind::Utils(u) => ActDoc {
                    name: a.name.clone(),
                    utils: Some(u.values().to_vec()),
                    outcomes: None,
                },
                ActKind::Outcomes(x) => ActDoc {
                    name: a.name.clone(),
                    utils: None,
                    outcomes: Some(x.outcomes().to_vec()),
                },
            })
            .collect();
        InputDoc {
            space: SpaceDoc { states },
            acts,
            agent: self.agent.as_ref().map(|a| AgentDoc {
                beta: a.beta(),
                utility: a.utility().clone(),
            }),
        }
    }
}

pub fn build_space(doc: &SpaceDoc) -> Result<Arc<FiniteSpace>, InputError> {
    let labels: Vec<String> = doc.states.iter().map(|s| s.label.clone()).collect();
    let given = doc.states.iter().filter(|s| s.prob.is_some()).count();
    let result = if given == 0 {
        FiniteSpace::uniform_labeled(labels)
    } else if given == doc.states.len() {
        FiniteSpace::new(
            labels,
            doc.states
                .iter()
                .map(|s| s.prob.unwrap_or_default())
                .collect(),
        )
    } else {
        let k = doc
            .states
            .iter()
            .position(|s| s.prob.is_none())
            .unwrap_or(0);
        return Err(InputError::new(
            format!("space.states[{k}].prob"),
            "either every state or no state carries a probability",
        ));
    };
    result.map_err(|e| {
        let path = match &e {
            ModelError::EmptySpace => "space.states".to_string(),
            ModelError::NonPositiveProbability { label, .. }
            | ModelError::DuplicateLabel(label) => {
                let k = doc
                    .states
                    .iter()
                    .position(|s| &s.label == label)
                    .unwrap_or(0);
                let field = if matches!(e, ModelError::DuplicateLabel(_)) {
                    "label"
                } else {
                    "prob"
                };
                format!("space.states[{k}].{field}")
            }
            ModelError::ProbabilitySum { .. } => "space.states[*].prob".to_string(),
            _ => "space".to_string(),
        };
        InputError::new(path, e)
    })
}

pub fn build_agent(doc: &AgentDoc) -> Result<Agent, InputError> {
    Agent::new(doc.beta, doc.utility.clone()).map_err(|e| {
        let path = match &e {
            ModelError::InvalidBeta(_) => "agent.beta".to_string(),
            ModelError::NonFiniteUtility { label, .. } => format!("agent.utility.{label}"),
            _ => "agent".to_string(),
        };
        InputError::new(path, e)
    })
}

pub fn build_model(doc: &InputDoc) -> Result<Model, InputError> {
    let space = build_space(&doc.space)?;
    let agent = doc.agent.as_ref().map(build_agent).transpose()?;
    let mut acts = Vec::with_capacity(doc.acts.len());
    for (k, act) in doc.acts.iter().enumerate() {
        let kind = match (&act.utils, &act.outcomes) {
            (Some(values), None) => ActKind::Utils(
                UtilityAct::new(space.clone(), values.clone())
                    .map_err(|e| InputError::new(format!("acts[{k}].utils"), e))?,
            ),
            (None, Some(outcomes)) => ActKind::Outcomes(
                OutcomeAct::new(space.clone(), outcomes.clone())
                    .map_err(|e| InputError::new(format!("acts[{k}].outcomes"), e))?,
            ),
            _ => {
                return Err(InputError::new(
                    format!("acts[{k}]"),
                    "exactly one of `utils` or `outcomes` is required",
                ))
            }
        };
        acts.push(NamedAct {
            name: act.name.clone(),
            kind,
        });
    }
    Ok(Model { space, acts, agent })
}

pub fn parse_json(text: &str) -> Result<Model, InputError> {
    let doc: InputDoc = serde_json::from_str(text)
        .map_err(|e| InputError::new("", format!("invalid JSON: {e}")))?;
    build_model(&doc)
}

/// CSV with one act per column: the header names the acts, the first column
/// holds state labels. A second column headed `prob` supplies probabilities;
/// without it the states are equally likely.
pub fn parse_csv(text: &str) -> Result<Model, InputError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| InputError::new("header", e))?
        .clone();
    if headers.len() < 2 {
        return Err(InputError::new(
            "header",
            "need a state column and at least one act column",
        ));
    }
    let has_prob = headers.get(1) == Some("prob");
    let first_act = if has_prob { 2 } else { 1 };
    let names: Vec<String> = headers.iter().skip(first_act).map(str::to_owned).collect();

    let mut states = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| InputError::new(format!("row {line}"), e))?;
        let label = record.get(0).unwrap_or_default().to_owned();
        let prob = if has_prob {
            let raw = record.get(1).unwrap_or_default();
            Some(raw.parse::<f64>().map_err(|_| {
                InputError::new(format!("row {line}.prob"), format!("not a number: `{raw}`"))
            })?)
        } else {
            None
        };
        states.push(StateDoc { label, prob });
        for (c, name) in names.iter().enumerate() {
            let raw = record.get(first_act + c).unwrap_or_default();
            let value = raw.parse::<f64>().map_err(|_| {
                InputError::new(
                    format!("row {line}.{name}"),
                    format!("not a number: `{raw}`"),
                )
            })?;
            columns[c].push(value);
        }
    }
    let doc = InputDoc {
        space: SpaceDoc { states },
        acts: names
            .into_iter()
            .zip(columns)
            .map(|(name, utils)| ActDoc {
                name,
                utils: Some(utils),
                outcomes: None,
            })
            .collect(),
        agent: None,
    };
    build_model(&doc)
}

pub fn load(path: &Path) -> Result<Model, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError::new("", format!("cannot read {}: {e}", path.display())))?;
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        parse_csv(&text)
    } else {
        parse_json(&text)
    }
}

pub fn load_agent(path: &Path) -> Result<Agent, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError::new("", format!("cannot read {}: {e}", path.display())))?;
    let doc: AgentDoc = serde_json::from_str(&text)
        .map_err(|e| InputError::new("", format!("invalid JSON: {e}")))?;
    build_agent(&doc)
}
