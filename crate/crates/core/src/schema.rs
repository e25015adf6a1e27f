//! JSON documents for environment laws and BRW laws.
//!
//! Weight-space law:
//!
//! ```json
//! {
//!   "states": [
//!     {"id": "A", "kind": "finite", "prob": 0.5,
//!      "outcomes": [{"p": 0.5, "weights": [0.3, 0.5]}, {"p": 0.5, "weights": [1.2]}]},
//!     {"id": "T", "kind": "tilted", "prob": 0.25, "displacement_ref": "gauss", "theta": 0.8},
//!     {"id": "N", "kind": "burst", "prob": 0.25}
//!   ],
//!   "displacements": [
//!     {"id": "gauss", "outcomes": [{"p": 1.0, "children": [
//!       {"gaussian": {"mu": 0.0, "sigma2": 1.0}}, {"atom": 0.5}]}]}
//!   ]
//! }
//! ```
//!
//! A BRW law is `{"states": [{"id", "prob", "outcomes": [{"p", "children"}]}]}`
//! with the same child encoding. Unknown fields are rejected everywhere.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::brwre::{BrwLaw, Displacement, DisplacementOutcome, DisplacementState};
use crate::env_model::{EnvState, EnvironmentLaw, Outcome, StateKind, TiltedState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKindTag {
    Finite,
    Tilted,
    Burst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDoc {
    pub p: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub id: String,
    pub kind: StateKindTag,
    pub prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<OutcomeDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianDoc {
    pub mu: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ChildDoc {
    Atom(f64),
    Gaussian(GaussianDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplacementOutcomeDoc {
    pub p: f64,
    pub children: Vec<ChildDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplacementDoc {
    pub id: String,
    pub outcomes: Vec<DisplacementOutcomeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawDoc {
    pub states: Vec<StateDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub displacements: Vec<DisplacementDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrwStateDoc {
    pub id: String,
    pub prob: f64,
    pub outcomes: Vec<DisplacementOutcomeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrwLawDoc {
    pub states: Vec<BrwStateDoc>,
}

fn displacement_state(outcomes: &[DisplacementOutcomeDoc]) -> Result<DisplacementState> {
    DisplacementState::new(
        outcomes
            .iter()
            .map(|o| DisplacementOutcome {
                prob: o.p,
                children: o
                    .children
                    .iter()
                    .map(|c| match *c {
                        ChildDoc::Atom(z) => Displacement::Atom(z),
                        ChildDoc::Gaussian(GaussianDoc { mu, sigma2 }) => Displacement::Gaussian { mu, sigma2 },
                    })
                    .collect(),
            })
            .collect(),
    )
}

fn displacement_doc(id: &str, state: &DisplacementState) -> DisplacementDoc {
    DisplacementDoc { id: id.to_owned(), outcomes: displacement_outcome_docs(state) }
}

fn displacement_outcome_docs(state: &DisplacementState) -> Vec<DisplacementOutcomeDoc> {
    state
        .outcomes()
        .iter()
        .map(|o| DisplacementOutcomeDoc {
            p: o.prob,
            children: o
                .children
                .iter()
                .map(|c| match *c {
                    Displacement::Atom(z) => ChildDoc::Atom(z),
                    Displacement::Gaussian { mu, sigma2 } => ChildDoc::Gaussian(GaussianDoc { mu, sigma2 }),
                })
                .collect(),
        })
        .collect()
}

fn malformed(id: &str, msg: &str) -> Error {
    Error::MalformedLaw(format!("state `{id}`: {msg}"))
}

impl LawDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_law(&self) -> Result<EnvironmentLaw> {
        let mut displacements: HashMap<&str, Arc<DisplacementState>> = HashMap::new();
        for d in &self.displacements {
            let s = Arc::new(displacement_state(&d.outcomes)?);
            if displacements.insert(d.id.as_str(), s).is_some() {
                return Err(Error::MalformedLaw(format!("duplicate displacement id `{}`", d.id)));
            }
        }
        let mut states = Vec::with_capacity(self.states.len());
        for s in &self.states {
            let state = match s.kind {
                StateKindTag::Finite => {
                    if s.displacement_ref.is_some() || s.theta.is_some() {
                        return Err(malformed(&s.id, "finite states take no displacement_ref or theta"));
                    }
                    let outcomes = s.outcomes.as_ref().ok_or_else(|| malformed(&s.id, "missing outcomes"))?;
                    EnvState::finite(s.id.clone(), outcomes.iter().map(|o| (o.p, o.weights.clone())).collect())?
                }
                StateKindTag::Tilted => {
                    if s.outcomes.is_some() {
                        return Err(malformed(&s.id, "tilted states take no outcomes"));
                    }
                    let r = s.displacement_ref.as_deref().ok_or_else(|| malformed(&s.id, "missing displacement_ref"))?;
                    let theta = s.theta.ok_or_else(|| malformed(&s.id, "missing theta"))?;
                    let d = displacements.get(r).ok_or_else(|| Error::UnknownState(r.to_owned()))?;
                    EnvState::tilted(s.id.clone(), TiltedState::new(r, d.clone(), theta)?)
                }
                StateKindTag::Burst => {
                    if s.outcomes.is_some() || s.displacement_ref.is_some() || s.theta.is_some() {
                        return Err(malformed(&s.id, "burst states take no parameters"));
                    }
                    EnvState::burst(s.id.clone())
                }
            };
            states.push((s.prob, state));
        }
        EnvironmentLaw::new(states)
    }

    pub fn from_law(law: &EnvironmentLaw) -> Self {
        let mut displacements: Vec<DisplacementDoc> = Vec::new();
        let states = law
            .states()
            .iter()
            .map(|(prob, s)| {
                let mut doc = StateDoc {
                    id: s.id.clone(),
                    kind: StateKindTag::Finite,
                    prob: *prob,
                    outcomes: None,
                    displacement_ref: None,
                    theta: None,
                };
                match &s.kind {
                    StateKind::FiniteDiscrete(o) => {
                        doc.outcomes = Some(
                            o.iter()
                                .map(|Outcome { prob, weights }| OutcomeDoc { p: *prob, weights: weights.as_slice().to_vec() })
                                .collect(),
                        );
                    }
                    StateKind::ThetaTilted(t) => {
                        doc.kind = StateKindTag::Tilted;
                        doc.displacement_ref = Some(t.displacement_ref.clone());
                        doc.theta = Some(t.theta);
                        if !displacements.iter().any(|d| d.id == t.displacement_ref) {
                            displacements.push(displacement_doc(&t.displacement_ref, &t.displacement));
                        }
                    }
                    StateKind::Burst(_) => doc.kind = StateKindTag::Burst,
                }
                doc
            })
            .collect();
        LawDoc { states, displacements }
    }
}

impl BrwLawDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_law(&self) -> Result<BrwLaw> {
        BrwLaw::new(
            self.states
                .iter()
                .map(|s| Ok((s.prob, s.id.clone(), displacement_state(&s.outcomes)?)))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn from_law(law: &BrwLaw) -> Self {
        BrwLawDoc {
            states: law
                .states()
                .iter()
                .map(|(p, id, s)| BrwStateDoc { id: id.clone(), prob: *p, outcomes: displacement_outcome_docs(s) })
                .collect(),
        }
    }
}

/// Parses a weight-space law document.
pub fn parse_law(text: &str) -> Result<EnvironmentLaw> {
    LawDoc::from_json(text)?.to_law()
}

/// Parses a BRW law document.
pub fn parse_brw_law(text: &str) -> Result<BrwLaw> {
    BrwLawDoc::from_json(text)?.to_law()
}
