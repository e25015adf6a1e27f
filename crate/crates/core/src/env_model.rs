//! Environment states, i.i.d. environment laws and their sampling.
//!
//! An environment state fixes the law of one generation's weight vector
//! `(y₁, y₂, …)`. Three families are supported: finite discrete laws,
//! weights induced by tilting a branching-random-walk displacement state,
//! and the heavy-tailed [`BurstLaw`].

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::brwre::{Displacement, DisplacementState};
use crate::burst::BurstLaw;
use crate::error::{Error, Result};
use crate::seed::{self, StreamRng};

/// Tolerance on probability sums.
pub const PROB_TOL: f64 = 1e-12;
/// Default tolerance on the quenched mean of a finite discrete state.
pub const MEAN_TOL: f64 = 1e-9;

/// A finite vector of non-negative weights, stored without trailing zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::MalformedLaw(format!("weight {bad} is not a finite non-negative number")));
        }
        while weights.last() == Some(&0.0) {
            weights.pop();
        }
        Ok(WeightVector(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.0.iter().filter(|w| **w > 0.0).count()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn positive(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied().filter(|w| *w > 0.0)
    }
}

/// One outcome of a finite discrete state.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub weights: WeightVector,
}

/// Weights `e^(−θ zᵢ)/m(θ)` induced by a displacement state.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedState {
    pub displacement_ref: String,
    pub displacement: Arc<DisplacementState>,
    pub theta: f64,
    m: f64,
}

impl TiltedState {
    pub fn new(displacement_ref: impl Into<String>, displacement: Arc<DisplacementState>, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::MalformedLaw(format!("theta {theta} is not finite")));
        }
        let m = displacement.m_theta(theta);
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::MalformedLaw(format!("m(theta) = {m} is not a positive finite number")));
        }
        Ok(Self { displacement_ref: displacement_ref.into(), displacement, theta, m })
    }

    /// Normalizer `m(θ)`.
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn weight_of(&self, z: f64) -> f64 {
        (-self.theta * z).exp() / self.m
    }

    pub fn is_atomic(&self) -> bool {
        self.displacement.is_atomic()
    }

    /// The finite outcome list when every child is an atom.
    pub fn atomic_outcomes(&self) -> Option<Vec<Outcome>> {
        if !self.is_atomic() {
            return None;
        }
        let outcomes = self
            .displacement
            .outcomes()
            .iter()
            .map(|o| {
                let weights = o
                    .children
                    .iter()
                    .map(|c| match c {
                        Displacement::Atom(z) => self.weight_of(*z),
                        Displacement::Gaussian { .. } => unreachable!("checked atomic"),
                    })
                    .collect();
                Outcome { prob: o.prob, weights: WeightVector::new(weights).expect("positive weights") }
            })
            .collect();
        Some(outcomes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    FiniteDiscrete(Vec<Outcome>),
    ThetaTilted(TiltedState),
    Burst(BurstLaw),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub id: String,
    pub kind: StateKind,
}

impl EnvState {
    /// A finite discrete state from `(probability, weights)` pairs.
    pub fn finite(id: impl Into<String>, outcomes: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let id = id.into();
        if outcomes.is_empty() {
            return Err(Error::MalformedLaw(format!("state `{id}` has no outcomes")));
        }
        let outcomes = outcomes
            .into_iter()
            .map(|(prob, w)| {
                if !(prob.is_finite() && prob >= 0.0) {
                    return Err(Error::MalformedLaw(format!("state `{id}`: negative or non-finite probability {prob}")));
                }
                Ok(Outcome { prob, weights: WeightVector::new(w)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EnvState { id, kind: StateKind::FiniteDiscrete(outcomes) })
    }

    pub fn tilted(id: impl Into<String>, tilted: TiltedState) -> Self {
        EnvState { id: id.into(), kind: StateKind::ThetaTilted(tilted) }
    }

    pub fn burst(id: impl Into<String>) -> Self {
        EnvState { id: id.into(), kind: StateKind::Burst(BurstLaw) }
    }

    /// Sum of outcome probabilities (1 by construction for the analytic kinds).
    pub fn prob_sum(&self) -> f64 {
        match &self.kind {
            StateKind::FiniteDiscrete(o) => o.iter().map(|o| o.prob).sum(),
            StateKind::ThetaTilted(t) => t.displacement.prob_sum(),
            StateKind::Burst(b) => {
                b.prob_zero() + (1..=crate::burst::SERIES_TERMS).map(|k| b.prob_exponent(k)).sum::<f64>()
            }
        }
    }

    /// `E_state[Σᵢ yᵢ]`.
    pub fn quenched_mean(&self) -> f64 {
        match &self.kind {
            StateKind::FiniteDiscrete(o) => o.iter().map(|o| o.prob * o.weights.total()).sum(),
            StateKind::ThetaTilted(t) => t.displacement.m_theta(t.theta) / t.m(),
            StateKind::Burst(b) => b.mean_count().value * crate::burst::CHILD_WEIGHT,
        }
    }

    /// `E_state[#{i : yᵢ > 0}]`.
    pub fn expected_positive_count(&self) -> f64 {
        match &self.kind {
            StateKind::FiniteDiscrete(o) => o.iter().map(|o| o.prob * o.weights.positive_count() as f64).sum(),
            StateKind::ThetaTilted(t) => t.displacement.expected_children(),
            StateKind::Burst(b) => b.mean_count().value,
        }
    }

    /// True when expectations over this state can be enumerated exactly.
    pub fn is_exact(&self) -> bool {
        match &self.kind {
            StateKind::FiniteDiscrete(_) | StateKind::Burst(_) => true,
            StateKind::ThetaTilted(t) => t.is_atomic(),
        }
    }

    /// The outcome list for states with finitely many outcomes.
    pub fn finite_outcomes(&self) -> Option<std::borrow::Cow<'_, [Outcome]>> {
        match &self.kind {
            StateKind::FiniteDiscrete(o) => Some(std::borrow::Cow::Borrowed(o.as_slice())),
            StateKind::ThetaTilted(t) => t.atomic_outcomes().map(std::borrow::Cow::Owned),
            StateKind::Burst(_) => None,
        }
    }

    pub fn sample_weights_with<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightVector {
        match &self.kind {
            StateKind::FiniteDiscrete(outcomes) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for o in outcomes {
                    acc += o.prob;
                    if u < acc {
                        return o.weights.clone();
                    }
                }
                outcomes.last().expect("non-empty").weights.clone()
            }
            StateKind::ThetaTilted(t) => {
                let outcome = t.displacement.sample_outcome(rng);
                let weights = outcome
                    .children
                    .iter()
                    .map(|c| t.weight_of(c.sample(rng)))
                    .collect();
                WeightVector::new(weights).expect("tilted weights are positive")
            }
            StateKind::Burst(b) => {
                let n = b.sample_count(rng);
                WeightVector(vec![crate::burst::CHILD_WEIGHT; n as usize])
            }
        }
    }
}

/// Deterministic per seed.
pub fn sample_weights(state: &EnvState, seed: u64) -> WeightVector {
    state.sample_weights_with(&mut seed::rng(seed))
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// The common law of every coordinate of an i.i.d. environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentLaw {
    states: Vec<(f64, EnvState)>,
    index: HashMap<String, usize>,
}

impl EnvironmentLaw {
    pub fn new(states: Vec<(f64, EnvState)>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::MalformedLaw("empty state list".into()));
        }
        let mut index = HashMap::new();
        for (i, (p, s)) in states.iter().enumerate() {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::MalformedLaw(format!("state `{}` has probability {p}", s.id)));
            }
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::MalformedLaw(format!("duplicate state id `{}`", s.id)));
            }
        }
        Ok(Self { states, index })
    }

    pub fn single(state: EnvState) -> Self {
        Self::new(vec![(1.0, state)]).expect("single state law is well formed")
    }

    pub fn states(&self) -> &[(f64, EnvState)] {
        &self.states
    }

    pub fn state(&self, id: &str) -> Result<&EnvState> {
        self.index
            .get(id)
            .map(|&i| &self.states[i].1)
            .ok_or_else(|| Error::UnknownState(id.to_owned()))
    }

    pub fn prob_sum(&self) -> f64 {
        self.states.iter().map(|(p, _)| p).sum()
    }

    pub fn is_exact(&self) -> bool {
        self.states.iter().all(|(_, s)| s.is_exact())
    }

    /// `𝔼 log E_ξ[#{i : yᵢ > 0}]`; `−∞` when a charged state has no children.
    pub fn supercriticality(&self) -> f64 {
        self.states
            .iter()
            .filter(|(p, _)| *p > 0.0)
            .map(|(p, s)| p * s.expected_positive_count().ln())
            .sum()
    }

    pub fn sample_state_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, (p, _)) in self.states.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.states.len() - 1
    }
}

/// A finite realization `(ξ_offset, …, ξ_{offset+len−1})` of the environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSequence {
    pub state_ids: Vec<String>,
    /// Seed the sequence was drawn with, if it was sampled.
    pub seed: Option<u64>,
    /// Number of leading coordinates removed by shifts.
    #[serde(default)]
    pub offset: usize,
}

impl EnvSequence {
    pub fn from_ids<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        Self { state_ids: ids.into_iter().map(Into::into).collect(), seed: None, offset: 0 }
    }

    pub fn len(&self) -> usize {
        self.state_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state_ids.is_empty()
    }

    /// Resolves every coordinate against `law`.
    pub fn resolve<'a>(&self, law: &'a EnvironmentLaw) -> Result<Vec<&'a EnvState>> {
        self.state_ids.iter().map(|id| law.state(id)).collect()
    }

    /// Regenerates a sampled sequence from its recorded seed.
    pub fn regenerate(&self, law: &EnvironmentLaw) -> Option<EnvSequence> {
        let seed = self.seed?;
        let full = sample_env(law, self.offset + self.len(), seed);
        shift(&full, self.offset).ok()
    }
}

/// Draws `n` i.i.d. coordinates; prefix-stable in `n` for a fixed seed.
pub fn sample_env(law: &EnvironmentLaw, n: usize, seed: u64) -> EnvSequence {
    let mut rng: StreamRng = seed::rng(seed);
    let state_ids = (0..n)
        .map(|_| law.states[law.sample_state_index(&mut rng)].1.id.clone())
        .collect();
    EnvSequence { state_ids, seed: Some(seed), offset: 0 }
}

/// The shift `T^k`.
pub fn shift(seq: &EnvSequence, k: usize) -> Result<EnvSequence> {
    if k > seq.len() {
        return Err(Error::OutOfRange { k, len: seq.len() });
    }
    Ok(EnvSequence { state_ids: seq.state_ids[k..].to_vec(), seed: seq.seed, offset: seq.offset + k })
}

/// One named check inside a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub subject: String,
    pub measured: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateReport {
    pub id: String,
    pub prob_sum: f64,
    pub quenched_mean: f64,
    pub expected_positive_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub states: Vec<StateReport>,
    pub law_prob_sum: f64,
    pub supercriticality: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Checks the standing assumptions: quenched mean one in every state, finitely
/// many positive weights, and `𝔼 log E_ξ[#positive] > 0`.
pub fn validate_law(law: &EnvironmentLaw, tol: f64) -> ValidationReport {
    let mut checks = Vec::new();
    let mut states = Vec::new();
    let law_prob_sum = law.prob_sum();
    checks.push(Check {
        name: "law_probabilities".into(),
        subject: "law".into(),
        measured: law_prob_sum,
        pass: (law_prob_sum - 1.0).abs() <= PROB_TOL,
    });
    for (_, s) in law.states() {
        let prob_sum = s.prob_sum();
        let mean = s.quenched_mean();
        let count = s.expected_positive_count();
        checks.push(Check {
            name: "state_probabilities".into(),
            subject: s.id.clone(),
            measured: prob_sum,
            pass: (prob_sum - 1.0).abs() <= PROB_TOL,
        });
        checks.push(Check {
            name: "quenched_mean".into(),
            subject: s.id.clone(),
            measured: mean,
            pass: (mean - 1.0).abs() <= tol,
        });
        checks.push(Check {
            name: "finite_positive_count".into(),
            subject: s.id.clone(),
            measured: count,
            pass: count.is_finite(),
        });
        states.push(StateReport { id: s.id.clone(), prob_sum, quenched_mean: mean, expected_positive_count: count });
    }
    let supercriticality = law.supercriticality();
    checks.push(Check {
        name: "supercriticality".into(),
        subject: "law".into(),
        measured: supercriticality,
        pass: supercriticality > 0.0,
    });
    let pass = checks.iter().all(|c| c.pass);
    ValidationReport { states, law_prob_sum, supercriticality, checks, pass }
}
