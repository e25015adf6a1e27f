//! Reference laws used by tests, the acceptance suite and the CLI examples.

use rand::Rng;

use crate::brwre::{BrwLaw, Displacement, DisplacementOutcome, DisplacementState};
use crate::env_model::{EnvState, EnvironmentLaw};
use crate::seed;

/// Two children of weight 1/2, surely. Its fixed point is the unit mass.
pub fn deterministic_split() -> EnvironmentLaw {
    EnvironmentLaw::single(EnvState::finite("split", vec![(1.0, vec![0.5, 0.5])]).expect("valid"))
}

/// `(1.8)` or `(0.1, 0.1)` with equal probability: `κ ≈ 0.298749 > 0`.
pub fn drift_positive() -> EnvironmentLaw {
    EnvironmentLaw::single(
        EnvState::finite("drift", vec![(0.5, vec![1.8]), (0.5, vec![0.1, 0.1])]).expect("valid"),
    )
}

/// The built-in heavy-tailed state alone.
pub fn burst() -> EnvironmentLaw {
    EnvironmentLaw::single(EnvState::burst("burst"))
}

/// Two equally likely states with `κ ≈ −0.5195` and finite `c1`, `c2`.
pub fn two_state() -> EnvironmentLaw {
    let a = EnvState::finite("A", vec![(0.5, vec![0.3, 0.5]), (0.5, vec![1.2])]).expect("valid");
    let b = EnvState::finite("B", vec![(0.25, vec![]), (0.75, vec![0.5, 0.5, 1.0 / 3.0])]).expect("valid");
    EnvironmentLaw::new(vec![(0.5, a), (0.5, b)]).expect("valid")
}

/// `()` or `(2)` with equal probability. The quenched mean is one but the
/// expected number of children is 1/2, so validation rejects it; it only
/// serves as a hand-checkable input for operators and oracles.
pub fn two_outcome() -> EnvironmentLaw {
    EnvironmentLaw::single(EnvState::finite("half", vec![(0.5, vec![]), (0.5, vec![2.0])]).expect("valid"))
}

/// Size-biased steps `±1` with mass 1/2 each: outcomes `(e)`, `(e⁻¹, e⁻¹)`
/// and `()` with probabilities `1/(2e)`, `e/4` and the remainder.
pub fn plus_minus_walk() -> EnvironmentLaw {
    use std::f64::consts::E;
    let (p_up, p_down) = (0.5 / E, 0.25 * E);
    EnvironmentLaw::single(
        EnvState::finite("pm", vec![(p_up, vec![E]), (p_down, vec![1.0 / E, 1.0 / E]), (1.0 - p_up - p_down, vec![])])
            .expect("valid"),
    )
}

/// Binary branching with independent standard Gaussian displacements.
pub fn binary_gaussian() -> BrwLaw {
    BrwLaw::single(
        "gauss",
        DisplacementState::iid(2, Displacement::Gaussian { mu: 0.0, sigma2: 1.0 }).expect("valid"),
    )
}

/// A two-state BRW with atom displacements only.
pub fn atom_brw() -> BrwLaw {
    let atoms = |zs: &[f64]| zs.iter().map(|z| Displacement::Atom(*z)).collect::<Vec<_>>();
    let a = DisplacementState::new(vec![
        DisplacementOutcome { prob: 0.5, children: atoms(&[0.0, 1.0]) },
        DisplacementOutcome { prob: 0.5, children: atoms(&[-0.5]) },
    ])
    .expect("valid");
    let b = DisplacementState::new(vec![
        DisplacementOutcome { prob: 0.25, children: vec![] },
        DisplacementOutcome { prob: 0.75, children: atoms(&[0.2, 0.2, 1.0]) },
    ])
    .expect("valid");
    BrwLaw::new(vec![(0.5, "A".into(), a), (0.5, "B".into(), b)]).expect("valid")
}

/// `θ` used with [`atom_brw`].
pub const ATOM_BRW_THETA: f64 = 1.0;

/// Bounds for [`random_law`].
#[derive(Debug, Clone, Copy)]
pub struct RandomLawSpec {
    pub max_states: usize,
    pub max_outcomes: usize,
    pub max_children: usize,
    /// Every weight of the generated law is at most this.
    pub max_weight: f64,
}

impl Default for RandomLawSpec {
    fn default() -> Self {
        Self { max_states: 3, max_outcomes: 4, max_children: 3, max_weight: 1.5 }
    }
}

/// A valid finite-discrete law drawn from `seed`: quenched mean one in every
/// state (by rescaling), supercritical, weights bounded by `max_weight`, and
/// no state that is surely the single weight 1.
pub fn random_law(seed: u64, spec: &RandomLawSpec) -> EnvironmentLaw {
    let mut rng = seed::rng(seed);
    loop {
        let n_states = rng.random_range(1..=spec.max_states);
        let mut states = Vec::with_capacity(n_states);
        let mut ok = true;
        for s in 0..n_states {
            let n_out = rng.random_range(1..=spec.max_outcomes);
            let mut probs: Vec<f64> = (0..n_out).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            let mut vectors: Vec<Vec<f64>> = (0..n_out)
                .map(|_| {
                    let k = rng.random_range(0..=spec.max_children);
                    (0..k).map(|_| rng.random_range(0.05..1.0)).collect()
                })
                .collect();
            // a lone single-child outcome rescales to weight 1: H is the identity
            if n_out == 1 && vectors[0].len() == 1 {
                ok = false;
                break;
            }
            let mean: f64 = probs.iter().zip(&vectors).map(|(p, v)| p * v.iter().sum::<f64>()).sum();
            if mean <= 0.0 {
                ok = false;
                break;
            }
            vectors.iter_mut().flatten().for_each(|y| *y /= mean);
            if vectors.iter().flatten().any(|y| *y > spec.max_weight) {
                ok = false;
                break;
            }
            let state = EnvState::finite(format!("s{s}"), probs.into_iter().zip(vectors).collect()).expect("valid");
            states.push(state);
        }
        if !ok {
            continue;
        }
        let pis: Vec<f64> = (0..states.len()).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = pis.iter().sum();
        let law = EnvironmentLaw::new(pis.into_iter().map(|p| p / total).zip(states).collect()).expect("valid");
        if law.supercriticality() > 0.0 {
            return law;
        }
    }
}
