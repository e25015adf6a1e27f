//! Exact particle simulation of the additive martingale `Wₙ(θ)`.
//!
//! Every particle is kept; there is no resampling or pruning. A replica whose
//! population exceeds the cap is discarded with [`Error::CapExceeded`].

use rayon::prelude::*;
use serde::Serialize;

use super::{check_ellipticity, BrwLaw, Displacement, DEFAULT_DELTA};
use crate::env_model::EnvSequence;
use crate::error::{Error, Result};
use crate::labels;
use crate::seed::{self, derive_seed};

pub const DEFAULT_CAP: usize = 1_000_000;

/// Per-generation record of one simulated tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `W₀ = 1, W₁, …, W_n`.
    pub w: Vec<f64>,
    pub population: Vec<usize>,
    /// `∏_{j<k} m_{ξⱼ}(θ)`.
    pub normalizer: Vec<f64>,
    pub env: EnvSequence,
    pub seed: u64,
}

impl Trajectory {
    pub fn final_w(&self) -> f64 {
        *self.w.last().expect("W_0 always present")
    }

    pub fn generations(&self) -> usize {
        self.w.len() - 1
    }
}

/// Simulates `generations` generations along `seq`.
///
/// Particles carry their normalized weight `e^(−θ·position)/∏ m`, so `Wₖ`
/// is the plain sum over generation `k`.
pub fn simulate(
    law: &BrwLaw,
    theta: f64,
    seq: &EnvSequence,
    generations: usize,
    cap: usize,
    seed: u64,
) -> Result<Trajectory> {
    simulate_in(law, theta, seq, generations, cap, seed, &mut Buffers::default())
}

/// Particle storage reused across replicas on one worker.
#[derive(Default)]
struct Buffers {
    current: Vec<f64>,
    next: Vec<f64>,
}

fn simulate_in(
    law: &BrwLaw,
    theta: f64,
    seq: &EnvSequence,
    generations: usize,
    cap: usize,
    seed: u64,
    buffers: &mut Buffers,
) -> Result<Trajectory> {
    if generations > seq.len() {
        return Err(Error::Precondition(format!(
            "{generations} generations requested along an environment of length {}",
            seq.len()
        )));
    }
    check_ellipticity(law, theta, DEFAULT_DELTA)?;
    let states = seq.state_ids[..generations]
        .iter()
        .map(|id| law.state(id))
        .collect::<Result<Vec<_>>>()?;

    // every outcome having at least `k` children forces the population up
    let mut floor = 1usize;
    for (k, state) in states.iter().enumerate() {
        let min_children = state.outcomes().iter().map(|o| o.children.len()).min().unwrap_or(0);
        floor = floor.saturating_mul(min_children);
        if floor > cap {
            return Err(Error::CapExceeded { generation: k + 1, population: floor, cap });
        }
    }

    let mut rng = seed::rng(seed);
    let mut w = Vec::with_capacity(generations + 1);
    let mut population = Vec::with_capacity(generations + 1);
    let mut normalizer = Vec::with_capacity(generations + 1);
    w.push(1.0);
    population.push(1);
    normalizer.push(1.0);

    let Buffers { current, next } = buffers;
    current.clear();
    current.push(1.0);
    let mut norm = 1.0;
    for (k, state) in states.iter().enumerate() {
        let m = state.m_theta(theta);
        let inv_m = 1.0 / m;
        norm *= m;
        let last = k + 1 == generations;
        let mut count = 0usize;
        let mut total = 0.0;
        next.clear();
        if !last {
            let max_children = state.outcomes().iter().map(|o| o.children.len()).max().unwrap_or(0);
            next.reserve(current.len().saturating_mul(max_children).min(cap));
        }
        for &parent in current.iter() {
            let outcome = state.sample_outcome(&mut rng);
            count += outcome.children.len();
            if count > cap {
                return Err(Error::CapExceeded { generation: k + 1, population: count, cap });
            }
            for child in &outcome.children {
                let factor = match *child {
                    Displacement::Atom(z) => (-theta * z).exp(),
                    Displacement::Gaussian { .. } => (-theta * child.sample(&mut rng)).exp(),
                };
                let x = parent * factor * inv_m;
                if last {
                    total += x;
                } else {
                    next.push(x);
                }
            }
        }
        if last {
            w.push(total);
        } else {
            std::mem::swap(current, next);
            w.push(current.iter().sum());
        }
        population.push(count);
        normalizer.push(norm);
    }
    Ok(Trajectory { w, population, normalizer, env: seq.clone(), seed })
}

/// Independent replicas with seeds `derive_seed(master, ["replica", i])`,
/// returned in replica order regardless of scheduling.
pub fn simulate_replicas(
    law: &BrwLaw,
    theta: f64,
    seq: &EnvSequence,
    generations: usize,
    cap: usize,
    master_seed: u64,
    replicas: usize,
) -> Vec<Result<Trajectory>> {
    (0..replicas)
        .into_par_iter()
        .map_init(Buffers::default, |buffers, i| {
            let s = derive_seed(master_seed, &labels!["replica", i]);
            simulate_in(law, theta, seq, generations, cap, s, buffers)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brwre::DisplacementState;
    use crate::stats;

    fn two_atoms() -> BrwLaw {
        BrwLaw::single("a", DisplacementState::iid(2, Displacement::Atom(0.0)).unwrap())
    }

    #[test]
    fn deterministic_tree_has_unit_martingale() {
        let seq = EnvSequence::from_ids(vec!["a"; 10]);
        let t = simulate(&two_atoms(), 0.7, &seq, 10, 1 << 11, 1).unwrap();
        assert!(t.w.iter().all(|w| *w == 1.0));
        assert_eq!(t.population[10], 1024);
    }

    #[test]
    fn cap_exceeded_is_reported() {
        let seq = EnvSequence::from_ids(vec!["a"; 20]);
        let err = simulate(&two_atoms(), 0.7, &seq, 20, DEFAULT_CAP, 1).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { generation: 20, .. }), "{err:?}");
    }

    #[test]
    fn too_many_generations() {
        let seq = EnvSequence::from_ids(vec!["a"; 5]);
        assert!(matches!(simulate(&two_atoms(), 0.7, &seq, 6, 100, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn extinction_freezes_at_zero() {
        let law = BrwLaw::single(
            "d",
            DisplacementState::new(vec![
                super::super::DisplacementOutcome { prob: 0.5, children: vec![] },
                super::super::DisplacementOutcome { prob: 0.5, children: vec![Displacement::Atom(0.0); 2] },
            ])
            .unwrap(),
        );
        let seq = EnvSequence::from_ids(vec!["d"; 12]);
        let mut saw_extinction = false;
        for s in 0..50 {
            let t = simulate(&law, 1.0, &seq, 12, 1 << 14, s).unwrap();
            if let Some(k) = t.population.iter().position(|p| *p == 0) {
                saw_extinction = true;
                assert!(t.w[k..].iter().all(|w| *w == 0.0));
                assert!(t.population[k..].iter().all(|p| *p == 0));
            }
        }
        assert!(saw_extinction);
    }

    #[test]
    fn replicas_are_reproducible_and_martingale() {
        let law = BrwLaw::single("g", DisplacementState::iid(2, Displacement::Gaussian { mu: 0.0, sigma2: 1.0 }).unwrap());
        let seq = EnvSequence::from_ids(vec!["g"; 8]);
        let a = simulate_replicas(&law, 0.8, &seq, 8, DEFAULT_CAP, 3, 2000);
        let b = simulate_replicas(&law, 0.8, &seq, 8, DEFAULT_CAP, 3, 2000);
        assert_eq!(a, b);
        let finals: Vec<f64> = a.iter().map(|t| t.as_ref().unwrap().final_w()).collect();
        assert!(stats::mean_and_se(&finals).covers(1.0, 4.0));
    }
}
