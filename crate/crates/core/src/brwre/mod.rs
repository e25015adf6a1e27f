//! Branching random walks in i.i.d. random environments.
//!
//! Each environment state is a law of a finite point process of child
//! displacements. For a tilt `θ` the normalizer `m(θ) = E[Σ e^(−θ zᵢ)]` and
//! its derivative are available in closed form for atom and Gaussian
//! children, which gives the drift functional `κ(θ)` exactly.

mod sim;

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::env_model::{self, EnvState, EnvironmentLaw, TiltedState};
use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::labels;
use crate::seed::{self, derive_seed};
use crate::stats::{self, CompensatedSum};

pub use sim::{simulate, simulate_replicas, Trajectory, DEFAULT_CAP};

/// Default uniform-ellipticity lower bound on `m(θ)`.
pub const DEFAULT_DELTA: f64 = 1e-6;
/// Step of θ sweeps.
pub const THETA_STEP: f64 = 0.05;

/// Law of a single child's displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Displacement {
    Atom(f64),
    Gaussian { mu: f64, sigma2: f64 },
}

impl Displacement {
    /// `E e^(−θZ)`.
    pub fn laplace(&self, theta: f64) -> f64 {
        match *self {
            Displacement::Atom(z) => (-theta * z).exp(),
            Displacement::Gaussian { mu, sigma2 } => (-theta * mu + 0.5 * theta * theta * sigma2).exp(),
        }
    }

    /// `d/dθ E e^(−θZ)`.
    pub fn laplace_deriv(&self, theta: f64) -> f64 {
        match *self {
            Displacement::Atom(z) => -z * (-theta * z).exp(),
            Displacement::Gaussian { mu, sigma2 } => {
                (-mu + theta * sigma2) * (-theta * mu + 0.5 * theta * theta * sigma2).exp()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Displacement::Atom(z) => z,
            Displacement::Gaussian { mu, sigma2 } => mu + sigma2.sqrt() * env_model::standard_normal(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementOutcome {
    pub prob: f64,
    pub children: Vec<Displacement>,
}

/// The law of the point process of children's displacements in one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementState {
    outcomes: Vec<DisplacementOutcome>,
}

impl DisplacementState {
    pub fn new(outcomes: Vec<DisplacementOutcome>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::MalformedLaw("displacement state without outcomes".into()));
        }
        for o in &outcomes {
            if !(o.prob.is_finite() && o.prob >= 0.0) {
                return Err(Error::MalformedLaw(format!("outcome probability {}", o.prob)));
            }
            for c in &o.children {
                match *c {
                    Displacement::Atom(z) if !z.is_finite() => {
                        return Err(Error::MalformedLaw(format!("atom position {z}")))
                    }
                    Displacement::Gaussian { mu, sigma2 } if !(mu.is_finite() && sigma2 > 0.0 && sigma2.is_finite()) => {
                        return Err(Error::MalformedLaw(format!("gaussian({mu}, {sigma2})")))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { outcomes })
    }

    /// `k` children at independent positions drawn from `child`.
    pub fn iid(k: usize, child: Displacement) -> Result<Self> {
        Self::new(vec![DisplacementOutcome { prob: 1.0, children: vec![child; k] }])
    }

    pub fn outcomes(&self) -> &[DisplacementOutcome] {
        &self.outcomes
    }

    pub fn prob_sum(&self) -> f64 {
        self.outcomes.iter().map(|o| o.prob).sum()
    }

    pub fn is_atomic(&self) -> bool {
        self.outcomes
            .iter()
            .all(|o| o.children.iter().all(|c| matches!(c, Displacement::Atom(_))))
    }

    pub fn expected_children(&self) -> f64 {
        self.outcomes.iter().map(|o| o.prob * o.children.len() as f64).sum()
    }

    pub fn m_theta(&self, theta: f64) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.prob * o.children.iter().map(|c| c.laplace(theta)).sum::<f64>())
            .sum()
    }

    pub fn m_prime(&self, theta: f64) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.prob * o.children.iter().map(|c| c.laplace_deriv(theta)).sum::<f64>())
            .sum()
    }

    pub fn sample_outcome<R: Rng + ?Sized>(&self, rng: &mut R) -> &DisplacementOutcome {
        if self.outcomes.len() == 1 {
            return &self.outcomes[0];
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for o in &self.outcomes {
            acc += o.prob;
            if u < acc {
                return o;
            }
        }
        self.outcomes.last().expect("non-empty")
    }
}

pub fn m_theta(state: &DisplacementState, theta: f64) -> f64 {
    state.m_theta(theta)
}

pub fn m_prime(state: &DisplacementState, theta: f64) -> f64 {
    state.m_prime(theta)
}

/// The environment law `ν` of a BRW in random environment.
#[derive(Debug, Clone, PartialEq)]
pub struct BrwLaw {
    states: Vec<(f64, String, Arc<DisplacementState>)>,
    index: HashMap<String, usize>,
}

impl BrwLaw {
    pub fn new(states: Vec<(f64, String, DisplacementState)>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::MalformedLaw("empty state list".into()));
        }
        let mut index = HashMap::new();
        let mut out = Vec::with_capacity(states.len());
        for (i, (p, id, s)) in states.into_iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::MalformedLaw(format!("state `{id}` has probability {p}")));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::MalformedLaw(format!("duplicate state id `{id}`")));
            }
            out.push((p, id, Arc::new(s)));
        }
        Ok(Self { states: out, index })
    }

    pub fn single(id: &str, state: DisplacementState) -> Self {
        Self::new(vec![(1.0, id.to_owned(), state)]).expect("single state law is well formed")
    }

    pub fn states(&self) -> &[(f64, String, Arc<DisplacementState>)] {
        &self.states
    }

    pub fn state(&self, id: &str) -> Result<&Arc<DisplacementState>> {
        self.index
            .get(id)
            .map(|&i| &self.states[i].2)
            .ok_or_else(|| Error::UnknownState(id.to_owned()))
    }

    pub fn prob_sum(&self) -> f64 {
        self.states.iter().map(|(p, _, _)| p).sum()
    }

    /// `𝔼 log E_ω[Z¹(ℝ)]`.
    pub fn supercriticality(&self) -> f64 {
        self.states
            .iter()
            .filter(|(p, _, _)| *p > 0.0)
            .map(|(p, _, s)| p * s.expected_children().ln())
            .sum()
    }

    pub fn is_atomic(&self) -> bool {
        self.states.iter().all(|(_, _, s)| s.is_atomic())
    }

    /// A sequence-compatible view: the same ids with the same probabilities.
    pub(crate) fn sample_state_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, (p, _, _)) in self.states.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.states.len() - 1
    }
}

fn check_ellipticity(law: &BrwLaw, theta: f64, delta: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::InvalidDelta(delta));
    }
    for (_, id, s) in law.states() {
        let m = s.m_theta(theta);
        if !(m > delta && m.is_finite()) {
            return Err(Error::EllipticityViolation { state: id.clone(), m, delta });
        }
    }
    Ok(())
}

/// `𝔼 m(θ) < ∞` (always true for atom and Gaussian children) and
/// `m_s(θ) > δ` in every state.
pub fn theta_domain_check(law: &BrwLaw, theta: f64, delta: f64) -> Result<bool> {
    match check_ellipticity(law, theta, delta) {
        Ok(()) => Ok(true),
        Err(Error::EllipticityViolation { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// The weight state `yᵢ = e^(−θ zᵢ)/m(θ)` of one displacement state.
pub fn induce_weight_state(id: &str, state: &Arc<DisplacementState>, theta: f64) -> Result<EnvState> {
    let m = state.m_theta(theta);
    if !(m > DEFAULT_DELTA && m.is_finite()) {
        return Err(Error::EllipticityViolation { state: id.to_owned(), m, delta: DEFAULT_DELTA });
    }
    Ok(EnvState::tilted(id, TiltedState::new(id, Arc::clone(state), theta)?))
}

/// The induced weight environment law; state ids and probabilities are
/// carried over, so environment sequences are shared between the two laws.
pub fn induce_weight_law(law: &BrwLaw, theta: f64, delta: f64) -> Result<EnvironmentLaw> {
    check_ellipticity(law, theta, delta)?;
    let states = law
        .states()
        .iter()
        .map(|(p, id, s)| Ok((*p, induce_weight_state(id, s, theta)?)))
        .collect::<Result<Vec<_>>>()?;
    EnvironmentLaw::new(states)
}

/// `κ(θ) = Σ_s π_s (−θ m′_s/m_s + log m_s)`.
pub fn kappa_brw(law: &BrwLaw, theta: f64) -> Result<f64> {
    check_ellipticity(law, theta, DEFAULT_DELTA)?;
    Ok(law
        .states()
        .iter()
        .map(|(p, _, s)| {
            let m = s.m_theta(theta);
            p * (-theta * s.m_prime(theta) / m + m.ln())
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    Exact,
    MonteCarlo,
}

/// `𝔼[W₁|log W₁|]` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct W1Moment {
    pub value: ExtReal,
    pub std_error: Option<f64>,
    pub method: MomentMethod,
    pub samples: usize,
    /// Finiteness is certified analytically: finitely many children with
    /// atom or Gaussian displacements give `W₁` all moments.
    pub finite_certified: bool,
}

fn xlogx_abs(w: f64) -> f64 {
    if w > 0.0 {
        w * w.ln().abs()
    } else {
        0.0
    }
}

const MC_BATCHES: usize = 100;

pub fn w1_xlogx_moment(law: &BrwLaw, theta: f64, budget: usize, seed: u64) -> Result<W1Moment> {
    check_ellipticity(law, theta, DEFAULT_DELTA)?;
    if law.is_atomic() {
        let mut acc = CompensatedSum::new();
        for (p, _, s) in law.states() {
            let m = s.m_theta(theta);
            for o in s.outcomes() {
                let w1: f64 = o
                    .children
                    .iter()
                    .map(|c| match c {
                        Displacement::Atom(z) => (-theta * z).exp() / m,
                        Displacement::Gaussian { .. } => unreachable!(),
                    })
                    .sum();
                acc.add(p * o.prob * xlogx_abs(w1));
            }
        }
        return Ok(W1Moment {
            value: ExtReal::Finite(acc.value()),
            std_error: None,
            method: MomentMethod::Exact,
            samples: 0,
            finite_certified: true,
        });
    }
    if budget < MC_BATCHES {
        return Err(Error::Precondition(format!("Monte Carlo budget {budget} below {MC_BATCHES} batches")));
    }
    let per_batch = budget / MC_BATCHES;
    let norms: Vec<f64> = law.states().iter().map(|(_, _, s)| s.m_theta(theta)).collect();
    let batch_means: Vec<f64> = (0..MC_BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::rng(derive_seed(seed, &labels!["w1-xlogx", b]));
            let mut acc = CompensatedSum::new();
            for _ in 0..per_batch {
                let i = law.sample_state_index(&mut rng);
                let s = &law.states()[i].2;
                let o = s.sample_outcome(&mut rng);
                let w1: f64 = o.children.iter().map(|c| (-theta * c.sample(&mut rng)).exp()).sum::<f64>() / norms[i];
                acc.add(xlogx_abs(w1));
            }
            acc.value() / per_batch as f64
        })
        .collect();
    let est = stats::mean_and_se(&batch_means);
    Ok(W1Moment {
        value: ExtReal::Finite(est.mean),
        std_error: Some(est.std_error),
        method: MomentMethod::MonteCarlo,
        samples: per_batch * MC_BATCHES,
        finite_certified: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BrwClass {
    MeanOne,
    Degenerate,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrwVerdict {
    pub verdict: BrwClass,
    pub theta: f64,
    pub kappa: f64,
    pub w1_xlogx: W1Moment,
}

/// Budget used for the Monte Carlo part of verdict evidence records.
pub const VERDICT_MC_BUDGET: usize = 100_000;

/// `𝔼W(θ) = 1` iff `𝔼[W₁|log W₁|] < ∞` and `κ > 0`; otherwise `W(θ) = 0`.
pub fn verdict_brw(law: &BrwLaw, theta: f64) -> Result<BrwVerdict> {
    let kappa = kappa_brw(law, theta)?;
    let seed = derive_seed(0, &labels!["brw-verdict", theta.to_bits()]);
    let w1 = w1_xlogx_moment(law, theta, VERDICT_MC_BUDGET, seed)?;
    let verdict = if kappa <= 0.0 || w1.value == ExtReal::PosInf {
        BrwClass::Degenerate
    } else if w1.finite_certified {
        BrwClass::MeanOne
    } else {
        BrwClass::Inconclusive
    };
    Ok(BrwVerdict { verdict, theta, kappa, w1_xlogx: w1 })
}

/// `start + i·step` rounded to twelve decimals, so that sweeps hit `0.15`
/// rather than `0.15000000000000002`.
pub fn sweep_point(start: f64, step: f64, i: usize) -> f64 {
    ((start + step * i as f64) * 1e12).round() / 1e12
}

/// Verdicts over `θ = start, start + step, …, ≤ stop`.
pub fn theta_sweep(law: &BrwLaw, start: f64, stop: f64, step: f64) -> Vec<(f64, Result<BrwVerdict>)> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| {
            let theta = sweep_point(start, step, i);
            (theta, verdict_brw(law, theta))
        })
        .collect()
}

/// Samples an environment sequence for a BRW law (same contract as
/// [`env_model::sample_env`]).
pub fn sample_brw_env(law: &BrwLaw, n: usize, seed: u64) -> env_model::EnvSequence {
    let mut rng = seed::rng(seed);
    let state_ids = (0..n).map(|_| law.states()[law.sample_state_index(&mut rng)].1.clone()).collect();
    env_model::EnvSequence { state_ids, seed: Some(seed), offset: 0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments;
    use std::f64::consts::LN_2;

    fn binary_gaussian() -> BrwLaw {
        BrwLaw::single("g", DisplacementState::iid(2, Displacement::Gaussian { mu: 0.0, sigma2: 1.0 }).unwrap())
    }

    fn two_atoms_at_zero() -> BrwLaw {
        BrwLaw::single("a", DisplacementState::iid(2, Displacement::Atom(0.0)).unwrap())
    }

    #[test]
    fn m_for_atoms_at_zero() {
        let s = DisplacementState::iid(2, Displacement::Atom(0.0)).unwrap();
        for theta in [-1.0, 0.0, 0.3, 2.5] {
            assert_eq!(s.m_theta(theta), 2.0);
            assert_eq!(s.m_prime(theta), 0.0);
        }
    }

    #[test]
    fn m_for_binary_gaussian() {
        let s = DisplacementState::iid(2, Displacement::Gaussian { mu: 0.0, sigma2: 1.0 }).unwrap();
        for theta in [0.0, 0.4, 1.3] {
            let e = (theta * theta / 2.0_f64).exp();
            assert!((s.m_theta(theta) - 2.0 * e).abs() < 1e-14);
            assert!((s.m_prime(theta) - 2.0 * theta * e).abs() < 1e-14);
        }
    }

    #[test]
    fn m_prime_matches_finite_difference() {
        let s = DisplacementState::new(vec![
            DisplacementOutcome { prob: 0.4, children: vec![Displacement::Atom(0.3), Displacement::Gaussian { mu: -0.2, sigma2: 0.5 }] },
            DisplacementOutcome { prob: 0.6, children: vec![Displacement::Gaussian { mu: 1.0, sigma2: 2.0 }] },
        ])
        .unwrap();
        let (theta, h) = (0.7, 1e-5);
        let fd = (s.m_theta(theta + h) - s.m_theta(theta - h)) / (2.0 * h);
        let exact = s.m_prime(theta);
        assert!(((fd - exact) / exact).abs() < 1e-6, "{fd} vs {exact}");
    }

    #[test]
    fn domain_check() {
        assert!(theta_domain_check(&binary_gaussian(), 3.0, 1e-6).unwrap());
        let far = BrwLaw::single("far", DisplacementState::iid(1, Displacement::Atom(10.0)).unwrap());
        // m = e^(−100)
        assert!(!theta_domain_check(&far, 10.0, 1e-6).unwrap());
        assert!(matches!(theta_domain_check(&far, 10.0, 0.0), Err(Error::InvalidDelta(_))));
    }

    #[test]
    fn induced_weights() {
        let law = two_atoms_at_zero();
        let st = induce_weight_state("a", law.state("a").unwrap(), 0.9).unwrap();
        let o = st.finite_outcomes().unwrap();
        assert_eq!(o[0].weights.as_slice(), &[0.5, 0.5]);

        let s = Arc::new(
            DisplacementState::new(vec![DisplacementOutcome {
                prob: 1.0,
                children: vec![Displacement::Atom(0.0), Displacement::Atom(4f64.ln())],
            }])
            .unwrap(),
        );
        assert!((s.m_theta(1.0) - 1.25).abs() < 1e-15);
        let st = induce_weight_state("b", &s, 1.0).unwrap();
        let w = st.finite_outcomes().unwrap()[0].weights.clone();
        assert!((w.as_slice()[0] - 0.8).abs() < 1e-15 && (w.as_slice()[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn induced_gaussian_mean_is_one() {
        let law = binary_gaussian();
        let st = induce_weight_state("g", law.state("g").unwrap(), 0.8).unwrap();
        let mut rng = seed::rng(5);
        let sums: Vec<f64> = (0..100_000).map(|_| st.sample_weights_with(&mut rng).total()).collect();
        let est = stats::mean_and_se(&sums);
        assert!(est.covers(1.0, 5.0), "{est:?}");
    }

    #[test]
    fn kappa_closed_forms() {
        let g = binary_gaussian();
        for theta in [0.2, 0.8, 1.5] {
            let k = kappa_brw(&g, theta).unwrap();
            assert!((k - (LN_2 - theta * theta / 2.0)).abs() < 1e-14);
        }
        let root = (2.0 * LN_2).sqrt();
        assert!((root - 1.17741).abs() < 1e-5);
        assert!(kappa_brw(&g, root).unwrap().abs() < 1e-14);

        assert!((kappa_brw(&two_atoms_at_zero(), 1.7).unwrap() - LN_2).abs() < 1e-15);

        let mixed = BrwLaw::new(vec![
            (0.5, "s1".into(), DisplacementState::iid(2, Displacement::Gaussian { mu: 0.0, sigma2: 1.0 }).unwrap()),
            (0.5, "s3".into(), DisplacementState::iid(2, Displacement::Gaussian { mu: 0.0, sigma2: 3.0 }).unwrap()),
        ])
        .unwrap();
        for theta in [0.3, 0.9] {
            assert!((kappa_brw(&mixed, theta).unwrap() - (LN_2 - theta * theta)).abs() < 1e-14);
        }
    }

    /// Atoms placed so that `W₁ ∈ {1.8, 0.2}` with equal probability.
    pub(crate) fn w1_reference(theta: f64) -> BrwLaw {
        BrwLaw::single(
            "w",
            DisplacementState::new(vec![
                DisplacementOutcome { prob: 0.5, children: vec![Displacement::Atom(-(1.8f64).ln() / theta)] },
                DisplacementOutcome {
                    prob: 0.5,
                    children: vec![Displacement::Atom(10f64.ln() / theta); 2],
                },
            ])
            .unwrap(),
        )
    }

    #[test]
    fn w1_moment_exact_paths() {
        let m = w1_xlogx_moment(&two_atoms_at_zero(), 0.5, 0, 1).unwrap();
        assert_eq!(m.value, ExtReal::Finite(0.0));
        assert_eq!(m.method, MomentMethod::Exact);

        let theta = 0.7;
        let law = w1_reference(theta);
        let m = w1_xlogx_moment(&law, theta, 0, 1).unwrap().value.finite().unwrap();
        let direct = 0.5 * 1.8 * 1.8f64.ln() + 0.5 * 0.2 * 0.2f64.ln().abs();
        assert!((m - direct).abs() < 1e-12 && (m - 0.689952).abs() < 1e-6);
        let induced = induce_weight_law(&law, theta, DEFAULT_DELTA).unwrap();
        let c2 = moments::moment_c2(&induced).value.finite().unwrap();
        assert!((m - c2).abs() < 1e-12);
    }

    #[test]
    fn w1_moment_monte_carlo_reproducible() {
        let g = binary_gaussian();
        let a = w1_xlogx_moment(&g, 0.5, 1_000_000, 17).unwrap();
        let a2 = w1_xlogx_moment(&g, 0.5, 1_000_000, 17).unwrap();
        assert_eq!(a, a2);
        let b = w1_xlogx_moment(&g, 0.5, 1_000_000, 18).unwrap();
        let (va, vb) = (a.value.finite().unwrap(), b.value.finite().unwrap());
        let (sa, sb) = (a.std_error.unwrap(), b.std_error.unwrap());
        assert!(va.is_finite() && sa > 0.0);
        assert!((va - vb).abs() <= 4.0 * (sa * sa + sb * sb).sqrt());
    }

    #[test]
    fn verdicts() {
        let g = binary_gaussian();
        let v = verdict_brw(&g, 0.8).unwrap();
        assert_eq!(v.verdict, BrwClass::MeanOne);
        assert!((v.kappa - 0.373).abs() < 1e-3);
        let v = verdict_brw(&g, 1.5).unwrap();
        assert_eq!(v.verdict, BrwClass::Degenerate);
        assert!((v.kappa + 0.432).abs() < 1e-3);
        assert_eq!(verdict_brw(&two_atoms_at_zero(), 2.2).unwrap().verdict, BrwClass::MeanOne);
    }
}
