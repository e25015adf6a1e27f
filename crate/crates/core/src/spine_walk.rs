//! The size-biased step law `G_ξ`, the annealed spine walk `Sₙ`, exact
//! convolutions and tail sums `Σ_{n≤N} P[Sₙ ≥ cn]`.

use rand::Rng;
use serde::Serialize;

use crate::env_model::{EnvState, EnvironmentLaw, StateKind};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::seed;
use crate::stats::CompensatedSum;

/// Atoms closer than this (in `x = log y`) are merged.
pub const MERGE_RES: f64 = 1e-9;
/// Maximum number of atoms of any convolution level.
pub const ATOM_CAP: usize = 1_000_000;

/// A finite distribution on the line, sorted by position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLaw {
    atoms: Vec<(f64, f64)>,
}

impl StepLaw {
    /// Sorts `raw` and merges atoms within `merge_res`, placing each merged
    /// atom at the mass-weighted mean position.
    pub fn from_atoms(mut raw: Vec<(f64, f64)>, merge_res: f64) -> Self {
        raw.retain(|(_, m)| *m > 0.0);
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        let mut last_x = f64::NEG_INFINITY;
        for (x, m) in raw {
            match atoms.last_mut() {
                Some(top) if x - last_x <= merge_res => {
                    let mass = top.1 + m;
                    if x != top.0 {
                        top.0 = (top.0 * top.1 + x * m) / mass;
                    }
                    top.1 = mass;
                }
                _ => atoms.push((x, m)),
            }
            last_x = x;
        }
        Self { atoms }
    }

    pub fn point_mass(x: f64) -> Self {
        Self { atoms: vec![(x, 1.0)] }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).collect::<CompensatedSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(x, m)| x * m).collect::<CompensatedSum>().value()
    }

    /// `P[X ≥ x]`.
    pub fn upper_tail(&self, x: f64) -> f64 {
        let i = self.atoms.partition_point(|a| a.0 < x);
        self.atoms[i..].iter().map(|a| a.1).collect::<CompensatedSum>().value()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() * self.total_mass();
        let mut acc = 0.0;
        for (x, m) in &self.atoms {
            acc += m;
            if u < acc {
                return *x;
            }
        }
        self.atoms.last().map_or(0.0, |a| a.0)
    }
}

fn raw_atoms(state: &EnvState) -> Result<Vec<(f64, f64)>> {
    if let StateKind::Burst(b) = &state.kind {
        let w = crate::burst::CHILD_WEIGHT;
        return Ok(vec![(w.ln(), b.mean_count().value * w)]);
    }
    let outcomes = state
        .finite_outcomes()
        .ok_or_else(|| Error::ContinuousState(state.id.clone()))?;
    Ok(outcomes
        .iter()
        .flat_map(|o| o.weights.positive().map(move |y| (y.ln(), o.prob * y)))
        .collect())
}

/// `G_ξ`: mass `p_k·y_{k,i}` at `log y_{k,i}` for every positive weight.
pub fn step_law(state: &EnvState) -> Result<StepLaw> {
    Ok(StepLaw::from_atoms(raw_atoms(state)?, MERGE_RES))
}

/// The annealed mixture `Σ_s π_s G_s`.
pub fn annealed_step_law(law: &EnvironmentLaw) -> Result<StepLaw> {
    let mut all = Vec::new();
    for (p, s) in law.states() {
        all.extend(raw_atoms(s)?.into_iter().map(|(x, m)| (x, p * m)));
    }
    Ok(StepLaw::from_atoms(all, MERGE_RES))
}

/// `𝔼X₀`; continuous states have no atom list, use
/// [`crate::moments::kappa_weights`] for those.
pub fn drift(law: &EnvironmentLaw) -> Result<f64> {
    Ok(annealed_step_law(law)?.mean())
}

/// Size-biased sampling by importance pairs: for a sampled weight vector,
/// pick child `i` with probability `yᵢ/Σy` and report `(log yᵢ, Σy)`.
/// An empty vector yields weight 0. `E[w·f(X)] = E_G f(X)`.
pub fn sample_importance_pair<R: Rng + ?Sized>(state: &EnvState, rng: &mut R) -> (f64, f64) {
    let v = state.sample_weights_with(rng);
    let total = v.total();
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = 0.0;
    for y in v.positive() {
        pick = y;
        acc += y;
        if target < acc {
            break;
        }
    }
    (pick.ln(), total)
}

/// Annealed steps drawn hierarchically: a state by `π`, an outcome with
/// probability `p_k Σᵢ y_{k,i}`, then a child in proportion to its weight.
pub fn sample_annealed_steps(law: &EnvironmentLaw, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = seed::rng(seed);
    let mut per_state = Vec::with_capacity(law.states().len());
    for (_, s) in law.states() {
        if let StateKind::Burst(_) = s.kind {
            per_state.push(None);
            continue;
        }
        let o = s.finite_outcomes().ok_or_else(|| Error::ContinuousState(s.id.clone()))?;
        per_state.push(Some(o.into_owned()));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let i = law.sample_state_index(&mut rng);
        let Some(outcomes) = &per_state[i] else {
            out.push(crate::burst::CHILD_WEIGHT.ln());
            continue;
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = outcomes.last().expect("non-empty");
        for o in outcomes {
            acc += o.prob * o.weights.total();
            if u < acc {
                chosen = o;
                break;
            }
        }
        let total = chosen.weights.total();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = chosen.weights.positive().last().unwrap_or(1.0);
        for y in chosen.weights.positive() {
            acc += y;
            if target < acc {
                pick = y;
                break;
            }
        }
        out.push(pick.ln());
    }
    Ok(out)
}

/// Exact laws of `S₀ = 0, S₁, …, S_{n_max}`.
pub fn walk_convolve(law: &EnvironmentLaw, n_max: usize, merge_res: f64) -> Result<Vec<StepLaw>> {
    let step = annealed_step_law(law)?;
    let mut levels = Vec::with_capacity(n_max + 1);
    levels.push(StepLaw::point_mass(0.0));
    for level in 1..=n_max {
        let prev = levels.last().expect("level 0 present");
        let raw: Vec<(f64, f64)> = prev
            .atoms()
            .iter()
            .flat_map(|(s, m)| step.atoms().iter().map(move |(x, q)| (s + x, m * q)))
            .collect();
        let next = StepLaw::from_atoms(raw, merge_res);
        if next.len() > ATOM_CAP {
            return Err(Error::AtomExplosion { level, atoms: next.len(), cap: ATOM_CAP });
        }
        levels.push(next);
    }
    Ok(levels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSum {
    pub n: usize,
    pub partial_sum: f64,
    /// `P[Sₙ ≥ cn]`.
    pub increment: f64,
}

/// Exact partial sums `Σ_{n≤N} P[Sₙ ≥ cn]` for `N = 1…n_max`. Positions may
/// have moved by up to `n·MERGE_RES` through merging, which is allowed as
/// slack in the comparison.
pub fn tail_sums(law: &EnvironmentLaw, c: f64, n_max: usize) -> Result<Vec<TailSum>> {
    let levels = walk_convolve(law, n_max, MERGE_RES)?;
    let mut partial = CompensatedSum::new();
    Ok(levels
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, dist)| {
            let nf = n as f64;
            let increment = dist.upper_tail(c * nf - nf * MERGE_RES);
            partial.add(increment);
            TailSum { n, partial_sum: partial.value(), increment }
        })
        .collect())
}

/// Columns `n, x, mass`.
pub fn distributions_csv(levels: &[StepLaw]) -> CsvTable {
    let mut t = CsvTable::new(["n", "x", "mass"]);
    for (n, d) in levels.iter().enumerate() {
        for (x, m) in d.atoms() {
            t.push(vec![n.to_string(), fmt_f64(*x), fmt_f64(*m)]);
        }
    }
    t
}

/// Columns `N, partial_sum, increment`.
pub fn tail_sums_csv(sums: &[TailSum]) -> CsvTable {
    let mut t = CsvTable::new(["N", "partial_sum", "increment"]);
    for s in sums {
        t.push(vec![s.n.to_string(), fmt_f64(s.partial_sum), fmt_f64(s.increment)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::EnvState;
    use crate::moments;
    use crate::reference;
    use crate::stats::ks_two_sample;
    use proptest::prelude::*;
    use std::f64::consts::{E, LN_2};

    fn single(outcomes: Vec<(f64, Vec<f64>)>) -> EnvironmentLaw {
        EnvironmentLaw::single(EnvState::finite("s", outcomes).unwrap())
    }

    /// Steps `±1` with mass 1/2 each: `(e)`, `(e⁻¹, e⁻¹)` or `()`.
    pub(crate) fn plus_minus() -> EnvironmentLaw {
        reference::plus_minus_walk()
    }

    #[test]
    fn step_law_examples() {
        let split = step_law(&reference::deterministic_split().states()[0].1).unwrap();
        assert_eq!(split.len(), 1);
        assert!((split.atoms()[0].0 + LN_2).abs() < 1e-15 && (split.atoms()[0].1 - 1.0).abs() < 1e-15);
        let unit = step_law(&single(vec![(1.0, vec![1.0])]).states()[0].1).unwrap();
        assert_eq!(unit.atoms(), &[(0.0, 1.0)]);
        let drift = step_law(&reference::drift_positive().states()[0].1).unwrap();
        let a = drift.atoms();
        assert_eq!(a.len(), 2);
        assert!((a[0].0 - 0.1f64.ln()).abs() < 1e-15 && (a[0].1 - 0.1).abs() < 1e-15);
        assert!((a[1].0 - 1.8f64.ln()).abs() < 1e-15 && (a[1].1 - 0.9).abs() < 1e-15);
        let burst = step_law(&reference::burst().states()[0].1).unwrap();
        assert!((burst.atoms()[0].0 + LN_2).abs() < 1e-15 && (burst.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn continuous_states_rejected() {
        let law = crate::brwre::induce_weight_law(&reference::binary_gaussian(), 0.5, 1e-6).unwrap();
        assert!(matches!(step_law(&law.states()[0].1), Err(Error::ContinuousState(_))));
        assert!(matches!(drift(&law), Err(Error::ContinuousState(_))));
    }

    #[test]
    fn mixture_of_disjoint_atoms() {
        let a = EnvState::finite("a", vec![(1.0, vec![1.0])]).unwrap();
        let b = EnvState::finite("b", vec![(1.0, vec![0.5, 0.5])]).unwrap();
        let law = EnvironmentLaw::new(vec![(0.5, a), (0.5, b)]).unwrap();
        let m = annealed_step_law(&law).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.atoms()[0].1 - 0.5).abs() < 1e-15 && (m.atoms()[1].1 - 0.5).abs() < 1e-15);
        let one = annealed_step_law(&reference::drift_positive()).unwrap();
        assert_eq!(one, step_law(&reference::drift_positive().states()[0].1).unwrap());
    }

    #[test]
    fn drift_examples() {
        assert!((drift(&reference::deterministic_split()).unwrap() + LN_2).abs() < 1e-15);
        assert!((drift(&reference::drift_positive()).unwrap() - 0.298749).abs() < 1e-6);
        assert_eq!(drift(&single(vec![(1.0, vec![1.0])])).unwrap(), 0.0);
    }

    #[test]
    fn drift_equals_kappa() {
        for law in [reference::deterministic_split(), reference::drift_positive(), reference::two_state(), reference::burst()] {
            let k = moments::kappa_weights(&law).value.finite().unwrap();
            assert!((drift(&law).unwrap() - k).abs() < 1e-12);
        }
        for seed in 0..20 {
            let law = reference::random_law(seed, &Default::default());
            let k = moments::kappa_weights(&law).value.finite().unwrap();
            assert!((drift(&law).unwrap() - k).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_walk() {
        let levels = walk_convolve(&reference::deterministic_split(), 10, MERGE_RES).unwrap();
        for (n, d) in levels.iter().enumerate() {
            assert_eq!(d.len(), 1);
            assert!((d.atoms()[0].0 + n as f64 * LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn binomial_walk() {
        let law = plus_minus();
        let levels = walk_convolve(&law, 20, MERGE_RES).unwrap();
        for (n, d) in levels.iter().enumerate() {
            assert!(d.mean().abs() < 1e-12);
            assert!((d.total_mass() - 1.0).abs() < 1e-12);
            // binomial oracle: P[S_n = 2k − n] = C(n,k)/2ⁿ
            let mut c = 1.0f64;
            for k in 0..=n {
                let x = 2.0 * k as f64 - n as f64;
                let i = d.atoms().iter().position(|a| (a.0 - x).abs() < 1e-9).unwrap();
                assert!((d.atoms()[i].1 - c / 2f64.powi(n as i32)).abs() < 1e-14);
                c = c * (n - k) as f64 / (k + 1) as f64;
            }
        }
    }

    #[test]
    fn linearity_of_mean() {
        let law = reference::two_state();
        let d = drift(&law).unwrap();
        let levels = walk_convolve(&law, 12, MERGE_RES).unwrap();
        for (n, l) in levels.iter().enumerate() {
            assert!((l.mean() - n as f64 * d).abs() <= 1e-12 + n as f64 * MERGE_RES);
        }
    }

    #[test]
    fn atom_cap() {
        let law = reference::two_state();
        match walk_convolve(&law, 200, MERGE_RES) {
            Err(Error::AtomExplosion { atoms, cap, .. }) => assert!(atoms > cap),
            other => panic!("expected explosion, got {:?}", other.map(|v| v.len())),
        }
    }

    #[test]
    fn tail_sum_examples() {
        let split = reference::deterministic_split();
        let above = tail_sums(&split, -0.5, 20).unwrap();
        assert!(above.iter().all(|t| t.increment == 0.0 && t.partial_sum == 0.0));
        let below = tail_sums(&split, -0.8, 20).unwrap();
        for t in &below {
            assert_eq!(t.increment, 1.0);
            assert_eq!(t.partial_sum, t.n as f64);
        }
        let csv = tail_sums_csv(&below).render();
        assert!(csv.starts_with("N,partial_sum,increment\n1,1,1\n"));
    }

    #[test]
    fn tail_increments_tend_to_one_below_drift() {
        let law = reference::drift_positive();
        let sums = tail_sums(&law, 0.1, 60).unwrap();
        assert!(sums.last().unwrap().increment > 0.95);
    }

    #[test]
    fn tail_increments_decay_above_drift() {
        // non-lattice steps: increments decrease from some n on
        let law = reference::two_state();
        let d = drift(&law).unwrap();
        let sums = tail_sums(&law, d + 0.3, 40).unwrap();
        let inc: Vec<f64> = sums.iter().map(|t| t.increment).collect();
        assert!(inc[10..].windows(2).all(|w| w[1] <= w[0]));
        assert!(inc[39] < 1e-3);
    }

    #[test]
    fn importance_pairs_are_unbiased() {
        let law = crate::brwre::induce_weight_law(&reference::binary_gaussian(), 0.5, 1e-6).unwrap();
        let s = &law.states()[0].1;
        let mut rng = seed::rng(17);
        let n = 200_000;
        let (mut w_sum, mut wx_sum) = (0.0, 0.0);
        for _ in 0..n {
            let (x, w) = sample_importance_pair(s, &mut rng);
            w_sum += w;
            wx_sum += w * x;
        }
        // E_G X = κ = −(log m − θ m′/m) = θ²/2 − log 2 for this law
        let kappa = 0.125 - LN_2;
        assert!((wx_sum / w_sum - kappa).abs() < 0.01);
        assert!((w_sum / n as f64 - 1.0).abs() < 0.01);
    }

    #[test]
    fn annealed_sampler_matches_law() {
        for law in [reference::two_state(), reference::drift_positive()] {
            let g = annealed_step_law(&law).unwrap();
            let a = sample_annealed_steps(&law, 10_000, 1).unwrap();
            let mut rng = seed::rng(2);
            let b: Vec<f64> = (0..10_000).map(|_| g.sample(&mut rng)).collect();
            let ks = ks_two_sample(&a, &b, 1e-3);
            assert!(ks.passes(), "{ks:?}");
        }
    }

    #[test]
    fn plus_minus_law_is_valid() {
        let law = plus_minus();
        assert!(crate::env_model::validate_law(&law, 1e-9).pass);
        let g = annealed_step_law(&law).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g.atoms()[0].0 + 1.0).abs() < 1e-15 && (g.atoms()[1].0 - 1.0).abs() < 1e-15);
        assert!((g.atoms()[0].1 - 0.5).abs() < 1e-15);
        let _ = E;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn annealed_mass_is_one(seed in 0u64..100_000) {
            let law = reference::random_law(seed, &Default::default());
            prop_assert!((annealed_step_law(&law).unwrap().total_mass() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn convolution_conserves_mass(
            xs in proptest::collection::vec(-2.0f64..2.0, 3),
            ms in proptest::collection::vec(0.01f64..1.0, 3),
        ) {
            let total: f64 = ms.iter().sum();
            let step = StepLaw::from_atoms(xs.iter().copied().zip(ms.iter().map(|m| m / total)).collect(), MERGE_RES);
            let mut level = StepLaw::point_mass(0.0);
            for _ in 0..15 {
                let raw = level.atoms().iter().flat_map(|(s, m)| step.atoms().iter().map(move |(x, q)| (s + x, m * q))).collect();
                level = StepLaw::from_atoms(raw, MERGE_RES);
                prop_assert!((level.total_mass() - 1.0).abs() < 1e-9);
            }
        }
    }
}
