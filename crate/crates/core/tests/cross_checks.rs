//! Cross-module checks: sampler means, the exact martingale mean, oracle
//! against simulator, and the committed oracle fixture.

use std::sync::Arc;

use smoothlab::brwre::{self, Displacement, DisplacementState};
use smoothlab::env_model::{sample_env, EnvState};
use smoothlab::io::CsvTable;
use smoothlab::oracle;
use smoothlab::reference::{self, RandomLawSpec};
use smoothlab::seed::{self, derive_seed};
use smoothlab::stats;
use smoothlab::{labels, EnvSequence, EnvironmentLaw, ExpectationStrategy, UGrid};

const SAMPLES: usize = 100_000;

fn empirical_totals(state: &EnvState, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    (0..SAMPLES)
        .map(|_| {
            let w = state.sample_weights_with(&mut rng);
            assert!(w.positive_count() as u64 <= 1 << smoothlab::burst::SERIES_TERMS);
            w.total()
        })
        .collect()
}

#[test]
fn sampled_vectors_have_mean_one() {
    let mut states: Vec<EnvState> = Vec::new();
    for law in [reference::deterministic_split(), reference::drift_positive(), reference::two_state()] {
        states.extend(law.states().iter().map(|(_, s)| s.clone()));
    }
    for i in 0..5u64 {
        let law = reference::random_law(derive_seed(7, &labels!["mean-law", i]), &RandomLawSpec::default());
        states.extend(law.states().iter().map(|(_, s)| s.clone()));
    }
    let gauss = reference::binary_gaussian();
    let induced = brwre::induce_weight_law(&gauss, 0.8, brwre::DEFAULT_DELTA).unwrap();
    states.push(induced.states()[0].1.clone());

    for (i, state) in states.iter().enumerate() {
        let xs = empirical_totals(state, derive_seed(7, &labels!["mean", i]));
        let est = stats::mean_and_se(&xs);
        assert!(est.covers(1.0, 5.0), "state {i}: {} +- {}", est.mean, est.std_error);
    }
}

#[test]
fn burst_median_of_means_near_one() {
    // groups of 10⁴ miss exponents above k ≈ 13, a deficit near c/(2k) ≈ 0.05
    let xs = empirical_totals(&EnvState::burst("burst"), 11);
    let mom = stats::median_of_means(&xs, 10);
    assert!((mom - 1.0).abs() < 0.15, "{mom}");
}

#[test]
fn exact_martingale_mean_on_every_short_sequence() {
    let law = brwre::induce_weight_law(&reference::atom_brw(), reference::ATOM_BRW_THETA, brwre::DEFAULT_DELTA).unwrap();
    let ids = ["A", "B"];
    for n in 0..=3usize {
        for code in 0..(1usize << n) {
            let seq = EnvSequence::from_ids((0..n).map(|k| ids[(code >> k) & 1]));
            let mean = oracle::exact_wn_mean(&law, &seq, n).unwrap();
            assert!((mean - 1.0).abs() <= 1e-12, "{:?}: {mean}", seq.state_ids);
        }
    }
}

#[test]
fn oracle_matches_simulator() {
    let brw = reference::atom_brw();
    let theta = reference::ATOM_BRW_THETA;
    let law = brwre::induce_weight_law(&brw, theta, brwre::DEFAULT_DELTA).unwrap();
    let seq = brwre::sample_brw_env(&brw, 3, 5);
    let exact = oracle::exact_wn_transform(&law, &seq, &[1.0], 3).unwrap().values[0];
    let reps = brwre::simulate_replicas(&brw, theta, &seq, 3, brwre::DEFAULT_CAP, 9, 100_000);
    let samples: Vec<f64> = reps.into_iter().map(|r| (-r.unwrap().final_w()).exp()).collect();
    let est = stats::mean_and_se(&samples);
    assert!(est.covers(exact, 3.0), "{} +- {} vs {exact}", est.mean, est.std_error);
}

fn fixture_law() -> (EnvironmentLaw, EnvSequence) {
    let law = brwre::induce_weight_law(&reference::atom_brw(), reference::ATOM_BRW_THETA, brwre::DEFAULT_DELTA).unwrap();
    (law, EnvSequence::from_ids(["A", "B", "B"]))
}

#[test]
fn committed_oracle_fixture_is_reproduced() {
    let text = include_str!("fixtures/oracle_atom_brw_ABB.csv");
    let table = CsvTable::parse(text).unwrap();
    let us = table.f64_column("u").unwrap();
    let phi = table.f64_column("phi").unwrap();
    let (law, seq) = fixture_law();
    let exact = oracle::exact_wn_transform(&law, &seq, &us, 3).unwrap();
    for (a, b) in exact.values.iter().zip(&phi) {
        assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
    }
    let grid = Arc::new(UGrid::default());
    let curve = smoothlab::smoothing::iterate(&law, &seq, &grid, &ExpectationStrategy::Exact).unwrap();
    for (u, b) in us.iter().zip(&phi) {
        assert!((curve.eval(*u).unwrap() - b).abs() <= 1e-4, "u = {u}");
    }
}

#[test]
fn gaussian_quadrature_tracks_monte_carlo_on_tilted_states() {
    let law = mixed_brw();
    let induced = brwre::induce_weight_law(&law, 0.6, brwre::DEFAULT_DELTA).unwrap();
    let seq = sample_env(&induced, 4, 3);
    let grid = Arc::new(UGrid::log_spaced(1e-3, 1e3, 61).unwrap());
    let gq = smoothlab::smoothing::iterate(&induced, &seq, &grid, &ExpectationStrategy::GaussQuadrature { nodes: 24 })
        .unwrap();
    let mc = smoothlab::smoothing::iterate(
        &induced,
        &seq,
        &grid,
        &ExpectationStrategy::MonteCarlo { budget: 200_000, seed: 17 },
    )
    .unwrap();
    let sup = gq.phi_values().iter().zip(mc.phi_values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(sup < 1e-2, "{sup}");
}

/// A Gaussian state mixed with an atom state.
fn mixed_brw() -> brwre::BrwLaw {
    let g = DisplacementState::iid(2, Displacement::Gaussian { mu: 0.1, sigma2: 0.5 }).unwrap();
    let a = DisplacementState::iid(3, Displacement::Atom(0.4)).unwrap();
    brwre::BrwLaw::new(vec![(0.6, "g".into(), g), (0.4, "a".into(), a)]).unwrap()
}
