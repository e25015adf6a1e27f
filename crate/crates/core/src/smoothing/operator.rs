use std::borrow::Cow;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curve::LaplaceCurve;
use super::grid::UGrid;
use crate::brwre::Displacement;
use crate::burst::BurstLaw;
use crate::env_model::{EnvSequence, EnvState, EnvironmentLaw, Outcome, StateKind, WeightVector};
use crate::error::{Error, Result};
use crate::labels;
use crate::quadrature::GaussHermite;
use crate::seed::{self, derive_seed};
use crate::stats::CompensatedSum;

/// How `E_ξ[·]` is evaluated for states without a finite outcome list.
///
/// States with finitely many outcomes and the burst state are always summed
/// exactly; the strategy only matters for Gaussian displacements.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExpectationStrategy {
    #[default]
    Exact,
    /// `budget` weight vectors per application, shared by all grid points.
    MonteCarlo { budget: usize, seed: u64 },
    GaussQuadrature { nodes: usize },
}

impl ExpectationStrategy {
    fn validate(&self) -> Result<()> {
        match self {
            ExpectationStrategy::MonteCarlo { budget: 0, .. } => {
                Err(Error::StrategyMismatch("Monte Carlo budget must be positive".into()))
            }
            ExpectationStrategy::GaussQuadrature { nodes: 0 } => {
                Err(Error::StrategyMismatch("quadrature needs at least one node".into()))
            }
            _ => Ok(()),
        }
    }

    /// Stream for the application that follows `applied` earlier ones.
    pub(crate) fn after(&self, applied: usize) -> Self {
        match self {
            ExpectationStrategy::MonteCarlo { budget, seed } => ExpectationStrategy::MonteCarlo {
                budget: *budget,
                seed: derive_seed(*seed, &labels!["apply", applied]),
            },
            other => other.clone(),
        }
    }
}

/// Per child: independent discrete rule `(probability, weight)`.
type ChildRule = Vec<(f64, f64)>;

enum Plan<'a> {
    Outcomes(Cow<'a, [Outcome]>),
    Samples(Vec<WeightVector>),
    Burst(BurstLaw),
    Quadrature(Vec<(f64, Vec<ChildRule>)>),
}

impl<'a> Plan<'a> {
    fn build(state: &'a EnvState, strat: &ExpectationStrategy) -> Result<Self> {
        strat.validate()?;
        if let StateKind::Burst(b) = &state.kind {
            return Ok(Plan::Burst(*b));
        }
        if let Some(o) = state.finite_outcomes() {
            return Ok(Plan::Outcomes(o));
        }
        let StateKind::ThetaTilted(t) = &state.kind else {
            unreachable!("only tilted states lack a finite outcome list")
        };
        match strat {
            ExpectationStrategy::Exact => Err(Error::StrategyMismatch(format!(
                "state `{}` has continuous displacements; use monte-carlo or gauss-quadrature",
                state.id
            ))),
            ExpectationStrategy::MonteCarlo { budget, seed } => {
                let mut rng = seed::rng(derive_seed(*seed, &labels!["state", state.id.as_str()]));
                Ok(Plan::Samples((0..*budget).map(|_| state.sample_weights_with(&mut rng)).collect()))
            }
            ExpectationStrategy::GaussQuadrature { nodes } => {
                let gh = GaussHermite::new(*nodes);
                let outcomes = t
                    .displacement
                    .outcomes()
                    .iter()
                    .map(|o| {
                        let rules = o
                            .children
                            .iter()
                            .map(|c| match *c {
                                Displacement::Atom(z) => vec![(1.0, t.weight_of(z))],
                                Displacement::Gaussian { mu, sigma2 } => {
                                    gh.normal_rule(mu, sigma2).map(|(z, w)| (w, t.weight_of(z))).collect()
                                }
                            })
                            .collect();
                        (o.prob, rules)
                    })
                    .collect();
                Ok(Plan::Quadrature(outcomes))
            }
        }
    }
}

/// `−ln Σ wₖ e^(−sₖ)` for probability weights `w`, accurate when the result
/// is tiny (via `ln_1p`) and when it is huge (via log-sum-exp).
pub(crate) fn neg_log_mean_exp(terms: &[(f64, f64)]) -> f64 {
    let q: f64 = terms
        .iter()
        .map(|(w, s)| w * -(-s).exp_m1())
        .collect::<CompensatedSum>()
        .value();
    if q < 0.5 {
        return -(-q).ln_1p();
    }
    let logs = terms.iter().filter(|(w, _)| *w > 0.0).map(|(w, s)| w.ln() - s);
    let top = logs.clone().fold(f64::NEG_INFINITY, f64::max);
    let rest: f64 = logs.map(|x| (x - top).exp()).sum();
    -(top + rest.ln())
}

struct Eval<'c> {
    curve: &'c LaplaceCurve,
    clamped: bool,
}

impl Eval<'_> {
    fn l(&mut self, u: f64) -> f64 {
        let (v, c) = self.curve.eval_log(u);
        self.clamped |= c;
        v
    }

    fn sum_l(&mut self, u: f64, w: &WeightVector) -> f64 {
        w.as_slice().iter().map(|y| self.l(u * y)).sum()
    }

    /// `−ln E φ(u·Y)` for one child rule.
    fn child(&mut self, u: f64, rule: &ChildRule, buf: &mut Vec<(f64, f64)>) -> f64 {
        buf.clear();
        for &(w, y) in rule {
            buf.push((w, self.l(u * y)));
        }
        neg_log_mean_exp(buf)
    }
}

/// `−ln E_ξ ∏ᵢ φ(u yᵢ)` at one argument.
fn h_at(plan: &Plan, curve: &LaplaceCurve, u: f64) -> (f64, bool) {
    let mut ev = Eval { curve, clamped: false };
    let mut terms = Vec::new();
    match plan {
        Plan::Outcomes(o) => {
            for oc in o.iter() {
                terms.push((oc.prob, ev.sum_l(u, &oc.weights)));
            }
        }
        Plan::Samples(s) => {
            let w = 1.0 / s.len() as f64;
            for v in s {
                terms.push((w, ev.sum_l(u, v)));
            }
        }
        Plan::Burst(b) => {
            let ell = ev.l(u * crate::burst::CHILD_WEIGHT);
            let q = b.one_minus_transform(ell);
            let l = if q < 0.5 {
                -(-q).ln_1p()
            } else {
                let survive: f64 = (1..=crate::burst::SERIES_TERMS)
                    .map(|k| b.prob_exponent(k) * (-((1u64 << k) as f64) * ell).exp())
                    .sum();
                -(b.prob_zero() + survive).ln()
            };
            return (l, ev.clamped);
        }
        Plan::Quadrature(outcomes) => {
            let mut buf = Vec::new();
            for (p, rules) in outcomes {
                let s = rules.iter().map(|r| ev.child(u, r, &mut buf)).sum();
                terms.push((*p, s));
            }
        }
    }
    (neg_log_mean_exp(&terms), ev.clamped)
}

/// `E_ξ[Σᵢ(1 − φ(u yᵢ)) − (1 − ∏ᵢ φ(u yᵢ))]`, not yet divided by `u`.
fn a_at(plan: &Plan, curve: &LaplaceCurve, u: f64) -> f64 {
    let mut ev = Eval { curve, clamped: false };
    let one_minus = |l: f64| -(-l).exp_m1();
    let mut acc = CompensatedSum::new();
    let vector = |w: &WeightVector, ev: &mut Eval| {
        let ls: Vec<f64> = w.as_slice().iter().map(|y| ev.l(u * y)).collect();
        let singles: f64 = ls.iter().map(|l| one_minus(*l)).sum();
        singles - one_minus(ls.iter().sum())
    };
    match plan {
        Plan::Outcomes(o) => o.iter().for_each(|oc| acc.add(oc.prob * vector(&oc.weights, &mut ev))),
        Plan::Samples(s) => {
            let w = 1.0 / s.len() as f64;
            s.iter().for_each(|v| acc.add(w * vector(v, &mut ev)));
        }
        Plan::Burst(b) => {
            let ell = ev.l(u * crate::burst::CHILD_WEIGHT);
            acc.add(b.mean_count().value * one_minus(ell) - b.one_minus_transform(ell));
        }
        Plan::Quadrature(outcomes) => {
            let mut buf = Vec::new();
            for (p, rules) in outcomes {
                let mut singles = 0.0;
                let mut s = 0.0;
                for r in rules {
                    let neg_log = ev.child(u, r, &mut buf);
                    singles += one_minus(neg_log);
                    s += neg_log;
                }
                acc.add(p * (singles - one_minus(s)));
            }
        }
    }
    acc.value()
}

/// The smoothing operator `φ ↦ E_ξ ∏ᵢ φ(u yᵢ)` on the curve's grid.
pub fn apply_h(state: &EnvState, curve: &LaplaceCurve, strat: &ExpectationStrategy) -> Result<LaplaceCurve> {
    let plan = Plan::build(state, strat)?;
    let out: Vec<(f64, bool)> = curve.grid().points().par_iter().map(|&u| h_at(&plan, curve, u)).collect();
    let clamped = curve.clamp_flag() || out.iter().any(|(_, c)| *c);
    LaplaceCurve::from_log_values(curve.grid().clone(), out.into_iter().map(|(l, _)| l).collect(), clamped)
}

/// `A(ξ, u) = u⁻¹ E_ξ[Σᵢ(1 − φ(u yᵢ)) − (1 − ∏ᵢ φ(u yᵢ))]` with `φ` the
/// curve of the shifted environment.
pub fn a_discrepancy(state: &EnvState, next_curve: &LaplaceCurve, u: f64, strat: &ExpectationStrategy) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::NonpositiveU(u));
    }
    let plan = Plan::build(state, strat)?;
    Ok(a_at(&plan, next_curve, u) / u)
}

/// `φₙ(ξ, ·)` for `ξ = states`: starting from `e^(−u)`, apply `H` with
/// `ξₙ₋₁` first and `ξ₀` last.
pub fn iterate_states(states: &[&EnvState], grid: &Arc<UGrid>, strat: &ExpectationStrategy) -> Result<LaplaceCurve> {
    let mut curve = LaplaceCurve::exponential(grid);
    for (applied, state) in states.iter().rev().enumerate() {
        curve = apply_h(state, &curve, &strat.after(applied))?;
    }
    Ok(curve)
}

/// [`iterate_states`] over a whole environment sequence.
pub fn iterate(law: &EnvironmentLaw, seq: &EnvSequence, grid: &Arc<UGrid>, strat: &ExpectationStrategy) -> Result<LaplaceCurve> {
    iterate_states(&seq.resolve(law)?, grid, strat)
}
