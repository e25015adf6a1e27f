use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use super::curve::LaplaceCurve;
use super::grid::UGrid;
use super::operator::{a_discrepancy, apply_h, iterate_states, ExpectationStrategy};
use crate::env_model::{EnvSequence, EnvState, EnvironmentLaw};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::stats::CompensatedSum;

/// Upper end of the `u` range scanned by [`successive_diff`].
pub const DIFF_U_MAX: f64 = 10.0;
/// Default threshold on the successive-difference metric.
pub const CONVERGENCE_TOL: f64 = 1e-6;
pub const MAX_TELESCOPE_DEPTH: usize = 5;

/// `max_{u ≤ 10} u⁻¹ |a(u) − b(u)|` over the common grid.
pub fn successive_diff(a: &LaplaceCurve, b: &LaplaceCurve) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch);
    }
    let mut best = 0.0f64;
    let pts = a.grid().points();
    for (j, &u) in pts.iter().enumerate().take_while(|(_, u)| **u <= DIFF_U_MAX) {
        let (la, lb) = (a.log_values()[j], b.log_values()[j]);
        let (lo, hi) = if la <= lb { (la, lb) } else { (lb, la) };
        // e^(−lo) − e^(−hi) without cancellation
        let d = (-lo).exp() * -(lo - hi).exp_m1();
        best = best.max(d / u);
    }
    Ok(best)
}

/// `(1 − φ(u₁))/u₁`, the slope at the origin.
pub fn mean_at_zero(curve: &LaplaceCurve) -> f64 {
    let u1 = curve.grid().first();
    -(-curve.log_values()[0]).exp_m1() / u1
}

/// `φ*(u) = (1 − φ(u))/u`.
pub fn phistar(curve: &LaplaceCurve, u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::NonpositiveU(u));
    }
    let (l, _) = curve.eval_log(u);
    Ok(-(-l).exp_m1() / u)
}

/// `ψ(u) = (φ₁(u) − 1 + u)/u` on the grid, with `φ₁ = H e^(−u)`.
pub fn psi_of_state(state: &EnvState, grid: &Arc<UGrid>, strat: &ExpectationStrategy) -> Result<Vec<f64>> {
    let phi1 = apply_h(state, &LaplaceCurve::exponential(grid), strat)?;
    Ok(grid
        .points()
        .iter()
        .zip(phi1.log_values())
        .map(|(u, l)| 1.0 - (-(-l).exp_m1()) / u)
        .collect())
}

/// Size-biased step atoms `(ln y, p·y)` of a state with finitely many outcomes.
fn walk_atoms(state: &EnvState) -> Result<Vec<(f64, f64)>> {
    let outcomes = state
        .finite_outcomes()
        .ok_or_else(|| Error::ContinuousState(state.id.clone()))?;
    Ok(outcomes
        .iter()
        .flat_map(|o| o.weights.positive().map(move |y| (y.ln(), o.prob * y)))
        .collect())
}

/// Probability-weighted mean over environment prefixes `ξ₀…ξₙ` of
/// `|φ*(ξ,u) + E Σ_{k<n} A(Tᵏξ, u e^{Sₖ}) − E φ*(Tⁿξ, u e^{Sₙ})|`,
/// where each state's curve stands in for `φ(ξ, ·)`.
pub fn telescoping_residual(
    law: &EnvironmentLaw,
    curves: &HashMap<String, LaplaceCurve>,
    u: f64,
    n: usize,
) -> Result<f64> {
    if n > MAX_TELESCOPE_DEPTH {
        return Err(Error::TooDeep { depth: n, max: MAX_TELESCOPE_DEPTH });
    }
    if !(u > 0.0) {
        return Err(Error::NonpositiveU(u));
    }
    let states = law.states();
    let mut atoms = Vec::with_capacity(states.len());
    let mut curve_of = Vec::with_capacity(states.len());
    for (_, s) in states {
        atoms.push(walk_atoms(s)?);
        curve_of.push(curves.get(&s.id).ok_or_else(|| Error::UnknownState(s.id.clone()))?);
    }
    let ctx = Telescope { law, atoms: &atoms, curves: &curve_of, u, n };
    let mut total = CompensatedSum::new();
    for (i0, (p0, _)) in states.iter().enumerate() {
        if *p0 > 0.0 {
            let head = phistar(curve_of[i0], u)?;
            ctx.descend(0, i0, *p0, &[(0.0, 1.0)], head, &mut total)?;
        }
    }
    Ok(total.value())
}

struct Telescope<'a> {
    law: &'a EnvironmentLaw,
    atoms: &'a [Vec<(f64, f64)>],
    curves: &'a [&'a LaplaceCurve],
    u: f64,
    n: usize,
}

impl Telescope<'_> {
    /// `walk` holds the atoms of `S_k`; `running` the accumulated
    /// `φ*(ξ,u) + Σ_{j<k} E A(…)` along the prefix ending in state `current`.
    fn descend(
        &self,
        k: usize,
        current: usize,
        prob: f64,
        walk: &[(f64, f64)],
        running: f64,
        total: &mut CompensatedSum,
    ) -> Result<()> {
        if k == self.n {
            let tail: f64 = walk
                .iter()
                .map(|(s, m)| phistar(self.curves[current], self.u * s.exp()).map(|v| m * v))
                .sum::<Result<f64>>()?;
            total.add(prob * (running - tail).abs());
            return Ok(());
        }
        let state = &self.law.states()[current].1;
        let next_walk: Vec<(f64, f64)> = walk
            .iter()
            .flat_map(|(s, m)| self.atoms[current].iter().map(move |(x, q)| (s + x, m * q)))
            .collect();
        for (next, (p, _)) in self.law.states().iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let a: f64 = walk
                .iter()
                .map(|(s, m)| {
                    a_discrepancy(state, self.curves[next], self.u * s.exp(), &ExpectationStrategy::Exact).map(|v| m * v)
                })
                .sum::<Result<f64>>()?;
            self.descend(k + 1, next, prob * p, &next_walk, running + a, total)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub n: usize,
    /// `successive_diff(φₙ, φₙ₋₁)`.
    pub g_n: f64,
    /// `mean_at_zero(φₙ)`.
    pub mean: f64,
    pub clamp_flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointRun {
    pub log: Vec<IterationRecord>,
    /// The last iterate computed.
    pub curve: LaplaceCurve,
    /// First `n` with `g_n` below the tolerance.
    pub converged_at: Option<usize>,
}

impl FixedPointRun {
    pub fn log_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["n", "g_n", "mean", "clamp_flag"]);
        for r in &self.log {
            t.push(vec![r.n.to_string(), fmt_f64(r.g_n), fmt_f64(r.mean), r.clamp_flag.to_string()]);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub n_max: usize,
    pub tol: f64,
    pub stop_when_converged: bool,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { n_max: 200, tol: CONVERGENCE_TOL, stop_when_converged: false }
    }
}

/// Computes `φ₁, …, φ_N` along the prefixes of `seq`, logging `gₙ`.
///
/// When every coordinate is the same state the iterates are built forward,
/// `φₙ = H φₙ₋₁`; otherwise each `φₙ` is recomputed by backward recursion.
pub fn run_fixed_point(
    law: &EnvironmentLaw,
    seq: &EnvSequence,
    grid: &Arc<UGrid>,
    strat: &ExpectationStrategy,
    opts: &FixedPointOptions,
) -> Result<FixedPointRun> {
    if seq.len() < opts.n_max {
        return Err(Error::Precondition(format!(
            "sequence has {} coordinates, run needs {}",
            seq.len(),
            opts.n_max
        )));
    }
    let states = seq.resolve(law)?;
    let homogeneous = states.windows(2).all(|w| std::ptr::eq(w[0], w[1]));
    let mut prev = LaplaceCurve::exponential(grid);
    let mut log = Vec::with_capacity(opts.n_max);
    let mut converged_at = None;
    for n in 1..=opts.n_max {
        let cur = if homogeneous {
            apply_h(states[0], &prev, &strat.after(n - 1))?
        } else {
            iterate_states(&states[..n], grid, strat)?
        };
        let g_n = successive_diff(&cur, &prev)?;
        log.push(IterationRecord { n, g_n, mean: mean_at_zero(&cur), clamp_flag: cur.clamp_flag() });
        prev = cur;
        if g_n < opts.tol && converged_at.is_none() {
            converged_at = Some(n);
            if opts.stop_when_converged {
                break;
            }
        }
    }
    Ok(FixedPointRun { log, curve: prev, converged_at })
}
