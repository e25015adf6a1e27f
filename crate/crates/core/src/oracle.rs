//! Brute-force ground truth on tiny instances: the quenched transform and
//! mean of `Wₙ` by full tree enumeration at exact arguments.

use serde::Serialize;

use crate::env_model::{EnvSequence, EnvironmentLaw, Outcome};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::stats::CompensatedSum;

pub const MAX_DEPTH: usize = 4;
pub const MAX_OUTCOMES: usize = 4;
pub const MAX_CHILDREN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactTransform {
    pub u_points: Vec<f64>,
    /// `E_ξ e^(−u Wₙ)` at each point.
    pub values: Vec<f64>,
    pub depth: usize,
    pub env: EnvSequence,
}

impl ExactTransform {
    /// Columns `u, phi`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["u", "phi"]);
        for (u, v) in self.u_points.iter().zip(&self.values) {
            t.push(vec![fmt_f64(*u), fmt_f64(*v)]);
        }
        t
    }
}

fn levels(law: &EnvironmentLaw, seq: &EnvSequence, n: usize) -> Result<Vec<Vec<Outcome>>> {
    if n > MAX_DEPTH {
        return Err(Error::TooLarge(format!("depth {n} exceeds {MAX_DEPTH}")));
    }
    if n > seq.len() {
        return Err(Error::Precondition(format!("depth {n} exceeds sequence length {}", seq.len())));
    }
    seq.state_ids[..n]
        .iter()
        .map(|id| {
            let s = law.state(id)?;
            let o = s.finite_outcomes().ok_or_else(|| Error::ContinuousState(id.clone()))?;
            if o.len() > MAX_OUTCOMES {
                return Err(Error::TooLarge(format!("state `{id}` has {} outcomes", o.len())));
            }
            if let Some(big) = o.iter().find(|x| x.weights.len() > MAX_CHILDREN) {
                return Err(Error::TooLarge(format!("state `{id}` has an outcome with {} children", big.weights.len())));
            }
            Ok(o.into_owned())
        })
        .collect()
}

/// `φ_k(u) = Σ_o p_o ∏ᵢ φ_{k+1}(u yᵢ)` down to `φ_n(u) = e^(−u)`.
fn transform(levels: &[Vec<Outcome>], u: f64) -> f64 {
    let Some((head, rest)) = levels.split_first() else {
        return (-u).exp();
    };
    let mut acc = CompensatedSum::new();
    for o in head {
        let prod: f64 = o.weights.as_slice().iter().map(|y| transform(rest, u * y)).product();
        acc.add(o.prob * prod);
    }
    acc.value()
}

/// `φₙ(ξ, u)` for the first `n` coordinates of `seq`, by exact recursion.
pub fn exact_wn_transform(law: &EnvironmentLaw, seq: &EnvSequence, u_points: &[f64], n: usize) -> Result<ExactTransform> {
    let lv = levels(law, seq, n)?;
    if let Some(u) = u_points.iter().find(|u| !(**u >= 0.0)) {
        return Err(Error::NegativeArgument(*u));
    }
    Ok(ExactTransform {
        u_points: u_points.to_vec(),
        values: u_points.iter().map(|&u| transform(&lv, u)).collect(),
        depth: n,
        env: seq.clone(),
    })
}

/// Sum over every root-to-leaf path of probability times weight product.
fn tree_mean(levels: &[Vec<Outcome>], acc: &mut CompensatedSum, mass: f64) {
    let Some((head, rest)) = levels.split_first() else {
        acc.add(mass);
        return;
    };
    for o in head {
        for y in o.weights.as_slice() {
            tree_mean(rest, acc, mass * o.prob * y);
        }
    }
}

/// `E_ξ Wₙ` by enumerating the tree.
pub fn exact_wn_mean(law: &EnvironmentLaw, seq: &EnvSequence, n: usize) -> Result<f64> {
    let lv = levels(law, seq, n)?;
    let mut acc = CompensatedSum::new();
    tree_mean(&lv, &mut acc, 1.0);
    Ok(acc.value())
}

/// `count` log-equispaced points from `low` to `high`.
pub fn log_points(low: f64, high: f64, count: usize) -> Vec<f64> {
    let (a, b) = (low.ln(), high.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}
