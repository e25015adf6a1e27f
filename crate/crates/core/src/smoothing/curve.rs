use std::sync::Arc;

use super::grid::{Position, UGrid};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};

/// Slack allowed in the shape checks of [`LaplaceCurve::invariant_violations`].
pub const SHAPE_TOL: f64 = 1e-10;

/// A Laplace transform `φ(u) = E e^(−uZ)` sampled on a grid.
///
/// The stored quantity is `L = −ln φ`; `φ` itself underflows long before
/// `L` loses precision at the top of wide grids.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceCurve {
    grid: Arc<UGrid>,
    l: Vec<f64>,
    /// `d ln L / d ln u` at each node, for the cubic interpolant.
    slopes: Vec<f64>,
    /// Segments on which the cubic is concave in `ln u`.
    cubic: Vec<bool>,
    clamp_flag: bool,
}

/// Monotone (Fritsch–Carlson) node slopes of `ln L` against `ln u`.
/// Segments touching `L = 0` have no log-slope and are left at zero.
fn node_slopes(grid: &UGrid, l: &[f64]) -> Vec<f64> {
    let g = l.len();
    let secant: Vec<Option<(f64, f64)>> = (0..g - 1)
        .map(|k| {
            let h = grid.log_at(k + 1) - grid.log_at(k);
            (l[k] > 0.0 && l[k + 1] > 0.0).then(|| (h, (l[k + 1].ln() - l[k].ln()) / h))
        })
        .collect();
    (0..g)
        .map(|k| {
            let left = if k > 0 { secant[k - 1] } else { None };
            let right = if k + 1 < g { secant[k] } else { None };
            match (left, right) {
                (Some((h0, d0)), Some((h1, d1))) => {
                    if d0 * d1 <= 0.0 {
                        0.0
                    } else {
                        let (w0, w1) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                        (w0 + w1) / (w0 / d0 + w1 / d1)
                    }
                }
                (Some((_, d)), None) | (None, Some((_, d))) => d,
                (None, None) => 0.0,
            }
        })
        .collect()
}

/// A cubic segment with slopes `d₀, d₁` and secant `δ` is concave iff
/// `2d₀ + d₁ ≥ 3δ ≥ d₀ + 2d₁`; concavity of `ln L` in `ln u` together with
/// slopes in `[0, 1]` keeps `L` concave in `u`. Other segments use the power law.
fn concave_segments(grid: &UGrid, l: &[f64], slopes: &[f64]) -> Vec<bool> {
    (0..l.len() - 1)
        .map(|k| {
            if !(l[k] > 0.0 && l[k + 1] > 0.0) {
                return false;
            }
            let delta = 3.0 * (l[k + 1].ln() - l[k].ln()) / (grid.log_at(k + 1) - grid.log_at(k));
            let (d0, d1) = (slopes[k], slopes[k + 1]);
            let unit = |d: f64| (0.0..=1.0).contains(&d);
            unit(d0) && unit(d1) && 2.0 * d0 + d1 >= delta && delta >= d0 + 2.0 * d1
        })
        .collect()
}

impl LaplaceCurve {
    pub fn from_log_values(grid: Arc<UGrid>, l: Vec<f64>, clamp_flag: bool) -> Result<Self> {
        if l.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if l.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidGrid("curve exponents must be finite and nonnegative".into()));
        }
        let slopes = node_slopes(&grid, &l);
        let cubic = concave_segments(&grid, &l, &slopes);
        Ok(Self { grid, l, slopes, cubic, clamp_flag })
    }

    /// `e^(−u)`, the transform of the unit mass.
    pub fn exponential(grid: &Arc<UGrid>) -> Self {
        Self::from_log_values(grid.clone(), grid.points().to_vec(), false).expect("positive grid")
    }

    /// `φ ≡ 1`, the transform of the point mass at zero.
    pub fn degenerate(grid: &Arc<UGrid>) -> Self {
        Self::from_log_values(grid.clone(), vec![0.0; grid.len()], false).expect("zero exponents")
    }

    /// Samples a closed-form `φ` on the grid.
    pub fn from_phi(grid: &Arc<UGrid>, phi: impl Fn(f64) -> f64) -> Result<Self> {
        let l = grid.points().iter().map(|&u| -phi(u).ln()).collect();
        Self::from_log_values(grid.clone(), l, false)
    }

    pub fn grid(&self) -> &Arc<UGrid> {
        &self.grid
    }

    pub fn same_grid(&self, other: &LaplaceCurve) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    /// The exponents `L(uⱼ)`.
    pub fn log_values(&self) -> &[f64] {
        &self.l
    }

    pub fn phi_values(&self) -> Vec<f64> {
        self.l.iter().map(|l| (-l).exp()).collect()
    }

    pub fn clamp_flag(&self) -> bool {
        self.clamp_flag
    }

    /// `L(u)` off the grid; the flag reports clamping above the last point.
    ///
    /// Between neighbours `ln L` is a monotone cubic Hermite interpolant in
    /// `ln u` where that is concave, and linear in `ln u` (a power law)
    /// elsewhere; both are exact for `e^(−u)`. Segments with a zero endpoint
    /// fall back to `L` linear in `ln u`.
    pub fn eval_log(&self, u: f64) -> (f64, bool) {
        if u <= 0.0 {
            return (0.0, false);
        }
        match self.grid.locate(u) {
            Position::At(j) => (self.l[j], false),
            Position::Below => (self.l[0] * (u / self.grid.first()), false),
            Position::Above => (self.l[self.l.len() - 1], true),
            Position::Between(j) => {
                let (a, b) = (self.l[j], self.l[j + 1]);
                let (la, lb) = (self.grid.log_at(j), self.grid.log_at(j + 1));
                let h = lb - la;
                let t = (u.ln() - la) / h;
                let v = if self.cubic[j] {
                    let (t2, t3) = (t * t, t * t * t);
                    let ln_l = (2.0 * t3 - 3.0 * t2 + 1.0) * a.ln()
                        + (t3 - 2.0 * t2 + t) * h * self.slopes[j]
                        + (-2.0 * t3 + 3.0 * t2) * b.ln()
                        + (t3 - t2) * h * self.slopes[j + 1];
                    ln_l.exp()
                } else if a > 0.0 && b > 0.0 {
                    (a.ln() + t * (b.ln() - a.ln())).exp()
                } else {
                    a + t * (b - a)
                };
                (v, false)
            }
        }
    }

    /// `φ(u)` together with the clamp indicator.
    pub fn eval_flagged(&self, u: f64) -> Result<(f64, bool)> {
        if u < 0.0 || u.is_nan() {
            return Err(Error::NegativeArgument(u));
        }
        let (l, c) = self.eval_log(u);
        Ok(((-l).exp(), c))
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        self.eval_flagged(u).map(|(v, _)| v)
    }

    /// Empty when the curve is a plausible Laplace transform on its grid.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let u = self.grid.points();
        let l = &self.l;
        for j in 0..l.len() {
            if !(l[j].is_finite() && l[j] >= 0.0) {
                out.push(format!("L({}) = {} outside [0, inf)", u[j], l[j]));
            }
        }
        for j in 1..l.len() {
            if l[j] < l[j - 1] - SHAPE_TOL * l[j - 1].max(1.0) {
                out.push(format!("L decreases at u = {}", u[j]));
            }
        }
        let slopes: Vec<f64> = (1..l.len()).map(|j| (l[j] - l[j - 1]) / (u[j] - u[j - 1])).collect();
        for j in 1..slopes.len() {
            if slopes[j] > slopes[j - 1] + SHAPE_TOL * slopes[j - 1].abs().max(1.0) {
                out.push(format!("L not concave at u = {}", u[j]));
            }
        }
        // φⱼ − φⱼ₋₁ via expm1 keeps full relative precision near u = 0
        let dphi: Vec<f64> = (1..l.len())
            .map(|j| (-l[j - 1]).exp() * (-(l[j] - l[j - 1])).exp_m1() / (u[j] - u[j - 1]))
            .collect();
        for j in 1..dphi.len() {
            if dphi[j] < dphi[j - 1] - SHAPE_TOL * dphi[j - 1].abs().max(1.0) {
                out.push(format!("phi not convex at u = {}", u[j]));
            }
        }
        out
    }

    /// Columns `u, phi, L`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["u", "phi", "L"]);
        for (u, l) in self.grid.points().iter().zip(&self.l) {
            t.push(vec![fmt_f64(*u), fmt_f64((-l).exp()), fmt_f64(*l)]);
        }
        t
    }

    /// Inverse of [`to_csv`](Self::to_csv); `L` is the authoritative column.
    pub fn from_csv(table: &CsvTable) -> Result<Self> {
        let grid = Arc::new(UGrid::new(table.f64_column("u")?)?);
        Self::from_log_values(grid, table.f64_column("L")?, false)
    }
}
