use crate::error::{Error, Result};

/// Strictly increasing positive evaluation points for Laplace curves.
#[derive(Debug, Clone, PartialEq)]
pub struct UGrid {
    points: Vec<f64>,
    logs: Vec<f64>,
    /// `(ln u₁, step)` when the points are log-equispaced.
    uniform: Option<(f64, f64)>,
}

pub const DEFAULT_LOW: f64 = 1e-8;
pub const DEFAULT_HIGH: f64 = 1e8;
pub const DEFAULT_POINTS: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Position {
    Below,
    At(usize),
    /// Strictly between points `j` and `j + 1`.
    Between(usize),
    Above,
}

impl UGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {}", points.len())));
        }
        if points.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
            return Err(Error::InvalidGrid("points must be positive and finite".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("points must be strictly increasing".into()));
        }
        let logs: Vec<f64> = points.iter().map(|u| u.ln()).collect();
        let step = (logs[logs.len() - 1] - logs[0]) / (logs.len() - 1) as f64;
        let uniform = logs
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step)
            .then_some((logs[0], step));
        Ok(Self { points, logs, uniform })
    }

    /// `n` log-equispaced points from `low` to `high` inclusive.
    pub fn log_spaced(low: f64, high: f64, n: usize) -> Result<Self> {
        if !(low > 0.0 && high > low && n >= 3) {
            return Err(Error::InvalidGrid(format!("bad log grid [{low}, {high}] with {n} points")));
        }
        let (a, b) = (low.ln(), high.ln());
        let h = (b - a) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|j| (a + h * j as f64).exp()).collect();
        points[0] = low;
        points[n - 1] = high;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub(crate) fn log_at(&self, j: usize) -> f64 {
        self.logs[j]
    }

    pub(crate) fn locate(&self, u: f64) -> Position {
        let g = self.points.len();
        if u < self.points[0] {
            return Position::Below;
        }
        if u > self.points[g - 1] {
            return Position::Above;
        }
        let mut j = match self.uniform {
            Some((l0, h)) => (((u.ln() - l0) / h).floor().max(0.0) as usize).min(g - 1),
            None => self.points.partition_point(|p| *p <= u).saturating_sub(1),
        };
        while j > 0 && self.points[j] > u {
            j -= 1;
        }
        while j + 1 < g && self.points[j + 1] <= u {
            j += 1;
        }
        if self.points[j] == u {
            Position::At(j)
        } else {
            Position::Between(j)
        }
    }
}

impl Default for UGrid {
    fn default() -> Self {
        Self::log_spaced(DEFAULT_LOW, DEFAULT_HIGH, DEFAULT_POINTS).expect("valid default grid")
    }
}
