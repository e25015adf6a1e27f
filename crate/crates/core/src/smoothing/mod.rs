//! Laplace curves on a `u`-grid, the smoothing operator `H` and the
//! diagnostics of the fixed-point iteration.

mod curve;
mod diagnostics;
mod grid;
mod operator;

pub use curve::{LaplaceCurve, SHAPE_TOL};
pub use diagnostics::{
    mean_at_zero, phistar, psi_of_state, run_fixed_point, successive_diff, telescoping_residual, FixedPointOptions,
    FixedPointRun, IterationRecord, CONVERGENCE_TOL, DIFF_U_MAX, MAX_TELESCOPE_DEPTH,
};
pub use grid::{UGrid, DEFAULT_HIGH, DEFAULT_LOW, DEFAULT_POINTS};
pub use operator::{a_discrepancy, apply_h, iterate, iterate_states, ExpectationStrategy};
