//! Fixed points of the smoothing transform in a random environment:
//! environment laws, moment conditions, numerical iteration of Laplace
//! transforms, the spine walk, branching random walks in random environment
//! and brute-force oracles.

pub mod brwre;
pub mod burst;
pub mod env_model;
pub mod error;
pub mod extended;
pub mod io;
pub mod moments;
pub mod oracle;
pub mod quadrature;
pub mod reference;
pub mod schema;
pub mod seed;
pub mod smoothing;
pub mod spine_walk;
pub mod stats;

pub use env_model::{EnvSequence, EnvState, EnvironmentLaw, WeightVector};
pub use error::{Error, Result};
pub use extended::ExtReal;
pub use seed::derive_seed;
pub use smoothing::{ExpectationStrategy, LaplaceCurve, UGrid};
