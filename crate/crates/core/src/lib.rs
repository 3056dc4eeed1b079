//! Open quantum random walks on finite site sets and windows of the integers.
//!
//! The central object is the quantum transition matrix ([`Qtm`]): an `n × n`
//! grid of `k × k` blocks acting on block-diagonal densities ([`VectorState`]).
//! On top of it the crate offers superoperator representations, spectral
//! ergodicity tests, quantum-trajectory sampling, and fixed-point solvers for
//! hitting probabilities, mean hitting times and potentials.

pub mod channel;
pub mod commuting;
pub mod ergodicity;
pub mod error;
pub mod fixed_point;
pub mod hitting;
pub mod linalg;
pub mod model;
pub mod par;
pub mod potential;
pub mod qtm;
pub mod sample;
pub mod trajectory;
pub mod walk;

pub use channel::{ChannelMatrix, KrausSet, VectorChannel};
pub use error::{Error, Result};
pub use fixed_point::SolveOptions;
pub use par::Execution;
pub use qtm::{compose, Qtm, VectorState, DEFAULT_TOL};
pub use walk::{Boundary, LatticeWindow, Walk};
