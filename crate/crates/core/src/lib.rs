//! Numerical laboratory for heavy-tailed Markov renewal processes, their
//! α-stable regenerative-set scaling limits, and the strip wetting model.
//!
//! The crate is organised by subsystem:
//!
//! * [`model`]: state grid, heavy-tailed Markov renewal kernels and their
//!   stationary law.
//! * [`mrp`]: simulation of `(τ, J)` and renewal mass / Laplace estimators.
//! * [`regen`]: stable regenerative sets, Mathéron functionals, closed-form
//!   limit laws and goodness-of-fit machinery.
//! * [`walk`]: random-walk fluctuation theory and the constrained kernel of
//!   the walk killed below the strip.
//! * [`wetting`]: the transfer operator `B^λ`, free energy, tilted kernel,
//!   partition functions and exact sampling of critical contact sets.
//!
//! Monte Carlo replicas run through [`par`], which uses rayon when the
//! `parallel` feature is enabled and a plain loop otherwise. Every replica
//! owns an RNG derived from `(seed, stream, index)`, so results do not depend
//! on the number of workers.

pub mod error;
pub mod model;
pub mod mrp;
pub mod par;
pub mod persist;
pub mod quad;
pub mod regen;
pub mod report;
pub mod special;
pub mod stats;
pub mod walk;
pub mod wetting;

pub use error::{Error, Result};

/// Version string embedded in run summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
