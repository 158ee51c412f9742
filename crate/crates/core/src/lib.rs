//! Numerical laboratory for Almgren Q-valued functions.
//!
//! The crate is organised bottom-up:
//!
//! - [`qpoints`]: unordered Q-tuples and the optimal-matching metric.
//! - [`domains`]: clipped tensor-grid meshes (quarter ball, disk, cylinder).
//! - [`dirichlet`]: discrete Dirichlet energy, boundary traces and the
//!   nonlinear Gauss–Seidel minimizer.
//! - [`frequency`]: Almgren frequency profiles and homogeneous oracles.
//! - [`topology`]: sheet covers, loop monodromy and forced singularities.
//! - [`transport`]: exact W2 and the corner distance with boundary dumping.
//! - [`cones`]: cornered open books, densities and the 2-d classification.
//! - [`experiment`]: the batch experiments driven by the `qlab` binary.
//!
//! With the default `parallel` feature the data-parallel loops run on rayon;
//! without it every [`Execution::Parallel`] request silently runs sequentially
//! and produces identical results.

pub mod cones;
pub mod dirichlet;
pub mod domains;
pub mod experiment;
pub mod frequency;
mod flow;
pub mod parallel;
pub mod perm;
pub mod qpoints;
pub mod topology;
pub mod transport;

pub use parallel::Execution;
pub use perm::Permutation;
pub use qpoints::{Matching, QPoint};
