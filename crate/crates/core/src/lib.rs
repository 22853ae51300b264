//! Periodic mutation-selection dynamics on fitness distributions.
//!
//! A population's fitness law on `[0,1]` evolves by size-biased selection
//! followed by mutation, with the mutation environments `(beta_i, q_i)`
//! repeating with period `k`. This crate simulates the recursion, decides
//! whether an atom condenses at the top fitness through Perron-eigenvalue
//! and determinant criteria on a `k x k` moment matrix, assembles the
//! closed-form subsequence limits, and cross-validates every closed form
//! against independent brute-force iteration.
//!
//! Module map:
//! - [`measure`]: finite atomic measures and their operations (moments,
//!   size-biasing, truncation, total variation, the below-eta partial order).
//! - [`recursion`]: the recursion itself, trajectories, the two-part
//!   decomposition of `p_n`, and the periodic-selection variant.
//! - [`spectral`]: the moment matrix `A(z)`, Perron eigenpairs, the critical
//!   parameter `z_c`, and the equivalent condensation criteria.
//! - [`limits`]: the limiting subsequence laws and convergence verification.
//! - [`genfun`]: generating functions of the cumulative mean-fitness
//!   products, evaluated by truncated series and by a determinant closed
//!   form.

pub mod error;
pub mod genfun;
pub mod limits;
mod linalg;
pub mod measure;
pub mod recursion;
pub mod spectral;

pub use error::{Error, Result};
pub use measure::{Atom, DensityFamily, Interval, Measure, MeasureKind};
pub use recursion::{
    Environment, EnvironmentCycle, Evolution, ModelInstance, SelectionCycle, SelectionFn,
    Trajectory,
};
pub use spectral::{CriticalSolution, MomentMatrix, Regime, SpectralResult};
