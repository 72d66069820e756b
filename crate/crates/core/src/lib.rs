//! Equilibrium stopping under aggregated discounting.
//!
//! A single agent holds a whole population of exponential discount rates,
//! aggregated through a concave attitude function applied to each rate's
//! discounted payoff before averaging. The induced stopping problem is
//! time-inconsistent; this crate computes the intra-personal equilibria
//! (barrier policies fixed under the policy-improvement map), the smallest
//! equilibrium threshold, and the pointwise-optimal barrier diagnostics.
//!
//! Layout:
//! - [`diffusion`]: fundamental solutions and hitting/exit transforms of the
//!   state process (GBM, Bessel, generic scalar diffusions).
//! - [`preference`]: discount-rate laws and attitude functions.
//! - [`valuation`]: the aggregated value of a barrier policy from a state.
//! - [`equilibrium`]: the improvement map, fixed-point iteration, threshold
//!   solvers and verdicts.
//! - [`mc`]: Monte Carlo estimators used as an independent cross-check.
//!
//! The numeric kernels are generic over the scalar type via [`scalar::Real`];
//! `f64` aliases are exported at the crate root.

pub mod config;
pub mod diffusion;
pub mod equilibrium;
pub mod error;
pub mod examples;
pub mod mc;
pub mod preference;
pub mod quad;
pub mod roots;
pub mod scalar;
pub mod special;
pub mod valuation;

pub use error::{Result, SolverError};

/// Default scalar used by the binary and the Monte Carlo layer.
pub type Scalar = f64;
pub type Diffusion = diffusion::DiffusionSpec<Scalar>;
