//! Randomised one-step time integrators for linear evolution equations in
//! spectral form, with tools to measure and bound their strong errors.
//!
//! A randomised method perturbs a deterministic one-step map `ψ` by additive
//! noise, `U_{k+1} = ψ(h_k, t_k, U_k) + ξ_k(h_k)`. Errors are measured
//! against closed-form exact flows, so observed convergence rates can be
//! compared with the theoretical ones without a reference solver.

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bayes;
pub mod checks;
pub mod cli;
pub mod error;
pub mod integrators;
pub mod problems;
mod quadrature;
pub mod randomisation;
pub mod sampler;
pub mod spaces;
pub mod time_grid;

pub use error::{Error, Result};
pub use integrators::{MethodConfig, MethodKind};
pub use problems::{Problem, Quadratic, TimeScaling};
pub use randomisation::{NoiseKind, NoiseModel};
pub use sampler::{Ensemble, EnsembleSummary, Simulation, Trajectory};
pub use spaces::{NormKind, SpaceDescriptor, SpectralVector};
pub use time_grid::TimeGrid;
