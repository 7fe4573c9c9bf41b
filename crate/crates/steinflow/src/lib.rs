//! steinflow: a numerical laboratory for Stein variational gradient flows.
//!
//! The crate implements the deterministic interacting-particle system
//!
//! ```text
//! dx_i/dt = -(1/N) sum_j grad K(x_i - x_j)
//!           -(1/N) sum_j K(x_i - x_j) grad V(x_j),
//! ```
//!
//! its mean-field limit
//!
//! ```text
//! d rho/dt = div( rho * ( K * (grad rho + rho grad V) ) ),
//! ```
//!
//! and the diagnostics needed to study both at desk scale: the invariant
//! density `exp(-V)/Z`, kernelized KL dissipation, Stein discrepancies,
//! one-dimensional Wasserstein distances, and growth certificates for the
//! mean potential energy of the particle system.
//!
//! Module map:
//!
//! - [`kernels`]: Gaussian interaction kernels, Gram matrices, PSD checks.
//! - [`potentials`]: confining potentials, target densities, assumption audits.
//! - [`init`]: initial densities with quantile and i.i.d. samplers.
//! - [`particles`]: particle states, velocity fields, time integrators.
//! - [`meanfield`]: grid densities, finite-volume and characteristic solvers,
//!   Picard fixed-point construction of the flow map, residual monitors.
//! - [`metrics`]: Wasserstein, KL, kernelized Stein discrepancy, moment norms.
//! - [`experiments`]: the six canned studies with pass/fail criteria.
//! - [`config`] / [`output`]: flat-file run configuration and CSV/manifest output.

pub mod concurrency;
pub mod config;
mod error;
pub mod experiments;
pub mod init;
pub mod kernels;
pub mod meanfield;
pub mod metrics;
pub mod output;
pub mod particles;
pub mod potentials;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, ExperimentName, ExperimentReport};
pub use init::InitialDensity;
pub use kernels::{Kernel, KernelEval, KernelFamily, PsdReport};
pub use meanfield::GridDensity;
pub use metrics::EmpiricalMeasure;
pub use particles::{
    integrate, Dynamics, IntegratorSpec, Observation, ParticleState, Scheme, TrajectorySummary,
};
pub use potentials::{Potential, PotentialEval, PotentialFamily, TargetDensity};
