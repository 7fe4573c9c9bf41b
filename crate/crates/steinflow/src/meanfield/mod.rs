//! Deterministic solvers for the mean-field transport equation
//! `d rho / dt = div( rho * (K * (grad rho + rho grad V)) )` in one dimension,
//! plus the grid types and stationarity diagnostics they share.

pub mod ensemble;
pub mod fv;
pub mod grid;
pub mod picard;
pub mod residual;
pub mod velocity;

pub use ensemble::{
    characteristic_solve, CharacteristicOptions, CharacteristicOutput, WeightedEnsemble,
};
pub use fv::{fv_solve, fv_step, FvObservation, FvOptions, FvOutput};
pub use picard::{contraction_horizon, picard_flow_map, PicardOptions, PicardOutput};
pub use grid::{GridDensity, NormMonitor, BOUNDARY_MASS_LIMIT, MASS_TOLERANCE};
pub use residual::{
    dissipation, mv_flux_norm, stationarity_residual, stein_l2, StationarityResidual,
};
pub use velocity::{
    ensemble_velocity, ensemble_velocity_at, velocity_field, DensitySource, VelocityField,
};
