//! Conservative finite-volume solver for the mean-field transport equation.
//!
//! The equation is advanced in flux form `d rho/dt + d(rho U)/dx = 0` with
//! donor-cell upwind fluxes and no-flux boundaries, so total mass telescopes
//! exactly and cell averages stay nonnegative whenever the step satisfies
//! the outflow CFL condition. The step-size bound uses the per-cell outflow
//! sum rather than `max |U|`: the sum is what positivity actually requires,
//! and it dominates `max |U|`, so the conventional condition is implied.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::meanfield::grid::{GridDensity, BOUNDARY_MASS_LIMIT};
use crate::meanfield::residual::{half_kernel_table, stein_l2_with, stein_load};
use crate::meanfield::velocity::{grid_velocity_with, GridKernelTables};
use crate::metrics::kl_grid;
use crate::potentials::{Potential, TargetDensity};

/// Smallest adaptive step before the run is abandoned.
pub const DT_FLOOR: f64 = 1e-12;

/// Step-size control for the finite-volume solver.
#[derive(Clone, Copy, Debug)]
pub struct FvOptions {
    /// Fraction of the positivity-preserving step actually taken.
    pub cfl: f64,
    /// Fixed step size; `None` selects adaptive stepping from the CFL bound.
    pub dt: Option<f64>,
    /// Upper cap on adaptive steps, so near-stationary runs keep resolving
    /// the entropy decay in time.
    pub dt_max: f64,
    /// Steps between observations.
    pub cadence: u64,
}

impl Default for FvOptions {
    fn default() -> Self {
        Self {
            cfl: 0.9,
            dt: None,
            dt_max: 0.05,
            cadence: 1,
        }
    }
}

/// One observation along a finite-volume run.
#[derive(Clone, Copy, Debug)]
pub struct FvObservation {
    pub time: f64,
    /// Step size of the most recent step (0 at the initial observation).
    pub dt: f64,
    pub mass: f64,
    pub boundary_mass: f64,
    /// Relative entropy to the invariant density; `NaN` when the potential
    /// admits none (zero potential).
    pub kl: f64,
    /// Squared Stein residual, the entropy dissipation rate.
    pub dissipation: f64,
    pub l1_v: f64,
    pub w11_v: f64,
}

/// Final density plus the observation series.
#[derive(Clone, Debug)]
pub struct FvOutput {
    pub density: GridDensity,
    pub observations: Vec<FvObservation>,
    pub steps: u64,
    pub min_dt: f64,
}

/// Largest positivity-preserving step for the given face velocities:
/// `cfl * h / max_i(outflow_i)`.
fn allowed_dt(faces: &[f64], h: f64, cfl: f64) -> f64 {
    let m = faces.len() - 1;
    let mut s_max = 0.0f64;
    for i in 0..m {
        let out = faces[i + 1].max(0.0) + (-faces[i]).max(0.0);
        s_max = s_max.max(out);
    }
    if s_max == 0.0 {
        f64::INFINITY
    } else {
        cfl * h / s_max
    }
}

fn upwind_update(rho: &GridDensity, faces: &[f64], dt: f64) -> GridDensity {
    let m = rho.cells();
    let h = rho.h();
    let v = rho.values();
    // Donor-cell fluxes; boundary faces carry none.
    let mut flux = vec![0.0; m + 1];
    for f in 1..m {
        flux[f] = if faces[f] >= 0.0 {
            faces[f] * v[f - 1]
        } else {
            faces[f] * v[f]
        };
    }
    let mut next = vec![0.0; m];
    let r = dt / h;
    for i in 0..m {
        next[i] = v[i] - r * (flux[i + 1] - flux[i]);
    }
    GridDensity::unchecked(rho.half_width(), next, rho.time() + dt)
}

/// One upwind step of the given size.
pub fn fv_step(
    rho: &GridDensity,
    kernel: &Kernel,
    potential: &Potential,
    dt: f64,
) -> Result<GridDensity> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {dt}")));
    }
    let tables = GridKernelTables::new(kernel, rho.h(), rho.cells());
    let field = grid_velocity_with(rho, kernel, potential, &tables, false, true);
    let faces = field.face_values.as_ref().expect("faces requested");
    let max_dt = allowed_dt(faces, rho.h(), 0.9);
    if dt > max_dt {
        return Err(Error::StepRejected { max_dt });
    }
    Ok(upwind_update(rho, faces, dt))
}

/// Advances `rho0` to `t_final`, observing the initial state, every
/// `cadence`-th step, and the final state.
pub fn fv_solve(
    rho0: &GridDensity,
    kernel: &Kernel,
    potential: &Potential,
    t_final: f64,
    options: FvOptions,
    observer: &mut dyn FnMut(&FvObservation, &GridDensity),
) -> Result<FvOutput> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon {t_final}")));
    }
    if options.cadence == 0 {
        return Err(Error::InvalidParameter(
            "observer cadence must be at least 1 step".into(),
        ));
    }
    if kernel.dim() != 1 || potential.dim() != 1 {
        return Err(Error::InvalidInput(
            "the grid solver is one-dimensional".into(),
        ));
    }
    let m = rho0.cells();
    let h = rho0.h();
    let tables = GridKernelTables::new(kernel, h, m);
    let half_table = half_kernel_table(kernel, h, m)?;
    // The invariant density exists for confining potentials only; without it
    // the entropy diagnostics are reported as NaN.
    let target = TargetDensity::new(potential, rho0.half_width(), m).ok();

    let mut rho = rho0.clone();
    let mut observations = Vec::new();
    let mut steps = 0u64;
    let mut min_dt = f64::INFINITY;

    let mut observe = |rho: &GridDensity,
                       dt: f64,
                       observations: &mut Vec<FvObservation>|
     -> Result<()> {
        let kl = match &target {
            Some(t) => kl_grid(rho, &t.into())?,
            None => f64::NAN,
        };
        let load = stein_load(rho, potential);
        let stein = stein_l2_with(rho, &load, &half_table);
        let monitor = rho.norm_monitor(potential);
        let o = FvObservation {
            time: rho.time(),
            dt,
            mass: rho.mass(),
            boundary_mass: rho.boundary_mass(),
            kl,
            dissipation: stein * stein,
            l1_v: monitor.l1_v,
            w11_v: monitor.w11_v,
        };
        observer(&o, rho);
        observations.push(o);
        Ok(())
    };
    observe(&rho, 0.0, &mut observations)?;

    while rho.time() < t_final - 1e-12 {
        let field = grid_velocity_with(&rho, kernel, potential, &tables, false, true);
        let faces = field.face_values.as_ref().expect("faces requested");
        let max_dt = allowed_dt(faces, h, options.cfl);
        let dt = match options.dt {
            Some(fixed) => {
                if fixed > max_dt {
                    return Err(Error::StepRejected { max_dt });
                }
                fixed.min(t_final - rho.time())
            }
            None => max_dt.min(options.dt_max).min(t_final - rho.time()),
        };
        if dt < DT_FLOOR {
            return Err(Error::DtUnderflow {
                dt,
                floor: DT_FLOOR,
            });
        }
        rho = upwind_update(&rho, faces, dt);
        steps += 1;
        min_dt = min_dt.min(dt);
        if rho.boundary_mass() > BOUNDARY_MASS_LIMIT {
            return Err(Error::Truncation {
                boundary: rho.boundary_mass(),
                limit: BOUNDARY_MASS_LIMIT,
            });
        }
        let done = rho.time() >= t_final - 1e-12;
        if steps % options.cadence == 0 || done {
            observe(&rho, dt, &mut observations)?;
        }
    }
    Ok(FvOutput {
        density: rho,
        observations,
        steps,
        min_dt,
    })
}
