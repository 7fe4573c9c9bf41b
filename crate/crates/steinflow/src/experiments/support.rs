//! Shared plumbing for the experiment drivers: snapshot capture for both the
//! grid solver and the particle system, aligned on a common set of times.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::meanfield::fv::{fv_solve, FvOptions};
use crate::meanfield::grid::GridDensity;
use crate::particles::{step, Dynamics, ParticleState, Scheme};
use crate::potentials::Potential;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Converts snapshot times to step indices under a fixed step size.
///
/// Every requested time must be an integer multiple of `dt`; the drivers pick
/// their step sizes so that this holds exactly.
fn step_targets(dt: f64, times: &[f64]) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let steps = (t / dt).round();
        if ((steps * dt) - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "snapshot time {t} is not a multiple of dt = {dt}"
            )));
        }
        out.push(steps as u64);
    }
    if out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "snapshot times must be strictly increasing".into(),
        ));
    }
    Ok(out)
}

/// Runs the finite-volume solver with a fixed step and returns density
/// snapshots at the requested times (strictly increasing, multiples of `dt`).
pub(crate) fn fv_snapshots(
    rho0: &GridDensity,
    kernel: &Kernel,
    potential: &Potential,
    dt: f64,
    times: &[f64],
) -> Result<Vec<GridDensity>> {
    let targets = step_targets(dt, times)?;
    let cadence = targets.iter().fold(targets[0], |acc, &s| gcd(acc, s));
    let t_final = *times.last().expect("times checked nonempty");
    let options = FvOptions {
        dt: Some(dt),
        cadence: cadence.max(1),
        ..FvOptions::default()
    };
    let mut captured: Vec<Option<GridDensity>> = vec![None; times.len()];
    {
        let mut observe = |_: &crate::meanfield::fv::FvObservation, rho: &GridDensity| {
            for (slot, &t) in captured.iter_mut().zip(times) {
                if slot.is_none() && (rho.time() - t).abs() < 0.5 * dt {
                    *slot = Some(rho.clone());
                }
            }
        };
        fv_solve(rho0, kernel, potential, t_final, options, &mut observe)?;
    }
    captured
        .into_iter()
        .zip(times)
        .map(|(slot, &t)| {
            slot.ok_or_else(|| {
                Error::InvalidParameter(format!("solver never observed requested time {t}"))
            })
        })
        .collect()
}

/// Steps a deterministic particle system with a fixed step size and returns
/// position snapshots at the requested times. The step count is exact, so the
/// snapshots land on the targets without clamping.
pub(crate) fn particle_snapshots(
    initial: &ParticleState,
    dynamics: Dynamics,
    kernel: &Kernel,
    potential: &Potential,
    scheme: Scheme,
    dt: f64,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let targets = step_targets(dt, times)?;
    let mut velocity = |s: &ParticleState| -> Result<Vec<f64>> {
        match dynamics {
            Dynamics::Svgd => crate::particles::svgd_velocity(s, kernel, potential),
            Dynamics::McKeanVlasov => {
                crate::particles::mckean_vlasov_velocity(s, kernel, potential)
            }
            Dynamics::Ula { .. } => Err(Error::InvalidParameter(
                "snapshot helper only supports deterministic dynamics".into(),
            )),
        }
    };
    let mut state = initial.clone();
    let mut out = Vec::with_capacity(times.len());
    let last = *targets.last().expect("targets checked nonempty");
    for step_index in 1..=last {
        state = step(&state, &mut velocity, dt, scheme)?;
        if targets.contains(&step_index) {
            out.push(state.positions().to_vec());
        }
    }
    Ok(out)
}
