//! The interacting particle system and its comparison dynamics.
//!
//! The primary dynamics moves `N` particles by
//!
//! `dx_i/dt = -(1/N) sum_j grad K(x_i - x_j) - (1/N) sum_j K(x_i - x_j) grad V(x_j)`
//!
//! a kernel-smoothed repulsion plus a kernel-averaged drift toward low
//! potential. Two baselines are provided: the McKean-Vlasov system, which
//! keeps the kernel repulsion but applies the drift locally
//! (`-grad V(x_i)`), and the unadjusted Langevin scheme, which replaces the
//! repulsion with Gaussian noise. The module also exposes the particle-level
//! functionals used by the growth certificates: the mean energy
//! `H_N = (1/N) sum V(x_i) + 1` and the interaction energy
//! `E = (1/N) sum_{i<j} K(x_i - x_j)`.
//!
//! All pairwise sums run in a fixed order (lexicographic over pairs), so
//! trajectories are bit-reproducible across runs on the same build.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::metrics::EmpiricalMeasure;
use crate::potentials::Potential;

/// Coordinates beyond this magnitude abort a run; the continuous dynamics
/// cannot blow up, so reaching it signals a configuration or step-size fault.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// Positions of `N` particles in `R^d`, point-major flat storage.
#[derive(Clone, Debug)]
pub struct ParticleState {
    positions: Vec<f64>,
    dim: usize,
    time: f64,
    step_count: u64,
}

impl ParticleState {
    pub fn new(positions: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || positions.is_empty() || positions.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not form points of dimension {dim}",
                positions.len()
            )));
        }
        if let Some(i) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate at flat index {i}"
            )));
        }
        Ok(Self {
            positions,
            dim,
            time: 0.0,
            step_count: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Uniform empirical measure on the current positions.
    pub fn to_measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.positions.clone(), self.dim)
            .expect("state invariants imply a valid measure")
    }
}

/// Time integration scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Literal update map of the discrete algorithm.
    ExplicitEuler,
    /// Classical four-stage scheme; used where time-discretization error
    /// must be subdominant.
    Rk4,
}

/// Scheme, step size, and horizon of one run.
#[derive(Clone, Copy, Debug)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
}

impl IntegratorSpec {
    pub fn new(scheme: Scheme, dt: f64, t_final: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size and horizon must be positive, got dt {dt}, t_final {t_final}"
            )));
        }
        if dt > t_final {
            return Err(Error::InvalidParameter(format!(
                "step size {dt} exceeds horizon {t_final}"
            )));
        }
        Ok(Self {
            scheme,
            dt,
            t_final,
        })
    }

    /// Number of steps; the last step is shortened to land exactly on the
    /// horizon when it does not divide evenly.
    pub fn steps(&self) -> u64 {
        (self.t_final / self.dt - 1e-9).ceil().max(1.0) as u64
    }
}

/// Which dynamics advances the particles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dynamics {
    Svgd,
    McKeanVlasov,
    /// Unadjusted Langevin with Gaussian increments from the given seed.
    Ula { seed: u64 },
}

fn check_dims(state: &ParticleState, kernel: &Kernel, potential: &Potential) -> Result<()> {
    if kernel.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            actual: kernel.dim(),
        });
    }
    if potential.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            actual: potential.dim(),
        });
    }
    Ok(())
}

/// Velocity of the primary dynamics at every particle, flat layout.
///
/// Pairs are visited once (`i < j`); the kernel is even and its gradient odd
/// in exact arithmetic and bit for bit, so each pair contributes exactly
/// mirrored terms to both particles.
pub fn svgd_velocity(
    state: &ParticleState,
    kernel: &Kernel,
    potential: &Potential,
) -> Result<Vec<f64>> {
    check_dims(state, kernel, potential)?;
    let n = state.n();
    let d = state.dim();
    let inv_n = 1.0 / n as f64;
    let k0 = kernel.value_sup();
    let mut out = vec![0.0; n * d];
    if d == 1 {
        let xs = state.positions();
        let grads: Vec<f64> = xs.iter().map(|&x| potential.grad_1d(x)).collect();
        for i in 0..n {
            // Self term: grad K(0) = 0, K(0) grad V(x_i).
            out[i] += k0 * grads[i];
            for j in (i + 1)..n {
                let (k, kp) = kernel.pair1(xs[i] - xs[j]);
                out[i] += kp + k * grads[j];
                out[j] += -kp + k * grads[i];
            }
        }
        for v in &mut out {
            *v = -*v * inv_n;
        }
    } else {
        let mut grads = vec![0.0; n * d];
        for i in 0..n {
            potential.gradient_into(state.point(i), &mut grads[i * d..(i + 1) * d]);
        }
        let mut dx = vec![0.0; d];
        let mut gk = vec![0.0; d];
        for i in 0..n {
            for c in 0..d {
                out[i * d + c] += k0 * grads[i * d + c];
            }
            for j in (i + 1)..n {
                for c in 0..d {
                    dx[c] = state.positions[i * d + c] - state.positions[j * d + c];
                }
                let k = kernel.value(&dx);
                kernel.gradient_into(&dx, &mut gk);
                for c in 0..d {
                    out[i * d + c] += gk[c] + k * grads[j * d + c];
                    out[j * d + c] += -gk[c] + k * grads[i * d + c];
                }
            }
        }
        for v in &mut out {
            *v = -*v * inv_n;
        }
    }
    Ok(out)
}

/// Velocity of the McKean-Vlasov comparison dynamics: kernel repulsion plus
/// the local drift `-grad V(x_i)`.
pub fn mckean_vlasov_velocity(
    state: &ParticleState,
    kernel: &Kernel,
    potential: &Potential,
) -> Result<Vec<f64>> {
    check_dims(state, kernel, potential)?;
    let n = state.n();
    let d = state.dim();
    let inv_n = 1.0 / n as f64;
    let mut out = vec![0.0; n * d];
    if d == 1 {
        let xs = state.positions();
        for i in 0..n {
            for j in (i + 1)..n {
                let (_, kp) = kernel.pair1(xs[i] - xs[j]);
                out[i] += kp;
                out[j] -= kp;
            }
        }
        for (i, v) in out.iter_mut().enumerate() {
            *v = -*v * inv_n - potential.grad_1d(xs[i]);
        }
    } else {
        let mut dx = vec![0.0; d];
        let mut gk = vec![0.0; d];
        let mut gv = vec![0.0; d];
        for i in 0..n {
            for j in (i + 1)..n {
                for c in 0..d {
                    dx[c] = state.positions[i * d + c] - state.positions[j * d + c];
                }
                kernel.gradient_into(&dx, &mut gk);
                for c in 0..d {
                    out[i * d + c] += gk[c];
                    out[j * d + c] -= gk[c];
                }
            }
        }
        for i in 0..n {
            potential.gradient_into(state.point(i), &mut gv);
            for c in 0..d {
                out[i * d + c] = -out[i * d + c] * inv_n - gv[c];
            }
        }
    }
    Ok(out)
}

/// One Euler-Maruyama step of unadjusted Langevin:
/// `x <- x - grad V(x) dt + sqrt(2 dt) xi`.
pub fn ula_step(
    state: &ParticleState,
    potential: &Potential,
    dt: f64,
    rng: &mut impl Rng,
) -> ParticleState {
    debug_assert!(dt > 0.0);
    let d = state.dim();
    let noise = (2.0 * dt).sqrt();
    let mut positions = state.positions.clone();
    let mut gv = vec![0.0; d];
    for i in 0..state.n() {
        potential.gradient_into(state.point(i), &mut gv);
        for c in 0..d {
            let xi: f64 = StandardNormal.sample(rng);
            positions[i * d + c] += -gv[c] * dt + noise * xi;
        }
    }
    ParticleState {
        positions,
        dim: d,
        time: state.time + dt,
        step_count: state.step_count + 1,
    }
}

fn check_velocity(state: &ParticleState, v: &[f64]) -> Result<()> {
    if let Some(flat) = v.iter().position(|t| !t.is_finite()) {
        return Err(Error::NumericalBlowup {
            index: flat / state.dim(),
            time: state.time,
            magnitude: v[flat],
        });
    }
    Ok(())
}

/// One deterministic step of `dx/dt = velocity(x)` with the given scheme.
pub fn step(
    state: &ParticleState,
    velocity_fn: &mut dyn FnMut(&ParticleState) -> Result<Vec<f64>>,
    dt: f64,
    scheme: Scheme,
) -> Result<ParticleState> {
    let n_coords = state.positions.len();
    let advance = |base: &ParticleState, v: &[f64], h: f64| -> ParticleState {
        let mut positions = base.positions.clone();
        for (p, vi) in positions.iter_mut().zip(v) {
            *p += h * vi;
        }
        ParticleState {
            positions,
            dim: base.dim,
            time: base.time,
            step_count: base.step_count,
        }
    };
    let mut next = match scheme {
        Scheme::ExplicitEuler => {
            let v = velocity_fn(state)?;
            check_velocity(state, &v)?;
            advance(state, &v, dt)
        }
        Scheme::Rk4 => {
            let k1 = velocity_fn(state)?;
            check_velocity(state, &k1)?;
            let s2 = advance(state, &k1, dt / 2.0);
            let k2 = velocity_fn(&s2)?;
            check_velocity(state, &k2)?;
            let s3 = advance(state, &k2, dt / 2.0);
            let k3 = velocity_fn(&s3)?;
            check_velocity(state, &k3)?;
            let s4 = advance(state, &k3, dt);
            let k4 = velocity_fn(&s4)?;
            check_velocity(state, &k4)?;
            let mut positions = state.positions.clone();
            for i in 0..n_coords {
                positions[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            ParticleState {
                positions,
                dim: state.dim,
                time: state.time,
                step_count: state.step_count,
            }
        }
    };
    next.time = state.time + dt;
    next.step_count = state.step_count + 1;
    Ok(next)
}

/// `H_N = (1/N) sum V(x_i) + 1`; always at least 1.
pub fn h_n(state: &ParticleState, potential: &Potential) -> f64 {
    let n = state.n();
    let mut acc = 0.0;
    for i in 0..n {
        acc += potential.value(state.point(i));
    }
    acc / n as f64 + 1.0
}

/// Interaction energy `E = (1/N) sum_{i<j} K(x_i - x_j)`.
///
/// For `N < 2` the pair sum is empty and the value is 0 by convention.
pub fn interaction_energy(state: &ParticleState, kernel: &Kernel) -> f64 {
    let n = state.n();
    if n < 2 {
        return 0.0;
    }
    let d = state.dim();
    let mut acc = 0.0;
    if d == 1 {
        let xs = state.positions();
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = xs[i] - xs[j];
                acc += kernel.value_r2(dx * dx);
            }
        }
    } else {
        let mut dx = vec![0.0; d];
        for i in 0..n {
            for j in (i + 1)..n {
                for c in 0..d {
                    dx[c] = state.positions[i * d + c] - state.positions[j * d + c];
                }
                acc += kernel.value(&dx);
            }
        }
    }
    acc / n as f64
}

/// Kernel quadratic form `sum_ij K(x_i - x_j) g_i . g_j` for per-particle
/// vectors `g_i` (flat layout). PSD by the kernel assumption.
pub fn kernel_quadratic_form(state: &ParticleState, kernel: &Kernel, g: &[f64]) -> Result<f64> {
    let n = state.n();
    let d = state.dim();
    if g.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            actual: g.len(),
        });
    }
    let mut acc = 0.0;
    let k0 = kernel.value_sup();
    if d == 1 {
        let xs = state.positions();
        for i in 0..n {
            acc += k0 * g[i] * g[i];
            for j in (i + 1)..n {
                let dx = xs[i] - xs[j];
                acc += 2.0 * kernel.value_r2(dx * dx) * (g[i] * g[j]);
            }
        }
    } else {
        let mut dx = vec![0.0; d];
        for i in 0..n {
            let mut dot = 0.0;
            for c in 0..d {
                dot += g[i * d + c] * g[i * d + c];
            }
            acc += k0 * dot;
            for j in (i + 1)..n {
                for c in 0..d {
                    dx[c] = state.positions[i * d + c] - state.positions[j * d + c];
                }
                let mut dot = 0.0;
                for c in 0..d {
                    dot += g[i * d + c] * g[j * d + c];
                }
                acc += 2.0 * kernel.value(&dx) * dot;
            }
        }
    }
    Ok(acc)
}

/// Growth-rate constant of the mean-energy certificate:
/// `|dH/dt| <= gradient_sup(K) * C_V^{1/q} * H` along the primary dynamics.
pub fn drift_growth_constant(kernel: &Kernel, potential: &Potential) -> f64 {
    kernel.gradient_sup() * potential.c_v().powf(1.0 / potential.assumption_index())
}

/// Largest admissible single-step increase of `H_N` from `state` under
/// explicit Euler with the given velocities:
/// first-order term `dt C H` plus the exact Taylor remainder
/// `(dt^2/2) (1/N) sum_i sup|D^2 V| |v_i|^2` along each segment.
pub fn per_step_energy_bound(
    state: &ParticleState,
    velocities: &[f64],
    dt: f64,
    kernel: &Kernel,
    potential: &Potential,
) -> f64 {
    let n = state.n();
    let d = state.dim();
    let h = h_n(state, potential);
    let c = drift_growth_constant(kernel, potential);
    let mut remainder = 0.0;
    let mut end = vec![0.0; d];
    for i in 0..n {
        let x = state.point(i);
        let v = &velocities[i * d..(i + 1) * d];
        let mut speed2 = 0.0;
        for c in 0..d {
            end[c] = x[c] + dt * v[c];
            speed2 += v[c] * v[c];
        }
        remainder += potential.hessian_sup_on_segment(x, &end) * speed2;
    }
    remainder /= n as f64;
    dt * c * h + 0.5 * dt * dt * remainder
}

/// One observation along a trajectory.
#[derive(Clone, Debug)]
pub struct Observation {
    pub time: f64,
    pub step: u64,
    /// Snapshot of all positions, flat layout.
    pub positions: Vec<f64>,
    /// `H_N`.
    pub h_n: f64,
    /// Interaction energy `E`.
    pub interaction_energy: f64,
    /// Squared Stein discrepancy of the empirical measure.
    pub ksd2: f64,
    /// `sum_ij K(x_i - x_j) grad V(x_i) . grad V(x_j)`, the dissipation
    /// quadratic form (unnormalized).
    pub drift_quadratic_form: f64,
}

/// Final state plus the observation series.
#[derive(Clone, Debug)]
pub struct TrajectorySummary {
    pub final_state: ParticleState,
    pub observations: Vec<Observation>,
}

fn observe(
    state: &ParticleState,
    kernel: &Kernel,
    potential: &Potential,
) -> Result<Observation> {
    let n = state.n();
    let d = state.dim();
    let mut grads = vec![0.0; n * d];
    for i in 0..n {
        potential.gradient_into(state.point(i), &mut grads[i * d..(i + 1) * d]);
    }
    let q = kernel_quadratic_form(state, kernel, &grads)?;
    let ksd2 = crate::metrics::ksd(&state.to_measure(), kernel, potential)?;
    Ok(Observation {
        time: state.time,
        step: state.step_count,
        positions: state.positions.clone(),
        h_n: h_n(state, potential),
        interaction_energy: interaction_energy(state, kernel),
        ksd2,
        drift_quadratic_form: q,
    })
}

fn check_blowup(state: &ParticleState) -> Result<()> {
    let d = state.dim();
    for (flat, &x) in state.positions.iter().enumerate() {
        if !x.is_finite() || x.abs() > BLOWUP_THRESHOLD {
            return Err(Error::NumericalBlowup {
                index: flat / d,
                time: state.time,
                magnitude: x,
            });
        }
    }
    Ok(())
}

/// Runs one trajectory to `spec.t_final`, observing the initial state, every
/// `cadence`-th step, and the final state.
///
/// Observations are pushed into the returned summary and also handed to
/// `observer` as they occur, so partial diagnostics survive a blowup abort.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    initial: &ParticleState,
    dynamics: Dynamics,
    kernel: &Kernel,
    potential: &Potential,
    spec: IntegratorSpec,
    cadence: u64,
    observer: &mut dyn FnMut(&Observation),
) -> Result<TrajectorySummary> {
    if cadence == 0 {
        return Err(Error::InvalidParameter(
            "observer cadence must be at least 1 step".into(),
        ));
    }
    check_dims(initial, kernel, potential)?;
    check_blowup(initial)?;
    let mut state = initial.clone();
    state.time = 0.0;
    state.step_count = 0;
    let steps = spec.steps();
    let mut observations = Vec::new();
    let mut push = |state: &ParticleState, obs: &mut Vec<Observation>| -> Result<()> {
        let o = observe(state, kernel, potential)?;
        observer(&o);
        obs.push(o);
        Ok(())
    };
    push(&state, &mut observations)?;
    let mut rng = match dynamics {
        Dynamics::Ula { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    for s in 1..=steps {
        // Land exactly on the horizon.
        let dt = if s == steps {
            spec.t_final - state.time
        } else {
            spec.dt
        };
        state = match dynamics {
            Dynamics::Svgd => step(
                &state,
                &mut |st| svgd_velocity(st, kernel, potential),
                dt,
                spec.scheme,
            )?,
            Dynamics::McKeanVlasov => step(
                &state,
                &mut |st| mckean_vlasov_velocity(st, kernel, potential),
                dt,
                spec.scheme,
            )?,
            Dynamics::Ula { .. } => {
                ula_step(&state, potential, dt, rng.as_mut().expect("seeded above"))
            }
        };
        check_blowup(&state)?;
        if s % cadence == 0 || s == steps {
            push(&state, &mut observations)?;
        }
    }
    Ok(TrajectorySummary {
        final_state: state,
        observations,
    })
}

/// Outcome of scanning the dissipation quadratic form along a trajectory.
#[derive(Clone, Copy, Debug)]
pub struct DissipationReport {
    /// Minimum of the quadratic form over all observations.
    pub min_value: f64,
    /// Largest magnitude seen; tolerance scale.
    pub scale: f64,
    /// `min_value >= -1e-10 * scale`.
    pub nonnegative: bool,
}

/// Checks that the dissipation quadratic form stayed nonnegative (up to
/// roundoff) along a run; it is a PSD kernel form, so a genuine negative
/// value would falsify the kernel assumption or the implementation.
pub fn ksd_dissipation_check(observations: &[Observation]) -> DissipationReport {
    let mut min_value = f64::INFINITY;
    let mut scale = 0.0f64;
    for o in observations {
        min_value = min_value.min(o.drift_quadratic_form);
        scale = scale.max(o.drift_quadratic_form.abs());
    }
    if observations.is_empty() {
        min_value = 0.0;
    }
    let scale = scale.max(1.0);
    DissipationReport {
        min_value,
        scale,
        nonnegative: min_value >= -1e-10 * scale,
    }
}
