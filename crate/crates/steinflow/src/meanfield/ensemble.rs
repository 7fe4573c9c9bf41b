//! Characteristic solver: the mean-field equation along its own flow.
//!
//! A weighted ensemble carries quadrature nodes of the initial density with
//! fixed weights; the pushforward of that quadrature under the flow solves
//! the equation in the weak sense, and the density along each trajectory is
//! recovered from the accumulated Jacobian, `rho_t(X_k) = rho_0(x_k) / J_k`.
//! Positions and log-Jacobians are advanced together by the four-stage
//! scheme, with `d(log J)/dt = (div U)(X)` closing the system.
//!
//! With equal weights the ensemble is literally an `N`-particle state, which
//! is what makes the particle system an exact special case of this solver.

use crate::error::{Error, Result};
use crate::init::InitialDensity;
use crate::kernels::Kernel;
use crate::meanfield::grid::GridDensity;
use crate::meanfield::velocity::{ensemble_velocity, DensitySource};
use crate::metrics::EmpiricalMeasure;
use crate::particles::BLOWUP_THRESHOLD;
use crate::potentials::Potential;

/// Quadrature nodes, fixed weights, and per-node Jacobian state.
#[derive(Clone, Debug)]
pub struct WeightedEnsemble {
    points: Vec<f64>,
    weights: Vec<f64>,
    log_jacobians: Vec<f64>,
    initial_densities: Vec<f64>,
    time: f64,
}

impl WeightedEnsemble {
    pub fn new(points: Vec<f64>, weights: Vec<f64>, initial_densities: Vec<f64>) -> Result<Self> {
        if points.is_empty()
            || points.len() != weights.len()
            || points.len() != initial_densities.len()
        {
            return Err(Error::InvalidInput(format!(
                "ensemble fields disagree: {} points, {} weights, {} densities",
                points.len(),
                weights.len(),
                initial_densities.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite quadrature node".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        if initial_densities.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidInput(
                "initial densities must be nonnegative".into(),
            ));
        }
        let n = points.len();
        Ok(Self {
            points,
            weights: weights.iter().map(|w| w / total).collect(),
            log_jacobians: vec![0.0; n],
            initial_densities,
            time: 0.0,
        })
    }

    /// Equal-mass stratification of an analytic initial density:
    /// inverse-CDF midpoints `(k + 1/2)/m` with uniform weights.
    pub fn from_initial(init: &InitialDensity, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("empty quadrature".into()));
        }
        let points = init.quantile_points(m);
        let densities = points.iter().map(|&x| init.density(x)).collect();
        Self::new(points, vec![1.0 / m as f64; m], densities)
    }

    /// Equal-mass stratification of a grid density.
    pub fn from_grid(rho: &GridDensity, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("empty quadrature".into()));
        }
        let us: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect();
        let points = rho.quantiles(&us);
        let densities = points.iter().map(|&x| rho.value_at(x)).collect();
        Self::new(points, vec![1.0 / m as f64; m], densities)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_jacobians(&self) -> &[f64] {
        &self.log_jacobians
    }

    pub fn initial_densities(&self) -> &[f64] {
        &self.initial_densities
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `rho_t` at the current node positions: `rho_0(x_k) exp(-log J_k)`.
    pub fn reconstructed_densities(&self) -> Vec<f64> {
        self.initial_densities
            .iter()
            .zip(&self.log_jacobians)
            .map(|(r0, lj)| r0 * (-lj).exp())
            .collect()
    }

    /// The carried quadrature as a weighted empirical measure.
    pub fn to_measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::weighted(self.points.clone(), 1, self.weights.clone())
            .expect("ensemble invariants imply a valid measure")
    }
}

impl<'a> From<&'a WeightedEnsemble> for DensitySource<'a> {
    fn from(e: &'a WeightedEnsemble) -> Self {
        DensitySource::Ensemble {
            points: &e.points,
            weights: &e.weights,
        }
    }
}

/// Step control for the characteristic solver.
#[derive(Clone, Copy, Debug)]
pub struct CharacteristicOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Steps between stored snapshots.
    pub cadence: u64,
}

impl CharacteristicOptions {
    pub fn new(dt: f64, t_final: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !(t_final > 0.0 && t_final.is_finite()) || dt > t_final
        {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt <= t_final, got dt {dt}, t_final {t_final}"
            )));
        }
        Ok(Self {
            dt,
            t_final,
            cadence: u64::MAX,
        })
    }

    pub fn with_cadence(mut self, cadence: u64) -> Self {
        self.cadence = cadence.max(1);
        self
    }
}

/// Final ensemble plus snapshots at the requested cadence (always including
/// the initial and final states).
#[derive(Clone, Debug)]
pub struct CharacteristicOutput {
    pub final_ensemble: WeightedEnsemble,
    pub snapshots: Vec<WeightedEnsemble>,
}

struct Derivative {
    velocity: Vec<f64>,
    divergence: Vec<f64>,
}

fn derivative(
    points: &[f64],
    weights: &[f64],
    kernel: &Kernel,
    potential: &Potential,
) -> Result<Derivative> {
    let (velocity, divergence) = ensemble_velocity(points, weights, kernel, potential)?;
    Ok(Derivative {
        velocity,
        divergence,
    })
}

fn check_blowup(points: &[f64], time: f64) -> Result<()> {
    for (k, &x) in points.iter().enumerate() {
        if !x.is_finite() || x.abs() > BLOWUP_THRESHOLD {
            return Err(Error::NumericalBlowup {
                index: k,
                time,
                magnitude: x,
            });
        }
    }
    Ok(())
}

/// Integrates node positions and log-Jacobians to `t_final`.
pub fn characteristic_solve(
    nu: &WeightedEnsemble,
    kernel: &Kernel,
    potential: &Potential,
    options: CharacteristicOptions,
) -> Result<CharacteristicOutput> {
    check_blowup(&nu.points, nu.time)?;
    let m = nu.len();
    let mut ens = nu.clone();
    ens.time = 0.0;
    let mut snapshots = vec![ens.clone()];
    let steps = (options.t_final / options.dt - 1e-9).ceil().max(1.0) as u64;
    for s in 1..=steps {
        let dt = if s == steps {
            options.t_final - ens.time
        } else {
            options.dt
        };
        // Four-stage step on the combined state [X; log J].
        let k1 = derivative(&ens.points, &ens.weights, kernel, potential)?;
        let mut stage = ens.points.clone();
        let advance = |stage: &mut [f64], base: &[f64], d: &[f64], h: f64| {
            for i in 0..m {
                stage[i] = base[i] + h * d[i];
            }
        };
        advance(&mut stage, &ens.points, &k1.velocity, dt / 2.0);
        let k2 = derivative(&stage, &ens.weights, kernel, potential)?;
        advance(&mut stage, &ens.points, &k2.velocity, dt / 2.0);
        let k3 = derivative(&stage, &ens.weights, kernel, potential)?;
        advance(&mut stage, &ens.points, &k3.velocity, dt);
        let k4 = derivative(&stage, &ens.weights, kernel, potential)?;
        for i in 0..m {
            ens.points[i] += dt / 6.0
                * (k1.velocity[i]
                    + 2.0 * k2.velocity[i]
                    + 2.0 * k3.velocity[i]
                    + k4.velocity[i]);
            ens.log_jacobians[i] += dt / 6.0
                * (k1.divergence[i]
                    + 2.0 * k2.divergence[i]
                    + 2.0 * k3.divergence[i]
                    + k4.divergence[i]);
        }
        ens.time += dt;
        check_blowup(&ens.points, ens.time)?;
        if s % options.cadence == 0 || s == steps {
            snapshots.push(ens.clone());
        }
    }
    Ok(CharacteristicOutput {
        final_ensemble: ens,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::fv::{fv_solve, FvOptions};
    use crate::metrics::wasserstein_1d;
    use crate::potentials::TargetDensity;

    fn setup() -> (Kernel, Potential) {
        (
            Kernel::gaussian(2.0, 1).unwrap(),
            Potential::quadratic(vec![1.0], 1).unwrap(),
        )
    }

    #[test]
    fn invariant_quadrature_is_nearly_frozen() {
        let (k, v) = setup();
        // The standard normal is the invariant density for V = x^2/2.
        let init = InitialDensity::gaussian(0.0, 1.0).unwrap();
        let nu = WeightedEnsemble::from_initial(&init, 800).unwrap();
        let opts = CharacteristicOptions::new(0.02, 5.0).unwrap();
        let out = characteristic_solve(&nu, &k, &v, opts).unwrap();
        let mut max_disp = 0.0f64;
        for (a, b) in nu.points().iter().zip(out.final_ensemble.points()) {
            max_disp = max_disp.max((a - b).abs());
        }
        assert!(max_disp < 1e-3, "max displacement {max_disp}");
    }

    #[test]
    fn zero_potential_single_atom_never_moves() {
        let k = Kernel::gaussian(2.0, 1).unwrap();
        let v = Potential::zero(1);
        let nu = WeightedEnsemble::new(vec![1.5], vec![1.0], vec![1.0]).unwrap();
        let opts = CharacteristicOptions::new(0.1, 3.0).unwrap();
        let out = characteristic_solve(&nu, &k, &v, opts).unwrap();
        assert_eq!(out.final_ensemble.points()[0], 1.5);
        // The Jacobian still evolves: div U = -K''(0) > 0 at the atom.
        assert!(out.final_ensemble.log_jacobians()[0] > 0.0);
        assert_eq!(out.final_ensemble.weights(), nu.weights());
    }

    #[test]
    fn reconstruction_agrees_with_the_grid_solver() {
        let (k, v) = setup();
        let init = InitialDensity::gaussian(1.0, 0.8).unwrap();
        let nu = WeightedEnsemble::from_initial(&init, 800).unwrap();
        let char_out =
            characteristic_solve(&nu, &k, &v, CharacteristicOptions::new(0.005, 1.0).unwrap())
                .unwrap();
        let rho0 = init.grid(10.0, 1000).unwrap();
        let fv_out = fv_solve(
            &rho0,
            &k,
            &v,
            1.0,
            FvOptions {
                dt: Some(0.005),
                ..FvOptions::default()
            },
            &mut |_, _| {},
        )
        .unwrap();
        let w = wasserstein_1d(
            &char_out.final_ensemble.to_measure(),
            &fv_out.density,
            1.0,
        )
        .unwrap();
        assert!(w < 5e-3, "cross-solver W1 = {w}");
        // Push-forward densities stay positive wherever they started positive.
        for (r, r0) in char_out
            .final_ensemble
            .reconstructed_densities()
            .iter()
            .zip(nu.initial_densities())
        {
            assert!(*r0 == 0.0 || *r > 0.0);
        }
    }

    #[test]
    fn jacobians_match_the_flow_map_derivative() {
        let (k, v) = setup();
        let init = InitialDensity::gaussian(0.5, 1.0).unwrap();
        let nu = WeightedEnsemble::from_initial(&init, 400).unwrap();
        let out =
            characteristic_solve(&nu, &k, &v, CharacteristicOptions::new(0.01, 1.0).unwrap())
                .unwrap();
        let x0 = nu.points();
        let x1 = out.final_ensemble.points();
        let lj = out.final_ensemble.log_jacobians();
        // Second-order derivative on the nonuniform initial nodes; skip the
        // quantile tails where spacing degrades the stencil.
        let m = nu.len();
        for i in m / 8..7 * m / 8 {
            let hm = x0[i] - x0[i - 1];
            let hp = x0[i + 1] - x0[i];
            let fd = -x1[i - 1] * hp / (hm * (hm + hp)) + x1[i] * (hp - hm) / (hm * hp)
                + x1[i + 1] * hm / (hp * (hm + hp));
            let j = lj[i].exp();
            assert!(
                (j - fd).abs() <= 1e-4 * fd.abs().max(1.0),
                "node {i}: J {j} vs finite difference {fd}"
            );
        }
    }

    #[test]
    fn grid_stratification_reproduces_the_density() {
        let v = Potential::quadratic(vec![1.0], 1).unwrap();
        let target = TargetDensity::new(&v, 10.0, 2000).unwrap();
        let nu = WeightedEnsemble::from_grid(target.grid().unwrap(), 500).unwrap();
        let w = wasserstein_1d(&nu.to_measure(), target.grid().unwrap(), 1.0).unwrap();
        assert!(w < 5e-3, "stratification W1 = {w}");
        for d in nu.initial_densities() {
            assert!(*d > 0.0);
        }
    }

    #[test]
    fn constructor_rejects_bad_ensembles() {
        assert!(WeightedEnsemble::new(vec![], vec![], vec![]).is_err());
        assert!(WeightedEnsemble::new(vec![0.0], vec![0.5], vec![1.0]).is_err());
        assert!(WeightedEnsemble::new(vec![0.0], vec![-1.0], vec![1.0]).is_err());
        assert!(
            WeightedEnsemble::new(vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0]).is_err()
        );
    }
}
