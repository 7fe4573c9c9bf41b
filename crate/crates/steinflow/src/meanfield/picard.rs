//! Fixed-point construction of the mean-field flow map.
//!
//! On a short horizon the map
//!
//! `F(u)(t, x_k) = x_k + int_0^t U[u(s, .)_# nu](u(s, x_k)) ds`
//!
//! is a contraction, and its fixed point is the characteristic flow. The
//! iteration exists to exhibit that contraction numerically: the direct
//! integrator is the production path, and the two must agree at the fixed
//! point. Time integrals use the composite trapezoid rule on a uniform mesh.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::meanfield::ensemble::WeightedEnsemble;
use crate::meanfield::velocity::ensemble_velocity_values;
use crate::potentials::Potential;

/// Mesh, tolerance, and iteration cap for the fixed-point solve.
#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    /// Time-mesh intervals on `[0, t0]`.
    pub mesh: usize,
    /// Sup-norm distance between successive iterates at which to stop.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            mesh: 512,
            tol: 1e-6,
            max_iters: 60,
        }
    }
}

/// Flow-map samples and the observed contraction history.
#[derive(Clone, Debug)]
pub struct PicardOutput {
    /// Time-mesh nodes, `mesh + 1` of them.
    pub times: Vec<f64>,
    /// Flow map on the mesh, node-major: `positions[i * m + k] = X(t_i, x_k)`.
    pub positions: Vec<f64>,
    /// Sup distances between successive iterates.
    pub distances: Vec<f64>,
    /// `distances[i] / distances[i - 1]`.
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PicardOutput {
    /// Flow-map samples at mesh node `i`.
    pub fn at_node(&self, i: usize) -> &[f64] {
        let m = self.positions.len() / self.times.len();
        &self.positions[i * m..(i + 1) * m]
    }
}

/// A horizon below which the fixed-point map is expected to contract,
/// from the kernel sup norms and the drift-domination constants:
/// `1 / (2 |K|_{2,inf} (1 + C_V^{1/q} (1 + 2 |nu|_{P_V})))`.
pub fn contraction_horizon(nu: &WeightedEnsemble, kernel: &Kernel, potential: &Potential) -> f64 {
    let k2 = kernel
        .value_sup()
        .max(kernel.gradient_sup())
        .max(kernel.hessian_sup());
    let c = potential
        .c_v()
        .powf(1.0 / potential.assumption_index());
    let mut pv = 0.0;
    for (x, w) in nu.points().iter().zip(nu.weights()) {
        pv += w * (1.0 + potential.value_1d(*x));
    }
    1.0 / (2.0 * k2 * (1.0 + c * (1.0 + 2.0 * pv)))
}

/// Iterates `u <- F(u)` from the frozen initial map `u(t, x) = x` until the
/// sup distance between iterates drops below `tol`.
pub fn picard_flow_map(
    nu: &WeightedEnsemble,
    kernel: &Kernel,
    potential: &Potential,
    t0: f64,
    options: PicardOptions,
) -> Result<PicardOutput> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon {t0}")));
    }
    if options.mesh < 2 || options.tol <= 0.0 || options.max_iters == 0 {
        return Err(Error::InvalidParameter(format!(
            "mesh {}, tol {}, max_iters {}",
            options.mesh, options.tol, options.max_iters
        )));
    }
    let m = nu.len();
    let nodes = options.mesh + 1;
    let dt = t0 / options.mesh as f64;
    let times: Vec<f64> = (0..nodes).map(|i| i as f64 * dt).collect();
    // u[i * m + k] = current iterate of X(t_i, x_k); start from the identity.
    let mut u = vec![0.0; nodes * m];
    for i in 0..nodes {
        u[i * m..(i + 1) * m].copy_from_slice(nu.points());
    }
    let mut velocity = vec![0.0; nodes * m];
    let mut next = vec![0.0; nodes * m];
    let mut distances = Vec::new();
    let mut ratios = Vec::new();
    let mut stall = 0;
    for iter in 1..=options.max_iters {
        // Velocity of each time slice under the transported quadrature.
        for i in 0..nodes {
            ensemble_velocity_values(
                &u[i * m..(i + 1) * m],
                nu.weights(),
                kernel,
                potential,
                &mut velocity[i * m..(i + 1) * m],
            );
        }
        // Cumulative trapezoid in time, then the fixed-point update.
        next[..m].copy_from_slice(nu.points());
        for i in 1..nodes {
            for k in 0..m {
                let integral = next[(i - 1) * m + k] - nu.points()[k]
                    + 0.5 * dt * (velocity[(i - 1) * m + k] + velocity[i * m + k]);
                next[i * m + k] = nu.points()[k] + integral;
            }
        }
        let mut dist = 0.0f64;
        for (a, b) in next.iter().zip(&u) {
            dist = dist.max((a - b).abs());
        }
        if let Some(&prev) = distances.last() {
            let ratio = dist / prev;
            ratios.push(ratio);
            stall = if ratio >= 1.0 { stall + 1 } else { 0 };
            if stall >= 3 {
                return Err(Error::NonContractive { suggested: t0 / 2.0 });
            }
        }
        distances.push(dist);
        std::mem::swap(&mut u, &mut next);
        if dist < options.tol {
            return Ok(PicardOutput {
                times,
                positions: u,
                distances,
                ratios,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(PicardOutput {
        times,
        positions: u,
        distances,
        ratios,
        iterations: options.max_iters,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::InitialDensity;
    use crate::meanfield::ensemble::{characteristic_solve, CharacteristicOptions};
    use crate::meanfield::velocity::ensemble_velocity;

    fn setup() -> (Kernel, Potential) {
        (
            Kernel::gaussian(2.0, 1).unwrap(),
            Potential::quadratic(vec![1.0], 1).unwrap(),
        )
    }

    fn quadrature(m: usize) -> WeightedEnsemble {
        let init = InitialDensity::gaussian(0.8, 0.9).unwrap();
        WeightedEnsemble::from_initial(&init, m).unwrap()
    }

    #[test]
    fn iterates_contract_geometrically() {
        let (k, v) = setup();
        let nu = quadrature(200);
        let t0 = contraction_horizon(&nu, &k, &v);
        let out = picard_flow_map(&nu, &k, &v, t0, PicardOptions::default()).unwrap();
        assert!(out.converged, "no convergence in {} iters", out.iterations);
        assert!(!out.ratios.is_empty());
        for (i, r) in out.ratios.iter().enumerate() {
            assert!(*r < 1.0, "ratio {r} at iteration {}", i + 1);
        }
    }

    #[test]
    fn first_iterate_is_the_frozen_velocity_integral() {
        let (k, v) = setup();
        let nu = quadrature(60);
        let opts = PicardOptions {
            max_iters: 1,
            tol: 1e-300,
            ..PicardOptions::default()
        };
        let out = picard_flow_map(&nu, &k, &v, 0.2, opts).unwrap();
        let (vel0, _) = ensemble_velocity(nu.points(), nu.weights(), &k, &v).unwrap();
        for (i, &t) in out.times.iter().enumerate() {
            let slice = out.at_node(i);
            for (kk, x) in slice.iter().enumerate() {
                let expect = nu.points()[kk] + t * vel0[kk];
                assert!(
                    (x - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
                    "node {i}, point {kk}: {x} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn fixed_point_matches_the_direct_integrator() {
        let (k, v) = setup();
        let nu = quadrature(200);
        let t0 = 0.25;
        let opts = PicardOptions::default();
        let out = picard_flow_map(&nu, &k, &v, t0, opts).unwrap();
        assert!(out.converged);
        let direct =
            characteristic_solve(&nu, &k, &v, CharacteristicOptions::new(1e-3, t0).unwrap())
                .unwrap();
        let last = out.at_node(out.times.len() - 1);
        for (a, b) in last.iter().zip(direct.final_ensemble.points()) {
            assert!(
                (a - b).abs() <= 10.0 * opts.tol,
                "fixed point {a} vs integrator {b}"
            );
        }
    }

    #[test]
    fn oversized_horizon_is_rejected_as_non_contractive() {
        let (k, _) = setup();
        let v = Potential::quadratic(vec![4.0], 1).unwrap();
        let nu = quadrature(50);
        let opts = PicardOptions {
            mesh: 128,
            ..PicardOptions::default()
        };
        let err = picard_flow_map(&nu, &k, &v, 40.0, opts).unwrap_err();
        match err {
            Error::NonContractive { suggested } => assert!((suggested - 20.0).abs() < 1e-12),
            other => panic!("expected non-contraction, got {other:?}"),
        }
    }

    #[test]
    fn horizon_estimate_is_positive_and_modest() {
        let (k, v) = setup();
        let nu = quadrature(100);
        let t0 = contraction_horizon(&nu, &k, &v);
        assert!(t0 > 0.01 && t0 < 10.0, "horizon {t0}");
    }
}
