//! Lipschitz dependence of particle trajectories on the initial measure.
//!
//! Two copies of the system start from nearby initial data; the trajectory
//! distance, normalized by the initial distance, measures the flow's
//! stability constant. If trajectories depended on initial data worse than
//! Lipschitz, the normalized ratio would blow up as the perturbation
//! shrinks; staying within a fixed factor across a 8x sweep of perturbation
//! sizes is the observable signature of the bound.

use super::support::particle_snapshots;
use super::{CriterionResult, ExperimentConfig, ExperimentName, ExperimentReport, Table};
use crate::error::Result;
use crate::init::InitialDensity;
use crate::kernels::Kernel;
use crate::metrics::{empirical_1d, wasserstein_1d};
use crate::particles::{Dynamics, ParticleState, Scheme};
use crate::potentials::Potential;

const N: usize = 256;
const RATIO_SPREAD_LIMIT: f64 = 3.0;

/// Perturbation applied to the base Gaussian N(0.5, 1).
#[derive(Clone, Copy)]
enum Mode {
    Shift,
    Scale,
}

impl Mode {
    fn label(&self) -> f64 {
        match self {
            Mode::Shift => 0.0,
            Mode::Scale => 1.0,
        }
    }

    fn perturb(&self, eps: f64) -> Result<InitialDensity> {
        match self {
            Mode::Shift => InitialDensity::gaussian(0.5 + eps, 1.0),
            Mode::Scale => InitialDensity::gaussian(0.5, 1.0 + eps),
        }
    }
}

pub fn exp_stability(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let kernel = Kernel::gaussian(cfg.kernel_variance.unwrap_or(2.0), 1)?;
    let dt = cfg.dt.unwrap_or(0.01);
    let t_final = cfg.t_final.unwrap_or(2.0);
    let epsilons = cfg
        .epsilons
        .clone()
        .unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025]);
    let times: Vec<f64> = (1..=20).map(|i| t_final * i as f64 / 20.0).collect();
    let base = InitialDensity::gaussian(0.5, 1.0)?;

    // Each case pairs a potential with the transport order its growth
    // assumptions dictate: p is conjugate to the moment index q.
    let cases: Vec<(Potential, f64, &str)> = vec![
        (Potential::quadratic(vec![1.0], 1)?, 2.0, "quadratic"),
        (Potential::monomial(1.0, 4, 1)?, 4.0, "quartic"),
    ];

    let mut report = ExperimentReport::new(ExperimentName::Stability);
    let mut table = Table::new("ratios", vec!["p", "mode", "eps", "w0", "sup_w", "ratio"]);

    for (potential, p, label) in &cases {
        let base_points = base.quantile_points(N);
        let base_state = ParticleState::new(base_points.clone(), 1)?;
        let base_run = particle_snapshots(
            &base_state,
            Dynamics::Svgd,
            &kernel,
            potential,
            Scheme::Rk4,
            dt,
            &times,
        )?;

        // A zero perturbation must reproduce the base run bitwise: the
        // dynamics are deterministic and the initialization is as well.
        let twin = particle_snapshots(
            &ParticleState::new(base_points.clone(), 1)?,
            Dynamics::Svgd,
            &kernel,
            potential,
            Scheme::Rk4,
            dt,
            &times,
        )?;
        let identical = base_run == twin;
        report.criteria.push(CriterionResult::new(
            format!("{label}_zero_perturbation_is_exact"),
            identical,
            "repeated run is bit-identical".to_string(),
        ));

        for mode in [Mode::Shift, Mode::Scale] {
            let mut ratios = Vec::new();
            for &eps in &epsilons {
                let other = mode.perturb(eps)?;
                let other_points = other.quantile_points(N);
                let w0 = wasserstein_1d(
                    &empirical_1d(base_points.clone())?,
                    &empirical_1d(other_points.clone())?,
                    *p,
                )?;
                let other_run = particle_snapshots(
                    &ParticleState::new(other_points, 1)?,
                    Dynamics::Svgd,
                    &kernel,
                    potential,
                    Scheme::Rk4,
                    dt,
                    &times,
                )?;
                // sup over t <= T including t = 0, so the ratio is >= 1.
                let mut sup_w = w0;
                for (a, b) in base_run.iter().zip(&other_run) {
                    let w = wasserstein_1d(
                        &empirical_1d(a.clone())?,
                        &empirical_1d(b.clone())?,
                        *p,
                    )?;
                    sup_w = sup_w.max(w);
                }
                let ratio = sup_w / w0;
                ratios.push(ratio);
                table.push(vec![*p, mode.label(), eps, w0, sup_w, ratio]);
            }
            let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let spread = max / min;
            let mode_name = match mode {
                Mode::Shift => "shift",
                Mode::Scale => "scale",
            };
            report.criteria.push(CriterionResult::new(
                format!("{label}_{mode_name}_ratio_spread_bounded"),
                spread.is_finite() && spread < RATIO_SPREAD_LIMIT,
                format!(
                    "sup_t W{p}(t)/W{p}(0) in [{min:.3}, {max:.3}] across eps = {epsilons:?}, \
                     spread {spread:.3} < {RATIO_SPREAD_LIMIT}"
                ),
            ));
        }
    }

    report.tables.push(table);
    Ok(report)
}
