//! Particle-count convergence toward the mean-field density.
//!
//! A fine finite-volume run provides the reference curve `t -> rho_t`. The
//! interacting particle system is launched from quantile discretizations of
//! the same initial density at geometrically increasing counts, and the
//! transport distance to the reference is tabulated at a fixed set of times.
//! The distance must shrink monotonically with the particle count and the
//! largest run must land inside the discretization budget.

use super::support::{fv_snapshots, particle_snapshots};
use super::{CriterionResult, ExperimentConfig, ExperimentName, ExperimentReport, Table};
use crate::concurrency::run_jobs;
use crate::error::Result;
use crate::init::InitialDensity;
use crate::kernels::Kernel;
use crate::meanfield::ensemble::{characteristic_solve, CharacteristicOptions};
use crate::metrics::{empirical_1d, wasserstein_1d};
use crate::particles::{Dynamics, ParticleState, Scheme};
use crate::potentials::Potential;

const SNAPSHOT_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
const BUDGET: f64 = 5e-3;

pub fn exp_mean_field_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let kernel = Kernel::gaussian(cfg.kernel_variance.unwrap_or(2.0), 1)?;
    let potential = Potential::quadratic(vec![1.0], 1)?;
    let init = InitialDensity::gaussian(1.0, 0.8)?;
    let counts = cfg
        .n_sweep
        .clone()
        .unwrap_or_else(|| vec![64, 256, 1024, 4096]);
    let cells = cfg.cells.unwrap_or(4000);
    let particle_dt = cfg.dt.unwrap_or(5e-3);
    let half_width = 10.0;

    let mut report = ExperimentReport::new(ExperimentName::MeanField);

    // Reference solve on a fine grid with a fixed step so the snapshot times
    // are hit exactly.
    let rho0 = init.grid(half_width, cells)?;
    let reference = fv_snapshots(&rho0, &kernel, &potential, 1e-3, &SNAPSHOT_TIMES)?;

    // One particle run per count; the sweep is embarrassingly parallel.
    let jobs: Vec<_> = counts
        .iter()
        .map(|&n| {
            let kernel = &kernel;
            let potential = &potential;
            let init = &init;
            move || -> Result<Vec<Vec<f64>>> {
                let points = init.quantile_points(n);
                let state = ParticleState::new(points, 1)?;
                particle_snapshots(
                    &state,
                    Dynamics::Svgd,
                    kernel,
                    potential,
                    Scheme::Rk4,
                    particle_dt,
                    &SNAPSHOT_TIMES,
                )
            }
        })
        .collect();
    let runs = run_jobs(jobs);

    let mut table = Table::new("w1", vec!["n", "t", "w1"]);
    // distances[time_index][count_index], with time index 0 meaning t = 0.
    let mut distances = vec![Vec::new(); SNAPSHOT_TIMES.len() + 1];
    for (&n, run) in counts.iter().zip(runs) {
        let snapshots = run?;
        let at_zero = empirical_1d(init.quantile_points(n))?;
        let w0 = wasserstein_1d(&at_zero, &rho0, 1.0)?;
        table.push(vec![n as f64, 0.0, w0]);
        distances[0].push(w0);
        for (k, positions) in snapshots.into_iter().enumerate() {
            let measure = empirical_1d(positions)?;
            let w = wasserstein_1d(&measure, &reference[k], 1.0)?;
            table.push(vec![n as f64, SNAPSHOT_TIMES[k], w]);
            distances[k + 1].push(w);
        }
    }
    report.tables.push(table);

    for (k, column) in distances.iter().enumerate() {
        let t = if k == 0 { 0.0 } else { SNAPSHOT_TIMES[k - 1] };
        let monotone = column.windows(2).all(|w| w[1] < w[0]);
        let spread: Vec<String> = column.iter().map(|w| format!("{w:.2e}")).collect();
        report.criteria.push(CriterionResult::new(
            format!("w1_decreases_with_n_at_t{t}"),
            monotone,
            format!("N = {counts:?}, W1 = [{}]", spread.join(", ")),
        ));
        if k > 0 {
            let last = *column.last().expect("nonempty sweep");
            report.criteria.push(CriterionResult::new(
                format!("largest_n_within_budget_at_t{t}"),
                last < BUDGET,
                format!("W1 = {last:.2e}, budget {BUDGET:.0e}"),
            ));
        }
    }

    // An equal-weight quadrature ensemble evolved along characteristics obeys
    // the same ODE as the particle system, so it must track the grid solver
    // within the same budget.
    let nu = crate::meanfield::ensemble::WeightedEnsemble::from_initial(&init, 1024)?;
    let opts = CharacteristicOptions::new(particle_dt, 1.0)?;
    let out = characteristic_solve(&nu, &kernel, &potential, opts)?;
    let measure = empirical_1d(out.final_ensemble.points().to_vec())?;
    let w = wasserstein_1d(&measure, &reference[1], 1.0)?;
    report.criteria.push(CriterionResult::new(
        "quadrature_ensemble_tracks_grid_at_t1",
        w < BUDGET,
        format!("m = 1024, W1 = {w:.2e}, budget {BUDGET:.0e}"),
    ));
    let mut t2 = Table::new("ensemble", vec!["m", "t", "w1"]);
    t2.push(vec![1024.0, 1.0, w]);
    report.tables.push(t2);

    Ok(report)
}
