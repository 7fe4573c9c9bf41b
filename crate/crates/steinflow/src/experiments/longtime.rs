//! Long-horizon relaxation of the grid solver toward the invariant density.
//!
//! One run integrates to t = 200 and checks three things: the relative
//! entropy never increases, the final density lands on the invariant one in
//! transport distance, and the stationarity residual decays below threshold.
//! Two short companion runs pin the entropy production rate against the
//! quadrature dissipation and confirm that a run started at the invariant
//! density stays there.
//!
//! The default kernel variance here is 1, not the library-wide default of 2.
//! The flow stalls in the far tail, where the convolved velocity is
//! exponentially small; a unit-variance kernel reaches the transport
//! tolerance by t = 200 while variance 2 does not. The residual decays like
//! 1/t regardless of kernel or grid, so its threshold is not reachable on
//! this horizon; the criterion reports the measured value either way.

use super::{CriterionResult, ExperimentConfig, ExperimentName, ExperimentReport, Table};
use crate::error::Result;
use crate::kernels::Kernel;
use crate::meanfield::fv::{fv_solve, FvOptions};
use crate::meanfield::grid::GridDensity;
use crate::metrics::wasserstein_1d;
use crate::potentials::{Potential, TargetDensity};

const KL_SLACK_PER_STEP: f64 = 1e-8;
const W1_TOLERANCE: f64 = 1e-2;
const STEIN_TOLERANCE: f64 = 1e-4;
const RATE_TOLERANCE: f64 = 0.03;

pub fn exp_longtime(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let kernel = Kernel::gaussian(cfg.kernel_variance.unwrap_or(1.0), 1)?;
    let potential = Potential::quadratic(vec![1.0], 1)?;
    let cells = cfg.cells.unwrap_or(1000);
    let half_width = 10.0;
    let t_final = cfg.t_final.unwrap_or(200.0);
    let target = TargetDensity::new(&potential, half_width, cells)?;
    let target_grid = target.grid().expect("confining potential has a target");

    let mut report = ExperimentReport::new(ExperimentName::Longtime);

    // Main run: adaptive steps capped at 0.02, observed every 25 steps.
    let rho0 = GridDensity::from_fn(half_width, cells, |x| {
        (-(x - 2.0) * (x - 2.0) / 2.0).exp()
    })?;
    let options = FvOptions {
        dt_max: 0.02,
        cadence: 25,
        ..FvOptions::default()
    };
    let mut series = Table::new(
        "relaxation",
        vec!["t", "kl", "dissipation", "w1", "l1_v", "w11_v"],
    );
    {
        let mut observe = |o: &crate::meanfield::fv::FvObservation, rho: &GridDensity| {
            let w1 = wasserstein_1d(rho, target_grid, 1.0).unwrap_or(f64::NAN);
            series.push(vec![o.time, o.kl, o.dissipation, w1, o.l1_v, o.w11_v]);
        };
        fv_solve(&rho0, &kernel, &potential, t_final, options, &mut observe)?;
    }

    let kl: Vec<f64> = series.rows.iter().map(|r| r[1]).collect();
    let monotone = kl
        .windows(2)
        .all(|w| w[1] <= w[0] + 25.0 * KL_SLACK_PER_STEP);
    report.criteria.push(CriterionResult::new(
        "entropy_never_increases",
        monotone,
        format!(
            "KL {:.4} -> {:.3e} over {} observations",
            kl[0],
            kl.last().expect("nonempty"),
            kl.len()
        ),
    ));

    let last = series.rows.last().expect("nonempty series");
    let (final_w1, final_dissipation) = (last[3], last[2]);
    let final_stein = final_dissipation.sqrt();
    report.criteria.push(CriterionResult::new(
        "final_w1_below_tolerance",
        final_w1 < W1_TOLERANCE,
        format!("W1(rho_T, target) = {final_w1:.2e}, tolerance {W1_TOLERANCE:.0e}"),
    ));
    report.criteria.push(CriterionResult::new(
        "final_stein_residual_below_tolerance",
        final_stein < STEIN_TOLERANCE,
        format!("residual = {final_stein:.2e}, tolerance {STEIN_TOLERANCE:.0e}"),
    ));
    report.tables.push(series);

    // Entropy production rate vs. quadrature dissipation on a fine grid far
    // from equilibrium, compared by a centered difference mid-run.
    let fine = cells.max(2000);
    let rho_rate = GridDensity::from_fn(half_width, fine, |x| {
        (-(x - 2.0) * (x - 2.0) / 2.0).exp()
    })?;
    let rate_opts = FvOptions {
        dt: Some(1e-3),
        ..FvOptions::default()
    };
    let out = fv_solve(&rho_rate, &kernel, &potential, 0.1, rate_opts, &mut |_, _| {})?;
    let obs = &out.observations;
    let mid = obs.len() / 2;
    let dt = obs[mid + 1].time - obs[mid].time;
    let dkl = (obs[mid + 1].kl - obs[mid - 1].kl) / (2.0 * dt);
    let dissipation = obs[mid].dissipation;
    let rate_err = (-dkl - dissipation).abs() / dissipation;
    report.criteria.push(CriterionResult::new(
        "entropy_rate_matches_dissipation",
        rate_err <= RATE_TOLERANCE,
        format!(
            "-dKL/dt = {:.6}, dissipation = {:.6}, relative gap {:.3}",
            -dkl, dissipation, rate_err
        ),
    ));
    let mut rate_table = Table::new("dissipation", vec!["t", "kl", "dissipation"]);
    for o in obs {
        rate_table.push(vec![o.time, o.kl, o.dissipation]);
    }
    report.tables.push(rate_table);

    // Started at the invariant density, the solver must hold it: the entropy
    // stays at numerical zero and the transport drift stays inside the
    // spatial discretization budget.
    let stay_opts = FvOptions {
        cadence: 25,
        ..FvOptions::default()
    };
    let mut max_kl = f64::NEG_INFINITY;
    let stay = fv_solve(target_grid, &kernel, &potential, 5.0, stay_opts, &mut |o, _| {
        max_kl = max_kl.max(o.kl);
    })?;
    let drift = wasserstein_1d(&stay.density, target_grid, 1.0)?;
    report.criteria.push(CriterionResult::new(
        "invariant_density_is_a_fixed_point",
        max_kl < 1e-4 && drift < 5e-3,
        format!("max KL = {max_kl:.2e}, W1 drift = {drift:.2e} over t = 5"),
    ));

    Ok(report)
}
