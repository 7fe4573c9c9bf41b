//! Agreement between the three independent solution routes.
//!
//! The finite-volume solver, the characteristic (pushforward) solver, and
//! the fixed-point flow map construction share no discretization machinery,
//! so agreement within the combined resolution budget is strong evidence
//! each one solves the same equation. Five initial densities of varying
//! shape are cross-checked at three times, the invariant density is checked
//! as a fixed point of both time steppers, one configuration is rerun at
//! doubled resolution to confirm the gap shrinks, and the fixed-point
//! iteration is compared against the characteristic flow on a contraction
//! window.

use super::support::fv_snapshots;
use super::{CriterionResult, ExperimentConfig, ExperimentName, ExperimentReport, Table};
use crate::error::Result;
use crate::init::{InitialDensity, MixtureComponent};
use crate::kernels::Kernel;
use crate::meanfield::ensemble::{characteristic_solve, CharacteristicOptions, WeightedEnsemble};
use crate::meanfield::picard::{contraction_horizon, picard_flow_map, PicardOptions};
use crate::metrics::{wasserstein_1d, EmpiricalMeasure};
use crate::potentials::{Potential, TargetDensity};

const SNAPSHOT_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
const BUDGET: f64 = 5e-3;
const HALF_WIDTH: f64 = 10.0;

fn ensemble_measure(ens: &WeightedEnsemble) -> Result<EmpiricalMeasure> {
    EmpiricalMeasure::weighted(ens.points().to_vec(), 1, ens.weights().to_vec())
}

/// Runs both time steppers from one initial density and returns the W1 gap
/// at each snapshot time.
fn gaps_for(
    init: &InitialDensity,
    kernel: &Kernel,
    potential: &Potential,
    cells: usize,
    nodes: usize,
    dt: f64,
) -> Result<Vec<f64>> {
    let rho0 = init.grid(HALF_WIDTH, cells)?;
    let grids = fv_snapshots(&rho0, kernel, potential, dt, &SNAPSHOT_TIMES)?;
    let nu = WeightedEnsemble::from_initial(init, nodes)?;
    let t_final = *SNAPSHOT_TIMES.last().expect("nonempty");
    let cadence = (SNAPSHOT_TIMES[0] / dt).round() as u64;
    let opts = CharacteristicOptions::new(dt, t_final)?.with_cadence(cadence);
    let out = characteristic_solve(&nu, kernel, potential, opts)?;
    let mut gaps = Vec::with_capacity(SNAPSHOT_TIMES.len());
    for (grid, &t) in grids.iter().zip(&SNAPSHOT_TIMES) {
        let ens = out
            .snapshots
            .iter()
            .find(|e| (e.time() - t).abs() < 0.5 * dt)
            .ok_or_else(|| {
                crate::error::Error::InvalidParameter(format!(
                    "characteristic solver missed snapshot time {t}"
                ))
            })?;
        gaps.push(wasserstein_1d(&ensemble_measure(ens)?, grid, 1.0)?);
    }
    Ok(gaps)
}

pub fn exp_solver_crosscheck(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let kernel = Kernel::gaussian(cfg.kernel_variance.unwrap_or(2.0), 1)?;
    let potential = Potential::quadratic(vec![1.0], 1)?;
    let cells = cfg.cells.unwrap_or(1000);
    let nodes = 800;
    let dt = cfg.dt.unwrap_or(5e-3);

    let inits: Vec<(&str, InitialDensity)> = vec![
        ("narrow_offset", InitialDensity::gaussian(1.0, 0.8)?),
        ("wide_left", InitialDensity::gaussian(-0.5, 1.2)?),
        (
            "bimodal",
            InitialDensity::mixture(vec![
                MixtureComponent {
                    weight: 0.5,
                    mean: -1.0,
                    std: 0.5,
                },
                MixtureComponent {
                    weight: 0.5,
                    mean: 1.5,
                    std: 0.7,
                },
            ])?,
        ),
        ("far_start", InitialDensity::gaussian(2.0, 1.0)?),
        ("sharp_centered", InitialDensity::gaussian(0.0, 0.6)?),
    ];

    let mut report = ExperimentReport::new(ExperimentName::Crosscheck);
    let mut table = Table::new("gaps", vec!["density", "t", "w1"]);

    for (idx, (label, init)) in inits.iter().enumerate() {
        let gaps = gaps_for(init, &kernel, &potential, cells, nodes, dt)?;
        let mut worst = 0.0f64;
        for (&t, &g) in SNAPSHOT_TIMES.iter().zip(&gaps) {
            table.push(vec![idx as f64, t, g]);
            worst = worst.max(g);
        }
        report.criteria.push(CriterionResult::new(
            format!("solvers_agree_{label}"),
            worst < BUDGET,
            format!("max W1 gap over t = {SNAPSHOT_TIMES:?} is {worst:.2e}, budget {BUDGET:.0e}"),
        ));
    }
    report.tables.push(table);

    // Invariant density: both steppers must hold it to within their own
    // resolution over the full window.
    let target = TargetDensity::new(&potential, HALF_WIDTH, cells)?;
    let target_grid = target.grid().expect("confining potential has a target");
    let grids = fv_snapshots(target_grid, &kernel, &potential, dt, &SNAPSHOT_TIMES)?;
    let fv_drift = grids
        .iter()
        .map(|g| wasserstein_1d(g, target_grid, 1.0).unwrap_or(f64::NAN))
        .fold(f64::NEG_INFINITY, f64::max);
    let nu = WeightedEnsemble::from_grid(target_grid, nodes)?;
    let opts = CharacteristicOptions::new(dt, *SNAPSHOT_TIMES.last().expect("nonempty"))?;
    let out = characteristic_solve(&nu, &kernel, &potential, opts)?;
    let char_drift = wasserstein_1d(&ensemble_measure(&out.final_ensemble)?, target_grid, 1.0)?;
    report.criteria.push(CriterionResult::new(
        "invariant_density_held_by_both_steppers",
        fv_drift < BUDGET && char_drift < BUDGET,
        format!("grid drift {fv_drift:.2e}, pushforward drift {char_drift:.2e}"),
    ));

    // Resolution refinement: doubling both resolutions must shrink the gap
    // to half the budget or less.
    let coarse = gaps_for(&inits[0].1, &kernel, &potential, cells, nodes, dt)?[1];
    let fine = gaps_for(&inits[0].1, &kernel, &potential, 2 * cells, 2 * nodes, dt)?[1];
    report.criteria.push(CriterionResult::new(
        "refinement_shrinks_the_gap",
        fine < 0.5 * BUDGET,
        format!("W1 gap at t = 1: {coarse:.2e} -> {fine:.2e} after doubling resolutions"),
    ));
    let mut refine = Table::new("refinement", vec!["cells", "nodes", "w1"]);
    refine.push(vec![cells as f64, nodes as f64, coarse]);
    refine.push(vec![2.0 * cells as f64, 2.0 * nodes as f64, fine]);
    report.tables.push(refine);

    // Fixed-point iteration vs. characteristics on a window where the map
    // is a contraction.
    let init = &inits[0].1;
    let nu = WeightedEnsemble::from_initial(init, 400)?;
    let horizon = contraction_horizon(&nu, &kernel, &potential).min(0.25);
    let picard = picard_flow_map(&nu, &kernel, &potential, horizon, PicardOptions::default())?;
    let char_dt = horizon / 64.0;
    let char_out = characteristic_solve(
        &nu,
        &kernel,
        &potential,
        CharacteristicOptions::new(char_dt, horizon)?,
    )?;
    let final_nodes = picard.at_node(picard.times.len() - 1);
    let mut sup = 0.0f64;
    for (a, b) in final_nodes.iter().zip(char_out.final_ensemble.points()) {
        sup = sup.max((a - b).abs());
    }
    let contracting = picard.ratios.iter().all(|&r| r < 1.0);
    report.criteria.push(CriterionResult::new(
        "fixed_point_matches_characteristics",
        picard.converged && sup < 1e-4,
        format!(
            "sup node gap {sup:.2e} at t = {horizon:.3} after {} iterations",
            picard.iterations
        ),
    ));
    report.criteria.push(CriterionResult::new(
        "fixed_point_iteration_contracts",
        contracting,
        format!(
            "distance ratios {:?} all below 1",
            picard
                .ratios
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect::<Vec<_>>()
        ),
    ));
    let mut picard_table = Table::new("picard", vec!["iteration", "distance"]);
    for (i, d) in picard.distances.iter().enumerate() {
        picard_table.push(vec![i as f64, *d]);
    }
    report.tables.push(picard_table);

    Ok(report)
}
