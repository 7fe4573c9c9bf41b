//! Command-line front end: `simulate` drives the interacting particle
//! system, `pde` drives the mean-field density solvers, and `experiment`
//! runs one of the canned validation studies.
//!
//! Exit codes: 0 on success, 1 when an experiment criterion fails, 2 on
//! configuration errors (parse failures, unknown keys, unknown experiment
//! names), 3 on numerical faults (blowup, step-size underflow, rejected
//! steps, mass escaping the domain).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use steinflow::experiments::{self, ExperimentConfig, ExperimentName};
use steinflow::meanfield::{
    characteristic_solve, fv_solve, CharacteristicOptions, FvOptions, GridDensity,
    WeightedEnsemble,
};
use steinflow::metrics::wasserstein_1d;
use steinflow::output::{
    write_csv, write_density, write_particle_diagnostics, write_pde_diagnostics,
    write_positions, RunManifest,
};
use steinflow::particles::{integrate, Dynamics, IntegratorSpec, ParticleState, Scheme};
use steinflow::potentials::TargetDensity;
use steinflow::{Error, RunConfig};

#[derive(Parser)]
#[command(name = "steinflow", version, about = "Stein transport laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the interacting particle system described by a config file.
    Simulate(RunArgs),
    /// Run a mean-field density solver described by a config file.
    Pde(RunArgs),
    /// Run a named validation study and report PASS/FAIL criteria.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a flat key = value config file.
    #[arg(long)]
    config: PathBuf,
    /// Seed override; takes precedence over `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; created if missing.
    #[arg(long, default_value = "steinflow-out")]
    out: PathBuf,
    /// Config overrides, `key=value`, applied after the file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// One of: mean-field, stability, longtime, hn-bound, mv-comparison,
    /// crosscheck.
    name: String,
    /// Optional config file with `experiment.*` and `kernel.*` keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "steinflow-out")]
    out: PathBuf,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NumericalBlowup { .. }
        | Error::DtUnderflow { .. }
        | Error::StepRejected { .. }
        | Error::Truncation { .. }
        | Error::NonContractive { .. } => 3,
        _ => 2,
    }
}

fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_file(path)?;
    for spec in overrides {
        cfg.apply_override(spec)?;
    }
    Ok(cfg)
}

fn parse_enum<'a>(key: &str, value: &str, allowed: &[&'a str]) -> Result<&'a str, Error> {
    allowed
        .iter()
        .find(|&&a| a == value)
        .copied()
        .ok_or_else(|| {
            Error::Config(format!(
                "key '{key}': unknown value '{value}' (supported: {})",
                allowed.join(", ")
            ))
        })
}

fn cmd_simulate(args: &RunArgs) -> Result<(), Error> {
    let cfg = load_config(&args.config, &args.overrides)?;
    let seed = match args.seed {
        Some(s) => s,
        None => cfg.u64_or("run.seed", 0)?,
    };
    let kernel = cfg.kernel()?;
    if kernel.dim() != 1 {
        return Err(Error::Config(
            "the command line drives one-dimensional runs; call the library \
             directly for higher dimension"
                .into(),
        ));
    }
    let potential = cfg.potential()?;
    let init = cfg.initial_density()?;
    let n = cfg.usize_or("simulate.n", 64)?;
    let dynamics = match parse_enum(
        "simulate.dynamics",
        cfg.str_or("simulate.dynamics", "svgd"),
        &["svgd", "mckean-vlasov", "ula"],
    )? {
        "svgd" => Dynamics::Svgd,
        "mckean-vlasov" => Dynamics::McKeanVlasov,
        _ => Dynamics::Ula { seed },
    };
    let scheme = match parse_enum(
        "integrator.scheme",
        cfg.str_or("integrator.scheme", "euler"),
        &["euler", "rk4"],
    )? {
        "rk4" => Scheme::Rk4,
        _ => Scheme::ExplicitEuler,
    };
    let spec = IntegratorSpec::new(
        scheme,
        cfg.f64_or("integrator.dt", 0.01)?,
        cfg.f64_or("integrator.t_final", 5.0)?,
    )?;
    let cadence = cfg.u64_or("simulate.cadence", 1)?;
    let positions = match parse_enum(
        "simulate.placement",
        cfg.str_or("simulate.placement", "quantile"),
        &["quantile", "sample"],
    )? {
        "quantile" => init.quantile_points(n),
        _ => {
            // Separate stream from the ULA noise, which consumes the raw seed.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            init.sample(n, &mut rng)
        }
    };
    let state = ParticleState::new(positions, 1)?;

    let reference = match parse_enum(
        "simulate.reference",
        cfg.str_or("simulate.reference", "none"),
        &["none", "target"],
    )? {
        "target" => Some(TargetDensity::new(
            &potential,
            cfg.f64_or("reference.half_width", 10.0)?,
            cfg.usize_or("reference.cells", 2000)?,
        )?),
        _ => None,
    };

    std::fs::create_dir_all(&args.out)?;
    let mut manifest = RunManifest::new(cfg.snapshot(), seed);
    let summary = integrate(&state, dynamics, &kernel, &potential, spec, cadence, &mut |_| {})?;

    let w1_target = match &reference {
        Some(t) => {
            let grid = t.grid().ok_or_else(|| {
                Error::Config(
                    "key 'simulate.reference': this potential has no normalizable target"
                        .into(),
                )
            })?;
            let mut series = Vec::with_capacity(summary.observations.len());
            for o in &summary.observations {
                let m = steinflow::metrics::empirical_1d(o.positions.clone())?;
                series.push(wasserstein_1d(&m, grid, 1.0)?);
            }
            Some(series)
        }
        None => None,
    };

    write_particle_diagnostics(
        &args.out.join("diagnostics.csv"),
        &summary.observations,
        w1_target.as_deref(),
    )?;
    manifest.push_output("diagnostics.csv");

    let first = summary.observations.first().expect("initial observation");
    write_positions(&args.out.join("positions_initial.csv"), &first.positions, 1)?;
    manifest.push_output("positions_initial.csv");
    let snapshot_every = cfg.usize_or("simulate.snapshot_every", 0)?;
    if snapshot_every > 0 {
        for (i, o) in summary.observations.iter().enumerate() {
            if i > 0 && i % snapshot_every == 0 {
                let name = format!("positions_{:06}.csv", o.step);
                write_positions(&args.out.join(&name), &o.positions, 1)?;
                manifest.push_output(name);
            }
        }
    }
    write_positions(
        &args.out.join("positions_final.csv"),
        summary.final_state.positions(),
        1,
    )?;
    manifest.push_output("positions_final.csv");
    manifest.finish(&args.out)?;
    println!(
        "simulate: {} observations to t = {}, outputs in {}",
        summary.observations.len(),
        summary.final_state.time(),
        args.out.display()
    );
    Ok(())
}

fn cmd_pde(args: &RunArgs) -> Result<(), Error> {
    let cfg = load_config(&args.config, &args.overrides)?;
    let seed = match args.seed {
        Some(s) => s,
        None => cfg.u64_or("run.seed", 0)?,
    };
    let kernel = cfg.kernel()?;
    let potential = cfg.potential()?;
    let init = cfg.initial_density()?;
    let solver = cfg.raw("pde.solver").ok_or_else(|| {
        Error::Config("missing required config key 'pde.solver' (fv or characteristic)".into())
    })?;
    let solver = parse_enum("pde.solver", solver, &["fv", "characteristic"])?;
    let half_width = cfg.f64_or("pde.half_width", 10.0)?;
    let cells = cfg.usize_or("pde.cells", 1000)?;
    let t_final = cfg.f64_or("pde.t_final", 5.0)?;
    let cadence = cfg.u64_or("pde.cadence", 1)?;
    let snapshot_every = cfg.usize_or("pde.snapshot_every", 0)?;

    std::fs::create_dir_all(&args.out)?;
    let mut manifest = RunManifest::new(cfg.snapshot(), seed);

    if solver == "fv" {
        let rho0 = init.grid(half_width, cells)?;
        let options = FvOptions {
            cfl: cfg.f64_or("pde.cfl", 0.9)?,
            dt: cfg.f64_opt("pde.dt")?,
            dt_max: cfg.f64_or("pde.dt_max", 0.05)?,
            cadence,
        };
        write_density(&args.out.join("density_initial.csv"), &rho0)?;
        manifest.push_output("density_initial.csv");
        let mut snapshots: Vec<(u64, GridDensity)> = Vec::new();
        let mut index = 0u64;
        let out = fv_solve(&rho0, &kernel, &potential, t_final, options, &mut |_, rho| {
            if snapshot_every > 0 && index > 0 && index % snapshot_every as u64 == 0 {
                snapshots.push((index, rho.clone()));
            }
            index += 1;
        })?;
        write_pde_diagnostics(&args.out.join("diagnostics.csv"), &out.observations)?;
        manifest.push_output("diagnostics.csv");
        for (i, rho) in &snapshots {
            let name = format!("density_{i:06}.csv");
            write_density(&args.out.join(&name), rho)?;
            manifest.push_output(name);
        }
        write_density(&args.out.join("density_final.csv"), &out.density)?;
        manifest.push_output("density_final.csv");
        manifest.finish(&args.out)?;
        println!(
            "pde: {} observations, {} steps to t = {}, outputs in {}",
            out.observations.len(),
            out.steps,
            out.density.time(),
            args.out.display()
        );
    } else {
        let nodes = cfg.usize_or("pde.nodes", 800)?;
        let dt = cfg.f64_or("pde.dt", 0.005)?;
        let nu = WeightedEnsemble::from_initial(&init, nodes)?;
        let options = CharacteristicOptions::new(dt, t_final)?.with_cadence(cadence);
        let out = characteristic_solve(&nu, &kernel, &potential, options)?;
        let node_rows = |e: &WeightedEnsemble| -> Vec<Vec<f64>> {
            let densities = e.reconstructed_densities();
            e.points()
                .iter()
                .zip(e.weights())
                .zip(&densities)
                .map(|((&x, &w), &d)| vec![x, w, d])
                .collect()
        };
        let mut rows = Vec::with_capacity(out.snapshots.len());
        for (i, e) in out.snapshots.iter().enumerate() {
            let mean: f64 = e.points().iter().zip(e.weights()).map(|(x, w)| x * w).sum();
            let second: f64 = e
                .points()
                .iter()
                .zip(e.weights())
                .map(|(x, w)| x * x * w)
                .sum();
            let mass: f64 = e.weights().iter().sum();
            rows.push(vec![e.time(), mass, mean, second]);
            if snapshot_every > 0 && i > 0 && i % snapshot_every == 0 {
                let name = format!("nodes_{i:06}.csv");
                write_csv(
                    &args.out.join(&name),
                    &["x", "weight", "density"],
                    &node_rows(e),
                )?;
                manifest.push_output(name);
            }
        }
        write_csv(
            &args.out.join("diagnostics.csv"),
            &["t", "mass", "mean", "second_moment"],
            &rows,
        )?;
        manifest.push_output("diagnostics.csv");
        write_csv(
            &args.out.join("nodes_final.csv"),
            &["x", "weight", "density"],
            &node_rows(&out.final_ensemble),
        )?;
        manifest.push_output("nodes_final.csv");
        manifest.finish(&args.out)?;
        println!(
            "pde: {} snapshots to t = {}, outputs in {}",
            out.snapshots.len(),
            out.final_ensemble.time(),
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<bool, Error> {
    let name: ExperimentName = args.name.parse()?;
    let cfg = match &args.config {
        Some(path) => load_config(path, &args.overrides)?,
        None => {
            let mut cfg = RunConfig::default();
            for spec in &args.overrides {
                cfg.apply_override(spec)?;
            }
            cfg
        }
    };
    let seed = match args.seed {
        Some(s) => s,
        None => cfg.u64_or("run.seed", 0)?,
    };
    let exp_cfg = ExperimentConfig {
        seed,
        out_dir: Some(args.out.clone()),
        kernel_variance: cfg.f64_opt("kernel.variance")?,
        n_sweep: cfg.usize_list_opt("experiment.n_sweep")?,
        epsilons: cfg.f64_list_opt("experiment.epsilons")?,
        dt: cfg.f64_opt("experiment.dt")?,
        t_final: cfg.f64_opt("experiment.t_final")?,
        cells: cfg.usize_opt("experiment.cells")?,
    };
    let report = experiments::run(name, &exp_cfg)?;
    let mut manifest = RunManifest::new(cfg.snapshot(), seed);
    for file in report.file_names() {
        manifest.push_output(file);
    }
    manifest.finish(&args.out)?;
    print!("{}", report.summary());
    if !report.passed() {
        for c in report.criteria.iter().filter(|c| !c.passed) {
            eprintln!("{}", c.line());
        }
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args).map(|()| true),
        Command::Pde(args) => cmd_pde(args).map(|()| true),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
