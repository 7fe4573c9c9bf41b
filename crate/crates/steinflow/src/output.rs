//! CSV and manifest writers for run artifacts.
//!
//! Floats are rendered with Rust's shortest round-trip formatting, so files
//! are byte-identical across repeated runs of the same configuration and
//! parse back to the exact values. Every run directory carries a manifest
//! with the config snapshot needed to reproduce it; the manifest is written
//! to a temporary file and renamed into place so a crash cannot leave a
//! half-written one.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::meanfield::fv::FvObservation;
use crate::meanfield::grid::GridDensity;
use crate::particles::Observation;

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Writes a rectangular CSV with a header line.
pub fn write_csv(path: &Path, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = columns.join(",");
    s.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let cells: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Particle diagnostics columns, stable across versions.
pub const PARTICLE_DIAGNOSTIC_COLUMNS: [&str; 5] = ["t", "h_n", "e", "ksd2", "q"];

/// Writes the particle diagnostic series: one row per observation with
/// columns `t, h_n, e, ksd2, q` plus an optional trailing `w1_target`.
pub fn write_particle_diagnostics(
    path: &Path,
    observations: &[Observation],
    w1_target: Option<&[f64]>,
) -> Result<()> {
    let mut columns: Vec<&str> = PARTICLE_DIAGNOSTIC_COLUMNS.to_vec();
    if w1_target.is_some() {
        columns.push("w1_target");
    }
    let mut rows = Vec::with_capacity(observations.len());
    for (i, o) in observations.iter().enumerate() {
        let mut row = vec![o.time, o.h_n, o.interaction_energy, o.ksd2, o.drift_quadratic_form];
        if let Some(w) = w1_target {
            row.push(w[i]);
        }
        rows.push(row);
    }
    write_csv(path, &columns, &rows)
}

/// Writes a particle snapshot: one particle per row, one column per
/// coordinate.
pub fn write_positions(path: &Path, positions: &[f64], dim: usize) -> Result<()> {
    let columns: Vec<String> = (0..dim).map(|c| format!("x{c}")).collect();
    let column_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<f64>> = positions.chunks(dim).map(|p| p.to_vec()).collect();
    write_csv(path, &column_refs, &rows)
}

/// Writes a density snapshot as `center, value` rows.
pub fn write_density(path: &Path, rho: &GridDensity) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..rho.cells())
        .map(|i| vec![rho.center(i), rho.values()[i]])
        .collect();
    write_csv(path, &["center", "value"], &rows)
}

/// Grid-solver diagnostics columns, stable across versions.
pub const PDE_DIAGNOSTIC_COLUMNS: [&str; 6] = ["t", "mass", "kl", "dissipation", "l1_v", "w11_v"];

/// Writes the grid-solver diagnostic series.
pub fn write_pde_diagnostics(path: &Path, observations: &[FvObservation]) -> Result<()> {
    let rows: Vec<Vec<f64>> = observations
        .iter()
        .map(|o| vec![o.time, o.mass, o.kl, o.dissipation, o.l1_v, o.w11_v])
        .collect();
    write_csv(path, &PDE_DIAGNOSTIC_COLUMNS, &rows)
}

/// Reproducibility record accompanying every run directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    /// Canonical `key = value` lines; parsing them reproduces the run.
    pub config: String,
    pub seed: u64,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// File names relative to the manifest's directory.
    pub outputs: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(config: String, seed: u64) -> Self {
        Self {
            config,
            seed,
            version: format!("steinflow {}", env!("CARGO_PKG_VERSION")),
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    pub fn push_output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    /// Stamps the end time and writes `manifest.json` into `dir` atomically
    /// (temp file plus rename).
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = unix_now();
        let body = serde_json::to_string_pretty(&self)
            .map_err(|e| crate::error::Error::Config(format!("manifest encoding: {e}")))?;
        let path = dir.join("manifest.json");
        let tmp = dir.join("manifest.json.tmp");
        std::fs::write(&tmp, body)?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }
}
