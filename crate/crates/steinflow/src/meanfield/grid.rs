//! Cell-averaged probability densities on a symmetric 1-D interval.

use crate::error::{Error, Result};
use crate::potentials::Potential;

/// Mass a boundary cell may carry before the truncated domain is declared
/// invalid for the dynamics.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-8;

/// Tolerance on `h * sum(values) - 1` at construction.
pub const MASS_TOLERANCE: f64 = 1e-8;

/// A probability density on `[-L, L]` stored as `M` nonnegative cell
/// averages on a uniform grid.
///
/// Invariants enforced at construction: values nonnegative and finite, total
/// mass within [`MASS_TOLERANCE`] of 1, and boundary cells carrying less than
/// [`BOUNDARY_MASS_LIMIT`] of mass (so the truncation of the real line to
/// `[-L, L]` is harmless for the dynamics).
#[derive(Clone, Debug)]
pub struct GridDensity {
    half_width: f64,
    h: f64,
    values: Vec<f64>,
    time: f64,
}

/// Discrete `L^1_V` and `W^{1,1}_V` readings of a grid density.
#[derive(Clone, Copy, Debug)]
pub struct NormMonitor {
    /// `h * sum (1 + V(x_i)) |rho_i|`.
    pub l1_v: f64,
    /// `l1_v` plus the same weighting applied to forward differences of rho.
    pub w11_v: f64,
}

impl GridDensity {
    /// Validates and wraps cell averages.
    pub fn try_new(half_width: f64, values: Vec<f64>, time: f64) -> Result<Self> {
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "grid half-width must be positive and finite, got {half_width}"
            )));
        }
        if values.len() < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 4 cells, got {}",
                values.len()
            )));
        }
        let h = 2.0 * half_width / values.len() as f64;
        let mut mass = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "cell {i} holds an invalid density value {v}"
                )));
            }
            mass += v;
        }
        mass *= h;
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "grid mass is {mass}, not 1 within {MASS_TOLERANCE:e}"
            )));
        }
        let boundary = h * values[0].max(values[values.len() - 1]);
        if boundary >= BOUNDARY_MASS_LIMIT {
            return Err(Error::Truncation {
                boundary,
                limit: BOUNDARY_MASS_LIMIT,
            });
        }
        Ok(Self {
            half_width,
            h,
            values,
            time,
        })
    }

    /// Samples `f` at cell centers and normalizes to unit mass.
    pub fn from_fn(half_width: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if cells < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 4 cells, got {cells}"
            )));
        }
        let h = 2.0 * half_width / cells as f64;
        let mut values: Vec<f64> = (0..cells)
            .map(|i| f(-half_width + (i as f64 + 0.5) * h))
            .collect();
        let mass: f64 = values.iter().sum::<f64>() * h;
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "density function integrates to {mass} on the grid"
            )));
        }
        for v in &mut values {
            *v /= mass;
        }
        Self::try_new(half_width, values, 0.0)
    }

    /// Bypasses mass/boundary validation; used by the solver steps, which
    /// conserve mass exactly and monitor the boundary themselves.
    pub(crate) fn unchecked(half_width: f64, values: Vec<f64>, time: f64) -> Self {
        let h = 2.0 * half_width / values.len() as f64;
        Self {
            half_width,
            h,
            values,
            time,
        }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Center of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h
    }

    /// All cell centers.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells()).map(|i| self.center(i)).collect()
    }

    /// Piecewise-constant value at `x`; zero outside the domain.
    pub fn value_at(&self, x: f64) -> f64 {
        if x < -self.half_width || x > self.half_width {
            return 0.0;
        }
        let i = (((x + self.half_width) / self.h) as usize).min(self.cells() - 1);
        self.values[i]
    }

    /// `h * sum values`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h
    }

    /// Largest boundary-cell mass.
    pub fn boundary_mass(&self) -> f64 {
        self.h * self.values[0].max(self.values[self.values.len() - 1])
    }

    /// `h * sum |rho_i - other_i|`; grids must match.
    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        self.check_same_geometry(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.h)
    }

    pub(crate) fn check_same_geometry(&self, other: &GridDensity) -> Result<()> {
        if self.cells() != other.cells() {
            return Err(Error::DimensionMismatch {
                expected: self.cells(),
                actual: other.cells(),
            });
        }
        if (self.half_width - other.half_width).abs() > 1e-12 * self.half_width {
            return Err(Error::InvalidInput(format!(
                "grids cover different domains: half-widths {} and {}",
                self.half_width, other.half_width
            )));
        }
        Ok(())
    }

    /// Quantiles at sorted probability levels `us` (each in (0, 1)).
    ///
    /// The cell-averaged density has a piecewise-linear CDF, so quantiles are
    /// exact by linear inversion inside the owning cell.
    pub fn quantiles(&self, us: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(us.len());
        let mut cell = 0usize;
        let mut below = 0.0; // CDF at the left edge of `cell`
        for &u in us {
            debug_assert!(u > 0.0 && u < 1.0, "quantile level must lie in (0,1)");
            while cell + 1 < self.values.len() && below + self.values[cell] * self.h < u {
                below += self.values[cell] * self.h;
                cell += 1;
            }
            let left = -self.half_width + cell as f64 * self.h;
            let v = self.values[cell];
            let x = if v > 0.0 {
                left + (u - below) / v
            } else {
                // Flat CDF stretch: place the quantile at the cell's right edge.
                left + self.h
            };
            out.push(x.min(self.half_width));
        }
        out
    }

    /// Discrete `L^1_V` and `W^{1,1}_V` norms: values and forward differences
    /// weighted by `1 + V`.
    pub fn norm_monitor(&self, v: &Potential) -> NormMonitor {
        let mut l1 = 0.0;
        let mut grad = 0.0;
        let m = self.values.len();
        for i in 0..m {
            let w = 1.0 + v.value(&[self.center(i)]);
            l1 += w * self.values[i].abs();
            if i + 1 < m {
                grad += w * ((self.values[i + 1] - self.values[i]) / self.h).abs();
            }
        }
        NormMonitor {
            l1_v: l1 * self.h,
            w11_v: (l1 + grad) * self.h,
        }
    }

    /// `integral (1 + V) rho`.
    pub fn pv_norm(&self, v: &Potential) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.values.len() {
            acc += (1.0 + v.value(&[self.center(i)])) * self.values[i];
        }
        acc * self.h
    }

    /// `integral |x|^p rho`.
    pub fn pth_moment(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.values.len() {
            acc += self.center(i).abs().powf(p) * self.values[i];
        }
        acc * self.h
    }
}
