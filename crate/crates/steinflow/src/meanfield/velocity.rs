//! The nonlocal transport velocity `U[rho] = -(grad K * rho) - (K * (grad V rho))`.
//!
//! Both convolutions are direct sums in a fixed order. For grid densities the
//! kernel is sampled once per offset (centers are equally spaced), so a field
//! evaluation costs `O(M)` kernel calls plus `O(M^2)` multiply-adds.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::meanfield::grid::GridDensity;
use crate::potentials::Potential;

/// Where the density lives: cell averages on a grid, or weighted atoms.
#[derive(Clone, Copy)]
pub enum DensitySource<'a> {
    Grid(&'a GridDensity),
    Ensemble {
        points: &'a [f64],
        weights: &'a [f64],
    },
}

impl<'a> From<&'a GridDensity> for DensitySource<'a> {
    fn from(g: &'a GridDensity) -> Self {
        DensitySource::Grid(g)
    }
}

/// Samples of `U[rho]` and its spatial derivative.
#[derive(Clone, Debug)]
pub struct VelocityField {
    /// Evaluation locations: cell centers for grid sources, the atoms
    /// themselves for ensembles.
    pub locations: Vec<f64>,
    /// `U` at the locations.
    pub values: Vec<f64>,
    /// `dU/dx` at the locations, via analytic kernel derivatives under the
    /// integral sign.
    pub divergence: Vec<f64>,
    /// Grid sources only: `U` at the `M + 1` cell faces.
    pub face_values: Option<Vec<f64>>,
    /// A priori bound `|U| <= sup|grad K| + sup K * C_V^{1/q} * |rho|_{P_V}`.
    pub sup_bound: f64,
}

impl VelocityField {
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for v in &self.values {
            m = m.max(v.abs());
        }
        if let Some(f) = &self.face_values {
            for v in f {
                m = m.max(v.abs());
            }
        }
        m
    }
}

/// Kernel samples at the offset lattice of a uniform grid.
///
/// `int[m]` holds `(K, K', K'')` at `m h`; `half[m]` holds `(K, K')` at
/// `(m + 1/2) h`. Evenness of `K` and oddness of `K'` cover negative offsets.
pub(crate) struct GridKernelTables {
    h: f64,
    cells: usize,
    int: Vec<(f64, f64, f64)>,
    half: Vec<(f64, f64)>,
}

impl GridKernelTables {
    pub(crate) fn new(kernel: &Kernel, h: f64, cells: usize) -> Self {
        let int = (0..cells)
            .map(|m| kernel.pair1_full(m as f64 * h))
            .collect();
        let half = (0..cells)
            .map(|m| kernel.pair1((m as f64 + 0.5) * h))
            .collect();
        Self {
            h,
            cells,
            int,
            half,
        }
    }

    fn matches(&self, rho: &GridDensity) -> bool {
        self.cells == rho.cells() && (self.h - rho.h()).abs() <= 1e-15 * self.h
    }

    /// `K((i - j) h)` and `K'((i - j) h)`.
    #[inline]
    fn center_pair(&self, i: usize, j: usize) -> (f64, f64, f64) {
        if i >= j {
            self.int[i - j]
        } else {
            let (k, kp, kpp) = self.int[j - i];
            (k, -kp, kpp)
        }
    }

    /// `K((f - j - 1/2) h)` and its derivative, `f` a face index in `0..=M`.
    #[inline]
    fn face_pair(&self, f: usize, j: usize) -> (f64, f64) {
        if f > j {
            self.half[f - j - 1]
        } else {
            let (k, kp) = self.half[j - f];
            (k, -kp)
        }
    }
}

fn sup_bound(kernel: &Kernel, potential: &Potential, pv: f64) -> f64 {
    let c = potential
        .c_v()
        .powf(1.0 / potential.assumption_index());
    kernel.gradient_sup() + kernel.value_sup() * c * pv
}

pub(crate) fn grid_velocity_with(
    rho: &GridDensity,
    kernel: &Kernel,
    potential: &Potential,
    tables: &GridKernelTables,
    want_centers: bool,
    want_faces: bool,
) -> VelocityField {
    debug_assert!(tables.matches(rho));
    let m = rho.cells();
    let h = rho.h();
    let values_src = rho.values();
    // a_j = rho_j, b_j = rho_j V'(x_j): the two convolution loads.
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    for j in 0..m {
        a[j] = values_src[j];
        b[j] = values_src[j] * potential.grad_1d(rho.center(j));
    }
    let mut values = vec![0.0; if want_centers { m } else { 0 }];
    let mut divergence = vec![0.0; if want_centers { m } else { 0 }];
    if want_centers {
        for i in 0..m {
            let mut s_grad = 0.0;
            let mut s_val = 0.0;
            let mut s_grad2 = 0.0;
            let mut s_val2 = 0.0;
            for j in 0..m {
                let (k, kp, kpp) = tables.center_pair(i, j);
                s_grad += a[j] * kp;
                s_val += b[j] * k;
                s_grad2 += a[j] * kpp;
                s_val2 += b[j] * kp;
            }
            values[i] = -h * (s_grad + s_val);
            divergence[i] = -h * (s_grad2 + s_val2);
        }
    }
    let face_values = if want_faces {
        let mut faces = vec![0.0; m + 1];
        for (f, out) in faces.iter_mut().enumerate() {
            let mut s_grad = 0.0;
            let mut s_val = 0.0;
            for j in 0..m {
                let (k, kp) = tables.face_pair(f, j);
                s_grad += a[j] * kp;
                s_val += b[j] * k;
            }
            *out = -h * (s_grad + s_val);
        }
        Some(faces)
    } else {
        None
    };
    VelocityField {
        locations: rho.centers(),
        values,
        divergence,
        face_values,
        sup_bound: sup_bound(kernel, potential, rho.pv_norm(potential)),
    }
}

/// `U` and `dU/dx` at the atoms of a weighted ensemble.
pub fn ensemble_velocity(
    points: &[f64],
    weights: &[f64],
    kernel: &Kernel,
    potential: &Potential,
) -> Result<(Vec<f64>, Vec<f64>)> {
    ensemble_velocity_at(points, points, weights, kernel, potential)
}

/// `U` and `dU/dx` induced by the atoms, sampled at arbitrary locations.
pub fn ensemble_velocity_at(
    eval: &[f64],
    points: &[f64],
    weights: &[f64],
    kernel: &Kernel,
    potential: &Potential,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_ensemble(points, weights, kernel, potential)?;
    let grads: Vec<f64> = points.iter().map(|&x| potential.grad_1d(x)).collect();
    let mut vel = vec![0.0; eval.len()];
    let mut div = vec![0.0; eval.len()];
    for (i, &x) in eval.iter().enumerate() {
        let mut s_vel = 0.0;
        let mut s_div = 0.0;
        for j in 0..points.len() {
            let (k, kp, kpp) = kernel.pair1_full(x - points[j]);
            s_vel += weights[j] * (kp + k * grads[j]);
            s_div += weights[j] * (kpp + kp * grads[j]);
        }
        vel[i] = -s_vel;
        div[i] = -s_div;
    }
    Ok((vel, div))
}

/// Velocity only; the Picard inner loop does not need the divergence.
pub(crate) fn ensemble_velocity_values(
    points: &[f64],
    weights: &[f64],
    kernel: &Kernel,
    potential: &Potential,
    out: &mut [f64],
) {
    let n = points.len();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            let (k, kp) = kernel.pair1(points[i] - points[j]);
            s += weights[j] * (kp + k * potential.grad_1d(points[j]));
        }
        out[i] = -s;
    }
}

fn check_ensemble(
    points: &[f64],
    weights: &[f64],
    kernel: &Kernel,
    potential: &Potential,
) -> Result<()> {
    if kernel.dim() != 1 || potential.dim() != 1 {
        return Err(Error::InvalidInput(
            "transport velocity sampling is one-dimensional".into(),
        ));
    }
    if points.len() != weights.len() || points.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} points with {} weights",
            points.len(),
            weights.len()
        )));
    }
    Ok(())
}

/// Evaluates `U[rho]` and its derivative for either density representation.
pub fn velocity_field<'a>(
    rho: impl Into<DensitySource<'a>>,
    kernel: &Kernel,
    potential: &Potential,
) -> Result<VelocityField> {
    match rho.into() {
        DensitySource::Grid(g) => {
            if kernel.dim() != 1 || potential.dim() != 1 {
                return Err(Error::InvalidInput(
                    "grid densities are one-dimensional".into(),
                ));
            }
            let tables = GridKernelTables::new(kernel, g.h(), g.cells());
            Ok(grid_velocity_with(g, kernel, potential, &tables, true, true))
        }
        DensitySource::Ensemble { points, weights } => {
            let (values, divergence) = ensemble_velocity(points, weights, kernel, potential)?;
            let mut pv = 0.0;
            for (x, w) in points.iter().zip(weights) {
                pv += w * (1.0 + potential.value_1d(*x));
            }
            Ok(VelocityField {
                locations: points.to_vec(),
                values,
                divergence,
                face_values: None,
                sup_bound: sup_bound(kernel, potential, pv),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::TargetDensity;

    fn setup() -> (Kernel, Potential) {
        (
            Kernel::gaussian(2.0, 1).unwrap(),
            Potential::quadratic(vec![1.0], 1).unwrap(),
        )
    }

    #[test]
    fn invariant_density_has_vanishing_velocity() {
        let (k, v) = setup();
        let target = TargetDensity::new(&v, 10.0, 2000).unwrap();
        let rho = target.grid().unwrap();
        let field = velocity_field(rho, &k, &v).unwrap();
        assert!(
            field.max_abs() < 1e-6,
            "max |U| = {} on the invariant density",
            field.max_abs()
        );
    }

    #[test]
    fn symmetric_density_gives_odd_velocity() {
        let k = Kernel::gaussian(2.0, 1).unwrap();
        let v = Potential::double_well(1.0, 1.2).unwrap();
        let rho = GridDensity::from_fn(8.0, 512, |x| (-(x * x) / 3.0).exp()).unwrap();
        let field = velocity_field(&rho, &k, &v).unwrap();
        let m = rho.cells();
        for i in 0..m {
            let u_left = field.values[i];
            let u_right = field.values[m - 1 - i];
            assert!(
                (u_left + u_right).abs() < 1e-10,
                "U({}) = {u_left}, U({}) = {u_right}",
                rho.center(i),
                rho.center(m - 1 - i)
            );
        }
    }

    #[test]
    fn single_atom_velocity_is_kernel_gradient() {
        let (k, v) = setup();
        // One atom at the potential minimum: the drift load vanishes, so
        // U(x) = -K'(x) everywhere.
        for x in [-2.0, -0.5, 0.0, 0.3, 1.7] {
            let (vel, div) =
                ensemble_velocity_at(&[x], &[0.0], &[1.0], &k, &v).unwrap();
            let (_, kp, kpp) = k.pair1_full(x);
            assert_eq!(vel[0], -kp, "U({x})");
            assert_eq!(div[0], -kpp, "dU({x})");
        }

        // An atom away from the minimum feels its own drift through K(0).
        let (vel, _) = ensemble_velocity(&[1.0], &[1.0], &k, &v).unwrap();
        assert!((vel[0] + k.value_sup()).abs() < 1e-15);
    }

    #[test]
    fn velocity_respects_the_sup_bound() {
        let k = Kernel::gaussian(2.0, 1).unwrap();
        for v in [
            Potential::quadratic(vec![2.0], 1).unwrap(),
            Potential::monomial(0.5, 4, 1).unwrap(),
        ] {
            let rho =
                GridDensity::from_fn(9.0, 700, |x| (-(x - 1.2) * (x - 1.2)).exp()).unwrap();
            let field = velocity_field(&rho, &k, &v).unwrap();
            assert!(
                field.max_abs() <= field.sup_bound * (1.0 + 1e-12),
                "max |U| {} exceeds bound {}",
                field.max_abs(),
                field.sup_bound
            );
        }
    }

    #[test]
    fn offset_tables_match_direct_kernel_calls() {
        let (k, v) = setup();
        let rho = GridDensity::from_fn(6.0, 157, |x| (-(x * x) / 2.2).exp()).unwrap();
        let field = velocity_field(&rho, &k, &v).unwrap();
        let h = rho.h();
        // Direct O(M^2) evaluation with per-pair kernel calls.
        for i in (0..rho.cells()).step_by(13) {
            let xi = rho.center(i);
            let mut s = 0.0;
            for j in 0..rho.cells() {
                let xj = rho.center(j);
                let (kv, kp) = k.pair1(xi - xj);
                s += h * rho.values()[j] * (kp + kv * v.grad_1d(xj));
            }
            let direct = -s;
            assert!(
                (field.values[i] - direct).abs() <= 1e-12 * (1.0 + direct.abs()),
                "cell {i}: table {} vs direct {direct}",
                field.values[i]
            );
        }
    }

    #[test]
    fn divergence_matches_finite_differences() {
        let (k, v) = setup();
        let rho = GridDensity::from_fn(8.0, 1200, |x| (-(x - 0.7) * (x - 0.7) / 1.8).exp())
            .unwrap();
        let field = velocity_field(&rho, &k, &v).unwrap();
        let h = rho.h();
        for i in (2..rho.cells() - 2).step_by(97) {
            let fd = (field.values[i + 1] - field.values[i - 1]) / (2.0 * h);
            assert!(
                (field.divergence[i] - fd).abs() < 1e-4,
                "cell {i}: analytic {} vs fd {fd}",
                field.divergence[i]
            );
        }
    }

    #[test]
    fn rejects_mismatched_ensembles() {
        let (k, v) = setup();
        assert!(ensemble_velocity(&[0.0, 1.0], &[1.0], &k, &v).is_err());
        assert!(ensemble_velocity(&[], &[], &k, &v).is_err());
    }
}
