//! Interaction kernels.
//!
//! The kernel family shipped here is the Gaussian density profile
//!
//! ```text
//! K_s(x) = (2 pi s)^(-d/2) exp(-|x|^2 / (2 s)),   x in R^d,
//! ```
//!
//! parameterized by a variance `s > 0`. It is smooth, bounded together with
//! all derivatives, even, integrable with unit mass, and positive definite:
//! for any points `x_1..x_n` and vectors `xi_1..xi_n`,
//! `sum_ij K(x_i - x_j) <xi_i, xi_j> >= 0`. Positive definiteness is what
//! makes the kernelized dissipation functionals in this crate signed, so
//! [`gram_matrix`]/[`psd_check`] exist to validate it numerically on
//! arbitrary point sets.
//!
//! The default variance used throughout the crate and its experiments is
//! `s = 2`, giving `K(x) = (4 pi)^(-d/2) exp(-|x|^2/4)`.
//!
//! A Gaussian kernel factors as a convolution square: `K_s = K_{s/2} * K_{s/2}`
//! (Fourier transform `exp(-s |xi|^2 / 2)` is the square of `exp(-s |xi|^2 / 4)`).
//! [`Kernel::half_factor`] returns that square root; the long-time diagnostics
//! use it to express the dissipation as a genuine squared L^2 norm.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Kernel families understood by the crate.
///
/// Only the Gaussian profile is shipped: it satisfies every standing
/// assumption (bounded `C^4`, even, positive definite) and admits a
/// convolution square root in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
}

/// A smooth, even, positive-definite interaction kernel on `R^d`.
#[derive(Clone, Debug)]
pub struct Kernel {
    family: KernelFamily,
    variance: f64,
    dim: usize,
    /// Normalization (2 pi s)^(-d/2) = K(0), cached.
    norm: f64,
    inv_s: f64,
    inv_2s: f64,
}

/// Value and derivatives of a kernel at one point, bundled.
#[derive(Clone, Debug)]
pub struct KernelEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `d x d` Hessian.
    pub hessian: Vec<f64>,
    pub laplacian: f64,
}

/// Outcome of a numerical positive-semidefiniteness check.
#[derive(Clone, Copy, Debug)]
pub struct PsdReport {
    /// Smallest eigenvalue of the (symmetrized) matrix.
    pub min_eigenvalue: f64,
    /// Largest eigenvalue magnitude, used as the tolerance scale.
    pub scale: f64,
    /// Whether `min_eigenvalue >= -tol * scale`.
    pub is_psd: bool,
}

impl Kernel {
    /// Gaussian kernel with the given variance on `R^dim`.
    ///
    /// # Errors
    ///
    /// Rejects non-finite or non-positive variance and `dim = 0`.
    pub fn gaussian(variance: f64, dim: usize) -> Result<Self> {
        if !variance.is_finite() || variance <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kernel variance must be positive and finite, got {variance}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "kernel dimension must be at least 1".into(),
            ));
        }
        let norm = (2.0 * std::f64::consts::PI * variance).powf(-(dim as f64) / 2.0);
        Ok(Self {
            family: KernelFamily::Gaussian,
            variance,
            dim,
            norm,
            inv_s: 1.0 / variance,
            inv_2s: 0.5 / variance,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// K(x).
    pub fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "kernel argument has wrong dimension");
        self.value_r2(sq_norm(x))
    }

    /// grad K(x) = -(x / s) K(x), written into `out`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim, "kernel argument has wrong dimension");
        assert_eq!(out.len(), self.dim, "gradient buffer has wrong dimension");
        let k = self.value_r2(sq_norm(x));
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = -xi * self.inv_s * k;
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.gradient_into(x, &mut out);
        out
    }

    /// Hessian D^2 K(x) = (x x^T / s^2 - I / s) K(x), row-major into `out`.
    pub fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim, "kernel argument has wrong dimension");
        assert_eq!(out.len(), self.dim * self.dim, "hessian buffer has wrong size");
        let k = self.value_r2(sq_norm(x));
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                let mut v = x[i] * x[j] * self.inv_s * self.inv_s * k;
                if i == j {
                    v -= self.inv_s * k;
                }
                out[i * d + j] = v;
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.hessian_into(x, &mut out);
        out
    }

    /// Laplacian  (|x|^2 / s^2 - d / s) K(x).
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "kernel argument has wrong dimension");
        let r2 = sq_norm(x);
        (r2 * self.inv_s * self.inv_s - self.dim as f64 * self.inv_s) * self.value_r2(r2)
    }

    /// Value, gradient, Hessian, and Laplacian in one call (one `exp`).
    pub fn eval(&self, x: &[f64]) -> KernelEval {
        assert_eq!(x.len(), self.dim, "kernel argument has wrong dimension");
        let d = self.dim;
        let r2 = sq_norm(x);
        let k = self.value_r2(r2);
        let mut gradient = vec![0.0; d];
        for (g, &xi) in gradient.iter_mut().zip(x) {
            *g = -xi * self.inv_s * k;
        }
        let mut hessian = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut v = x[i] * x[j] * self.inv_s * self.inv_s * k;
                if i == j {
                    v -= self.inv_s * k;
                }
                hessian[i * d + j] = v;
            }
        }
        let laplacian = (r2 * self.inv_s * self.inv_s - d as f64 * self.inv_s) * k;
        KernelEval {
            value: k,
            gradient,
            hessian,
            laplacian,
        }
    }

    /// sup |K| = K(0).
    pub fn value_sup(&self) -> f64 {
        self.norm
    }

    /// sup |grad K|, attained at |x| = sqrt(s): K(0) e^(-1/2) / sqrt(s).
    pub fn gradient_sup(&self) -> f64 {
        self.norm * (-0.5f64).exp() / self.variance.sqrt()
    }

    /// sup of the Hessian spectral norm, attained at the origin: K(0) / s.
    pub fn hessian_sup(&self) -> f64 {
        self.norm * self.inv_s
    }

    /// The kernel `K_half` with `K = K_half * K_half` (convolution).
    ///
    /// For a Gaussian this is the Gaussian of half the variance; the identity
    /// is exact because convolving centered Gaussian densities adds variances.
    ///
    /// # Errors
    ///
    /// Families without a convolution square root report
    /// [`Error::NotFactorizable`]. (Every shipped family factors.)
    pub fn half_factor(&self) -> Result<Kernel> {
        match self.family {
            KernelFamily::Gaussian => Kernel::gaussian(self.variance / 2.0, self.dim),
        }
    }

    /// Gram matrix `G_ij = K(x_i - x_j)` for `points` stored flat
    /// (`n * dim` values, point-major).
    pub fn gram_matrix(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        if points.len() % self.dim != 0 {
            return Err(Error::InvalidInput(format!(
                "point buffer of length {} is not a multiple of dim {}",
                points.len(),
                self.dim
            )));
        }
        let n = points.len() / self.dim;
        let d = self.dim;
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            g[(i, i)] = self.norm;
            for j in (i + 1)..n {
                let mut r2 = 0.0;
                for c in 0..d {
                    let dx = points[i * d + c] - points[j * d + c];
                    r2 += dx * dx;
                }
                let v = self.value_r2(r2);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// K from the squared radius; shared by every hot loop.
    #[inline]
    pub(crate) fn value_r2(&self, r2: f64) -> f64 {
        self.norm * (-r2 * self.inv_2s).exp()
    }

    /// One-dimensional (K, K') at displacement `dx` with a single `exp`.
    #[inline]
    pub(crate) fn pair1(&self, dx: f64) -> (f64, f64) {
        let k = self.norm * (-dx * dx * self.inv_2s).exp();
        (k, -dx * self.inv_s * k)
    }

    /// One-dimensional (K, K', K'') at displacement `dx` with a single `exp`.
    #[inline]
    pub(crate) fn pair1_full(&self, dx: f64) -> (f64, f64, f64) {
        let k = self.norm * (-dx * dx * self.inv_2s).exp();
        (
            k,
            -dx * self.inv_s * k,
            (dx * dx * self.inv_s * self.inv_s - self.inv_s) * k,
        )
    }
}

/// Numerical positive-semidefiniteness check for a symmetric matrix.
///
/// Passes when the smallest eigenvalue is at least `-tol * scale`, where
/// `scale` is the largest eigenvalue magnitude. Kernel Gram matrices must
/// pass this for every point set; that is the standing positivity assumption.
///
/// # Errors
///
/// Rejects non-square input and matrices whose asymmetry exceeds
/// `1e-12 * max |entry|`.
pub fn psd_check(matrix: &DMatrix<f64>, tol: f64) -> Result<PsdReport> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::InvalidInput(format!(
            "psd check needs a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let entry_scale = matrix.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    for i in 0..matrix.nrows() {
        for j in (i + 1)..matrix.ncols() {
            if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * entry_scale.max(1e-300) {
                return Err(Error::InvalidInput(format!(
                    "psd check needs a symmetric matrix; entries ({i},{j}) and ({j},{i}) differ"
                )));
            }
        }
    }
    let eigen = matrix.clone().symmetric_eigen();
    let mut min_eigenvalue = f64::INFINITY;
    let mut scale = 0.0f64;
    for &ev in eigen.eigenvalues.iter() {
        min_eigenvalue = min_eigenvalue.min(ev);
        scale = scale.max(ev.abs());
    }
    Ok(PsdReport {
        min_eigenvalue,
        scale,
        is_psd: min_eigenvalue >= -tol * scale,
    })
}

#[inline]
fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // (4 pi)^(-1/2) and (2 pi)^(-1/2), the canonical kernel heights.
    const K0_S2_D1: f64 = 0.282_094_791_773_878_14;
    const K0_S1_D1: f64 = 0.398_942_280_401_432_7;

    #[test]
    fn canonical_values_at_origin() {
        let k2 = Kernel::gaussian(2.0, 1).unwrap();
        assert_relative_eq!(k2.value(&[0.0]), K0_S2_D1, max_relative = 1e-12);
        assert_eq!(k2.gradient(&[0.0]), vec![0.0]);

        let k1 = Kernel::gaussian(1.0, 1).unwrap();
        assert_relative_eq!(k1.value(&[0.0]), K0_S1_D1, max_relative = 1e-12);
    }

    #[test]
    fn laplacian_at_origin() {
        // d = 1, s = 2: K''(0) = -K(0)/2.
        let k = Kernel::gaussian(2.0, 1).unwrap();
        assert_relative_eq!(k.laplacian(&[0.0]), -0.141_047_395_886_939_07, max_relative = 1e-12);

        // d = 2, s = 2: Laplacian at 0 is -(d/s) K(0) = -K(0).
        let k2 = Kernel::gaussian(2.0, 2).unwrap();
        assert_relative_eq!(k2.laplacian(&[0.0, 0.0]), -k2.value(&[0.0, 0.0]), max_relative = 1e-12);
    }

    #[test]
    fn evenness_and_odd_gradient() {
        let k = Kernel::gaussian(2.0, 3).unwrap();
        let pts = [
            [0.3, -1.2, 0.7],
            [2.0, 0.1, -0.4],
            [-1.5, -1.5, 2.2],
        ];
        for p in pts {
            let m: Vec<f64> = p.iter().map(|v| -v).collect();
            assert_eq!(k.value(&p), k.value(&m));
            let g = k.gradient(&p);
            let gm = k.gradient(&m);
            for (a, b) in g.iter().zip(&gm) {
                assert_relative_eq!(*a, -*b, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn eval_bundles_match_individual_calls() {
        let k = Kernel::gaussian(1.7, 2).unwrap();
        let x = [0.4, -0.9];
        let e = k.eval(&x);
        assert_eq!(e.value, k.value(&x));
        assert_eq!(e.gradient, k.gradient(&x));
        assert_eq!(e.hessian, k.hessian(&x));
        assert_eq!(e.laplacian, k.laplacian(&x));
        // Laplacian is the Hessian trace.
        let trace = e.hessian[0] + e.hessian[3];
        assert_relative_eq!(e.laplacian, trace, max_relative = 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = Kernel::gaussian(2.0, 2).unwrap();
        let pts = [[0.5, 0.2], [1.5, -0.7], [-0.3, 2.1], [0.0, 0.9]];
        let h = 1e-4;
        for p in pts {
            let g = k.gradient(&p);
            for c in 0..2 {
                let mut hi = p;
                let mut lo = p;
                hi[c] += h;
                lo[c] -= h;
                let fd = (k.value(&hi) - k.value(&lo)) / (2.0 * h);
                assert!(
                    (fd - g[c]).abs() <= 1e-6 * g[c].abs().max(1e-2 * k.value_sup()),
                    "fd {fd} vs analytic {} at {p:?}",
                    g[c]
                );
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let k = Kernel::gaussian(2.0, 2).unwrap();
        let pts = [[0.5, 0.2], [1.1, -0.6], [0.0, 0.0]];
        let h = 1e-4;
        for p in pts {
            let hess = k.hessian(&p);
            for c in 0..2 {
                let mut hi = p;
                let mut lo = p;
                hi[c] += h;
                lo[c] -= h;
                let ghi = k.gradient(&hi);
                let glo = k.gradient(&lo);
                for r in 0..2 {
                    let fd = (ghi[r] - glo[r]) / (2.0 * h);
                    assert!(
                        (fd - hess[r * 2 + c]).abs() <= 1e-6 * hess[r * 2 + c].abs().max(1e-2 * k.value_sup()),
                        "fd {fd} vs analytic {} at {p:?}",
                        hess[r * 2 + c]
                    );
                }
            }
        }
    }

    #[test]
    fn sup_norms_match_grid_maxima() {
        let k = Kernel::gaussian(2.0, 1).unwrap();
        let mut gmax = 0.0f64;
        let mut hmax = 0.0f64;
        let mut x = -8.0;
        while x <= 8.0 {
            gmax = gmax.max(k.gradient(&[x])[0].abs());
            hmax = hmax.max(k.hessian(&[x])[0].abs());
            x += 1e-3;
        }
        assert_relative_eq!(gmax, k.gradient_sup(), max_relative = 1e-5);
        assert_relative_eq!(hmax, k.hessian_sup(), max_relative = 1e-5);
        assert_relative_eq!(k.value(&[0.0]), k.value_sup(), max_relative = 1e-15);
    }

    #[test]
    fn half_factor_halves_variance_and_convolves_back() {
        let k = Kernel::gaussian(2.0, 1).unwrap();
        let half = k.half_factor().unwrap();
        assert_relative_eq!(half.variance(), 1.0, max_relative = 1e-15);

        // Trapezoid quadrature of (K_half * K_half)(x) on [-20, 20], spacing 1e-2.
        let h = 1e-2;
        let n = (40.0 / h) as usize;
        for &x in &[0.0, 0.5, 1.0, 2.0, 3.7] {
            let mut acc = 0.0;
            for i in 0..=n {
                let y = -20.0 + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * half.value(&[y]) * half.value(&[x - y]);
            }
            acc *= h;
            assert!(
                (acc - k.value(&[x])).abs() < 1e-6,
                "self-convolution mismatch at x = {x}: {acc} vs {}",
                k.value(&[x])
            );
        }
    }

    #[test]
    fn fourier_transform_is_square_of_half_factor() {
        // K_hat(xi) = exp(-s xi^2 / 2) for the Gaussian density profile; the
        // half factor squares to it. Transforms computed by quadrature.
        let k = Kernel::gaussian(2.0, 1).unwrap();
        let half = k.half_factor().unwrap();
        let h = 1e-2;
        let n = (40.0 / h) as usize;
        let transform = |ker: &Kernel, xi: f64| -> f64 {
            let mut acc = 0.0;
            for i in 0..=n {
                let y = -20.0 + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * ker.value(&[y]) * (xi * y).cos();
            }
            acc * h
        };
        for j in 0..=16 {
            let xi = j as f64 * 0.25;
            let lhs = transform(&k, xi);
            let rhs = transform(&half, xi).powi(2);
            assert!(
                (lhs - rhs).abs() < 1e-10,
                "fourier factorization failed at xi = {xi}: {lhs} vs {rhs}"
            );
            assert!((lhs - (-xi * xi).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn coincident_pair_gram_spectrum() {
        let k = Kernel::gaussian(2.0, 1).unwrap();
        let g = k.gram_matrix(&[0.7, 0.7]).unwrap();
        let mut eigs: Vec<f64> = g.symmetric_eigen().eigenvalues.iter().copied().collect();
        eigs.sort_by(f64::total_cmp);
        assert!(eigs[0].abs() < 1e-12);
        assert_relative_eq!(eigs[1], 0.564_189_583_547_756_3, max_relative = 1e-9);
    }

    #[test]
    fn gram_matrices_are_psd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for d in 1..=3usize {
            let k = Kernel::gaussian(2.0, d).unwrap();
            for _ in 0..5 {
                let n = rng.random_range(2..=32);
                let pts: Vec<f64> = (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect();
                let g = k.gram_matrix(&pts).unwrap();
                let report = psd_check(&g, 1e-10).unwrap();
                assert!(report.is_psd, "gram not psd: min eig {}", report.min_eigenvalue);
            }
        }
    }

    #[test]
    fn indefinite_matrix_fails_psd_check() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let report = psd_check(&m, 1e-10).unwrap();
        assert!(!report.is_psd);
        assert_relative_eq!(report.min_eigenvalue, -1.0, max_relative = 1e-12);
    }

    #[test]
    fn psd_check_rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.1, 1.0]);
        assert!(matches!(psd_check(&m, 1e-10), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gram_factorizable_after_jitter() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let k = Kernel::gaussian(2.0, 1).unwrap();
        let pts: Vec<f64> = (0..24).map(|_| rng.random_range(-4.0..4.0)).collect();
        let mut g = k.gram_matrix(&pts).unwrap();
        for i in 0..24 {
            g[(i, i)] += 1e-12;
        }
        assert!(g.cholesky().is_some(), "jittered gram should factor");
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert!(matches!(Kernel::gaussian(0.0, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(Kernel::gaussian(-1.0, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(Kernel::gaussian(f64::NAN, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(Kernel::gaussian(1.0, 0), Err(Error::InvalidParameter(_))));
    }
}
