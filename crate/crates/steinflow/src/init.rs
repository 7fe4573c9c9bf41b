//! One-dimensional initial densities: evaluation, quantiles, stratified
//! quadrature, and i.i.d. sampling.
//!
//! Experiments start from Gaussians or Gaussian mixtures. Quantile
//! stratification at levels `(k + 1/2) / n` turns any of these into an
//! equal-weight particle cloud whose 1-Wasserstein distance to the continuous
//! density is `O(1/n)`, which is what the convergence studies rely on.

use rand::Rng;
use rand_distr::{Distribution, Normal as NormalSampler};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::meanfield::GridDensity;

/// A smooth initial density on the real line.
#[derive(Clone, Debug)]
pub enum InitialDensity {
    Gaussian { mean: f64, std: f64 },
    /// Positive weights summing to 1.
    GaussianMixture { components: Vec<MixtureComponent> },
}

#[derive(Clone, Copy, Debug)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

impl InitialDensity {
    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !(std > 0.0 && std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian initial density needs finite mean and positive std, \
                 got mean {mean}, std {std}"
            )));
        }
        Ok(Self::Gaussian { mean, std })
    }

    pub fn mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("mixture needs components".into()));
        }
        let mut total = 0.0;
        for c in &components {
            if !(c.weight > 0.0) || !c.mean.is_finite() || !(c.std > 0.0 && c.std.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "bad mixture component: weight {}, mean {}, std {}",
                    c.weight, c.mean, c.std
                )));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(Self::GaussianMixture { components })
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { mean, std } => {
                Normal::new(*mean, *std).expect("validated").pdf(x)
            }
            Self::GaussianMixture { components } => components
                .iter()
                .map(|c| c.weight * Normal::new(c.mean, c.std).expect("validated").pdf(x))
                .sum(),
        }
    }

    /// Derivative of the density.
    pub fn density_gradient(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { mean, std } => {
                let pdf = Normal::new(*mean, *std).expect("validated").pdf(x);
                -(x - mean) / (std * std) * pdf
            }
            Self::GaussianMixture { components } => components
                .iter()
                .map(|c| {
                    let pdf = Normal::new(c.mean, c.std).expect("validated").pdf(x);
                    -c.weight * (x - c.mean) / (c.std * c.std) * pdf
                })
                .sum(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { mean, std } => {
                Normal::new(*mean, *std).expect("validated").cdf(x)
            }
            Self::GaussianMixture { components } => components
                .iter()
                .map(|c| c.weight * Normal::new(c.mean, c.std).expect("validated").cdf(x))
                .sum(),
        }
    }

    /// Inverse CDF at `u` in (0, 1); bisection for mixtures.
    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u < 1.0);
        match self {
            Self::Gaussian { mean, std } => {
                Normal::new(*mean, *std).expect("validated").inverse_cdf(u)
            }
            Self::GaussianMixture { components } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for c in components {
                    lo = lo.min(c.mean - 12.0 * c.std);
                    hi = hi.max(c.mean + 12.0 * c.std);
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-13 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Equal-mass stratification: quantiles at `(k + 1/2) / n`.
    pub fn quantile_points(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| self.quantile((k as f64 + 0.5) / n as f64))
            .collect()
    }

    /// Cell-averaged representation on `[-half_width, half_width]`.
    pub fn grid(&self, half_width: f64, cells: usize) -> Result<GridDensity> {
        GridDensity::from_fn(half_width, cells, |x| self.density(x))
    }

    /// `n` i.i.d. draws.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Self::Gaussian { mean, std } => {
                let d = NormalSampler::new(*mean, *std).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::GaussianMixture { components } => {
                let samplers: Vec<(f64, NormalSampler<f64>)> = components
                    .iter()
                    .map(|c| (c.weight, NormalSampler::new(c.mean, c.std).expect("validated")))
                    .collect();
                (0..n)
                    .map(|_| {
                        let mut u: f64 = rng.random();
                        for (w, s) in &samplers {
                            if u < *w {
                                return s.sample(rng);
                            }
                            u -= w;
                        }
                        samplers.last().expect("nonempty").1.sample(rng)
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn symmetric_mixture() -> InitialDensity {
        InitialDensity::mixture(vec![
            MixtureComponent {
                weight: 0.5,
                mean: -1.5,
                std: 0.5,
            },
            MixtureComponent {
                weight: 0.5,
                mean: 1.5,
                std: 0.5,
            },
        ])
        .unwrap()
    }

    #[test]
    fn gaussian_quantiles_round_trip() {
        let g = InitialDensity::gaussian(2.0, 1.0).unwrap();
        for &u in &[0.01, 0.2, 0.5, 0.8, 0.99] {
            let x = g.quantile(u);
            assert!((g.cdf(x) - u).abs() < 1e-10);
        }
        assert!((g.quantile(0.5) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn mixture_quantiles_invert_cdf_and_respect_symmetry() {
        let m = symmetric_mixture();
        for &u in &[0.05, 0.25, 0.5, 0.75, 0.95] {
            let x = m.quantile(u);
            assert!((m.cdf(x) - u).abs() < 1e-10, "u {u}, x {x}");
            let mirrored = m.quantile(1.0 - u);
            assert!((x + mirrored).abs() < 1e-9);
        }
    }

    #[test]
    fn stratified_points_match_grid_mass() {
        let g = InitialDensity::gaussian(0.0, 1.0).unwrap();
        let pts = g.quantile_points(512);
        assert_eq!(pts.len(), 512);
        for w in pts.windows(2) {
            assert!(w[0] < w[1]);
        }
        // Empirical mean/variance of the stratified cloud.
        let mean: f64 = pts.iter().sum::<f64>() / 512.0;
        let var: f64 = pts.iter().map(|x| x * x).sum::<f64>() / 512.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn grid_matches_continuous_density() {
        let g = InitialDensity::gaussian(0.5, 1.0).unwrap();
        let grid = g.grid(12.0, 2000).unwrap();
        let mid = grid.cells() / 2;
        for i in (0..grid.cells()).step_by(97) {
            let x = grid.center(i);
            assert!((grid.values()[i] - g.density(x)).abs() < 1e-8);
        }
        assert!(grid.values()[mid] > 0.3);
    }

    #[test]
    fn sampling_matches_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = symmetric_mixture();
        let xs = m.sample(200_000, &mut rng);
        let mean: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
        let var: f64 = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64 - mean * mean;
        // Mixture variance = 0.25 + 1.5^2 = 2.5.
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 2.5).abs() < 0.05, "var {var}");
    }

    #[test]
    fn density_gradient_matches_finite_differences() {
        let step = 1e-6;
        for d in [InitialDensity::gaussian(0.7, 1.3).unwrap(), symmetric_mixture()] {
            for k in -20..=20 {
                let x = 0.25 * k as f64;
                let fd = (d.density(x + step) - d.density(x - step)) / (2.0 * step);
                assert!((fd - d.density_gradient(x)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(InitialDensity::gaussian(0.0, 0.0).is_err());
        assert!(InitialDensity::gaussian(f64::NAN, 1.0).is_err());
        assert!(InitialDensity::mixture(vec![]).is_err());
        assert!(InitialDensity::mixture(vec![MixtureComponent {
            weight: 0.7,
            mean: 0.0,
            std: 1.0
        }])
        .is_err());
    }
}
