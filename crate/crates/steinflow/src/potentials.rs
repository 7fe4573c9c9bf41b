//! Confining potentials and the normalized target density `e^{-V} / Z`.
//!
//! Three closed-form families are shipped: quadratic forms `x' A x / 2` with
//! symmetric positive-definite `A`, radial monomials `m |x|^p` with even
//! `p >= 2`, and the 1-D double well `a (x^2 - b^2)^2`. Each family is smooth,
//! nonnegative, grows at infinity, and satisfies the drift-domination bound
//! `|grad V|^q <= C_V (1 + V)` with conjugate index `q = p / (p - 1)` taken
//! from the family's polynomial growth order `p`. The constant `C_V` is
//! stored on the potential because the particle-energy certificates and the
//! weighted-norm growth bounds are phrased in terms of it.
//!
//! A fourth, degenerate member [`Potential::zero`] turns the drift off
//! entirely. It is not reachable from run configuration; it exists so
//! pure-interaction behavior (translation invariance, frozen atoms) can be
//! exercised in tests and experiments.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

use crate::error::{Error, Result};
use crate::meanfield::GridDensity;

/// Mass fraction allowed outside the truncated domain when normalizing.
const TAIL_BUDGET: f64 = 1e-12;

#[derive(Clone, Debug)]
pub enum PotentialFamily {
    /// `V(x) = x' A x / 2` with `A` symmetric positive definite.
    Quadratic {
        matrix: DMatrix<f64>,
        lambda_min: f64,
        lambda_max: f64,
    },
    /// `V(x) = m |x|^p`, `p` even, `p >= 2`, `m > 0`.
    Monomial { magnitude: f64, power: u32 },
    /// `V(x) = a (x^2 - b^2)^2`, one-dimensional.
    DoubleWell { stiffness: f64, well: f64 },
    /// `V = 0`; interaction-only dynamics.
    Zero,
}

/// A smooth confining potential with closed-form derivatives.
#[derive(Clone, Debug)]
pub struct Potential {
    family: PotentialFamily,
    dim: usize,
    /// Polynomial growth order (2 for quadratic, `p` for monomial, 4 for the
    /// double well).
    p_growth: f64,
    /// Conjugate index `p_growth / (p_growth - 1)` used by the drift bound.
    q: f64,
    /// Constant in `|grad V|^q <= c_v (1 + V)`.
    c_v: f64,
}

/// Value, gradient, and Hessian of a potential at one point.
#[derive(Clone, Debug)]
pub struct PotentialEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `d x d`.
    pub hessian: Vec<f64>,
}

/// Anything that can stand in for a potential in the assumption checker.
///
/// `Potential` implements this; user-defined fields can opt in to run the
/// same sampled verification.
pub trait PotentialField {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Row-major `d x d`.
    fn hessian(&self, x: &[f64]) -> Vec<f64>;
}

impl Potential {
    pub fn quadratic(matrix: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || matrix.len() != dim * dim {
            return Err(Error::InvalidParameter(format!(
                "quadratic potential in dimension {dim} needs {} entries, got {}",
                dim * dim,
                matrix.len()
            )));
        }
        let a = DMatrix::from_row_slice(dim, dim, &matrix);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(
                        "quadratic potential matrix must be symmetric".into(),
                    ));
                }
            }
        }
        let eigen = SymmetricEigen::new(a.clone());
        let lambda_min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let lambda_max = eigen.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(lambda_min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadratic potential matrix must be positive definite \
                 (smallest eigenvalue {lambda_min})"
            )));
        }
        // |A x|^2 <= lambda_max * (x' A x) <= 2 lambda_max (1 + V).
        Ok(Self {
            family: PotentialFamily::Quadratic {
                matrix: a,
                lambda_min,
                lambda_max,
            },
            dim,
            p_growth: 2.0,
            q: 2.0,
            c_v: 2.0 * lambda_max,
        })
    }

    pub fn monomial(magnitude: f64, power: u32, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(magnitude > 0.0) || !magnitude.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "monomial magnitude must be positive and finite, got {magnitude}"
            )));
        }
        if power < 2 || power % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "monomial power must be an even integer >= 2, got {power}"
            )));
        }
        let p = f64::from(power);
        let q = p / (p - 1.0);
        // |grad V|^q = (m p)^q |x|^p = (m p)^q V / m, so c_v = (m p)^q / m.
        let c_v = (magnitude * p).powf(q) / magnitude;
        Ok(Self {
            family: PotentialFamily::Monomial { magnitude, power },
            dim,
            p_growth: p,
            q,
            c_v,
        })
    }

    pub fn double_well(stiffness: f64, well: f64) -> Result<Self> {
        if !(stiffness > 0.0 && stiffness.is_finite()) || !(well > 0.0 && well.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "double well needs positive finite coefficients, got a={stiffness}, b={well}"
            )));
        }
        let q = 4.0 / 3.0;
        // The ratio |V'|^q / (1 + V) tends to (4a)^q / a = 4^{4/3} a^{1/3};
        // its finite-radius maximum is taken over a dense scan.
        let asymptote = 4.0f64.powf(q) * stiffness.powf(q - 1.0);
        let mut c_v = asymptote;
        let radius = 10.0 * (well + 1.0);
        let n = 8000;
        for i in 0..=n {
            let x = radius * i as f64 / n as f64;
            let v = stiffness * (x * x - well * well).powi(2);
            let g = (4.0 * stiffness * x * (x * x - well * well)).abs();
            c_v = c_v.max(g.powf(q) / (1.0 + v));
        }
        Ok(Self {
            family: PotentialFamily::DoubleWell {
                stiffness,
                well,
            },
            dim: 1,
            p_growth: 4.0,
            q,
            c_v,
        })
    }

    /// The zero potential. Not constructible from run configuration.
    pub fn zero(dim: usize) -> Self {
        Self {
            family: PotentialFamily::Zero,
            dim,
            p_growth: 2.0,
            q: 2.0,
            c_v: 0.0,
        }
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Polynomial growth order of the family.
    pub fn growth_order(&self) -> f64 {
        self.p_growth
    }

    /// Conjugate index `q = p / (p - 1)` in the drift-domination bound.
    pub fn assumption_index(&self) -> f64 {
        self.q
    }

    /// Constant `C_V` with `|grad V(x)|^q <= C_V (1 + V(x))`.
    pub fn c_v(&self) -> f64 {
        self.c_v
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, PotentialFamily::Zero)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.family {
            PotentialFamily::Quadratic { matrix, .. } => {
                let mut acc = 0.0;
                for i in 0..self.dim {
                    let mut row = 0.0;
                    for j in 0..self.dim {
                        row += matrix[(i, j)] * x[j];
                    }
                    acc += x[i] * row;
                }
                0.5 * acc
            }
            PotentialFamily::Monomial { magnitude, power } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                magnitude * r2.powi(*power as i32 / 2)
            }
            PotentialFamily::DoubleWell { stiffness, well } => {
                let s = x[0] * x[0] - well * well;
                stiffness * s * s
            }
            PotentialFamily::Zero => 0.0,
        }
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        match &self.family {
            PotentialFamily::Quadratic { matrix, .. } => {
                for i in 0..self.dim {
                    let mut row = 0.0;
                    for j in 0..self.dim {
                        row += matrix[(i, j)] * x[j];
                    }
                    out[i] = row;
                }
            }
            PotentialFamily::Monomial { magnitude, power } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let scale = magnitude * f64::from(*power) * r2.powi((*power as i32 - 2) / 2);
                for i in 0..self.dim {
                    out[i] = scale * x[i];
                }
            }
            PotentialFamily::DoubleWell { stiffness, well } => {
                out[0] = 4.0 * stiffness * x[0] * (x[0] * x[0] - well * well);
            }
            PotentialFamily::Zero => out.fill(0.0),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.gradient_into(x, &mut out);
        out
    }

    /// Row-major `d x d` Hessian.
    pub fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim * self.dim);
        let d = self.dim;
        match &self.family {
            PotentialFamily::Quadratic { matrix, .. } => {
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = matrix[(i, j)];
                    }
                }
            }
            PotentialFamily::Monomial { magnitude, power } => {
                let p = f64::from(*power);
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let iso = magnitude * p * r2.powi((*power as i32 - 2) / 2);
                let aniso = if *power == 2 || r2 == 0.0 {
                    0.0
                } else {
                    magnitude * p * (p - 2.0) * r2.powi((*power as i32 - 4) / 2)
                };
                for i in 0..d {
                    for j in 0..d {
                        let mut h = aniso * (x[i] * x[j]);
                        if i == j {
                            h += iso;
                        }
                        out[i * d + j] = h;
                    }
                }
            }
            PotentialFamily::DoubleWell { stiffness, well } => {
                out[0] = stiffness * (12.0 * x[0] * x[0] - 4.0 * well * well);
            }
            PotentialFamily::Zero => out.fill(0.0),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.hessian_into(x, &mut out);
        out
    }

    /// Value, gradient, and Hessian in one call.
    pub fn eval(&self, x: &[f64]) -> Result<PotentialEval> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("potential evaluated at non-finite point".into()));
        }
        Ok(PotentialEval {
            value: self.value(x),
            gradient: self.gradient(x),
            hessian: self.hessian(x),
        })
    }

    /// Scalar value in dimension one.
    #[inline]
    pub fn value_1d(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        match &self.family {
            PotentialFamily::Quadratic { matrix, .. } => 0.5 * matrix[(0, 0)] * x * x,
            PotentialFamily::Monomial { magnitude, power } => {
                magnitude * (x * x).powi(*power as i32 / 2)
            }
            PotentialFamily::DoubleWell { stiffness, well } => {
                let s = x * x - well * well;
                stiffness * s * s
            }
            PotentialFamily::Zero => 0.0,
        }
    }

    /// Scalar derivative in dimension one.
    #[inline]
    pub fn grad_1d(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        match &self.family {
            PotentialFamily::Quadratic { matrix, .. } => matrix[(0, 0)] * x,
            PotentialFamily::Monomial { magnitude, power } => {
                magnitude * f64::from(*power) * (x * x).powi((*power as i32 - 2) / 2) * x
            }
            PotentialFamily::DoubleWell { stiffness, well } => {
                4.0 * stiffness * x * (x * x - well * well)
            }
            PotentialFamily::Zero => 0.0,
        }
    }

    /// Scalar second derivative in dimension one.
    #[inline]
    pub fn hess_1d(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        match &self.family {
            PotentialFamily::Quadratic { matrix, .. } => matrix[(0, 0)],
            PotentialFamily::Monomial { magnitude, power } => {
                let p = f64::from(*power);
                magnitude * p * (p - 1.0) * (x * x).powi((*power as i32 - 2) / 2)
            }
            PotentialFamily::DoubleWell { stiffness, well } => {
                stiffness * (12.0 * x * x - 4.0 * well * well)
            }
            PotentialFamily::Zero => 0.0,
        }
    }

    /// Upper bound for the Hessian operator norm along the segment `[a, b]`.
    ///
    /// Used by the energy-growth certificate, which needs a sup of `D^2 V`
    /// over the segment a particle traverses in one step.
    pub fn hessian_sup_on_segment(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.dim);
        debug_assert_eq!(b.len(), self.dim);
        match &self.family {
            PotentialFamily::Quadratic { lambda_max, .. } => *lambda_max,
            PotentialFamily::Monomial { magnitude, power } => {
                // Operator norm m p (p - 1) r^{p-2} is increasing in r, and
                // the segment's radius is maximized at an endpoint.
                let p = f64::from(*power);
                let ra: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                let r = ra.max(rb);
                magnitude * p * (p - 1.0) * r.powi(*power as i32 - 2)
            }
            PotentialFamily::DoubleWell { stiffness, well } => {
                // |12 a x^2 - 4 a b^2| is monotone in x^2; extremes of x^2 on
                // the segment are at an endpoint or at 0 if it is crossed.
                let hi = (a[0] * a[0]).max(b[0] * b[0]);
                let lo = if a[0] * b[0] <= 0.0 {
                    0.0
                } else {
                    (a[0] * a[0]).min(b[0] * b[0])
                };
                let at = |x2: f64| (stiffness * (12.0 * x2 - 4.0 * well * well)).abs();
                at(hi).max(at(lo))
            }
            PotentialFamily::Zero => 0.0,
        }
    }
}

impl PotentialField for Potential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        Potential::value(self, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        Potential::gradient(self, x)
    }

    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        Potential::hessian(self, x)
    }
}

/// The normalized stationary density `e^{-V} / Z` on a truncated domain.
#[derive(Clone, Debug)]
pub struct TargetDensity {
    potential: Potential,
    log_normalizer: f64,
    grid: Option<GridDensity>,
}

impl TargetDensity {
    /// Normalizes `e^{-V}` on `[-half_width, half_width]^d`.
    ///
    /// In one dimension this also builds a grid representation. The domain
    /// must be wide enough that an analytic tail bound certifies the mass
    /// outside it below `1e-12` of the total.
    pub fn new(potential: &Potential, half_width: f64, cells: usize) -> Result<Self> {
        if potential.is_zero() {
            return Err(Error::InvalidInput(
                "the zero potential has no normalizable density".into(),
            ));
        }
        if !(half_width > 0.0) || cells < 4 {
            return Err(Error::InvalidParameter(format!(
                "target density needs a positive domain and at least 4 cells, \
                 got half-width {half_width} and {cells} cells"
            )));
        }
        match potential.dim() {
            1 => Self::new_1d(potential, half_width, cells),
            2 => Self::new_2d(potential, half_width, cells),
            d => Err(Error::InvalidParameter(format!(
                "target density supports dimensions 1 and 2, got {d}"
            ))),
        }
    }

    fn new_1d(potential: &Potential, half_width: f64, cells: usize) -> Result<Self> {
        // One-sided tail: integral_L^inf e^{-V} <= e^{-V(L)} / V'(L) when V'
        // is positive and nondecreasing beyond L, which each family
        // guarantees once L clears the last stationary point of V.
        let l = half_width;
        let convex_from = match potential.family() {
            PotentialFamily::DoubleWell { well, .. } => *well,
            _ => 0.0,
        };
        let slope = potential.grad_1d(l);
        if l <= convex_from || !(slope > 0.0) {
            return Err(Error::Truncation {
                boundary: f64::INFINITY,
                limit: TAIL_BUDGET,
            });
        }
        let h = 2.0 * l / cells as f64;
        // Trapezoid over cell edges.
        let mut z = 0.5 * ((-potential.value_1d(-l)).exp() + (-potential.value_1d(l)).exp());
        for i in 1..cells {
            z += (-potential.value_1d(-l + i as f64 * h)).exp();
        }
        z *= h;
        let tail = 2.0 * (-potential.value_1d(l)).exp() / slope;
        if tail > TAIL_BUDGET * z {
            return Err(Error::Truncation {
                boundary: tail / z,
                limit: TAIL_BUDGET,
            });
        }
        let grid = GridDensity::from_fn(l, cells, |x| (-potential.value_1d(x)).exp())?;
        Ok(Self {
            potential: potential.clone(),
            log_normalizer: z.ln(),
            grid: Some(grid),
        })
    }

    fn new_2d(potential: &Potential, half_width: f64, cells: usize) -> Result<Self> {
        let l = half_width;
        let n = cells.min(1200);
        let h = 2.0 * l / n as f64;
        let mut z = 0.0;
        let mut edge_max = 0.0f64;
        for i in 0..=n {
            let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
            let x = -l + i as f64 * h;
            for j in 0..=n {
                let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
                let y = -l + j as f64 * h;
                let f = (-potential.value(&[x, y])).exp();
                z += wi * wj * f;
                if i == 0 || i == n || j == 0 || j == n {
                    edge_max = edge_max.max(f);
                }
            }
        }
        z *= h * h;
        // Crude but sufficient tail control: the integrand must be dead at
        // the boundary relative to the bulk.
        if edge_max > 1e-14 * z / (h * h) {
            return Err(Error::Truncation {
                boundary: edge_max,
                limit: TAIL_BUDGET,
            });
        }
        Ok(Self {
            potential: potential.clone(),
            log_normalizer: z.ln(),
            grid: None,
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `log Z`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// Grid representation; present in dimension one.
    pub fn grid(&self) -> Option<&GridDensity> {
        self.grid.as_ref()
    }

    /// Pointwise `e^{-V(x) - log Z}`.
    pub fn density(&self, x: &[f64]) -> f64 {
        (-self.potential.value(x) - self.log_normalizer).exp()
    }
}

/// Ratio readings on one radial shell.
#[derive(Clone, Copy, Debug)]
pub struct ShellReading {
    pub radius: f64,
    /// Shell sup of `|grad V|^q / (1 + V)`.
    pub gradient_ratio: f64,
    /// Shell sup of `(1 + |x|)(|grad V| + |D^2 V|) / (1 + V)`.
    pub locality_ratio: f64,
}

/// Outcome of the sampled assumption check.
#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub q: f64,
    /// Empirical sup of `|grad V|^q / (1 + V)` over all samples.
    pub c_v_empirical: f64,
    /// Empirical sup of `(1 + |x|)(|grad V| + |D^2 V|) / (1 + V)`.
    pub locality_sup: f64,
    pub shells: Vec<ShellReading>,
    /// Set when either ratio keeps growing between the middle and the
    /// outermost shell, the signature of super-polynomial growth.
    pub violation: bool,
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "assumption check (q = {:.6})", self.q)?;
        writeln!(f, "  sup |grad V|^q / (1+V)              = {:.6e}", self.c_v_empirical)?;
        writeln!(f, "  sup (1+|x|)(|grad V|+|D2 V|)/(1+V)  = {:.6e}", self.locality_sup)?;
        for s in &self.shells {
            writeln!(
                f,
                "  shell r <= {:<10.3} gradient {:.6e}  locality {:.6e}",
                s.radius, s.gradient_ratio, s.locality_ratio
            )?;
        }
        write!(
            f,
            "  verdict: {}",
            if self.violation {
                "VIOLATION (ratios diverge along shells)"
            } else {
                "bounded"
            }
        )
    }
}

/// Samples the drift-domination and locality ratios on concentric shells of
/// radius up to `sample_radius` and flags divergence.
///
/// The shipped families satisfy both bounds analytically; this check guards
/// user-extended fields whose growth may be super-polynomial.
pub fn verify_assumptions_field(
    field: &dyn PotentialField,
    q: f64,
    sample_radius: f64,
    samples: usize,
) -> Result<AssumptionReport> {
    if !(sample_radius > 0.0) || samples == 0 {
        return Err(Error::InvalidParameter(
            "assumption check needs a positive radius and sample count".into(),
        ));
    }
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "assumption index must satisfy q >= 1, got {q}"
        )));
    }
    let d = field.dim();
    let shells = 10usize;
    let per_shell = samples.div_ceil(shells).max(8);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E11);
    let mut report_shells = Vec::with_capacity(shells);
    let mut c_v = 0.0f64;
    let mut locality = 0.0f64;
    for k in 1..=shells {
        let r_lo = sample_radius * (k - 1) as f64 / shells as f64;
        let r_hi = sample_radius * k as f64 / shells as f64;
        let mut grad_sup = 0.0f64;
        let mut loc_sup = 0.0f64;
        for s in 0..per_shell {
            let r = r_lo + (r_hi - r_lo) * (s as f64 + 0.5) / per_shell as f64;
            let x = if d == 1 {
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                vec![sign * r]
            } else {
                let mut dir: Vec<f64> = (0..d)
                    .map(|_| {
                        // Box-Muller pair, first component only.
                        let u: f64 = rng.random::<f64>().max(1e-16);
                        let t: f64 = rng.random();
                        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * t).cos()
                    })
                    .collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                for v in &mut dir {
                    *v *= r / norm;
                }
                dir
            };
            let v = field.value(&x);
            let g = field.gradient(&x);
            let h = field.hessian(&x);
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let hnorm = frobenius(&h);
            let denom = 1.0 + v;
            grad_sup = grad_sup.max(gnorm.powf(q) / denom);
            loc_sup = loc_sup.max((1.0 + r) * (gnorm + hnorm) / denom);
        }
        c_v = c_v.max(grad_sup);
        locality = locality.max(loc_sup);
        report_shells.push(ShellReading {
            radius: r_hi,
            gradient_ratio: grad_sup,
            locality_ratio: loc_sup,
        });
    }
    let mid = &report_shells[shells / 2 - 1];
    let last = &report_shells[shells - 1];
    let grew = |outer: f64, inner: f64| !outer.is_finite() || outer > 2.0 * inner.max(1e-12);
    let violation = grew(last.gradient_ratio, mid.gradient_ratio)
        || grew(last.locality_ratio, mid.locality_ratio);
    Ok(AssumptionReport {
        q,
        c_v_empirical: c_v,
        locality_sup: locality,
        shells: report_shells,
        violation,
    })
}

/// [`verify_assumptions_field`] with the potential's own index `q`.
pub fn verify_assumptions(
    potential: &Potential,
    sample_radius: f64,
    samples: usize,
) -> Result<AssumptionReport> {
    verify_assumptions_field(potential, potential.assumption_index(), sample_radius, samples)
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn families() -> Vec<Potential> {
        vec![
            Potential::quadratic(vec![1.0], 1).unwrap(),
            Potential::quadratic(vec![2.0, 0.5, 0.5, 1.0], 2).unwrap(),
            Potential::monomial(1.0, 4, 1).unwrap(),
            Potential::monomial(0.3, 6, 2).unwrap(),
            Potential::double_well(1.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn quadratic_identity_closed_form() {
        let v = Potential::quadratic(vec![1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let e = v.eval(&[3.0, 4.0]).unwrap();
        assert_eq!(e.value, 12.5);
        assert_eq!(e.gradient, vec![3.0, 4.0]);
        assert_eq!(e.hessian, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(v.assumption_index(), 2.0);
        assert_eq!(v.c_v(), 2.0);
    }

    #[test]
    fn monomial_quartic_closed_form() {
        let v = Potential::monomial(1.0, 4, 1).unwrap();
        assert_eq!(v.value(&[1.0]), 1.0);
        assert_eq!(v.gradient(&[1.0]), vec![4.0]);
        assert!((v.assumption_index() - 4.0 / 3.0).abs() < 1e-15);
        // c_v = (m p)^q / m = 4^{4/3}.
        assert!((v.c_v() - 4.0f64.powf(4.0 / 3.0)).abs() < 1e-12);
        assert_eq!(v.hess_1d(1.0), 12.0);
    }

    #[test]
    fn double_well_closed_form() {
        let v = Potential::double_well(1.0, 1.0).unwrap();
        assert_eq!(v.value(&[0.0]), 1.0);
        assert_eq!(v.value(&[1.0]), 0.0);
        assert_eq!(v.value(&[-1.0]), 0.0);
        assert_eq!(v.gradient(&[1.0]), vec![0.0]);
        assert_eq!(v.gradient(&[-1.0]), vec![0.0]);
        assert_eq!(v.hessian(&[0.0]), vec![-4.0]);
        assert!((v.assumption_index() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_vanish_where_expected() {
        assert_eq!(Potential::quadratic(vec![3.0], 1).unwrap().grad_1d(0.0), 0.0);
        assert_eq!(Potential::monomial(2.0, 4, 1).unwrap().grad_1d(0.0), 0.0);
        let dw = Potential::double_well(0.7, 1.3).unwrap();
        assert_eq!(dw.grad_1d(1.3), 0.0);
        assert_eq!(dw.grad_1d(-1.3), 0.0);
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(Potential::monomial(1.0, 3, 1).is_err());
        assert!(Potential::monomial(1.0, 0, 1).is_err());
        assert!(Potential::monomial(-1.0, 4, 1).is_err());
        assert!(Potential::monomial(0.0, 2, 1).is_err());
        assert!(Potential::double_well(0.0, 1.0).is_err());
        assert!(Potential::double_well(1.0, -1.0).is_err());
        // Indefinite: eigenvalues 3 and -1.
        assert!(Potential::quadratic(vec![1.0, 2.0, 2.0, 1.0], 2).is_err());
        assert!(Potential::quadratic(vec![1.0, 0.5, 0.0, 1.0], 2).is_err());
        assert!(Potential::quadratic(vec![1.0, 0.0], 2).is_err());
    }

    #[test]
    fn evenness_of_all_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for v in families() {
            for _ in 0..50 {
                let x: Vec<f64> =
                    (0..v.dim()).map(|_| 6.0 * rng.random::<f64>() - 3.0).collect();
                let neg: Vec<f64> = x.iter().map(|t| -t).collect();
                assert_eq!(v.value(&x), v.value(&neg));
                let g = v.gradient(&x);
                let gn = v.gradient(&neg);
                for (a, b) in g.iter().zip(&gn) {
                    assert!((a + b).abs() < 1e-12 * (1.0 + a.abs()));
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let step = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for v in families() {
            let d = v.dim();
            for _ in 0..100 {
                let x: Vec<f64> = (0..d).map(|_| 6.0 * rng.random::<f64>() - 3.0).collect();
                let grad = v.gradient(&x);
                let hess = v.hessian(&x);
                for i in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let fd = (v.value(&xp) - v.value(&xm)) / (2.0 * step);
                    assert!(
                        (fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1.0),
                        "gradient mismatch: fd {fd} vs {}",
                        grad[i]
                    );
                    let gp = v.gradient(&xp);
                    let gm = v.gradient(&xm);
                    for j in 0..d {
                        let fd2 = (gp[j] - gm[j]) / (2.0 * step);
                        let h = hess[j * d + i];
                        assert!(
                            (fd2 - h).abs() <= 1e-6 * h.abs().max(1.0),
                            "hessian mismatch: fd {fd2} vs {h}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn hessians_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for v in families() {
            let d = v.dim();
            for _ in 0..20 {
                let x: Vec<f64> = (0..d).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
                let h = v.hessian(&x);
                for i in 0..d {
                    for j in 0..d {
                        assert_eq!(h[i * d + j], h[j * d + i]);
                    }
                }
            }
        }
    }

    #[test]
    fn drift_domination_constant_holds_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for v in families() {
            let q = v.assumption_index();
            let c = v.c_v();
            for _ in 0..400 {
                let x: Vec<f64> =
                    (0..v.dim()).map(|_| 100.0 * rng.random::<f64>() - 50.0).collect();
                let g = v.gradient(&x).iter().map(|t| t * t).sum::<f64>().sqrt();
                let bound = c * (1.0 + v.value(&x));
                assert!(
                    g.powf(q) <= bound * (1.0 + 1e-12),
                    "|grad V|^q = {} exceeds C_V (1+V) = {}",
                    g.powf(q),
                    bound
                );
            }
        }
    }

    #[test]
    fn segment_hessian_bound_dominates_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for v in families() {
            let d = v.dim();
            for _ in 0..50 {
                let a: Vec<f64> = (0..d).map(|_| 8.0 * rng.random::<f64>() - 4.0).collect();
                let b: Vec<f64> = (0..d).map(|_| 8.0 * rng.random::<f64>() - 4.0).collect();
                let bound = v.hessian_sup_on_segment(&a, &b);
                for k in 0..=20 {
                    let t = k as f64 / 20.0;
                    let x: Vec<f64> =
                        a.iter().zip(&b).map(|(p, q)| p + t * (q - p)).collect();
                    let h = v.hessian(&x);
                    // Frobenius dominates the operator norm, so only a
                    // spot-check on the diagonal scale is meaningful here;
                    // use the largest absolute entry as a lower proxy.
                    let proxy = h.iter().fold(0.0f64, |m, t| m.max(t.abs()));
                    assert!(
                        proxy <= bound * (1.0 + 1e-12) + 1e-12,
                        "entry proxy {proxy} exceeds segment bound {bound}"
                    );
                }
            }
        }
    }

    #[test]
    fn gaussian_normalizer_and_grid() {
        let v = Potential::quadratic(vec![1.0], 1).unwrap();
        let t = TargetDensity::new(&v, 10.0, 2000).unwrap();
        // log Z = log sqrt(2 pi).
        assert!((t.log_normalizer() - 0.918_938_533_204_672_7).abs() < 1e-9);
        let g = t.grid().unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-10);
        let peak = g.values().iter().cloned().fold(0.0f64, f64::max);
        assert!((peak - 0.398_942_3).abs() < 1e-5, "peak {peak}");
        assert!((t.density(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-9);
    }

    #[test]
    fn gaussian_normalizer_2d() {
        let v = Potential::quadratic(vec![1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let t = TargetDensity::new(&v, 10.0, 400).unwrap();
        assert!((t.log_normalizer() - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-9);
        assert!(t.grid().is_none());
    }

    #[test]
    fn double_well_target_is_bimodal_and_symmetric() {
        let v = Potential::double_well(1.0, 1.0).unwrap();
        let t = TargetDensity::new(&v, 8.0, 1600).unwrap();
        let g = t.grid().unwrap();
        let m = g.cells();
        for i in 0..m {
            assert!((g.values()[i] - g.values()[m - 1 - i]).abs() <= 1e-12);
        }
        let center = g.values()[m / 2];
        let peak = g.values().iter().cloned().fold(0.0f64, f64::max);
        assert!(peak > 1.5 * center, "expected bimodal profile");
    }

    #[test]
    fn undersized_domain_is_a_truncation_error() {
        let v = Potential::quadratic(vec![1.0], 1).unwrap();
        match TargetDensity::new(&v, 2.0, 200) {
            Err(Error::Truncation { .. }) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn stationarity_identity_on_grid() {
        let v = Potential::quadratic(vec![1.0], 1).unwrap();
        let t = TargetDensity::new(&v, 10.0, 2000).unwrap();
        let g = t.grid().unwrap();
        let h = g.h();
        let vals = g.values();
        // Fourth-order central differences resolve the identity to 1e-6;
        // second order saturates near 1e-5 at this resolution.
        let mut max4 = 0.0f64;
        let mut max2 = 0.0f64;
        for i in 2..g.cells() - 2 {
            let d2 = (vals[i + 1] - vals[i - 1]) / (2.0 * h);
            let d4 = (-vals[i + 2] + 8.0 * vals[i + 1] - 8.0 * vals[i - 1] + vals[i - 2])
                / (12.0 * h);
            let drift = v.grad_1d(g.center(i)) * vals[i];
            max2 = max2.max((d2 + drift).abs());
            max4 = max4.max((d4 + drift).abs());
        }
        assert!(max4 < 1e-6, "fourth-order residual {max4}");
        assert!(max2 < 2e-5, "second-order residual {max2}");
    }

    #[test]
    fn assumption_check_passes_for_shipped_families() {
        for v in families() {
            let r = verify_assumptions(&v, 100.0, 400).unwrap();
            assert!(!r.violation, "flagged {:?}: {r}", v.family());
            assert!(r.c_v_empirical <= v.c_v() * (1.0 + 1e-9));
            assert!(r.locality_sup.is_finite());
        }
    }

    #[test]
    fn assumption_check_flags_exponential_growth() {
        struct ExpStub;
        impl PotentialField for ExpStub {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> f64 {
                (x[0] * x[0]).exp() - 1.0
            }
            fn gradient(&self, x: &[f64]) -> Vec<f64> {
                vec![2.0 * x[0] * (x[0] * x[0]).exp()]
            }
            fn hessian(&self, x: &[f64]) -> Vec<f64> {
                let e = (x[0] * x[0]).exp();
                vec![(2.0 + 4.0 * x[0] * x[0]) * e]
            }
        }
        let r = verify_assumptions_field(&ExpStub, 2.0, 3.0, 400).unwrap();
        assert!(r.violation, "exponential growth must be flagged: {r}");
    }

    #[test]
    fn zero_potential_is_inert() {
        let v = Potential::zero(3);
        assert_eq!(v.value(&[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(v.gradient(&[1.0, 2.0, 3.0]), vec![0.0; 3]);
        assert_eq!(v.c_v(), 0.0);
        assert!(TargetDensity::new(&Potential::zero(1), 10.0, 100).is_err());
    }
}
