//! Gaussian-process regression with half-integer Matérn kernels.
//!
//! Fits are Cholesky-factored once per dataset/hyperparameter pair and then
//! give O(n) predictive means and O(n²) latent variances per query point.
//! Observations are standardized and inputs normalized to the unit cube
//! before fitting; all posterior quantities live in that transformed space.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::optim::{self, OptimSpace, OptimizerConfig};

/// Jitter levels tried (added to the noise diagonal) before a factorization
/// failure is reported. Near-duplicate query points late in a BO run can
/// make `K + σ²I` numerically indefinite.
const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Matérn smoothness, restricted to the half-integers with closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternNu {
    /// Closed-form correlation at scaled distance `r >= 0`.
    fn correlation(self, r: f64) -> f64 {
        match self {
            MaternNu::Half => (-r).exp(),
            MaternNu::ThreeHalves => {
                let s = 3f64.sqrt() * r;
                (1.0 + s) * (-s).exp()
            }
            MaternNu::FiveHalves => {
                let s = 5f64.sqrt() * r;
                (1.0 + s + 5.0 * r * r / 3.0) * (-s).exp()
            }
        }
    }
}

/// A Matérn kernel with an isotropic (length-1) or per-dimension
/// lengthscale vector and a fixed output scale.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub nu: MaternNu,
    pub lengthscale: Vec<f64>,
    pub output_scale: f64,
}

impl KernelSpec {
    /// Isotropic kernel with output scale 1.
    pub fn isotropic(nu: MaternNu, lengthscale: f64) -> Self {
        KernelSpec {
            nu,
            lengthscale: vec![lengthscale],
            output_scale: 1.0,
        }
    }

    /// Same kernel family and output scale, different lengthscale.
    pub fn with_lengthscale(&self, lengthscale: Vec<f64>) -> Self {
        KernelSpec {
            nu: self.nu,
            lengthscale,
            output_scale: self.output_scale,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscale.is_empty()
            || self.lengthscale.iter().any(|l| !(l.is_finite() && *l > 0.0))
        {
            return Err(Error::InvalidKernel(format!(
                "lengthscale must be positive and finite, got {:?}",
                self.lengthscale
            )));
        }
        if self.lengthscale.len() != 1 && self.lengthscale.len() != dim {
            return Err(Error::InvalidKernel(format!(
                "lengthscale has {} components for {dim}-dimensional inputs",
                self.lengthscale.len()
            )));
        }
        if !(self.output_scale.is_finite() && self.output_scale > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "output scale must be positive, got {}",
                self.output_scale
            )));
        }
        Ok(())
    }

    fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for j in 0..x.len() {
            let l = if self.lengthscale.len() == 1 {
                self.lengthscale[0]
            } else {
                self.lengthscale[j]
            };
            let d = (x[j] - y[j]) / l;
            r2 += d * d;
        }
        r2
    }
}

/// Kernel value `k(x, x')`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "point dimensions differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    spec.validate(x.len())?;
    let r = spec.scaled_sq_dist(x, y).sqrt();
    Ok(spec.output_scale * spec.nu.correlation(r))
}

/// Dense kernel matrix over the rows of `x`; symmetric with
/// `output_scale` on the diagonal.
pub fn kernel_matrix(spec: &KernelSpec, x: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = x.len();
    if n > 0 {
        spec.validate(x[0].len())?;
    }
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = spec.output_scale;
        for j in (i + 1)..n {
            let r = spec.scaled_sq_dist(&x[i], &x[j]).sqrt();
            let v = spec.output_scale * spec.nu.correlation(r);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Observations with their input/output transforms.
///
/// Inputs are stored normalized to the unit cube; outputs both raw and
/// standardized. Transforms are refit from scratch on the full data, so a
/// `Dataset` is an immutable snapshot — build a fresh one per round.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Normalized inputs, one row per observation, each in `[0,1]^d`.
    pub x: Vec<Vec<f64>>,
    pub y_raw: Vec<f64>,
    pub y_std: Vec<f64>,
    pub out_mean: f64,
    pub out_std: f64,
    /// Original-unit bounds per input dimension.
    pub bounds: Vec<(f64, f64)>,
    /// True when standardization was degenerate (fewer than two
    /// observations, or all observations equal).
    pub degenerate_std: bool,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn normalize_point(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.bounds)
            .map(|(v, &(lo, hi))| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    }

    pub fn denormalize_point(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(&self.bounds)
            .map(|(u, &(lo, hi))| lo + u * (hi - lo))
            .collect()
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.out_mean) / self.out_std
    }

    pub fn destandardize(&self, y_std: f64) -> f64 {
        self.out_mean + y_std * self.out_std
    }
}

/// Normalizes inputs to the unit cube and standardizes outputs (unbiased
/// standard deviation, floored at 1e-8 when the observations are constant;
/// fixed at 1 for fewer than two observations).
pub fn fit_transforms(
    raw_x: &[Vec<f64>],
    raw_y: &[f64],
    bounds: &[(f64, f64)],
) -> Result<Dataset> {
    if raw_x.len() != raw_y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} inputs vs {} outputs",
            raw_x.len(),
            raw_y.len()
        )));
    }
    for &(lo, hi) in bounds {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "bounds must satisfy lower < upper, got ({lo}, {hi})"
            )));
        }
    }
    for (i, row) in raw_x.iter().enumerate() {
        if row.len() != bounds.len() {
            return Err(Error::InvalidArgument(format!(
                "input row {i} has {} components, expected {}",
                row.len(),
                bounds.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) || !raw_y[i].is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite value in observation {i}"
            )));
        }
    }

    let n = raw_y.len();
    let out_mean = if n == 0 {
        0.0
    } else {
        raw_y.iter().sum::<f64>() / n as f64
    };
    let (out_std, degenerate_std) = if n <= 1 {
        (1.0, true)
    } else {
        let var = raw_y.iter().map(|y| (y - out_mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        if std < 1e-8 { (1e-8, true) } else { (std, false) }
    };

    let mut data = Dataset {
        x: Vec::with_capacity(n),
        y_raw: raw_y.to_vec(),
        y_std: raw_y.iter().map(|y| (y - out_mean) / out_std).collect(),
        out_mean,
        out_std,
        bounds: bounds.to_vec(),
        degenerate_std,
    };
    data.x = raw_x.iter().map(|row| data.normalize_point(row)).collect();
    Ok(data)
}

/// Cholesky-factored GP posterior over standardized observations.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    pub kernel: KernelSpec,
    pub noise_var: f64,
    /// Lower-triangular factor of `K + (σ² + jitter)·I`.
    chol: DMatrix<f64>,
    /// `(K + σ²I)^{-1} y_std`.
    weights: DVector<f64>,
    /// Jitter that was needed for the factorization to succeed.
    pub jitter: f64,
    /// Snapshot of the data the posterior was fit on.
    pub data: Dataset,
}

pub(crate) fn cholesky_with_jitter(k: &DMatrix<f64>, noise_var: f64) -> Result<(DMatrix<f64>, f64)> {
    let n = k.nrows();
    let mut tried = Vec::new();
    for jitter in JITTER_LADDER {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += noise_var + jitter;
        }
        if let Some(chol) = m.cholesky() {
            return Ok((chol.unpack(), jitter));
        }
        tried.push(jitter);
    }
    Err(Error::Cholesky { tried })
}

/// Fits a GP posterior on the standardized observations of `data`.
pub fn gp_fit(data: &Dataset, spec: &KernelSpec, noise_var: f64) -> Result<GpPosterior> {
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    let k = kernel_matrix(spec, &data.x)?;
    let (chol, jitter) = cholesky_with_jitter(&k, noise_var)?;
    let y = DVector::from_column_slice(&data.y_std);
    // two triangular solves: L z = y, Lᵀ w = z
    let z = chol
        .solve_lower_triangular(&y)
        .expect("factor has positive diagonal");
    let weights = chol
        .transpose()
        .solve_upper_triangular(&z)
        .expect("factor has positive diagonal");
    Ok(GpPosterior {
        kernel: spec.clone(),
        noise_var,
        chol,
        weights,
        jitter,
        data: data.clone(),
    })
}

impl GpPosterior {
    /// Predictive mean and latent variance at `x` (unit-cube coordinates).
    /// The variance is clamped to `[0, output_scale]`; an empty posterior
    /// returns the prior `(0, output_scale)`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.data.len();
        if n == 0 {
            return (0.0, self.kernel.output_scale);
        }
        let k_star = DVector::from_fn(n, |i, _| {
            let r = self.kernel.scaled_sq_dist(&self.data.x[i], x).sqrt();
            self.kernel.output_scale * self.kernel.nu.correlation(r)
        });
        let mean = k_star.dot(&self.weights);
        let v = self
            .chol
            .solve_lower_triangular(&k_star)
            .expect("factor has positive diagonal");
        let latent = self.kernel.output_scale - v.norm_squared();
        (mean, latent.clamp(0.0, self.kernel.output_scale))
    }

    /// Diagonal of the inverse of `K + σ²I` together with `(K+σ²I)^{-1} y`,
    /// the ingredients of the leave-one-out identities.
    pub(crate) fn precision_parts(&self) -> (DVector<f64>, &DVector<f64>) {
        let n = self.data.len();
        // columns of L^{-1} give the inverse diagonal: (K_y^{-1})_{ii} = ‖L^{-1} e_i‖²
        let mut inv_diag = DVector::zeros(n);
        let identity = DMatrix::<f64>::identity(n, n);
        let l_inv = self
            .chol
            .solve_lower_triangular(&identity)
            .expect("factor has positive diagonal");
        for i in 0..n {
            inv_diag[i] = l_inv.column(i).norm_squared();
        }
        (inv_diag, &self.weights)
    }

    /// Sum of log-diagonal entries of the factor (half the log-determinant).
    pub fn log_det_half(&self) -> f64 {
        (0..self.chol.nrows()).map(|i| self.chol[(i, i)].ln()).sum()
    }
}

/// Log marginal likelihood of the standardized observations:
/// `-½ (yᵀ(K+σ²I)⁻¹y + log det(K+σ²I) + n log 2π)`.
pub fn log_marginal_likelihood(data: &Dataset, spec: &KernelSpec, noise_var: f64) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let post = gp_fit(data, spec, noise_var)?;
    let y = DVector::from_column_slice(&data.y_std);
    let quad = y.dot(&post.weights);
    let log_det = 2.0 * post.log_det_half();
    let n = data.len() as f64;
    Ok(-0.5 * (quad + log_det + n * (2.0 * std::f64::consts::PI).ln()))
}

/// Result of a marginal-likelihood lengthscale refit.
#[derive(Debug, Clone)]
pub struct Refit {
    pub lengthscale: Vec<f64>,
    /// Iterates skipped because the factorization failed there.
    pub skipped: usize,
}

/// Ascends the log marginal likelihood over log-lengthscale coordinates,
/// projected into `domain`, returning the best iterate visited.
pub fn mll_refit(
    data: &Dataset,
    base: &KernelSpec,
    noise_var: f64,
    domain: &[(f64, f64)],
    init: &[f64],
    cfg: &OptimizerConfig,
) -> Result<Refit> {
    if let Some(&(lo, _)) = domain.iter().find(|(lo, _)| *lo <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lengthscale domain must be bounded away from zero, got lower bound {lo}"
        )));
    }
    let skipped = std::cell::Cell::new(0usize);
    let objective = |theta: &[f64]| {
        match log_marginal_likelihood(data, &base.with_lengthscale(theta.to_vec()), noise_var) {
            Ok(v) => -v,
            Err(_) => {
                skipped.set(skipped.get() + 1);
                f64::INFINITY
            }
        }
    };
    let cfg = OptimizerConfig {
        space: OptimSpace::Log,
        ..*cfg
    };
    let best = optim::adam_minimize(objective, init, domain, &cfg)?;
    Ok(Refit {
        lengthscale: best,
        skipped: skipped.get(),
    })
}
