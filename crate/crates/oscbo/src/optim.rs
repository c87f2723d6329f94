//! Shared numerical utilities: a box-constrained Adam optimizer,
//! finite-difference gradients, and the standard-normal CDF/quantile pair.
//!
//! One optimizer serves every first-order search in the crate (marginal
//! likelihood refits, the FTPL oracle, acquisition refinement); call sites
//! differ only in [`OptimizerConfig`]. Lengthscale searches run in log
//! coordinates ([`OptimSpace::Log`]), acquisition searches in linear ones.

use crate::error::{Error, Result};

/// Central-difference step, in the optimizer's working coordinates.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimSpace {
    Linear,
    /// Optimize over the log of the variables. Requires strictly positive
    /// box bounds; iterates are exponentiated before projection.
    Log,
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub space: OptimSpace,
}

impl OptimizerConfig {
    pub fn new(lr: f64, steps: usize, space: OptimSpace) -> Self {
        OptimizerConfig {
            lr,
            steps,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            space,
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::new(0.01, 50, OptimSpace::Linear)
    }
}

fn clamp_into(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

/// Central-difference gradient estimate of `f` at `x` with step `h`.
///
/// A non-finite probe falls back to a one-sided difference; if both sides
/// are non-finite the component is set to zero. See
/// [`finite_diff_grad_counted`] for the number of zeroed components.
pub fn finite_diff_grad<F: FnMut(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    finite_diff_grad_counted(f, x, h).0
}

/// As [`finite_diff_grad`], also returning how many components had to be
/// zeroed because both probes were non-finite.
pub fn finite_diff_grad_counted<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    h: f64,
) -> (Vec<f64>, usize) {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    let mut zeroed = 0;
    let mut f_center: Option<f64> = None;
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let f_plus = f(&probe);
        probe[j] = x[j] - h;
        let f_minus = f(&probe);
        probe[j] = x[j];
        grad[j] = if f_plus.is_finite() && f_minus.is_finite() {
            (f_plus - f_minus) / (2.0 * h)
        } else {
            let center = *f_center.get_or_insert_with(|| f(&probe));
            if f_plus.is_finite() && center.is_finite() {
                (f_plus - center) / h
            } else if f_minus.is_finite() && center.is_finite() {
                (center - f_minus) / h
            } else {
                zeroed += 1;
                0.0
            }
        };
    }
    (grad, zeroed)
}

/// Minimizes `f` over the box with Adam and finite-difference gradients,
/// returning the best iterate seen (the start counts as an iterate).
///
/// Non-finite objective values after the first step skip the iterate; a
/// non-finite value at the start is an error.
pub fn adam_minimize<F>(
    f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    adam_core(f, None::<fn(&[f64]) -> Vec<f64>>, x0, bounds, cfg)
}

/// As [`adam_minimize`] with an analytic gradient, given in the original
/// (linear) coordinates regardless of `cfg.space`.
pub fn adam_minimize_with_grad<F, G>(
    f: F,
    grad: G,
    x0: &[f64],
    bounds: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    adam_core(f, Some(grad), x0, bounds, cfg)
}

fn adam_core<F, G>(
    mut f: F,
    mut grad: Option<G>,
    x0: &[f64],
    bounds: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    assert_eq!(x0.len(), bounds.len(), "bounds/point dimension mismatch");
    if cfg.space == OptimSpace::Log {
        if let Some(&(lo, _)) = bounds.iter().find(|(lo, _)| *lo <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "log-space optimization needs positive lower bounds, got {lo}"
            )));
        }
    }

    let mut x = x0.to_vec();
    clamp_into(&mut x, bounds);
    let f0 = f(&x);
    if !f0.is_finite() {
        return Err(Error::NonFinite(format!(
            "objective is {f0} at the starting point {x:?}"
        )));
    }
    let mut best_x = x.clone();
    let mut best_f = f0;

    let to_work = |x: &[f64]| -> Vec<f64> {
        match cfg.space {
            OptimSpace::Linear => x.to_vec(),
            OptimSpace::Log => x.iter().map(|v| v.ln()).collect(),
        }
    };
    let from_work = |w: &[f64]| -> Vec<f64> {
        match cfg.space {
            OptimSpace::Linear => w.to_vec(),
            OptimSpace::Log => w.iter().map(|v| v.exp()).collect(),
        }
    };

    let mut w = to_work(&x);
    let dim = w.len();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];

    for step in 1..=cfg.steps {
        let g = match grad.as_mut() {
            Some(grad) => {
                let x_cur = from_work(&w);
                let gx = grad(&x_cur);
                match cfg.space {
                    OptimSpace::Linear => gx,
                    // chain rule: d f(exp(w)) / dw = f'(x) * x
                    OptimSpace::Log => gx.iter().zip(&x_cur).map(|(g, x)| g * x).collect(),
                }
            }
            None => finite_diff_grad(|w_probe| f(&from_work(w_probe)), &w, FD_STEP),
        };
        let bc1 = 1.0 - cfg.beta1.powi(step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(step as i32);
        for j in 0..dim {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            w[j] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        let mut x_new = from_work(&w);
        clamp_into(&mut x_new, bounds);
        w = to_work(&x_new);
        let f_new = f(&x_new);
        if f_new.is_finite() && f_new < best_f {
            best_f = f_new;
            best_x = x_new;
        }
    }
    Ok(best_x)
}

/// Standard-normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard-normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard-normal quantile for `p` in `(0, 1)`: a rational approximation
/// (Acklam) refined by one Newton step against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile probability must be in (0,1), got {p}"
        )));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    };
    Ok(x - (normal_cdf(x) - p) / normal_pdf(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_converges_to_interior_minimum() {
        let c = [0.3, 0.7];
        let cfg = OptimizerConfig::new(0.05, 200, OptimSpace::Linear);
        let result = adam_minimize(
            |x| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2),
            &[0.9, 0.1],
            &[(0.0, 1.0), (0.0, 1.0)],
            &cfg,
        )
        .unwrap();
        let dist = ((result[0] - c[0]).powi(2) + (result[1] - c[1]).powi(2)).sqrt();
        assert!(dist <= 1e-2, "dist {dist}");
    }

    #[test]
    fn zero_steps_returns_start() {
        let cfg = OptimizerConfig::new(0.05, 0, OptimSpace::Linear);
        let result = adam_minimize(|x| x[0] * x[0], &[0.4], &[(0.0, 1.0)], &cfg).unwrap();
        assert_eq!(result, vec![0.4]);
    }

    #[test]
    fn exterior_minimum_lands_on_box_face() {
        let c = [2.0, 0.5];
        let cfg = OptimizerConfig::new(0.05, 400, OptimSpace::Linear);
        let result = adam_minimize(
            |x| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2),
            &[0.2, 0.2],
            &[(0.0, 1.0), (0.0, 1.0)],
            &cfg,
        )
        .unwrap();
        assert_abs_diff_eq!(result[0], 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(result[1], 0.5, epsilon = 1e-2);
    }

    #[test]
    fn log_space_stays_in_box_and_converges() {
        let cfg = OptimizerConfig::new(0.05, 400, OptimSpace::Log);
        let result = adam_minimize(
            |x| (x[0].ln() - 0.3f64.ln()).powi(2),
            &[1.0],
            &[(0.01, 10.0)],
            &cfg,
        )
        .unwrap();
        assert!((0.01..=10.0).contains(&result[0]));
        assert_abs_diff_eq!(result[0], 0.3, epsilon = 1e-2);
    }

    #[test]
    fn log_space_rejects_nonpositive_bounds() {
        let cfg = OptimizerConfig::new(0.05, 10, OptimSpace::Log);
        assert!(adam_minimize(|x| x[0], &[0.5], &[(0.0, 1.0)], &cfg).is_err());
    }

    #[test]
    fn nonfinite_start_is_an_error() {
        let cfg = OptimizerConfig::default();
        let err = adam_minimize(|_| f64::NAN, &[0.5], &[(0.0, 1.0)], &cfg);
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn nonfinite_iterates_are_skipped() {
        // The objective is NaN below 0.5; descent from 0.8 pushes through it.
        let f = |x: &[f64]| {
            if x[0] < 0.5 {
                f64::NAN
            } else {
                (x[0] - 0.3).powi(2)
            }
        };
        let cfg = OptimizerConfig::new(0.1, 100, OptimSpace::Linear);
        let result = adam_minimize(f, &[0.8], &[(0.0, 1.0)], &cfg).unwrap();
        assert!(result[0] >= 0.5, "best iterate {} left the finite region", result[0]);
    }

    #[test]
    fn finite_diff_matches_analytic_gradient() {
        let grad = finite_diff_grad(|x| x.iter().map(|v| v * v).sum(), &[1.0, 2.0], FD_STEP);
        assert_abs_diff_eq!(grad[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(grad[1], 4.0, epsilon = 1e-8);
    }

    #[test]
    fn finite_diff_constant_and_kink() {
        let grad = finite_diff_grad(|_| 3.5, &[0.1, 0.2, 0.3], FD_STEP);
        assert_eq!(grad, vec![0.0; 3]);
        // central differences cancel symmetrically at |x| = 0
        let grad = finite_diff_grad(|x| x[0].abs(), &[0.0], FD_STEP);
        assert_eq!(grad[0], 0.0);
    }

    #[test]
    fn finite_diff_nonfinite_fallbacks() {
        // +h probe is NaN, one-sided fallback engages
        let f = |x: &[f64]| if x[0] > 1.0 { f64::NAN } else { 2.0 * x[0] };
        let grad = finite_diff_grad(f, &[1.0], FD_STEP);
        assert_abs_diff_eq!(grad[0], 2.0, epsilon = 1e-6);
        let (grad, zeroed) = finite_diff_grad_counted(|_| f64::NAN, &[1.0, 2.0], FD_STEP);
        assert_eq!(grad, vec![0.0; 2]);
        assert_eq!(zeroed, 2);
    }

    #[test]
    fn normal_cdf_symmetry_and_center() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        let mut z = -6.0;
        while z <= 6.0 {
            assert_abs_diff_eq!(normal_cdf(-z), 1.0 - normal_cdf(z), epsilon = 1e-12);
            z += 0.37;
        }
    }

    #[test]
    fn normal_quantile_golden_values() {
        assert_abs_diff_eq!(normal_quantile(0.5).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(normal_quantile(0.975).unwrap(), 1.95996398454005, epsilon = 1e-9);
        assert_abs_diff_eq!(normal_quantile(0.95).unwrap(), 1.64485362695147, epsilon = 1e-9);
    }

    #[test]
    fn quantile_cdf_roundtrip() {
        let mut z = -6.0;
        while z <= 6.0 {
            let p = normal_cdf(z);
            assert_abs_diff_eq!(normal_quantile(p).unwrap(), z, epsilon = 1e-8);
            z += 0.25;
        }
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }
}
