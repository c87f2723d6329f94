//! Per-round sharpness and calibration losses, coverage and interval-width
//! diagnostics, exploration-scale schedules, and the information-gain /
//! regret-envelope quantities.
//!
//! All losses operate in standardized-output space with the model noise
//! `σ² = 0.01`, which makes the sharpness normalizer `log(1 + 1/σ²)` a run
//! constant. The calibration constraint is non-positive exactly when the
//! observation falls inside the `√β`-scaled predictive interval.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gp::{KernelSpec, kernel_eval, kernel_matrix};

/// Exponent `p` of the calibration constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CalibrationExponent {
    L1,
    #[default]
    L2,
}

impl CalibrationExponent {
    pub fn value(self) -> f64 {
        match self {
            CalibrationExponent::L1 => 1.0,
            CalibrationExponent::L2 => 2.0,
        }
    }

    pub fn from_int(p: u8) -> Result<Self> {
        match p {
            1 => Ok(CalibrationExponent::L1),
            2 => Ok(CalibrationExponent::L2),
            other => Err(Error::Config(format!(
                "calibration exponent must be 1 or 2, got {other}"
            ))),
        }
    }
}

/// Exploration-scale schedule for `β_t`.
#[derive(Debug, Clone)]
pub enum BetaSchedule {
    /// Constant `β` (the experimental setting; default 2.0).
    Fixed(f64),
    /// `β_t = (B + R·√(2(Γ_{t-1} + 1 + log_cover + log(6/δ))))²`, with the
    /// information-gain bound and covering-number term supplied by the
    /// caller.
    Theoretical {
        rkhs_bound: f64,
        noise_proxy: f64,
        delta: f64,
        log_cover: f64,
        gamma: fn(usize) -> f64,
    },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Fixed(2.0)
    }
}

/// Resolves `β_t` for round `t >= 1`.
pub fn beta_value(sched: &BetaSchedule, t: usize) -> Result<f64> {
    if t < 1 {
        return Err(Error::InvalidArgument("round index starts at 1".into()));
    }
    match sched {
        BetaSchedule::Fixed(beta) => {
            if *beta < 0.0 {
                return Err(Error::Config(format!("fixed beta must be >= 0, got {beta}")));
            }
            Ok(*beta)
        }
        BetaSchedule::Theoretical {
            rkhs_bound,
            noise_proxy,
            delta,
            log_cover,
            gamma,
        } => {
            if !(*delta > 0.0 && *delta < 1.0) {
                return Err(Error::Config(format!("delta must be in (0,1), got {delta}")));
            }
            if *rkhs_bound < 0.0 || *noise_proxy < 0.0 {
                return Err(Error::Config(
                    "RKHS bound and noise proxy must be nonnegative".into(),
                ));
            }
            let inner = gamma(t - 1) + 1.0 + log_cover + (6.0 / delta).ln();
            let root = rkhs_bound + noise_proxy * (2.0 * inner).sqrt();
            Ok(root * root)
        }
    }
}

/// Sharpness loss: `log(1 + latent_var/σ²) / log(1 + 1/σ²)`.
pub fn sharpness_loss(latent_var: f64, noise_var: f64) -> f64 {
    (1.0 + latent_var / noise_var).ln() / (1.0 + 1.0 / noise_var).ln()
}

/// Calibration constraint:
/// `|y - mean|^p / (√β·√(latent_var + σ²))^p - 1`.
///
/// Non-positive exactly when `y` lies inside the interval, for either `p`.
pub fn calibration_constraint(
    y: f64,
    mean: f64,
    latent_var: f64,
    noise_var: f64,
    beta: f64,
    p: CalibrationExponent,
) -> f64 {
    let width = beta.sqrt() * (latent_var + noise_var).sqrt();
    ((y - mean).abs() / width).powf(p.value()) - 1.0
}

/// Observation-level interval width `2√β·√(latent_var + σ²)`, consistent
/// with the calibration constraint's denominator.
pub fn ci_width(latent_var: f64, noise_var: f64, beta: f64) -> f64 {
    2.0 * beta.sqrt() * (latent_var + noise_var).sqrt()
}

/// Function-level coverage indicator used on synthetic tasks where the
/// noise-free value is known: `|f - mean| <= √β·√latent_var` (latent width,
/// no noise term).
pub fn function_covered(f_value: f64, mean: f64, latent_var: f64, beta: f64) -> bool {
    (f_value - mean).abs() <= beta.sqrt() * latent_var.sqrt()
}

/// Running empirical coverage counter.
#[derive(Debug, Clone, Copy, Default)]
pub struct Coverage {
    pub count: usize,
    pub total: usize,
}

impl Coverage {
    pub fn update(&mut self, covered: bool) -> f64 {
        self.total += 1;
        if covered {
            self.count += 1;
        }
        self.p_hat()
    }

    pub fn p_hat(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count as f64 / self.total as f64
        }
    }
}

/// Everything extracted from one BO query under the pre-update posterior:
/// the currency of the online game.
#[derive(Debug, Clone, Copy)]
pub struct RoundFeedback {
    pub sharpness: f64,
    pub calibration: f64,
    pub covered: bool,
    pub ci_width: f64,
    pub beta: f64,
}

impl RoundFeedback {
    /// Builds the feedback for a standardized observation `y_std` from the
    /// posterior's mean and latent variance at the queried point.
    pub fn compute(
        y_std: f64,
        mean: f64,
        latent_var: f64,
        noise_var: f64,
        beta: f64,
        p: CalibrationExponent,
    ) -> Self {
        let calibration = calibration_constraint(y_std, mean, latent_var, noise_var, beta, p);
        RoundFeedback {
            sharpness: sharpness_loss(latent_var, noise_var),
            calibration,
            covered: calibration <= 0.0,
            ci_width: ci_width(latent_var, noise_var, beta),
            beta,
        }
    }
}

/// Greedy lower bound on the maximum information gain
/// `max_{|A|=t} ½ log det(I + σ⁻²K_A)` over the candidate set.
///
/// Greedy selection achieves at least a `(1 - 1/e)` fraction of the optimum
/// by submodularity. Ties at the marginal-gain maximum break toward the
/// lowest candidate index.
pub fn greedy_information_gain(
    spec: &KernelSpec,
    candidates: &[Vec<f64>],
    t: usize,
    noise_var: f64,
) -> Result<f64> {
    let m = candidates.len();
    if t < 1 || t > m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= t <= {m} candidates, got t = {t}"
        )));
    }
    let mut selected: Vec<usize> = Vec::with_capacity(t);
    let mut total = 0.0;
    for _ in 0..t {
        let chol = if selected.is_empty() {
            None
        } else {
            let rows: Vec<Vec<f64>> = selected.iter().map(|&i| candidates[i].clone()).collect();
            let mut k = kernel_matrix(spec, &rows)?;
            for i in 0..rows.len() {
                k[(i, i)] += noise_var;
            }
            Some(k.cholesky().ok_or(Error::Cholesky { tried: vec![0.0] })?)
        };
        let mut best: Option<(usize, f64)> = None;
        for (idx, cand) in candidates.iter().enumerate() {
            if selected.contains(&idx) {
                continue;
            }
            let prior = kernel_eval(spec, cand, cand)?;
            let latent = match &chol {
                None => prior,
                Some(chol) => {
                    let k_star = DVector::from_fn(selected.len(), |i, _| {
                        kernel_eval(spec, &candidates[selected[i]], cand).unwrap()
                    });
                    let v = chol
                        .l_dirty()
                        .solve_lower_triangular(&k_star)
                        .expect("factor has positive diagonal");
                    (prior - v.norm_squared()).max(0.0)
                }
            };
            let gain = 0.5 * (1.0 + latent / noise_var).ln();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((idx, gain));
            }
        }
        let (idx, gain) = best.expect("at least one unselected candidate");
        selected.push(idx);
        total += gain;
    }
    Ok(total)
}

/// Regret envelope for a fixed kernel:
/// `√(T · Σ_t 4 β_t σ² C log(1 + σ⁻² latent_var_t))` with
/// `C = σ⁻² / log(1 + σ⁻²)`. `records` holds per-round `(β_t, latent_var_t)`.
pub fn cor1_bound(records: &[(f64, f64)], noise_var: f64) -> f64 {
    let c = (1.0 / noise_var) / (1.0 + 1.0 / noise_var).ln();
    let sum: f64 = records
        .iter()
        .map(|&(beta, latent)| 4.0 * beta * noise_var * c * (1.0 + latent / noise_var).ln())
        .sum();
    (records.len() as f64 * sum).sqrt()
}
