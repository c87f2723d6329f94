//! The constrained online-learning layer: a follow-the-perturbed-leader
//! (FTPL) primal learner over the lengthscale box, an online-mirror-descent
//! (OMD) dual learner for the violation multiplier, the feedback step that
//! updates both, and the play/recovery phase controller.
//!
//! Per round the primal plays a lengthscale, the BO loop extracts the
//! sharpness/calibration feedback at the queried point, and the learners
//! fold it in: the primal stores the played multiplier and exploration
//! scale (its objective reconstructs the cumulative Lagrangian utility from
//! the data), and the dual takes a multiplicative step
//! `λ ← min(λ·exp(ω·L^c), cap)`. Once the signed cumulative violation
//! exceeds the play-phase budget, the controller latches into the recovery
//! phase: the dual domain cap drops to 1 and the multiplier resets.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gp::{KernelSpec, cholesky_with_jitter, kernel_matrix};
use crate::losses::{CalibrationExponent, RoundFeedback};
use crate::optim::{self, OptimSpace, OptimizerConfig};
use crate::rng::Rng;

/// Truncation of the feasibility-margin lower bound:
/// `ρ̃ = max(ρ̂/2, T^{-1/4})`.
pub fn rho_tilde(rho_hat: f64, horizon: usize) -> f64 {
    (rho_hat / 2.0).max((horizon as f64).powf(-0.25))
}

/// Concentration term `E_{t,η} = √(8t·log(18t²/η))` bounding the gap
/// between expected and empirical constraint values.
pub fn concentration_term(t: usize, eta: f64) -> f64 {
    let t = t as f64;
    (8.0 * t * (18.0 * t * t / eta).ln()).sqrt()
}

/// Play-phase violation budget
/// `M_ρ̃ = κ·[(2/ρ̃)√T + (2 + 3/ρ̃)·E_{T,η} + (1 + 2/ρ̃)·R_T^P + (1/ρ̃)·R_T^D]`,
/// with the abstract learner regret bounds instantiated as
/// `R_T^P = c_p·√(T log T)` and `R_T^D = c_d·√T`.
///
/// `κ = 0` triggers recovery as soon as `V_t > (T-t)ρ̃ - 1`; an infinite `κ`
/// disables recovery entirely.
pub fn m_rho(rho_tilde: f64, horizon: usize, eta: f64, c_p: f64, c_d: f64, kappa: f64) -> f64 {
    let t = horizon as f64;
    let base = (2.0 / rho_tilde) * t.sqrt()
        + (2.0 + 3.0 / rho_tilde) * concentration_term(horizon, eta)
        + (1.0 + 2.0 / rho_tilde) * c_p * (t * t.ln()).sqrt()
        + (1.0 / rho_tilde) * c_d * t.sqrt();
    kappa * base
}

/// Cumulative-violation accumulator: `V' = V + L^c` (signed).
pub fn violation_update(v: f64, l_c: f64) -> f64 {
    v + l_c
}

/// FTPL objective after the recorded rounds:
///
/// `[log det(K_θ + σ²I) - t·log σ²] / log(1 + σ⁻²)
///  + Σ_j λ_j |z_j/√β_j|^p - Σ_j λ_j - ⟨η, θ⟩`
///
/// where `z = L_θ⁻¹ y` and `L_θ` is the Cholesky factor of `K_θ + σ²I`.
/// Row `j` of `x`/`y_std` carries the multiplier `lambdas[j]` that was in
/// play when it was queried and the exploration scale `betas[j]` of its
/// round; the forward substitution turns row `j` into the normalized
/// one-step-ahead residual of the prefix posterior, so this equals the
/// cumulative Lagrangian utility of the sequential game.
pub fn ftpl_objective(
    theta: &[f64],
    base: &KernelSpec,
    x: &[Vec<f64>],
    y_std: &[f64],
    lambdas: &[f64],
    betas: &[f64],
    noise_var: f64,
    p: CalibrationExponent,
    perturbation: &[f64],
) -> Result<f64> {
    let t = x.len();
    if y_std.len() != t || lambdas.len() != t || betas.len() != t {
        return Err(Error::InvalidArgument(format!(
            "misaligned histories: {} rows, {} observations, {} multipliers, {} betas",
            t,
            y_std.len(),
            lambdas.len(),
            betas.len()
        )));
    }
    if perturbation.len() != theta.len() {
        return Err(Error::InvalidArgument(
            "perturbation dimension differs from lengthscale dimension".into(),
        ));
    }
    let linear: f64 = perturbation.iter().zip(theta).map(|(e, t)| e * t).sum();
    if t == 0 {
        return Ok(-linear);
    }
    let spec = base.with_lengthscale(theta.to_vec());
    let k = kernel_matrix(&spec, x)?;
    let (chol, _) = cholesky_with_jitter(&k, noise_var)?;
    let log_det: f64 = 2.0 * (0..t).map(|i| chol[(i, i)].ln()).sum::<f64>();
    let z = chol
        .solve_lower_triangular(&DVector::from_column_slice(y_std))
        .expect("factor has positive diagonal");
    let sharpness = (log_det - t as f64 * noise_var.ln()) / (1.0 + 1.0 / noise_var).ln();
    let mut penalty = 0.0;
    let mut lambda_sum = 0.0;
    for j in 0..t {
        penalty += lambdas[j] * (z[j].abs() / betas[j].sqrt()).powf(p.value());
        lambda_sum += lambdas[j];
    }
    Ok(sharpness + penalty - lambda_sum - linear)
}

/// Primal learner state: the lengthscale domain, the per-round multiplier
/// and exploration-scale histories, and the perturbed-leader oracle
/// configuration.
#[derive(Debug, Clone)]
pub struct PrimalFtplState {
    /// Lengthscale box Θ, lower bounds strictly positive.
    pub domain: Vec<(f64, f64)>,
    /// Multiplier in play when round `j` was queried (`λ_{j-1}`), one per
    /// observed round. Rows predating the game (the initial design, or
    /// feedback before a learner reset) carry zero.
    pub lambda_history: Vec<f64>,
    /// Exploration scale `β_j` of each observed round.
    pub beta_history: Vec<f64>,
    /// Last played lengthscale; warm start for the next oracle call.
    pub current: Vec<f64>,
    pub p: CalibrationExponent,
    pub oracle_cfg: OptimizerConfig,
    /// Utility range of the abstract learner contract (bookkeeping only;
    /// feedback is not clipped).
    pub utility_range: (f64, f64),
    /// Componentwise standard deviation of the fresh Gaussian perturbation.
    pub perturb_std: f64,
    /// Perturbation drawn for the most recent oracle call.
    pub perturbation: Vec<f64>,
    /// Oracle calls that failed outright and fell back to the previous play.
    pub fallback_count: usize,
}

fn geometric_mean_point(domain: &[(f64, f64)]) -> Vec<f64> {
    domain.iter().map(|&(lo, hi)| (lo * hi).sqrt()).collect()
}

impl PrimalFtplState {
    pub fn new(
        domain: Vec<(f64, f64)>,
        p: CalibrationExponent,
        utility_range: (f64, f64),
    ) -> Self {
        let current = geometric_mean_point(&domain);
        let dim = domain.len();
        PrimalFtplState {
            domain,
            lambda_history: Vec::new(),
            beta_history: Vec::new(),
            current,
            p,
            oracle_cfg: OptimizerConfig::new(0.01, 50, OptimSpace::Log),
            utility_range,
            perturb_std: 0.1,
            perturbation: vec![0.0; dim],
            fallback_count: 0,
        }
    }

    /// Number of feedback rounds recorded so far.
    pub fn rounds(&self) -> usize {
        self.lambda_history.len()
    }
}

/// Plays the next lengthscale.
///
/// Draws a fresh Gaussian perturbation, then minimizes [`ftpl_objective`]
/// over the domain by warm-started descent in log-lengthscale coordinates,
/// returning the best feasible iterate. `x`/`y_std` are all observations in
/// query order; rows before the recorded feedback (the initial design)
/// enter with multiplier zero. An empty feedback history returns the
/// domain's geometric-mean point without drawing a perturbation; an oracle
/// that fails at the warm start falls back to the previous play.
pub fn ftpl_next(
    state: &mut PrimalFtplState,
    base: &KernelSpec,
    x: &[Vec<f64>],
    y_std: &[f64],
    noise_var: f64,
    rng: &mut Rng,
) -> Vec<f64> {
    if state.lambda_history.is_empty() {
        state.current = geometric_mean_point(&state.domain);
        return state.current.clone();
    }
    if state.domain.iter().all(|&(lo, hi)| lo == hi) {
        state.current = state.domain.iter().map(|&(lo, _)| lo).collect();
        return state.current.clone();
    }
    let dim = state.domain.len();
    state.perturbation = (0..dim).map(|_| state.perturb_std * rng.gaussian()).collect();

    let rounds = state.lambda_history.len();
    let pad = x.len().saturating_sub(rounds);
    let mut lambdas = vec![0.0; pad];
    lambdas.extend_from_slice(&state.lambda_history);
    let mut betas = vec![1.0; pad];
    betas.extend_from_slice(&state.beta_history);

    let objective = |theta: &[f64]| {
        ftpl_objective(
            theta,
            base,
            x,
            y_std,
            &lambdas,
            &betas,
            noise_var,
            state.p,
            &state.perturbation,
        )
        .unwrap_or(f64::INFINITY)
    };
    let warm: Vec<f64> = state
        .current
        .iter()
        .zip(&state.domain)
        .map(|(v, &(lo, hi))| v.clamp(lo, hi))
        .collect();
    match optim::adam_minimize(objective, &warm, &state.domain, &state.oracle_cfg) {
        Ok(best) => {
            state.current = best.clone();
            best
        }
        Err(_) => {
            state.fallback_count += 1;
            state.current.clone()
        }
    }
}

/// Dual learner state: the multiplier, its domain cap, and the mirror
/// descent step size.
#[derive(Debug, Clone, Copy)]
pub struct DualOmdState {
    /// Current multiplier, strictly positive (negative entropy requires it).
    pub lambda: f64,
    /// `1/ρ̃` in the play phase, 1 in recovery.
    pub cap: f64,
    /// Step size ω.
    pub step: f64,
}

impl DualOmdState {
    /// Starts at `λ = 1` (clamped to the cap), the interior midscale start.
    pub fn new(cap: f64, step: f64) -> Self {
        DualOmdState {
            lambda: 1.0f64.min(cap),
            cap,
            step,
        }
    }
}

/// Negative-entropy mirror descent step. The dual utility gradient is
/// `∇u^D(λ) = -L^c`, so the closed form is `λ ← min(λ·exp(ω·L^c), cap)`;
/// the multiplicative update preserves positivity.
pub fn omd_observe(state: &mut DualOmdState, calibration: f64) -> f64 {
    state.lambda = (state.lambda * (state.step * calibration).exp()).min(state.cap);
    state.lambda
}

/// Feedback step for both learners. Stores the played multiplier and the
/// round's exploration scale in the primal history (the primal utility is
/// `u^P = L^s + λ_{t-1}·L^c`), then updates the dual with the calibration
/// value. The dual must observe the multiplier that was played, so the
/// order is fixed: record first, step second. Returns the primal utility.
pub fn recalibrate(
    primal: &mut PrimalFtplState,
    dual: &mut DualOmdState,
    feedback: &RoundFeedback,
) -> f64 {
    let played = dual.lambda;
    primal.lambda_history.push(played);
    primal.beta_history.push(feedback.beta);
    omd_observe(dual, feedback.calibration);
    feedback.sharpness + played * feedback.calibration
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Play,
    Recovery,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Play => write!(f, "play"),
            Phase::Recovery => write!(f, "recovery"),
        }
    }
}

/// Play/recovery state machine over the signed violation sum.
#[derive(Debug, Clone)]
pub struct PhaseController {
    pub phase: Phase,
    /// Signed cumulative violation `V_t`.
    pub violation: f64,
    pub rho_hat: f64,
    pub rho_tilde: f64,
    pub horizon: usize,
    /// Play-phase budget `M_ρ̃`.
    pub budget: f64,
    /// Failure-probability share `η = δ/3`.
    pub eta: f64,
    /// Latch: set on the first switch, never cleared.
    pub switched: bool,
    /// Re-fire the reinitialization signal every round the condition holds
    /// (the literal loop reading) instead of once.
    pub literal_reinit: bool,
}

impl PhaseController {
    pub fn new(rho_hat: f64, horizon: usize, eta: f64, budget: f64) -> Self {
        PhaseController {
            phase: Phase::Play,
            violation: 0.0,
            rho_hat,
            rho_tilde: rho_tilde(rho_hat, horizon),
            horizon,
            budget,
            eta,
            switched: false,
            literal_reinit: false,
        }
    }
}

/// Checks the recovery condition `V_t > (T-t)·ρ̃ + M_ρ̃ - 1` at round `t`.
///
/// Returns the phase for this round and whether the caller must
/// reinitialize the learners for recovery (primal utility range `[-1,1]`,
/// dual domain cap 1 with the multiplier reset). The switch latches.
pub fn phase_check(ctrl: &mut PhaseController, t: usize) -> (Phase, bool) {
    let threshold =
        (ctrl.horizon.saturating_sub(t)) as f64 * ctrl.rho_tilde + ctrl.budget - 1.0;
    let fired = ctrl.violation > threshold;
    if fired && !ctrl.switched {
        ctrl.phase = Phase::Recovery;
        ctrl.switched = true;
        return (Phase::Recovery, true);
    }
    if fired && ctrl.literal_reinit {
        return (ctrl.phase, true);
    }
    (ctrl.phase, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{MaternNu, fit_transforms, gp_fit};
    use crate::losses::{calibration_constraint, sharpness_loss};
    use approx::assert_abs_diff_eq;

    #[test]
    fn rho_tilde_values() {
        assert_abs_diff_eq!(rho_tilde(0.5, 150), 0.28574404296988, epsilon = 1e-12);
        assert_abs_diff_eq!(rho_tilde(1.0, 16), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_tilde(0.01, 10_000), 0.1, epsilon = 1e-15);
        // never below T^{-1/4}
        for t in [1usize, 7, 100, 5000] {
            assert!(rho_tilde(1e-6, t) >= (t as f64).powf(-0.25) - 1e-15);
        }
    }

    #[test]
    fn concentration_values() {
        assert_abs_diff_eq!(concentration_term(1, 18.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            concentration_term(100, 1.0 / 30.0),
            111.362146213278,
            epsilon = 1e-9
        );
        assert!(concentration_term(200, 0.05) > concentration_term(100, 0.05));
    }

    #[test]
    fn budget_values() {
        assert_eq!(m_rho(0.3, 150, 0.03, 1.0, 1.0, 0.0), 0.0);
        assert_eq!(m_rho(0.3, 150, 0.03, 1.0, 1.0, f64::INFINITY), f64::INFINITY);
        assert_abs_diff_eq!(
            m_rho(0.2857, 150, 0.0333, 1.0, 1.0, 1.0),
            2096.96501893455,
            epsilon = 1e-8
        );
    }

    #[test]
    fn violation_accumulates_signed() {
        assert_eq!(violation_update(0.0, -0.6), -0.6);
        assert_eq!(violation_update(violation_update(0.0, 0.5), -0.5), 0.0);
        let seq = [0.3, -0.1, 0.7, -0.4, 0.05];
        let folded = seq.iter().fold(0.0, |v, l| violation_update(v, *l));
        assert_abs_diff_eq!(folded, seq.iter().sum::<f64>(), epsilon = 1e-15);
    }

    #[test]
    fn ftpl_objective_single_point_log_det() {
        let base = KernelSpec::isotropic(MaternNu::FiveHalves, 1.0);
        let obj = ftpl_objective(
            &[0.5],
            &base,
            &[vec![0.3]],
            &[1.7],
            &[0.0],
            &[2.0],
            0.01,
            CalibrationExponent::L2,
            &[0.0],
        )
        .unwrap();
        // log det(1.01)/log(101) - log(0.01)/log(101) = 1 exactly
        assert_abs_diff_eq!(obj, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ftpl_objective_perturbation_is_linear() {
        let base = KernelSpec::isotropic(MaternNu::FiveHalves, 1.0);
        let x = vec![vec![0.2], vec![0.8]];
        let y = vec![0.5, -0.3];
        let theta = [0.7];
        let without = ftpl_objective(
            &theta, &base, &x, &y, &[0.4, 0.9], &[2.0, 2.0], 0.01,
            CalibrationExponent::L1, &[0.0],
        )
        .unwrap();
        let with = ftpl_objective(
            &theta, &base, &x, &y, &[0.4, 0.9], &[2.0, 2.0], 0.01,
            CalibrationExponent::L1, &[3.0],
        )
        .unwrap();
        assert_abs_diff_eq!(with, without - 3.0 * theta[0], epsilon = 1e-12);
    }

    /// Sequential oracle for the cumulative primal utility
    /// `Σ_j (L_j^s + λ_{j-1}·L_j^c)`: refit the GP on each prefix and
    /// accumulate the per-round losses. The closed form's `-Σλ` term is the
    /// expansion of the `-1` inside each `L^c`, so nothing extra is
    /// subtracted here.
    fn sequential_utility(
        theta: &[f64],
        base: &KernelSpec,
        x: &[Vec<f64>],
        y_std: &[f64],
        lambdas: &[f64],
        betas: &[f64],
        noise_var: f64,
        p: CalibrationExponent,
    ) -> f64 {
        let spec = base.with_lengthscale(theta.to_vec());
        let d = x[0].len();
        let mut total = 0.0;
        for j in 0..x.len() {
            let mut prefix = fit_transforms(&x[..j].to_vec(), &y_std[..j].to_vec(), &vec![(0.0, 1.0); d])
                .unwrap();
            // bypass re-standardization: the game operates on y_std as given
            prefix.y_std = y_std[..j].to_vec();
            let post = gp_fit(&prefix, &spec, noise_var).unwrap();
            let (mean, latent) = post.predict(&x[j]);
            let l_s = sharpness_loss(latent, noise_var);
            let l_c = calibration_constraint(y_std[j], mean, latent, noise_var, betas[j], p);
            total += l_s + lambdas[j] * l_c;
        }
        total
    }

    #[test]
    fn proposition_equivalence_on_random_instances() {
        let mut rng = Rng::new(101);
        for trial in 0..25 {
            let t = 1 + (rng.uniform() * 20.0) as usize;
            let d = 1 + trial % 3;
            let p = if trial % 2 == 0 {
                CalibrationExponent::L1
            } else {
                CalibrationExponent::L2
            };
            let x: Vec<Vec<f64>> = (0..t).map(|_| (0..d).map(|_| rng.uniform()).collect()).collect();
            let y: Vec<f64> = (0..t).map(|_| rng.gaussian()).collect();
            let lambdas: Vec<f64> = (0..t).map(|_| 2.0 * rng.uniform()).collect();
            let betas: Vec<f64> = (0..t).map(|_| 0.5 + 3.0 * rng.uniform()).collect();
            let theta = vec![0.15 + 0.8 * rng.uniform()];
            let base = KernelSpec::isotropic(MaternNu::FiveHalves, 1.0);
            let fast = ftpl_objective(
                &theta, &base, &x, &y, &lambdas, &betas, 0.01, p, &[0.0],
            )
            .unwrap();
            let slow = sequential_utility(&theta, &base, &x, &y, &lambdas, &betas, 0.01, p);
            let tol = 1e-8 * (1.0 + slow.abs());
            assert!(
                (fast - slow).abs() <= tol,
                "trial {trial}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn ftpl_next_initialization_and_descent() {
        let base = KernelSpec::isotropic(MaternNu::FiveHalves, 1.0);
        let mut rng = Rng::new(7);
        let mut state = PrimalFtplState::new(vec![(0.01, 10.0)], CalibrationExponent::L2, (-1.0, 2.0));
        // empty history: geometric-mean point
        let first = ftpl_next(&mut state, &base, &[], &[], 0.01, &mut rng);
        assert_abs_diff_eq!(first[0], (0.01f64 * 10.0).sqrt(), epsilon = 1e-12);

        // collapsed domain returns the single point
        let mut point = PrimalFtplState::new(vec![(0.5, 0.5)], CalibrationExponent::L2, (-1.0, 2.0));
        point.lambda_history.push(1.0);
        point.beta_history.push(2.0);
        let played = ftpl_next(&mut point, &base, &[vec![0.5]], &[0.3], 0.01, &mut rng);
        assert_eq!(played, vec![0.5]);

        // descent: the returned objective never exceeds the warm start's
        let x: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.uniform()]).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.gaussian()).collect();
        for j in 0..6 {
            state.lambda_history.push(0.5 + 0.1 * j as f64);
            state.beta_history.push(2.0);
        }
        let warm = state.current.clone();
        let played = ftpl_next(&mut state, &base, &x, &y, 0.01, &mut rng);
        let pad = x.len() - state.lambda_history.len();
        let mut lambdas = vec![0.0; pad];
        lambdas.extend_from_slice(&state.lambda_history);
        let mut betas = vec![1.0; pad];
        betas.extend_from_slice(&state.beta_history);
        let at = |theta: &[f64]| {
            ftpl_objective(
                theta, &base, &x, &y, &lambdas, &betas, 0.01,
                CalibrationExponent::L2, &state.perturbation,
            )
            .unwrap()
        };
        assert!(at(&played) <= at(&warm) + 1e-12);
    }

    #[test]
    fn omd_examples_and_positivity() {
        let mut state = DualOmdState::new(3.5, 0.001);
        state.lambda = 0.5;
        omd_observe(&mut state, 0.0);
        assert_eq!(state.lambda, 0.5);
        omd_observe(&mut state, 0.8);
        assert_abs_diff_eq!(state.lambda, 0.5 * 0.0008f64.exp(), epsilon = 1e-12);
        // clamp at the cap
        state.lambda = 3.49999;
        omd_observe(&mut state, 500.0);
        assert_eq!(state.lambda, 3.5);
        // positivity after a long hostile sequence
        let mut state = DualOmdState::new(2.0, 0.001);
        for _ in 0..10_000 {
            omd_observe(&mut state, -1.0);
        }
        assert!(state.lambda > 0.0);
    }

    /// Grid oracle for one OMD step: argmin of
    /// `∇u·λ + (1/ω)·D_ψ(λ, λ_prev)` over `[1e-6, cap]`.
    fn omd_grid_argmin(lambda_prev: f64, step: f64, calibration: f64, cap: f64) -> f64 {
        let grad = -calibration;
        let objective = |l: f64| {
            grad * l + (1.0 / step) * (l * (l / lambda_prev).ln() - l + lambda_prev)
        };
        let mut best = (1e-6, objective(1e-6));
        let coarse = 20_000;
        for i in 0..=coarse {
            let l = 1e-6 + (cap - 1e-6) * i as f64 / coarse as f64;
            let v = objective(l);
            if v < best.1 {
                best = (l, v);
            }
        }
        let lo = (best.0 - (cap - 1e-6) / coarse as f64).max(1e-6);
        let hi = (best.0 + (cap - 1e-6) / coarse as f64).min(cap);
        let mut l = lo;
        while l <= hi {
            let v = objective(l);
            if v < best.1 {
                best = (l, v);
            }
            l += 1e-6;
        }
        best.0
    }

    #[test]
    fn omd_closed_form_matches_grid_argmin() {
        let mut rng = Rng::new(55);
        for _ in 0..20 {
            let lambda = 0.05 + 2.0 * rng.uniform();
            let step = 0.0005 + 0.05 * rng.uniform();
            let calibration = 4.0 * rng.uniform() - 2.0;
            let cap = (lambda + 0.1 + 2.0 * rng.uniform()).min(3.0);
            let mut state = DualOmdState { lambda: lambda.min(cap), cap, step };
            let closed = omd_observe(&mut state, calibration);
            let grid = omd_grid_argmin(lambda.min(cap), step, calibration, cap);
            assert!(
                (closed - grid).abs() <= 1e-6,
                "closed {closed} vs grid {grid}"
            );
        }
    }

    #[test]
    fn recalibrate_orders_and_replays() {
        let mut primal =
            PrimalFtplState::new(vec![(0.01, 10.0)], CalibrationExponent::L2, (-1.0, 2.0));
        let mut dual = DualOmdState::new(3.0, 0.001);
        let fb = RoundFeedback {
            sharpness: 0.3,
            calibration: -0.2,
            covered: true,
            ci_width: 0.4,
            beta: 2.0,
        };
        let utility = recalibrate(&mut primal, &mut dual, &fb);
        assert_abs_diff_eq!(utility, 0.1, epsilon = 1e-15);
        assert_eq!(primal.lambda_history, vec![1.0]);
        assert!(dual.lambda < 1.0);

        // zero calibration leaves the dual untouched and utility = L^s
        let fb0 = RoundFeedback { calibration: 0.0, covered: true, ..fb };
        let before = dual.lambda;
        let u0 = recalibrate(&mut primal, &mut dual, &fb0);
        assert_eq!(dual.lambda, before);
        assert_abs_diff_eq!(u0, 0.3, epsilon = 1e-15);

        // fold purity: replaying the same sequence from scratch gives the
        // same final state
        let seq: Vec<RoundFeedback> = (0..10)
            .map(|i| RoundFeedback {
                sharpness: 0.1 * i as f64,
                calibration: if i % 2 == 0 { 0.3 } else { -0.4 },
                covered: i % 2 != 0,
                ci_width: 0.2,
                beta: 2.0,
            })
            .collect();
        let mut p1 = PrimalFtplState::new(vec![(0.01, 10.0)], CalibrationExponent::L2, (-1.0, 2.0));
        let mut d1 = DualOmdState::new(3.0, 0.001);
        for fb in &seq {
            recalibrate(&mut p1, &mut d1, fb);
        }
        let mut p2 = PrimalFtplState::new(vec![(0.01, 10.0)], CalibrationExponent::L2, (-1.0, 2.0));
        let mut d2 = DualOmdState::new(3.0, 0.001);
        for fb in &seq {
            recalibrate(&mut p2, &mut d2, fb);
        }
        assert_eq!(p1.lambda_history, p2.lambda_history);
        assert_eq!(p1.beta_history, p2.beta_history);
        assert_eq!(d1.lambda, d2.lambda);
    }

    #[test]
    fn phase_transitions_and_latch() {
        let mut ctrl = PhaseController::new(0.5714, 100, 0.0333, 5.0);
        assert_eq!(phase_check(&mut ctrl, 1), (Phase::Play, false));

        // near the horizon with no budget, a small violation trips recovery
        let mut ctrl = PhaseController::new(0.5714, 100, 0.0333, 0.0);
        ctrl.violation = 0.5;
        assert_eq!(phase_check(&mut ctrl, 99), (Phase::Recovery, true));
        // latch: the signal fires once, the phase stays
        ctrl.violation = -100.0;
        assert_eq!(phase_check(&mut ctrl, 100), (Phase::Recovery, false));

        // literal mode re-fires while the condition holds
        let mut ctrl = PhaseController::new(0.5714, 100, 0.0333, 0.0);
        ctrl.literal_reinit = true;
        ctrl.violation = 50.0;
        assert_eq!(phase_check(&mut ctrl, 99), (Phase::Recovery, true));
        assert_eq!(phase_check(&mut ctrl, 100), (Phase::Recovery, true));
    }
}
