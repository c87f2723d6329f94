//! Experiment orchestration: single seeded runs, benchmark matrices,
//! diagnostics, and plots.
//!
//! A run is a pure function of its configuration: every random choice
//! flows through four labeled streams split from the seed (`"init"` for
//! the initial design, `"noise"` for observation noise, `"policy"` for the
//! lengthscale policy, `"acq"` for acquisition restarts), so identical
//! configurations produce byte-identical logs up to the wall-clock column.

mod bench;
mod diagnostics;
mod plot;
mod record;

pub use bench::{BenchConfig, BenchSummary, RankRow, SummaryRow, run_bench, write_bench_outputs};
pub use diagnostics::diagnostics_csv;
pub use plot::{PlotMetric, plot_svg};
pub use record::{RoundRecord, mask_wall_clock, records_from_csv, records_to_csv};

use std::path::PathBuf;
use std::time::Instant;

use crate::acquisition::{AcquisitionKind, AcquisitionSpec, MaximizeConfig, maximize_acquisition};
use crate::baselines::{Method, PolicyCtx, PolicyState, policy_next_theta};
use crate::error::{Error, Result};
use crate::gp::{KernelSpec, MaternNu, fit_transforms, gp_fit};
use crate::losses::{BetaSchedule, CalibrationExponent, RoundFeedback, beta_value};
use crate::online::{
    DualOmdState, Phase, PhaseController, PrimalFtplState, m_rho, phase_check, recalibrate,
    rho_tilde, violation_update,
};
use crate::optim::{OptimSpace, OptimizerConfig};
use crate::rng::Rng;
use crate::tasks::{TaskSpec, latin_hypercube, task_by_name};

/// Full configuration of one run. Total oracle calls are
/// `n_init + rounds`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: String,
    pub method: Method,
    pub seed: u64,
    /// BO rounds `T`.
    pub rounds: usize,
    /// Initial-design size `|D₀|`.
    pub n_init: usize,
    /// Calibration exponent (forced to 1 by the `oscbo-l1` method).
    pub p: CalibrationExponent,
    pub delta: f64,
    pub rho_hat: f64,
    pub beta: BetaSchedule,
    pub acquisition: AcquisitionKind,
    /// Per-dimension lengthscale box Θ.
    pub theta_box: (f64, f64),
    /// Budget constants: `R_T^P = c_p·√(T log T)`, `R_T^D = c_d·√T`, with
    /// the whole budget scaled by `kappa` (infinite disables recovery).
    pub c_p: f64,
    pub c_d: f64,
    pub kappa: f64,
    /// Dual learner step size ω.
    pub dual_step: f64,
    /// Observation noise standard deviation (0 = deterministic).
    pub noise_std: f64,
    /// Reset the learners every round the recovery condition holds (the
    /// literal loop reading) instead of switching once.
    pub literal_recovery_reinit: bool,
    /// Directory holding `<task>.csv` files for tabular tasks.
    pub data_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: "hartmann3".into(),
            method: Method::Oscbo,
            seed: 0,
            rounds: 100,
            n_init: 10,
            p: CalibrationExponent::L2,
            delta: 0.1,
            rho_hat: 0.5,
            beta: BetaSchedule::Fixed(2.0),
            acquisition: AcquisitionKind::Ucb,
            theta_box: (0.01, 10.0),
            c_p: 1.0,
            c_d: 1.0,
            kappa: 1.0,
            dual_step: 0.001,
            noise_std: 0.0,
            literal_recovery_reinit: false,
            data_dir: None,
        }
    }
}

impl RunConfig {
    /// Effective calibration exponent: the method name wins over the flag.
    pub fn exponent(&self) -> CalibrationExponent {
        match self.method {
            Method::OscboL1 => CalibrationExponent::L1,
            _ => self.p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must be in (0,1), got {}", self.delta)));
        }
        if !(self.rho_hat > 0.0 && self.rho_hat <= 1.0) {
            return Err(Error::Config(format!(
                "rho_hat must be in (0,1], got {}",
                self.rho_hat
            )));
        }
        if !(self.theta_box.0 > 0.0 && self.theta_box.0 <= self.theta_box.1) {
            return Err(Error::Config(format!(
                "lengthscale box must satisfy 0 < lo <= hi, got {:?}",
                self.theta_box
            )));
        }
        if self.noise_std < 0.0 {
            return Err(Error::Config("noise std must be >= 0".into()));
        }
        Ok(())
    }
}

const NOISE_VAR: f64 = 0.01;
const REFIT_LR: f64 = 0.01;
const REFIT_STEPS: usize = 50;

/// Runs one seeded BO experiment, returning the per-round records and, if
/// the loop aborted on an unrecoverable numerical failure, the error that
/// stopped it (the records up to that round are the flushed partial log).
pub fn run_single_partial(cfg: &RunConfig) -> (Vec<RoundRecord>, Option<Error>) {
    let mut records = Vec::new();
    let error = run_loop(cfg, &mut records).err();
    (records, error)
}

/// As [`run_single_partial`], but any failure discards the partial log and
/// is returned as the error.
pub fn run_single(cfg: &RunConfig) -> Result<Vec<RoundRecord>> {
    let (records, error) = run_single_partial(cfg);
    match error {
        None => Ok(records),
        Some(e) => Err(e),
    }
}

fn run_loop(cfg: &RunConfig, records: &mut Vec<RoundRecord>) -> Result<()> {
    cfg.validate()?;
    let task = task_by_name(&cfg.task, cfg.data_dir.as_deref())?;
    run_loop_on_task(cfg, &task, records)
}

/// Runs the loop against an already-resolved task (callers with custom
/// objectives use this directly; `cfg.task` is ignored).
pub fn run_single_on_task(cfg: &RunConfig, task: &TaskSpec) -> Result<Vec<RoundRecord>> {
    cfg.validate()?;
    let mut records = Vec::new();
    run_loop_on_task(cfg, task, &mut records)?;
    Ok(records)
}

fn run_loop_on_task(
    cfg: &RunConfig,
    task: &TaskSpec,
    records: &mut Vec<RoundRecord>,
) -> Result<()> {
    let dim = task.dim;
    let horizon = cfg.rounds;
    let p_eff = cfg.exponent();
    let base = KernelSpec::isotropic(MaternNu::FiveHalves, 1.0);
    let domain = vec![cfg.theta_box; 1];

    let master = Rng::new(cfg.seed);
    let mut rng_init = master.split("init");
    let mut rng_noise = master.split("noise");
    let mut rng_policy = master.split("policy");
    let mut rng_acq = master.split("acq");

    // initial design
    let mut raw_xs: Vec<Vec<f64>> = latin_hypercube(&mut rng_init, cfg.n_init, dim)
        .into_iter()
        .map(|unit| {
            unit.iter()
                .zip(&task.bounds)
                .map(|(u, &(lo, hi))| lo + u * (hi - lo))
                .collect()
        })
        .collect();
    let mut raw_ys: Vec<f64> = Vec::with_capacity(cfg.n_init + horizon);
    for x in &raw_xs {
        let f_val = task.evaluate(x);
        let y = if cfg.noise_std > 0.0 {
            f_val + cfg.noise_std * rng_noise.gaussian()
        } else {
            f_val
        };
        raw_ys.push(y);
    }
    // regret columns track the BO queries only, so the log alone
    // reconstructs them
    let mut best_f = f64::NEG_INFINITY;
    let mut best_y = f64::NEG_INFINITY;

    let mut policy = match cfg.method {
        Method::Oscbo | Method::OscboL1 => {
            let rt = rho_tilde(cfg.rho_hat, horizon);
            let eta = cfg.delta / 3.0;
            let budget = m_rho(rt, horizon, eta, cfg.c_p, cfg.c_d, cfg.kappa);
            let primal =
                PrimalFtplState::new(domain.clone(), p_eff, (-1.0 / rt, 1.0 + 1.0 / rt));
            let dual = DualOmdState::new(1.0 / rt, cfg.dual_step);
            let mut ctrl = PhaseController::new(cfg.rho_hat, horizon, eta, budget);
            ctrl.literal_reinit = cfg.literal_recovery_reinit;
            PolicyState::Oscbo { primal, dual, ctrl }
        }
        method => PolicyState::for_simple_method(method).expect("non-game method"),
    };

    let mut v_signed = 0.0;
    let mut v_plus = 0.0;
    let mut cum_regret = 0.0;

    for t in 1..=horizon {
        let round_start = Instant::now();

        if let PolicyState::Oscbo { primal, dual, ctrl } = &mut policy {
            ctrl.violation = v_signed;
            let (_, reinit) = phase_check(ctrl, t);
            if reinit {
                primal.utility_range = (-1.0, 1.0);
                dual.cap = 1.0;
                dual.lambda = 1.0f64.min(dual.cap);
                if ctrl.literal_reinit {
                    primal.lambda_history.clear();
                    primal.beta_history.clear();
                    primal.current = domain.iter().map(|&(lo, hi)| (lo * hi).sqrt()).collect();
                }
            }
        }

        // transforms refit from scratch on all data, then the policy plays
        let data = fit_transforms(&raw_xs, &raw_ys, &task.bounds)?;
        let theta = {
            let mut ctx = PolicyCtx {
                t,
                base: &base,
                noise_var: NOISE_VAR,
                domain: &domain,
                delta: cfg.delta,
                refit_cfg: OptimizerConfig::new(REFIT_LR, REFIT_STEPS, OptimSpace::Log),
                rng: &mut rng_policy,
            };
            policy_next_theta(&mut policy, &data, &mut ctx)?
        };
        let (lambda, phase) = match &policy {
            PolicyState::Oscbo { dual, ctrl, .. } => (dual.lambda, ctrl.phase),
            _ => (0.0, Phase::Play),
        };

        let spec = base.with_lengthscale(theta.clone());
        let post = gp_fit(&data, &spec, NOISE_VAR)?;
        let beta_t = beta_value(&cfg.beta, t)?;

        // OCBO replaces the UCB multiplier with its calibrated quantile
        let acq_spec = if let Some(mult) = policy.ocbo_multiplier() {
            AcquisitionSpec::ucb(mult * mult)
        } else {
            match cfg.acquisition {
                AcquisitionKind::Ucb => AcquisitionSpec::ucb(beta_t),
                AcquisitionKind::LogEi => {
                    let best_std = data
                        .y_std
                        .iter()
                        .cloned()
                        .fold(f64::NEG_INFINITY, f64::max);
                    AcquisitionSpec::log_ei(best_std)
                }
            }
        };
        let x_unit = maximize_acquisition(
            &post,
            &acq_spec,
            dim,
            &mut rng_acq,
            &MaximizeConfig::default(),
        );

        let x_raw = data.denormalize_point(&x_unit);
        let f_val = task.evaluate(&x_raw);
        let y_raw = if cfg.noise_std > 0.0 {
            f_val + cfg.noise_std * rng_noise.gaussian()
        } else {
            f_val
        };

        // feedback from the posterior conditioned on data before x_t,
        // evaluated at x_t under this round's lengthscale
        let (mean, latent) = post.predict(&x_unit);
        let feedback =
            RoundFeedback::compute(data.standardize(y_raw), mean, latent, NOISE_VAR, beta_t, p_eff);

        if let PolicyState::Oscbo { primal, dual, .. } = &mut policy {
            recalibrate(primal, dual, &feedback);
        }
        v_signed = violation_update(v_signed, feedback.calibration);
        v_plus += feedback.calibration.max(0.0);

        raw_xs.push(x_raw.clone());
        raw_ys.push(y_raw);
        best_f = best_f.max(f_val);
        best_y = best_y.max(y_raw);
        cum_regret += task.optimum - f_val;

        records.push(RoundRecord {
            t,
            x: x_raw,
            y: y_raw,
            theta,
            lambda,
            phase,
            l_s: feedback.sharpness,
            l_c: feedback.calibration,
            v: v_signed,
            v_plus,
            covered: feedback.covered,
            ci_width: feedback.ci_width,
            beta: beta_t,
            best_y,
            simple_regret: task.optimum - best_f,
            cum_regret,
            wall_ms: round_start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(())
}

/// Canonical file stem for a run cell.
pub fn run_stem(task: &str, method: &Method, seed: u64) -> String {
    format!("{task}__{method}__seed{seed}")
}
