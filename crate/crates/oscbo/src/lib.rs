//! Bayesian optimization with online sharpness--calibration control of GP
//! hyperparameters.
//!
//! The crate implements a full desk-scale BO toolkit around one idea: treat
//! kernel lengthscale selection as a constrained online game that keeps
//! predictive intervals sharp while bounding their long-run miscoverage. A
//! follow-the-perturbed-leader learner proposes lengthscales, an online
//! mirror descent learner prices calibration violations, and a play/recovery
//! controller caps the cumulative violation budget.
//!
//! The pieces are usable on their own:
//!
//! * [`gp`] — Matérn-kernel Gaussian-process regression (Cholesky-factored
//!   fits, marginal likelihood, lengthscale refits, input/output transforms).
//! * [`losses`] — per-round sharpness/calibration losses, coverage and
//!   interval-width diagnostics, information gain and regret-envelope bounds.
//! * [`online`] — the FTPL primal learner, OMD dual learner, and the
//!   play/recovery phase controller.
//! * [`acquisition`] — UCB and LogEI values plus a deterministic multi-start
//!   maximizer.
//! * [`baselines`] — per-round lengthscale policies for the comparison
//!   methods (MLL refits, leave-one-out quantile recalibration, deterministic
//!   shrinkage schedules).
//! * [`tasks`] — synthetic benchmarks (Levy, Hartmann) and tabular oracles
//!   built from CSV data.
//! * [`harness`] — seeded experiment runs, benchmark matrices, CSV logs,
//!   diagnostics, and SVG regret plots.
//!
//! Runnable walkthroughs live in `examples/`; the `oscbo` binary exposes the
//! same harness as a small CLI (`run`, `bench`, `plot`, `oracle-check`).

pub mod acquisition;
pub mod baselines;
pub mod error;
pub mod gp;
pub mod harness;
pub mod losses;
pub mod online;
pub mod optim;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};
pub use gp::{Dataset, GpPosterior, KernelSpec, MaternNu};
pub use harness::{RoundRecord, RunConfig, run_single};
pub use losses::{BetaSchedule, CalibrationExponent, RoundFeedback};
pub use rng::Rng;
