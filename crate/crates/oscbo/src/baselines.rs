//! Per-round lengthscale policies for the comparison methods: marginal
//! likelihood refitting, leave-one-out quantile recalibration, and the
//! deterministic shrinkage schedule, alongside the online-game policy
//! itself.

use crate::error::{Error, Result};
use crate::gp::{Dataset, KernelSpec, gp_fit, mll_refit};
use crate::losses::CalibrationExponent;
use crate::online::{DualOmdState, PhaseController, PrimalFtplState, ftpl_next};
use crate::optim::{OptimizerConfig, normal_cdf, normal_quantile};
use crate::rng::Rng;

/// Method selector. The first five names are the CLI vocabulary;
/// `GpUcbFixed` is a library-level diagnostic that runs UCB with a frozen
/// lengthscale (parse it as `gp-ucb-fixed:<theta>`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Oscbo,
    OscboL1,
    GpUcbMll,
    Ocbo,
    AGpUcb,
    GpUcbFixed { theta: f64 },
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "oscbo" => Ok(Method::Oscbo),
            "oscbo-l1" => Ok(Method::OscboL1),
            "gp-ucb-mll" => Ok(Method::GpUcbMll),
            "ocbo" => Ok(Method::Ocbo),
            "a-gp-ucb" => Ok(Method::AGpUcb),
            other => {
                if let Some(theta) = other.strip_prefix("gp-ucb-fixed:") {
                    let theta: f64 = theta.parse().map_err(|_| {
                        Error::Config(format!("bad fixed lengthscale in method {other:?}"))
                    })?;
                    return Ok(Method::GpUcbFixed { theta });
                }
                Err(Error::Config(format!(
                    "unknown method {other:?}; expected one of oscbo, oscbo-l1, gp-ucb-mll, ocbo, a-gp-ucb"
                )))
            }
        }
    }

    /// The calibration exponent the method plays with.
    pub fn exponent(&self) -> CalibrationExponent {
        match self {
            Method::OscboL1 => CalibrationExponent::L1,
            _ => CalibrationExponent::L2,
        }
    }

    pub fn is_oscbo(&self) -> bool {
        matches!(self, Method::Oscbo | Method::OscboL1)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Oscbo => write!(f, "oscbo"),
            Method::OscboL1 => write!(f, "oscbo-l1"),
            Method::GpUcbMll => write!(f, "gp-ucb-mll"),
            Method::Ocbo => write!(f, "ocbo"),
            Method::AGpUcb => write!(f, "a-gp-ucb"),
            Method::GpUcbFixed { theta } => write!(f, "gp-ucb-fixed:{theta}"),
        }
    }
}

/// A-GP-UCB shrinkage: `g_t = 1` for `t <= t0`, `√t` after, and
/// `θ_t = max(θ0/g_t, θ_min)`.
pub fn agp_ucb_lengthscale(theta0: f64, t: usize, t0: usize, theta_min: f64) -> f64 {
    let g = if t <= t0 { 1.0 } else { (t as f64).sqrt() };
    (theta0 / g).max(theta_min)
}

/// Leave-one-out predictive distributions on the standardized observations
/// via the precision-matrix identity: `μ_{-i} = y_i - (K_y⁻¹y)_i/(K_y⁻¹)_ii`
/// and `s²_{-i} = 1/(K_y⁻¹)_ii`. The returned variance is observation-level
/// (it already includes the noise).
pub fn loo_predictive(
    data: &Dataset,
    spec: &KernelSpec,
    noise_var: f64,
) -> Result<Vec<(f64, f64)>> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, have: n });
    }
    let post = gp_fit(data, spec, noise_var)?;
    let (inv_diag, weights) = post.precision_parts();
    Ok((0..n)
        .map(|i| {
            let s2 = 1.0 / inv_diag[i];
            (data.y_std[i] - weights[i] * s2, s2)
        })
        .collect())
}

/// Quantile recalibration from leave-one-out predictions: computes the PIT
/// values `u_i = Φ((y_i - μ_{-i})/√s²_{-i})`, takes their nearest-rank
/// `(1-δ)`-quantile clamped into `(0.5, 1)`, and returns `(q_t, Φ⁻¹(q_t))`.
/// With fewer than three observations the uncalibrated default
/// `(1-δ, Φ⁻¹(1-δ))` is returned.
pub fn ocbo_recalibrate(loo: &[(f64, f64)], y_std: &[f64], delta: f64) -> (f64, f64) {
    let p = 1.0 - delta;
    if loo.len() < 3 {
        return (p, normal_quantile(p).expect("delta in (0,1)"));
    }
    let mut pit: Vec<f64> = loo
        .iter()
        .zip(y_std)
        .map(|(&(mu, s2), &y)| normal_cdf((y - mu) / s2.sqrt()))
        .collect();
    pit.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // nearest-rank empirical quantile: the ⌈p·n⌉-th order statistic
    let rank = ((p * pit.len() as f64).ceil() as usize).clamp(1, pit.len());
    let q = pit[rank - 1].clamp(0.5 + 1e-6, 1.0 - 1e-6);
    (q, normal_quantile(q).expect("q clamped into (0,1)"))
}

/// Per-method mutable state across rounds.
#[derive(Debug, Clone)]
pub enum PolicyState {
    Oscbo {
        primal: PrimalFtplState,
        dual: DualOmdState,
        ctrl: PhaseController,
    },
    Mll {
        theta: Vec<f64>,
    },
    Ocbo {
        theta: Vec<f64>,
        /// Current calibrated level and its normal quantile.
        q: f64,
        multiplier: f64,
    },
    AGpUcb {
        theta0: Option<Vec<f64>>,
        t0: usize,
        theta_min: f64,
    },
    Fixed {
        theta: Vec<f64>,
    },
}

/// Round context shared by all policies.
pub struct PolicyCtx<'a> {
    /// BO round index, starting at 1.
    pub t: usize,
    pub base: &'a KernelSpec,
    pub noise_var: f64,
    /// Lengthscale box Θ; all policies play inside it.
    pub domain: &'a [(f64, f64)],
    pub delta: f64,
    pub refit_cfg: OptimizerConfig,
    pub rng: &'a mut Rng,
}

fn domain_geometric_mean(domain: &[(f64, f64)]) -> Vec<f64> {
    domain.iter().map(|&(lo, hi)| (lo * hi).sqrt()).collect()
}

fn clamp_to_domain(theta: &mut [f64], domain: &[(f64, f64)]) {
    for (t, &(lo, hi)) in theta.iter_mut().zip(domain) {
        *t = t.clamp(lo, hi);
    }
}

impl PolicyState {
    /// Fresh state for a method. OSCBO states are built by the harness
    /// (they need the horizon and budget); this covers the per-θ policies.
    pub fn for_simple_method(method: Method) -> Option<PolicyState> {
        match method {
            Method::GpUcbMll => Some(PolicyState::Mll { theta: Vec::new() }),
            Method::Ocbo => Some(PolicyState::Ocbo {
                theta: Vec::new(),
                q: f64::NAN,
                multiplier: f64::NAN,
            }),
            Method::AGpUcb => Some(PolicyState::AGpUcb {
                theta0: None,
                t0: 5,
                theta_min: 1e-4,
            }),
            Method::GpUcbFixed { theta } => Some(PolicyState::Fixed { theta: vec![theta] }),
            Method::Oscbo | Method::OscboL1 => None,
        }
    }

    /// OCBO's current UCB multiplier `Φ⁻¹(q_t)`, when the policy has one.
    pub fn ocbo_multiplier(&self) -> Option<f64> {
        match self {
            PolicyState::Ocbo { multiplier, .. } if multiplier.is_finite() => Some(*multiplier),
            _ => None,
        }
    }
}

/// Produces the lengthscale for round `ctx.t` and updates the policy state.
pub fn policy_next_theta(
    state: &mut PolicyState,
    data: &Dataset,
    ctx: &mut PolicyCtx<'_>,
) -> Result<Vec<f64>> {
    match state {
        PolicyState::Oscbo { primal, dual, .. } => {
            let _ = dual;
            Ok(ftpl_next(
                primal,
                ctx.base,
                &data.x,
                &data.y_std,
                ctx.noise_var,
                ctx.rng,
            ))
        }
        PolicyState::Mll { theta } => {
            let init = if theta.is_empty() {
                domain_geometric_mean(ctx.domain)
            } else {
                theta.clone()
            };
            let refit = mll_refit(data, ctx.base, ctx.noise_var, ctx.domain, &init, &ctx.refit_cfg)?;
            *theta = refit.lengthscale.clone();
            Ok(refit.lengthscale)
        }
        PolicyState::Ocbo { theta, q, multiplier } => {
            let init = if theta.is_empty() {
                domain_geometric_mean(ctx.domain)
            } else {
                theta.clone()
            };
            let refit = mll_refit(data, ctx.base, ctx.noise_var, ctx.domain, &init, &ctx.refit_cfg)?;
            *theta = refit.lengthscale.clone();
            let spec = ctx.base.with_lengthscale(theta.clone());
            let (new_q, new_mult) = match loo_predictive(data, &spec, ctx.noise_var) {
                Ok(loo) => ocbo_recalibrate(&loo, &data.y_std, ctx.delta),
                Err(_) => {
                    let p = 1.0 - ctx.delta;
                    (p, normal_quantile(p)?)
                }
            };
            *q = new_q;
            *multiplier = new_mult;
            Ok(theta.clone())
        }
        PolicyState::AGpUcb { theta0, t0, theta_min } => {
            if theta0.is_none() {
                let init = domain_geometric_mean(ctx.domain);
                let refit =
                    mll_refit(data, ctx.base, ctx.noise_var, ctx.domain, &init, &ctx.refit_cfg)?;
                *theta0 = Some(refit.lengthscale);
            }
            let base_theta = theta0.as_ref().expect("initialized above");
            let mut theta: Vec<f64> = base_theta
                .iter()
                .map(|&th0| agp_ucb_lengthscale(th0, ctx.t, *t0, *theta_min))
                .collect();
            clamp_to_domain(&mut theta, ctx.domain);
            Ok(theta)
        }
        PolicyState::Fixed { theta } => Ok(theta.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{MaternNu, fit_transforms};
    use crate::optim::OptimSpace;
    use approx::assert_abs_diff_eq;

    #[test]
    fn method_names_roundtrip() {
        for name in ["oscbo", "oscbo-l1", "gp-ucb-mll", "ocbo", "a-gp-ucb"] {
            assert_eq!(Method::parse(name).unwrap().to_string(), name);
        }
        assert!(Method::parse("bananas").is_err());
        assert_eq!(
            Method::parse("gp-ucb-fixed:0.25").unwrap(),
            Method::GpUcbFixed { theta: 0.25 }
        );
        assert_eq!(Method::parse("oscbo-l1").unwrap().exponent(), CalibrationExponent::L1);
        assert_eq!(Method::parse("oscbo").unwrap().exponent(), CalibrationExponent::L2);
    }

    #[test]
    fn agp_schedule_values() {
        assert_eq!(agp_ucb_lengthscale(1.0, 3, 5, 1e-4), 1.0);
        assert_abs_diff_eq!(agp_ucb_lengthscale(1.0, 9, 5, 1e-4), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(agp_ucb_lengthscale(1e-3, 10_000, 5, 1e-4), 1e-4);
    }

    #[test]
    fn agp_schedule_is_nonincreasing_and_floored() {
        let mut prev = f64::INFINITY;
        for t in 1..=100 {
            let theta = agp_ucb_lengthscale(0.8, t, 5, 1e-4);
            assert!(theta <= prev + 1e-15);
            assert!(theta >= 1e-4);
            prev = theta;
        }
    }

    fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let raw_x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.uniform()).collect())
            .collect();
        let raw_y: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        fit_transforms(&raw_x, &raw_y, &vec![(0.0, 1.0); d]).unwrap()
    }

    #[test]
    fn loo_symmetric_points_match() {
        let raw_x = vec![vec![0.25], vec![0.75]];
        let data = fit_transforms(&raw_x, &[1.0, 1.0], &[(0.0, 1.0)]).unwrap();
        let spec = KernelSpec::isotropic(MaternNu::FiveHalves, 0.4);
        let loo = loo_predictive(&data, &spec, 0.01).unwrap();
        assert_abs_diff_eq!(loo[0].0, loo[1].0, epsilon = 1e-12);
        assert_abs_diff_eq!(loo[0].1, loo[1].1, epsilon = 1e-12);
        let single = fit_transforms(&raw_x[..1], &[1.0], &[(0.0, 1.0)]).unwrap();
        assert!(loo_predictive(&single, &spec, 0.01).is_err());
    }

    #[test]
    fn loo_matches_bruteforce_refits() {
        let data = random_dataset(8, 2, 71);
        let spec = KernelSpec::isotropic(MaternNu::FiveHalves, 0.35);
        let loo = loo_predictive(&data, &spec, 0.01).unwrap();
        for i in 0..8 {
            let mut x_rest = data.x.clone();
            let mut y_rest = data.y_std.clone();
            x_rest.remove(i);
            y_rest.remove(i);
            let mut rest = fit_transforms(&x_rest, &y_rest, &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
            rest.y_std = y_rest;
            let post = gp_fit(&rest, &spec, 0.01).unwrap();
            let (mu, latent) = post.predict(&data.x[i]);
            assert_abs_diff_eq!(loo[i].0, mu, epsilon = 1e-8);
            assert_abs_diff_eq!(loo[i].1, latent + 0.01, epsilon = 1e-8);
        }
    }

    #[test]
    fn loo_duplicated_point_keeps_noise_floor() {
        let raw_x = vec![vec![0.5], vec![0.5], vec![0.9]];
        let data = fit_transforms(&raw_x, &[1.0, 1.2, -0.4], &[(0.0, 1.0)]).unwrap();
        let spec = KernelSpec::isotropic(MaternNu::FiveHalves, 0.4);
        let loo = loo_predictive(&data, &spec, 0.01).unwrap();
        for (_, s2) in loo {
            assert!(s2 >= 0.01 - 1e-12);
        }
    }

    #[test]
    fn ocbo_recalibration_examples() {
        // constant PIT level 0.95: q = 0.95, multiplier Φ⁻¹(0.95)
        let z95 = normal_quantile(0.95).unwrap();
        let loo: Vec<(f64, f64)> = (0..6).map(|_| (0.0, 0.04)).collect();
        let y: Vec<f64> = loo.iter().map(|&(mu, s2)| mu + s2.sqrt() * z95).collect();
        let (q, mult) = ocbo_recalibrate(&loo, &y, 0.1);
        assert_abs_diff_eq!(q, 0.95, epsilon = 1e-9);
        assert_abs_diff_eq!(mult, 1.64485362695147, epsilon = 1e-6);

        // PIT values 0.1..1.0: nearest rank at p=0.9 is the 9th order statistic
        let loo: Vec<(f64, f64)> = (0..10).map(|_| (0.0, 1.0)).collect();
        let y: Vec<f64> = (1..=10)
            .map(|i| {
                let u = (i as f64 / 10.0).min(1.0 - 1e-12);
                normal_quantile(u).unwrap()
            })
            .collect();
        let (q, _) = ocbo_recalibrate(&loo, &y, 0.1);
        assert_abs_diff_eq!(q, 0.9, epsilon = 1e-9);

        // fewer than three points: uncalibrated default
        let (q, mult) = ocbo_recalibrate(&loo[..2], &y[..2], 0.1);
        assert_abs_diff_eq!(q, 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(mult, normal_quantile(0.9).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn ocbo_recalibration_on_calibrated_pits_is_near_nominal() {
        let mut rng = Rng::new(5150);
        let loo: Vec<(f64, f64)> = (0..1000).map(|_| (0.0, 1.0)).collect();
        let y: Vec<f64> = (0..1000)
            .map(|_| {
                let u = rng.uniform().clamp(1e-9, 1.0 - 1e-9);
                normal_quantile(u).unwrap()
            })
            .collect();
        let (q, mult) = ocbo_recalibrate(&loo, &y, 0.1);
        assert!((q - 0.9).abs() < 0.03, "q = {q}");
        assert!(mult > 0.0);
    }

    #[test]
    fn policies_are_deterministic_and_within_domain() {
        let data = random_dataset(12, 1, 99);
        let base = KernelSpec::isotropic(MaternNu::FiveHalves, 1.0);
        let domain = [(0.01, 10.0)];
        for method in [Method::GpUcbMll, Method::Ocbo, Method::AGpUcb] {
            let run = |seed: u64| {
                let mut state = PolicyState::for_simple_method(method).unwrap();
                let mut rng = Rng::new(seed);
                let mut out = Vec::new();
                for t in 1..=3 {
                    let mut ctx = PolicyCtx {
                        t,
                        base: &base,
                        noise_var: 0.01,
                        domain: &domain,
                        delta: 0.1,
                        refit_cfg: OptimizerConfig::new(0.01, 50, OptimSpace::Log),
                        rng: &mut rng,
                    };
                    out.push(policy_next_theta(&mut state, &data, &mut ctx).unwrap());
                }
                out
            };
            let a = run(1);
            let b = run(1);
            assert_eq!(a, b, "{method} not reproducible");
            for theta in a.iter().flatten() {
                assert!((0.01..=10.0).contains(theta), "{method} left the domain");
            }
        }
    }

    #[test]
    fn agp_never_refits_after_initialization() {
        let data = random_dataset(10, 1, 13);
        let base = KernelSpec::isotropic(MaternNu::FiveHalves, 1.0);
        let domain = [(0.01, 10.0)];
        let mut state = PolicyState::for_simple_method(Method::AGpUcb).unwrap();
        let mut rng = Rng::new(0);
        let mut thetas = Vec::new();
        for t in 1..=10 {
            let mut ctx = PolicyCtx {
                t,
                base: &base,
                noise_var: 0.01,
                domain: &domain,
                delta: 0.1,
                refit_cfg: OptimizerConfig::new(0.01, 50, OptimSpace::Log),
                rng: &mut rng,
            };
            thetas.push(policy_next_theta(&mut state, &data, &mut ctx).unwrap()[0]);
        }
        let PolicyState::AGpUcb { theta0, t0, theta_min } = &state else {
            panic!("wrong state");
        };
        let th0 = theta0.as_ref().unwrap()[0];
        for (i, theta) in thetas.iter().enumerate() {
            let expected = agp_ucb_lengthscale(th0, i + 1, *t0, *theta_min).clamp(0.01, 10.0);
            assert_abs_diff_eq!(*theta, expected, epsilon = 1e-15);
        }
    }
}
