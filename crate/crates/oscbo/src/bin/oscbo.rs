//! Thin command-line front end over the library harness.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oscbo::acquisition::AcquisitionKind;
use oscbo::baselines::Method;
use oscbo::harness::{
    BenchConfig, PlotMetric, RunConfig, diagnostics_csv, plot_svg, records_from_csv,
    records_to_csv, run_bench, run_single_partial, run_stem,
};
use oscbo::losses::{BetaSchedule, CalibrationExponent};
use oscbo::rng::Rng;
use oscbo::tasks::{Objective, tabular_config, task_by_name};

#[derive(Parser)]
#[command(name = "oscbo", version, about = "Bayesian optimization runs with online sharpness/calibration control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunOverrides {
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    init: Option<usize>,
    /// Calibration exponent (1 or 2).
    #[arg(long)]
    p: Option<u8>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    rho_hat: Option<f64>,
    /// Fixed UCB/constraint exploration scale.
    #[arg(long)]
    beta: Option<f64>,
    /// Acquisition: ucb or logei.
    #[arg(long)]
    acq: Option<String>,
    /// Play/recovery budget scale (inf disables recovery).
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    c_p: Option<f64>,
    #[arg(long)]
    c_d: Option<f64>,
    /// Observation noise standard deviation.
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    theta_min: Option<f64>,
    #[arg(long)]
    theta_max: Option<f64>,
    /// Directory with <task>.csv files for tabular tasks.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

impl RunOverrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), String> {
        if let Some(v) = self.rounds {
            cfg.rounds = v;
        }
        if let Some(v) = self.init {
            cfg.n_init = v;
        }
        if let Some(v) = self.p {
            cfg.p = CalibrationExponent::from_int(v).map_err(|e| e.to_string())?;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.rho_hat {
            cfg.rho_hat = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = BetaSchedule::Fixed(v);
        }
        if let Some(v) = &self.acq {
            cfg.acquisition = match v.as_str() {
                "ucb" => AcquisitionKind::Ucb,
                "logei" => AcquisitionKind::LogEi,
                other => return Err(format!("unknown acquisition {other:?}")),
            };
        }
        if let Some(v) = self.kappa {
            cfg.kappa = v;
        }
        if let Some(v) = self.c_p {
            cfg.c_p = v;
        }
        if let Some(v) = self.c_d {
            cfg.c_d = v;
        }
        if let Some(v) = self.noise_std {
            cfg.noise_std = v;
        }
        if let Some(v) = self.theta_min {
            cfg.theta_box.0 = v;
        }
        if let Some(v) = self.theta_max {
            cfg.theta_box.1 = v;
        }
        if let Some(v) = &self.data_dir {
            cfg.data_dir = Some(v.clone());
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// One seeded run; writes <task>__<method>__seed<k>.csv plus a
    /// .diag.csv next to it.
    Run {
        #[arg(long)]
        task: String,
        /// oscbo, oscbo-l1, gp-ucb-mll, ocbo, or a-gp-ucb.
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        overrides: RunOverrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// A task × method × seed matrix from a TOML config; CLI flags
    /// override file values.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: RunOverrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render mean ± stderr curves from run CSVs into an SVG.
    Plot {
        /// simple, cumulative, coverage, or lengthscale.
        #[arg(long)]
        metric: String,
        #[arg(long)]
        out: PathBuf,
        /// Run CSV files; <task>__<method>__seed<k>.csv names group by
        /// task/method.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Validate a tabular task data file and its oracle.
    OracleCheck {
        #[arg(long)]
        task: String,
        #[arg(long)]
        data: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            task,
            method,
            seed,
            overrides,
            out,
        } => cmd_run(&task, &method, seed, &overrides, &out),
        Command::Bench {
            config,
            overrides,
            out,
        } => cmd_bench(&config, &overrides, &out),
        Command::Plot { metric, out, files } => cmd_plot(&metric, &out, &files),
        Command::OracleCheck { task, data } => cmd_oracle_check(&task, &data),
    }
}

fn cmd_run(
    task: &str,
    method: &str,
    seed: u64,
    overrides: &RunOverrides,
    out: &Path,
) -> Result<(), String> {
    let mut cfg = RunConfig {
        task: task.to_string(),
        method: Method::parse(method).map_err(|e| e.to_string())?,
        seed,
        ..RunConfig::default()
    };
    overrides.apply(&mut cfg)?;
    std::fs::create_dir_all(out).map_err(|e| format!("creating {}: {e}", out.display()))?;

    let (records, error) = run_single_partial(&cfg);
    let stem = run_stem(&cfg.task, &cfg.method, cfg.seed);
    if !records.is_empty() {
        let csv_path = out.join(format!("{stem}.csv"));
        std::fs::write(&csv_path, records_to_csv(&records))
            .map_err(|e| format!("writing {}: {e}", csv_path.display()))?;
        let diag_path = out.join(format!("{stem}.diag.csv"));
        std::fs::write(&diag_path, diagnostics_csv(&records).map_err(|e| e.to_string())?)
            .map_err(|e| format!("writing {}: {e}", diag_path.display()))?;
        let last = records.last().expect("nonempty");
        println!(
            "{stem}: {} rounds, best_y {}, simple_regret {}, cum_regret {}",
            records.len(),
            last.best_y,
            last.simple_regret,
            last.cum_regret
        );
    }
    if let Some(e) = error {
        let err_path = out.join(format!("{stem}.error.txt"));
        let _ = std::fs::write(&err_path, format!("{e}\n"));
        return Err(format!(
            "run aborted after {} rounds (partial log flushed): {e}",
            records.len()
        ));
    }
    Ok(())
}

fn cmd_bench(config: &Path, overrides: &RunOverrides, out: &Path) -> Result<(), String> {
    let text =
        std::fs::read_to_string(config).map_err(|e| format!("reading {}: {e}", config.display()))?;
    let bench = BenchConfig::from_toml(&text).map_err(|e| e.to_string())?;
    let mut base = RunConfig::default();
    bench.apply_to(&mut base).map_err(|e| e.to_string())?;
    overrides.apply(&mut base)?;

    let summary = run_bench(&bench, &base, out).map_err(|e| e.to_string())?;
    println!(
        "{:<14} {:<12} {:>5} {:>14} {:>12} {:>14} {:>12}",
        "task", "method", "seeds", "simple(mean)", "stderr", "cum(mean)", "stderr"
    );
    for row in &summary.rows {
        println!(
            "{:<14} {:<12} {:>5} {:>14.6} {:>12.6} {:>14.6} {:>12.6}",
            row.task,
            row.method,
            row.seeds,
            row.final_simple_mean,
            row.final_simple_stderr,
            row.final_cum_mean,
            row.final_cum_stderr
        );
    }
    for rank in &summary.ranks {
        if !rank.mean_rank.is_nan() {
            println!("rank {:<12} {:.3}", rank.method, rank.mean_rank);
        }
    }
    if !summary.failures.is_empty() {
        eprintln!("{} cell(s) failed; see failures.csv", summary.failures.len());
    }
    Ok(())
}

fn cmd_plot(metric: &str, out: &Path, files: &[PathBuf]) -> Result<(), String> {
    let metric = PlotMetric::parse(metric).map_err(|e| e.to_string())?;
    // group by <task>__<method> from the file name; unmatched files stand
    // alone under their stem
    let mut groups: Vec<(String, Vec<Vec<oscbo::RoundRecord>>)> = Vec::new();
    for file in files {
        let text = std::fs::read_to_string(file)
            .map_err(|e| format!("reading {}: {e}", file.display()))?;
        let records = records_from_csv(&text).map_err(|e| format!("{}: {e}", file.display()))?;
        let stem = file
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("run")
            .to_string();
        let label = match stem.split("__").collect::<Vec<_>>().as_slice() {
            [task, method, seed] if seed.starts_with("seed") => format!("{task}/{method}"),
            _ => stem,
        };
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, runs)) => runs.push(records),
            None => groups.push((label, vec![records])),
        }
    }
    let svg = plot_svg(&groups, metric).map_err(|e| e.to_string())?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| format!("creating {}: {e}", parent.display()))?;
        }
    }
    std::fs::write(out, svg).map_err(|e| format!("writing {}: {e}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_oracle_check(task: &str, data: &Path) -> Result<(), String> {
    let config = tabular_config(task)
        .ok_or_else(|| format!("{task:?} is not a tabular task; expected material5, concrete7, or crossbarrel4"))?;
    let dir = data
        .parent()
        .ok_or_else(|| "data path has no parent directory".to_string())?;
    let expected = dir.join(format!("{task}.csv"));
    let spec = if expected == data {
        task_by_name(task, Some(dir)).map_err(|e| e.to_string())?
    } else {
        // arbitrary file name: ingest directly
        let rows = oscbo::tasks::load_table(data, config).map_err(|e| e.to_string())?;
        oscbo::tasks::build_tabular_oracle(task, &rows, 12, 2.0, 1e-12).map_err(|e| e.to_string())?
    };
    let Objective::Tabular(oracle) = &spec.objective else {
        return Err("task did not build a tabular oracle".into());
    };

    println!(
        "{task}: {} distinct designs, {} mode, optimum {}",
        oracle.len(),
        if oracle.is_grid() { "multilinear-grid" } else { "knn-idw" },
        spec.optimum
    );
    for (j, (&(lo, hi), &(rlo, rhi))) in spec
        .bounds
        .iter()
        .zip(config.reference_bounds)
        .enumerate()
    {
        let span = (rhi - rlo).abs().max(1e-9);
        let off = ((lo - rlo).abs() / span).max((hi - rhi).abs() / span);
        let marker = if off > 0.05 { "  <-- differs from reference" } else { "" };
        println!(
            "  {}: [{lo}, {hi}] (reference [{rlo}, {rhi}]){marker}",
            config.input_columns[j]
        );
    }

    let mut failures = 0;
    // stored designs must come back bit-exactly
    let mut mismatches = 0;
    for (design, value) in oracle.stored() {
        if spec.evaluate(design) != value {
            mismatches += 1;
        }
    }
    if mismatches == 0 {
        println!("stored-design exactness: PASS ({} designs)", oracle.len());
    } else {
        println!("stored-design exactness: FAIL ({mismatches} mismatches)");
        failures += 1;
    }

    if !oracle.is_grid() {
        // interpolation path against a naive full-sort reimplementation
        let mut rng = Rng::new(0xC0FFEE);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let q: Vec<f64> = spec
                .bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.uniform())
                .collect();
            let qn: Vec<f64> = q
                .iter()
                .zip(&spec.bounds)
                .map(|(v, &(lo, hi))| (v.clamp(lo, hi) - lo) / (hi - lo))
                .collect();
            let mut dists: Vec<(f64, usize)> = oracle
                .normalized_points()
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let d2: f64 = p.iter().zip(&qn).map(|(a, b)| (a - b).powi(2)).sum();
                    (d2.sqrt(), i)
                })
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if dists[0].0 == 0.0 {
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for &(dist, i) in dists.iter().take(oracle.k) {
                let w = (dist + oracle.epsilon).powf(-oracle.power);
                num += w * oracle.values()[i];
                den += w;
            }
            worst = worst.max((spec.evaluate(&q) - num / den).abs());
        }
        if worst <= 1e-12 {
            println!("knn-idw vs brute force: PASS (max |diff| {worst:.2e})");
        } else {
            println!("knn-idw vs brute force: FAIL (max |diff| {worst:.2e})");
            failures += 1;
        }
    }

    if failures > 0 {
        Err(format!("{failures} oracle check(s) failed"))
    } else {
        println!("oracle checks passed");
        Ok(())
    }
}
