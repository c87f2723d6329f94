//! Benchmark matrices: task × method × seed grids run in parallel, with
//! per-run CSV logs, a mean ± standard-error summary, and per-task method
//! ranks.

use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::baselines::Method;
use crate::error::{Error, Result};
use crate::harness::record::records_to_csv;
use crate::harness::{RoundRecord, RunConfig, run_single, run_stem};
use crate::losses::{BetaSchedule, CalibrationExponent};
use crate::tasks::task_by_name;

/// Flat benchmark configuration, read from a TOML file whose keys mirror
/// the CLI flags. CLI flags override file values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub tasks: Vec<String>,
    pub methods: Vec<String>,
    /// Explicit seed list; wins over `n_seeds`.
    pub seeds: Option<Vec<u64>>,
    /// Seed count, expanded to `0..n_seeds`. Default 10.
    pub n_seeds: Option<u64>,
    pub rounds: Option<usize>,
    pub init: Option<usize>,
    pub p: Option<u8>,
    pub delta: Option<f64>,
    pub rho_hat: Option<f64>,
    pub beta: Option<f64>,
    pub acq: Option<String>,
    pub kappa: Option<f64>,
    pub c_p: Option<f64>,
    pub c_d: Option<f64>,
    pub noise_std: Option<f64>,
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub data_dir: Option<String>,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bench config: {e}")))
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(list) => list.clone(),
            None => (0..self.n_seeds.unwrap_or(10)).collect(),
        }
    }

    /// Applies the file's scalar overrides onto a run configuration.
    pub fn apply_to(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(v) = self.rounds {
            cfg.rounds = v;
        }
        if let Some(v) = self.init {
            cfg.n_init = v;
        }
        if let Some(v) = self.p {
            cfg.p = CalibrationExponent::from_int(v)?;
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
                "ucb" => crate::acquisition::AcquisitionKind::Ucb,
                "logei" => crate::acquisition::AcquisitionKind::LogEi,
                other => return Err(Error::Config(format!("unknown acquisition {other:?}"))),
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
            cfg.data_dir = Some(v.into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub task: String,
    pub method: String,
    pub seeds: usize,
    pub final_simple_mean: f64,
    pub final_simple_stderr: f64,
    pub final_cum_mean: f64,
    pub final_cum_stderr: f64,
}

#[derive(Debug, Clone)]
pub struct RankRow {
    pub method: String,
    /// `(task, rank)` for each task the method completed.
    pub per_task: Vec<(String, f64)>,
    pub mean_rank: f64,
}

#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub rows: Vec<SummaryRow>,
    pub ranks: Vec<RankRow>,
    /// `(task, method, seed, message)` for cells that failed.
    pub failures: Vec<(String, String, u64, String)>,
    /// Tasks skipped before running (e.g. missing data files).
    pub skipped_tasks: Vec<(String, String)>,
}

pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt() / (n as f64).sqrt())
}

/// Average ranks of `scores` (lower is better); ties share the average of
/// the positions they span.
pub(crate) fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Runs the full matrix. Cells execute in parallel and independently; a
/// failing cell is recorded and the rest continue. Per-run CSVs are
/// written into `out_dir` as `<task>__<method>__seed<k>.csv`.
pub fn run_bench(
    bench: &BenchConfig,
    base: &RunConfig,
    out_dir: &Path,
) -> Result<BenchSummary> {
    if bench.tasks.is_empty() || bench.methods.is_empty() {
        return Err(Error::Config("bench needs at least one task and one method".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let methods: Vec<Method> = bench
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<Result<_>>()?;
    let seeds = bench.seeds();

    // resolve tasks up front so missing data files skip the whole task
    let mut tasks = Vec::new();
    let mut skipped_tasks = Vec::new();
    for name in &bench.tasks {
        match task_by_name(name, base.data_dir.as_deref()) {
            Ok(_) => tasks.push(name.clone()),
            Err(e) => {
                eprintln!("warning: skipping task {name}: {e}");
                skipped_tasks.push((name.clone(), e.to_string()));
            }
        }
    }

    let cells: Vec<(String, Method, u64)> = tasks
        .iter()
        .flat_map(|t| {
            methods
                .iter()
                .flat_map(|m| seeds.iter().map(|s| (t.clone(), *m, *s)).collect::<Vec<_>>())
        })
        .collect();

    let results: Vec<(String, Method, u64, Result<Vec<RoundRecord>>)> = cells
        .par_iter()
        .map(|(task, method, seed)| {
            let cfg = RunConfig {
                task: task.clone(),
                method: *method,
                seed: *seed,
                ..base.clone()
            };
            let outcome = run_single(&cfg).and_then(|records| {
                let path = out_dir.join(format!("{}.csv", run_stem(task, method, *seed)));
                std::fs::write(&path, records_to_csv(&records))
                    .map_err(|e| Error::io(&path, e))?;
                Ok(records)
            });
            (task.clone(), *method, *seed, outcome)
        })
        .collect();

    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for task in &tasks {
        for method in &methods {
            let mut simple = Vec::new();
            let mut cum = Vec::new();
            for (t, m, s, outcome) in &results {
                if t != task || m != method {
                    continue;
                }
                match outcome {
                    Ok(records) => {
                        if let Some(last) = records.last() {
                            simple.push(last.simple_regret);
                            cum.push(last.cum_regret);
                        }
                    }
                    Err(e) => failures.push((t.clone(), m.to_string(), *s, e.to_string())),
                }
            }
            if !simple.is_empty() {
                let (sm, se) = mean_stderr(&simple);
                let (cm, ce) = mean_stderr(&cum);
                rows.push(SummaryRow {
                    task: task.clone(),
                    method: method.to_string(),
                    seeds: simple.len(),
                    final_simple_mean: sm,
                    final_simple_stderr: se,
                    final_cum_mean: cm,
                    final_cum_stderr: ce,
                });
            }
        }
    }

    // per-task ranks of mean final simple regret, averaged across tasks
    let mut ranks: Vec<RankRow> = methods
        .iter()
        .map(|m| RankRow {
            method: m.to_string(),
            per_task: Vec::new(),
            mean_rank: f64::NAN,
        })
        .collect();
    for task in &tasks {
        let present: Vec<&SummaryRow> = rows.iter().filter(|r| &r.task == task).collect();
        if present.is_empty() {
            continue;
        }
        let scores: Vec<f64> = present.iter().map(|r| r.final_simple_mean).collect();
        let task_ranks = average_ranks(&scores);
        for (row, rank) in present.iter().zip(task_ranks) {
            if let Some(entry) = ranks.iter_mut().find(|r| r.method == row.method) {
                entry.per_task.push((task.clone(), rank));
            }
        }
    }
    for entry in &mut ranks {
        if !entry.per_task.is_empty() {
            entry.mean_rank =
                entry.per_task.iter().map(|(_, r)| r).sum::<f64>() / entry.per_task.len() as f64;
        }
    }

    let summary = BenchSummary {
        rows,
        ranks,
        failures,
        skipped_tasks,
    };
    write_bench_outputs(out_dir, &summary)?;
    Ok(summary)
}

/// Writes `summary.csv`, `ranks.csv`, and (when nonempty) `failures.csv`.
pub fn write_bench_outputs(out_dir: &Path, summary: &BenchSummary) -> Result<()> {
    let mut text = String::from(
        "task,method,seeds,final_simple_mean,final_simple_stderr,final_cum_mean,final_cum_stderr\n",
    );
    for r in &summary.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.task,
            r.method,
            r.seeds,
            r.final_simple_mean,
            r.final_simple_stderr,
            r.final_cum_mean,
            r.final_cum_stderr
        ));
    }
    let path = out_dir.join("summary.csv");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let mut text = String::from("method,task,rank,mean_rank\n");
    for r in &summary.ranks {
        for (task, rank) in &r.per_task {
            text.push_str(&format!("{},{},{},{}\n", r.method, task, rank, r.mean_rank));
        }
    }
    let path = out_dir.join("ranks.csv");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    if !summary.failures.is_empty() {
        let mut text = String::from("task,method,seed,error\n");
        for (task, method, seed, message) in &summary.failures {
            text.push_str(&format!(
                "{},{},{},{}\n",
                task,
                method,
                seed,
                message.replace(',', ";").replace('\n', " ")
            ));
        }
        let path = out_dir.join("failures.csv");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing_and_seed_expansion() {
        let cfg = BenchConfig::from_toml(
            r#"
tasks = ["hartmann3"]
methods = ["oscbo", "gp-ucb-mll"]
n_seeds = 3
rounds = 7
theta_min = 0.02
"#,
        )
        .unwrap();
        assert_eq!(cfg.seeds(), vec![0, 1, 2]);
        let mut run = RunConfig::default();
        cfg.apply_to(&mut run).unwrap();
        assert_eq!(run.rounds, 7);
        assert_eq!(run.theta_box.0, 0.02);

        let explicit = BenchConfig {
            seeds: Some(vec![5, 9]),
            ..cfg
        };
        assert_eq!(explicit.seeds(), vec![5, 9]);

        assert!(BenchConfig::from_toml("unknown_key = 1").is_err());
    }

    #[test]
    fn rank_ties_are_averaged() {
        assert_eq!(average_ranks(&[0.3, 0.1, 0.3, 0.7]), vec![2.5, 1.0, 2.5, 4.0]);
        assert_eq!(average_ranks(&[1.0]), vec![1.0]);
        assert_eq!(average_ranks(&[2.0, 2.0]), vec![1.5, 1.5]);
    }

    #[test]
    fn mean_stderr_matches_definition() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        let std = (((1.5f64).powi(2) + 0.25 + 0.25 + 2.25) / 3.0).sqrt();
        assert!((se - std / 2.0).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }
}
