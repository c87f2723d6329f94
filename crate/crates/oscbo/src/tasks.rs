//! Benchmark tasks: synthetic test functions (Levy, Hartmann 3/6), tabular
//! oracles interpolated from CSV data, seeded initial designs, and a
//! synthetic GP-sample objective for calibration studies.
//!
//! All objectives are deterministic maximization problems in original
//! units. Tabular tasks need user-supplied CSV files (the repository ships
//! the column contracts and reference ranges, not the datasets); see the
//! README for the expected headers.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{KernelSpec, kernel_matrix};
use crate::rng::Rng;

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

const HARTMANN3_A: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];
const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.03815, 0.5743, 0.8828],
];

const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.0, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// Maxima of the built-in synthetic tasks, frozen from independent
/// multi-start numeric maximization.
pub const HARTMANN3_MAX: f64 = 3.862782147820756;
pub const HARTMANN6_MAX: f64 = 3.3224081622136845;

/// Negated Levy function on `[-10, 10]^d` (maximum 0 at all-ones).
pub fn levy(x: &[f64]) -> f64 {
    use std::f64::consts::PI;
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let mut total = (PI * w[0]).sin().powi(2);
    for wi in &w[..d - 1] {
        total += (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2));
    }
    total += (w[d - 1] - 1.0).powi(2) * (1.0 + (2.0 * PI * w[d - 1]).sin().powi(2));
    -total
}

fn hartmann(x: &[f64], a: &[[f64; 3]; 4], p: &[[f64; 3]; 4]) -> f64 {
    hartmann_general(x, &a.map(|r| r.to_vec()), &p.map(|r| r.to_vec()))
}

fn hartmann_general(x: &[f64], a: &[Vec<f64>; 4], p: &[Vec<f64>; 4]) -> f64 {
    (0..4)
        .map(|i| {
            let expo: f64 = x
                .iter()
                .enumerate()
                .map(|(j, xj)| a[i][j] * (xj - p[i][j]).powi(2))
                .sum();
            HARTMANN_ALPHA[i] * (-expo).exp()
        })
        .sum()
}

/// Hartmann function on the unit cube in the maximization orientation
/// (positive basin sum), `d = 3`.
pub fn hartmann3(x: &[f64]) -> f64 {
    hartmann(x, &HARTMANN3_A, &HARTMANN3_P)
}

/// Hartmann function on the unit cube, `d = 6`.
pub fn hartmann6(x: &[f64]) -> f64 {
    hartmann_general(
        x,
        &HARTMANN6_A.map(|r| r.to_vec()),
        &HARTMANN6_P.map(|r| r.to_vec()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Synthetic,
    Tabular,
}

/// The objective behind a task.
#[derive(Clone)]
pub enum Objective {
    Levy,
    Hartmann3,
    Hartmann6,
    Tabular(TabularOracle),
    /// Arbitrary deterministic function of the original-unit point.
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::Levy => write!(f, "Levy"),
            Objective::Hartmann3 => write!(f, "Hartmann3"),
            Objective::Hartmann6 => write!(f, "Hartmann6"),
            Objective::Tabular(o) => write!(f, "Tabular({} points)", o.len()),
            Objective::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A registered benchmark: bounds, a deterministic objective, and the
/// optimum used for regret.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub name: String,
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    /// `f*`: exact for synthetic tasks, the table maximum for tabular ones.
    pub optimum: f64,
    pub kind: TaskKind,
    pub objective: Objective,
}

impl TaskSpec {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Levy => levy(x),
            Objective::Hartmann3 => hartmann3(x),
            Objective::Hartmann6 => hartmann6(x),
            Objective::Tabular(oracle) => oracle.eval(x),
            Objective::Custom(f) => f(x),
        }
    }

    pub fn custom(
        name: &str,
        bounds: Vec<(f64, f64)>,
        optimum: f64,
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    ) -> Self {
        TaskSpec {
            name: name.to_string(),
            dim: bounds.len(),
            bounds,
            optimum,
            kind: TaskKind::Synthetic,
            objective: Objective::Custom(f),
        }
    }
}

/// Complete-grid index for multilinear interpolation.
#[derive(Debug, Clone)]
struct GridIndex {
    /// Sorted distinct raw levels per dimension.
    levels: Vec<Vec<f64>>,
    /// Value at each vertex, row-major over level indices.
    values: Vec<f64>,
    strides: Vec<usize>,
}

impl GridIndex {
    fn vertex(&self, idx: &[usize]) -> f64 {
        let flat: usize = idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
        self.values[flat]
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let d = self.levels.len();
        // per-dimension cell index and fractional position
        let mut cell = vec![0usize; d];
        let mut frac = vec![0.0f64; d];
        for j in 0..d {
            let levels = &self.levels[j];
            let v = x[j];
            let hi = levels.partition_point(|l| *l < v).min(levels.len() - 1);
            let lo = hi.saturating_sub(if levels[hi] > v { 1 } else { 0 });
            let (lo, hi) = if lo == hi && hi + 1 < levels.len() {
                (lo, hi + 1)
            } else if lo == hi {
                (hi - 1, hi)
            } else {
                (lo, hi)
            };
            cell[j] = lo;
            frac[j] = ((v - levels[lo]) / (levels[hi] - levels[lo])).clamp(0.0, 1.0);
        }
        // blend the 2^d cell corners
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut idx = vec![0usize; d];
            for j in 0..d {
                if corner >> j & 1 == 1 {
                    weight *= frac[j];
                    idx[j] = cell[j] + 1;
                } else {
                    weight *= 1.0 - frac[j];
                    idx[j] = cell[j];
                }
            }
            if weight > 0.0 {
                total += weight * self.vertex(&idx);
            }
        }
        total
    }
}

/// Deterministic continuous oracle over a data table: exact at stored
/// designs, multilinear on complete grids, k-nearest-neighbor
/// inverse-distance weighting otherwise. Queries are clipped to the table's
/// bounds and distances measured in normalized input space.
#[derive(Debug, Clone)]
pub struct TabularOracle {
    /// Deduplicated designs, normalized to the unit cube.
    points_norm: Vec<Vec<f64>>,
    /// Averaged objective per design.
    values: Vec<f64>,
    pub k: usize,
    pub power: f64,
    pub epsilon: f64,
    pub bounds: Vec<(f64, f64)>,
    grid: Option<GridIndex>,
    /// Deduplicated designs in original units (grid interpolation works on
    /// raw coordinates; per-cell fractions agree with normalized ones).
    points_raw: Vec<Vec<f64>>,
}

impl TabularOracle {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_grid(&self) -> bool {
        self.grid.is_some()
    }

    /// Deduplicated designs in original units with their averaged values.
    pub fn stored(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points_raw
            .iter()
            .zip(&self.values)
            .map(|(p, v)| (p.as_slice(), *v))
    }

    /// Designs normalized to the unit cube, in storage order.
    pub fn normalized_points(&self) -> &[Vec<f64>] {
        &self.points_norm
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(v, &(lo, hi))| (v.clamp(lo, hi) - lo) / (hi - lo))
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let clipped: Vec<f64> = x
            .iter()
            .zip(&self.bounds)
            .map(|(v, &(lo, hi))| v.clamp(lo, hi))
            .collect();
        let x_norm = self.normalize(&clipped);
        // exact stored design: return the stored (averaged) value bit-exactly
        if let Some(i) = self.points_norm.iter().position(|p| p == &x_norm) {
            return self.values[i];
        }
        if let Some(grid) = &self.grid {
            return grid.eval(&clipped);
        }
        // k nearest by (distance, index); ties at the k-th distance keep
        // the lower index
        let mut order: Vec<(f64, usize)> = self
            .points_norm
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(&x_norm).map(|(a, b)| (a - b).powi(2)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut num = 0.0;
        let mut den = 0.0;
        for &(dist, i) in order.iter().take(self.k) {
            let w = (dist + self.epsilon).powf(-self.power);
            num += w * self.values[i];
            den += w;
        }
        num / den
    }
}

/// Builds a tabular task from `m x (d+1)` rows (objective last), averaging
/// duplicate designs, taking bounds as columnwise min/max, and selecting
/// multilinear interpolation when the designs form a complete rectangular
/// grid.
pub fn build_tabular_oracle(
    name: &str,
    rows: &[Vec<f64>],
    k: usize,
    power: f64,
    epsilon: f64,
) -> Result<TaskSpec> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty table".into()));
    }
    let width = rows[0].len();
    if width < 2 {
        return Err(Error::InvalidArgument(
            "table needs at least one input column and one objective column".into(),
        ));
    }
    let d = width - 1;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::InvalidArgument(format!(
                "row {i} has {} fields, expected {width}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value in row {i}")));
        }
    }

    // average duplicate designs (exact raw-coordinate equality)
    let mut grouped: HashMap<Vec<u64>, (Vec<f64>, f64, usize)> = HashMap::new();
    let mut keys_in_order: Vec<Vec<u64>> = Vec::new();
    for row in rows {
        let design = row[..d].to_vec();
        let key: Vec<u64> = design.iter().map(|v| v.to_bits()).collect();
        match grouped.get_mut(&key) {
            Some(entry) => {
                entry.1 += row[d];
                entry.2 += 1;
            }
            None => {
                grouped.insert(key.clone(), (design, row[d], 1));
                keys_in_order.push(key);
            }
        }
    }
    let mut points_raw = Vec::with_capacity(keys_in_order.len());
    let mut values = Vec::with_capacity(keys_in_order.len());
    for key in &keys_in_order {
        let (design, sum, count) = &grouped[key];
        points_raw.push(design.clone());
        values.push(sum / *count as f64);
    }

    if points_raw.len() < k {
        return Err(Error::InsufficientData {
            needed: k,
            have: points_raw.len(),
        });
    }

    let bounds: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in &points_raw {
                lo = lo.min(p[j]);
                hi = hi.max(p[j]);
            }
            (lo, hi)
        })
        .collect();
    if let Some(j) = bounds.iter().position(|&(lo, hi)| !(lo < hi)) {
        return Err(Error::InvalidArgument(format!(
            "input column {j} is constant; bounds would collapse"
        )));
    }

    // grid detection: the product of distinct per-dimension levels must
    // exactly account for every deduplicated design
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut col: Vec<f64> = points_raw.iter().map(|p| p[j]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        col.dedup();
        levels.push(col);
    }
    let grid_size: usize = levels.iter().map(|l| l.len()).product();
    let grid = if grid_size == points_raw.len() {
        let mut strides = vec![1usize; d];
        for j in (0..d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * levels[j + 1].len();
        }
        let mut grid_values = vec![f64::NAN; grid_size];
        for (p, v) in points_raw.iter().zip(&values) {
            let flat: usize = (0..d)
                .map(|j| {
                    let idx = levels[j]
                        .iter()
                        .position(|l| *l == p[j])
                        .expect("level from this column");
                    idx * strides[j]
                })
                .sum();
            grid_values[flat] = *v;
        }
        if grid_values.iter().all(|v| v.is_finite()) {
            Some(GridIndex {
                levels,
                values: grid_values,
                strides,
            })
        } else {
            None
        }
    } else {
        None
    };

    let optimum = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut oracle = TabularOracle {
        points_norm: Vec::new(),
        values,
        k,
        power,
        epsilon,
        bounds: bounds.clone(),
        grid,
        points_raw,
    };
    oracle.points_norm = oracle.points_raw.iter().map(|p| oracle.normalize(p)).collect();

    Ok(TaskSpec {
        name: name.to_string(),
        dim: d,
        bounds,
        optimum,
        kind: TaskKind::Tabular,
        objective: Objective::Tabular(oracle),
    })
}

/// Column contract for a tabular task: header names for the inputs (in
/// order) and the objective, plus the reference ranges used to sanity-check
/// a supplied table.
#[derive(Debug, Clone)]
pub struct TabularTaskConfig {
    pub name: &'static str,
    pub input_columns: &'static [&'static str],
    pub objective_column: &'static str,
    pub reference_bounds: &'static [(f64, f64)],
}

pub const TABULAR_TASKS: [TabularTaskConfig; 3] = [
    TabularTaskConfig {
        name: "material5",
        input_columns: &["q_agno3", "q_pva", "q_tsc", "q_seed", "q_total"],
        objective_column: "score",
        reference_bounds: &[
            (4.53, 42.8098),
            (9.9995, 40.0010),
            (0.5, 30.5),
            (0.4989, 19.5),
            (200.0, 983.0),
        ],
    },
    TabularTaskConfig {
        name: "concrete7",
        input_columns: &[
            "cement",
            "slag",
            "fly_ash",
            "water",
            "superplasticizer",
            "coarse_aggregate",
            "fine_aggregate",
        ],
        objective_column: "strength",
        reference_bounds: &[
            (102.0, 540.0),
            (0.0, 359.4),
            (0.0, 200.1),
            (121.8, 247.0),
            (0.0, 32.2),
            (801.0, 1145.0),
            (594.0, 992.6),
        ],
    },
    TabularTaskConfig {
        name: "crossbarrel4",
        input_columns: &["n", "theta", "r", "t"],
        objective_column: "toughness",
        reference_bounds: &[(6.0, 12.0), (0.0, 200.0), (1.5, 2.5), (0.7, 1.4)],
    },
];

pub fn tabular_config(name: &str) -> Option<&'static TabularTaskConfig> {
    TABULAR_TASKS.iter().find(|c| c.name == name)
}

/// Loads a tabular task's CSV (header row, comma-separated decimal floats)
/// into `m x (d+1)` rows ordered per the task's column contract.
pub fn load_table(path: &Path, config: &TabularTaskConfig) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Ingest {
        path: path.into(),
        row: 1,
        message: "empty file".into(),
    })?;
    let names: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
    let mut indices = Vec::with_capacity(config.input_columns.len() + 1);
    for col in config
        .input_columns
        .iter()
        .chain(std::iter::once(&config.objective_column))
    {
        let idx = names.iter().position(|n| n == col).ok_or_else(|| Error::Ingest {
            path: path.into(),
            row: 1,
            message: format!("missing column {col:?}; found {names:?}"),
        })?;
        indices.push(idx);
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        let mut row = Vec::with_capacity(indices.len());
        for &idx in &indices {
            let field = fields.get(idx).ok_or_else(|| Error::Ingest {
                path: path.into(),
                row: lineno + 1,
                message: format!("row has {} fields, expected at least {}", fields.len(), idx + 1),
            })?;
            let value: f64 = field.parse().map_err(|_| Error::Ingest {
                path: path.into(),
                row: lineno + 1,
                message: format!("non-numeric field {field:?}"),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Resolves a task by registry name. Tabular tasks read
/// `<data_dir>/<name>.csv`.
pub fn task_by_name(name: &str, data_dir: Option<&Path>) -> Result<TaskSpec> {
    match name {
        "levy5" => Ok(TaskSpec {
            name: "levy5".into(),
            dim: 5,
            bounds: vec![(-10.0, 10.0); 5],
            optimum: 0.0,
            kind: TaskKind::Synthetic,
            objective: Objective::Levy,
        }),
        "hartmann3" => Ok(TaskSpec {
            name: "hartmann3".into(),
            dim: 3,
            bounds: vec![(0.0, 1.0); 3],
            optimum: HARTMANN3_MAX,
            kind: TaskKind::Synthetic,
            objective: Objective::Hartmann3,
        }),
        "hartmann6" => Ok(TaskSpec {
            name: "hartmann6".into(),
            dim: 6,
            bounds: vec![(0.0, 1.0); 6],
            optimum: HARTMANN6_MAX,
            kind: TaskKind::Synthetic,
            objective: Objective::Hartmann6,
        }),
        other => {
            let config = tabular_config(other).ok_or_else(|| {
                Error::Config(format!(
                    "unknown task {other:?}; expected levy5, hartmann3, hartmann6, material5, concrete7, or crossbarrel4"
                ))
            })?;
            let dir = data_dir.ok_or_else(|| {
                Error::Config(format!("task {other:?} needs --data-dir with {other}.csv"))
            })?;
            let path = dir.join(format!("{other}.csv"));
            if !path.exists() {
                return Err(Error::Config(format!(
                    "data file {} not found; task {other:?} skipped",
                    path.display()
                )));
            }
            let rows = load_table(&path, config)?;
            build_tabular_oracle(other, &rows, 12, 2.0, 1e-12)
        }
    }
}

/// Names of all registry tasks.
pub const TASK_NAMES: [&str; 6] = [
    "levy5",
    "hartmann3",
    "hartmann6",
    "material5",
    "concrete7",
    "crossbarrel4",
];

/// Seeded Latin hypercube in `[0,1]^d`: one stratum per point per
/// dimension, with a seeded permutation and uniform jitter. Stream
/// consumption per dimension: `n-1` uniforms for the Fisher–Yates shuffle,
/// then `n` jitters.
pub fn latin_hypercube(rng: &mut Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut design = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let swap = rng.uniform_index(i + 1);
            strata.swap(i, swap);
        }
        for i in 0..n {
            design[i][j] = (strata[i] as f64 + rng.uniform()) / n as f64;
        }
    }
    design
}

/// A deterministic draw from a one-dimensional GP prior on `[0,1]`,
/// represented as the kernel interpolant of a sampled basis: the task
/// evaluates `k(x)ᵀ K⁻¹ z` with `z ~ N(0, K)` on a uniform basis grid. The
/// optimum is located by a dense scan refined with golden-section steps.
pub fn gp_draw_task(name: &str, spec: &KernelSpec, basis: usize, rng: &mut Rng) -> Result<TaskSpec> {
    let grid: Vec<Vec<f64>> = (0..basis)
        .map(|i| vec![i as f64 / (basis - 1) as f64])
        .collect();
    let k = kernel_matrix(spec, &grid)?;
    let jittered = &k + DMatrix::identity(basis, basis) * 1e-8;
    let chol = jittered
        .clone()
        .cholesky()
        .ok_or(Error::Cholesky { tried: vec![1e-8] })?;
    let g = DVector::from_fn(basis, |_, _| rng.gaussian());
    let z = chol.l() * g;
    let alpha = chol.solve(&z);
    let spec = spec.clone();
    let grid_owned = grid.clone();
    let f = move |x: &[f64]| {
        let k_star = DVector::from_fn(grid_owned.len(), |i, _| {
            crate::gp::kernel_eval(&spec, &grid_owned[i], x).expect("validated spec")
        });
        k_star.dot(&alpha)
    };

    // locate the maximum: dense scan, then golden-section refinement
    let scan = 40 * basis;
    let mut best_x = 0.0;
    let mut best_f = f64::NEG_INFINITY;
    for i in 0..=scan {
        let x = i as f64 / scan as f64;
        let v = f(&[x]);
        if v > best_f {
            best_f = v;
            best_x = x;
        }
    }
    let (mut lo, mut hi) = (
        (best_x - 1.0 / scan as f64).max(0.0),
        (best_x + 1.0 / scan as f64).min(1.0),
    );
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if f(&[a]) < f(&[b]) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let optimum = f(&[(lo + hi) / 2.0]).max(best_f);

    Ok(TaskSpec::custom(
        name,
        vec![(0.0, 1.0)],
        optimum,
        Arc::new(f),
    ))
}
