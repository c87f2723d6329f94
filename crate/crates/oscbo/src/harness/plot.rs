//! Standalone SVG plots of run logs: per-method mean curves with
//! ± standard-error bands.
//!
//! Regret metrics are drawn on a log₁₀ axis; values at or below zero are
//! clamped to 1e-12 before the log. Output is a deterministic function of
//! the input files.

use crate::error::{Error, Result};
use crate::harness::bench::mean_stderr;
use crate::harness::record::RoundRecord;
use crate::losses::Coverage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMetric {
    Simple,
    Cumulative,
    Coverage,
    Lengthscale,
}

impl PlotMetric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(PlotMetric::Simple),
            "cumulative" => Ok(PlotMetric::Cumulative),
            "coverage" => Ok(PlotMetric::Coverage),
            "lengthscale" => Ok(PlotMetric::Lengthscale),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric {other:?}; expected simple, cumulative, coverage, or lengthscale"
            ))),
        }
    }

    fn axis_label(self) -> &'static str {
        match self {
            PlotMetric::Simple => "log10 simple regret",
            PlotMetric::Cumulative => "log10 cumulative regret",
            PlotMetric::Coverage => "running coverage",
            PlotMetric::Lengthscale => "lengthscale",
        }
    }

    /// Per-round series for one run.
    fn series(self, records: &[RoundRecord]) -> Vec<f64> {
        const LOG_FLOOR: f64 = 1e-12;
        match self {
            PlotMetric::Simple => records
                .iter()
                .map(|r| r.simple_regret.max(LOG_FLOOR).log10())
                .collect(),
            PlotMetric::Cumulative => records
                .iter()
                .map(|r| r.cum_regret.max(LOG_FLOOR).log10())
                .collect(),
            PlotMetric::Coverage => {
                let mut cov = Coverage::default();
                records.iter().map(|r| cov.update(r.covered)).collect()
            }
            PlotMetric::Lengthscale => records.iter().map(|r| r.theta[0]).collect(),
        }
    }
}

const PALETTE: [&str; 8] = [
    "#3465a4", "#cc0000", "#4e9a06", "#f57900", "#75507b", "#0f8b8d", "#8f5902", "#555753",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 44.0;

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-30);
    let raw_step = span / target as f64;
    let mag = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64 + 0.5)
        .unwrap_or(mag * 10.0);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut v = first;
    while v <= hi + step * 1e-9 {
        ticks.push(if v.abs() < step * 1e-9 { 0.0 } else { v });
        v += step;
    }
    ticks
}

fn fmt(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e7 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders one metric for a group of labeled runs. Each label (typically a
/// method) may hold several seeds; the plot shows the per-round mean and a
/// ± standard-error band. All runs must share the same horizon.
pub fn plot_svg(groups: &[(String, Vec<Vec<RoundRecord>>)], metric: PlotMetric) -> Result<String> {
    if groups.is_empty() || groups.iter().all(|(_, runs)| runs.is_empty()) {
        return Err(Error::InvalidArgument("nothing to plot".into()));
    }
    let horizon = groups
        .iter()
        .flat_map(|(_, runs)| runs.iter())
        .map(|r| r.len())
        .max()
        .unwrap_or(0);
    let mut bad: Vec<String> = Vec::new();
    for (label, runs) in groups {
        for (i, run) in runs.iter().enumerate() {
            if run.len() != horizon {
                bad.push(format!("{label}[{i}] has {} rounds, expected {horizon}", run.len()));
            }
        }
    }
    if !bad.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "inconsistent horizons: {}",
            bad.join("; ")
        )));
    }

    // per-label mean and stderr trajectories
    struct Series {
        label: String,
        mean: Vec<f64>,
        stderr: Vec<f64>,
    }
    let mut series = Vec::new();
    for (label, runs) in groups {
        if runs.is_empty() {
            continue;
        }
        let per_run: Vec<Vec<f64>> = runs.iter().map(|r| metric.series(r)).collect();
        let mut mean = Vec::with_capacity(horizon);
        let mut stderr = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let values: Vec<f64> = per_run.iter().map(|s| s[t]).collect();
            let (m, se) = mean_stderr(&values);
            mean.push(m);
            stderr.push(se);
        }
        series.push(Series {
            label: label.clone(),
            mean,
            stderr,
        });
    }

    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in &series {
        for t in 0..horizon {
            y_lo = y_lo.min(s.mean[t] - s.stderr[t]);
            y_hi = y_hi.max(s.mean[t] + s.stderr[t]);
        }
    }
    if !(y_lo.is_finite() && y_hi.is_finite()) {
        return Err(Error::InvalidArgument("non-finite plot values".into()));
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |t: f64| MARGIN_L + plot_w * (t - 1.0) / (horizon.max(2) as f64 - 1.0);
    let sy = |v: f64| MARGIN_T + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // axes
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B
    ));
    for tick in nice_ticks(1.0, horizon as f64, 6) {
        let x = sx(tick);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MARGIN_B + 16.0,
            fmt(tick)
        ));
    }
    for tick in nice_ticks(y_lo, y_hi, 6) {
        let y = sy(tick);
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{MARGIN_L}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
            MARGIN_L - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 7.0,
            y + 3.5,
            fmt(tick)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">round</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        metric.axis_label()
    ));

    // bands then lines, so lines stay visible
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.stderr.iter().any(|e| *e > 0.0) {
            let mut band = String::from("<polygon points=\"");
            for t in 0..horizon {
                band.push_str(&format!(
                    "{:.2},{:.2} ",
                    sx(t as f64 + 1.0),
                    sy(s.mean[t] + s.stderr[t])
                ));
            }
            for t in (0..horizon).rev() {
                band.push_str(&format!(
                    "{:.2},{:.2} ",
                    sx(t as f64 + 1.0),
                    sy(s.mean[t] - s.stderr[t])
                ));
            }
            band.push_str(&format!("\" fill=\"{color}\" opacity=\"0.15\"/>\n"));
            svg.push_str(&band);
        }
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut line = String::from("<polyline fill=\"none\" stroke-width=\"1.6\" points=\"");
        for t in 0..horizon {
            line.push_str(&format!("{:.2},{:.2} ", sx(t as f64 + 1.0), sy(s.mean[t])));
        }
        line.push_str(&format!("\" stroke=\"{color}\"/>\n"));
        svg.push_str(&line);
    }

    // legend
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_T + 8.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            MARGIN_L + 10.0,
            MARGIN_L + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>\n",
            MARGIN_L + 40.0,
            y + 3.5,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::online::Phase;

    fn run_of(values: &[f64]) -> Vec<RoundRecord> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| RoundRecord {
                t: i + 1,
                x: vec![0.0],
                y: *v,
                theta: vec![0.5],
                lambda: 0.0,
                phase: Phase::Play,
                l_s: 0.0,
                l_c: -0.1,
                v: 0.0,
                v_plus: 0.0,
                covered: true,
                ci_width: 0.1,
                beta: 2.0,
                best_y: *v,
                simple_regret: *v,
                cum_regret: v * 2.0,
                wall_ms: 1.0,
            })
            .collect()
    }

    #[test]
    fn single_run_single_series() {
        let groups = vec![("oscbo".to_string(), vec![run_of(&[1.0, 0.5, 0.1])])];
        let svg = plot_svg(&groups, PlotMetric::Simple).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("log10 simple regret"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn two_methods_get_two_series_and_a_legend() {
        let groups = vec![
            ("oscbo".to_string(), vec![run_of(&[1.0, 0.5]), run_of(&[0.8, 0.4])]),
            ("gp-ucb-mll".to_string(), vec![run_of(&[1.2, 0.6]), run_of(&[1.0, 0.5])]),
        ];
        let svg = plot_svg(&groups, PlotMetric::Cumulative).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">oscbo</text>"));
        assert!(svg.contains(">gp-ucb-mll</text>"));
        // stderr bands present when seeds > 1
        assert_eq!(svg.matches("<polygon").count(), 2);
    }

    #[test]
    fn zero_regret_is_clamped_not_infinite() {
        let groups = vec![("m".to_string(), vec![run_of(&[1.0, 0.0])])];
        let svg = plot_svg(&groups, PlotMetric::Simple).unwrap();
        assert!(!svg.contains("NaN"));
        assert!(!svg.contains("inf"));
    }

    #[test]
    fn inconsistent_horizons_error_names_the_run() {
        let groups = vec![
            ("a".to_string(), vec![run_of(&[1.0, 0.5, 0.2])]),
            ("b".to_string(), vec![run_of(&[1.0])]),
        ];
        let err = plot_svg(&groups, PlotMetric::Simple).unwrap_err();
        assert!(err.to_string().contains("b[0]"), "{err}");
    }

    #[test]
    fn deterministic_output() {
        let groups = vec![("m".to_string(), vec![run_of(&[0.9, 0.3, 0.2, 0.05])])];
        let a = plot_svg(&groups, PlotMetric::Coverage).unwrap();
        let b = plot_svg(&groups, PlotMetric::Coverage).unwrap();
        assert_eq!(a, b);
    }
}
