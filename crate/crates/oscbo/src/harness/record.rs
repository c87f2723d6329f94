//! Per-round experiment records and their CSV form.
//!
//! The log format is part of the determinism contract: floats print as
//! Rust's shortest round-trip decimals, so parsing an emitted file and
//! re-emitting it reproduces the bytes exactly.

use crate::error::{Error, Result};
use crate::online::Phase;

/// One row of a run log. Inputs and observations are in original units;
/// the loss columns are definitionally standardized-space.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// BO round, starting at 1.
    pub t: usize,
    /// Queried point, original units.
    pub x: Vec<f64>,
    /// Observation (noise-free task value unless a noise flag is set).
    pub y: f64,
    /// Lengthscale played this round.
    pub theta: Vec<f64>,
    /// Dual multiplier in play (zero for non-game methods).
    pub lambda: f64,
    pub phase: Phase,
    pub l_s: f64,
    pub l_c: f64,
    /// Signed cumulative violation.
    pub v: f64,
    /// Positive-part cumulative violation.
    pub v_plus: f64,
    pub covered: bool,
    pub ci_width: f64,
    pub beta: f64,
    /// Running max of raw observations.
    pub best_y: f64,
    pub simple_regret: f64,
    pub cum_regret: f64,
    /// Wall-clock time of the round. Informative only; masked by the
    /// determinism checks.
    pub wall_ms: f64,
}

pub(crate) fn csv_header(dim: usize, theta_dim: usize) -> String {
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=dim).map(|j| format!("x{j}")));
    columns.push("y".into());
    columns.extend((1..=theta_dim).map(|j| format!("theta{j}")));
    for fixed in [
        "lambda",
        "phase",
        "L_s",
        "L_c",
        "V",
        "V_plus",
        "covered",
        "ci_width",
        "beta",
        "best_y",
        "simple_regret",
        "cum_regret",
        "wall_ms",
    ] {
        columns.push(fixed.into());
    }
    columns.join(",")
}

/// Serializes records to the run CSV format.
pub fn records_to_csv(records: &[RoundRecord]) -> String {
    let dim = records.first().map_or(0, |r| r.x.len());
    let theta_dim = records.first().map_or(1, |r| r.theta.len());
    let mut out = csv_header(dim, theta_dim);
    out.push('\n');
    for r in records {
        let mut fields: Vec<String> = vec![r.t.to_string()];
        fields.extend(r.x.iter().map(|v| v.to_string()));
        fields.push(r.y.to_string());
        fields.extend(r.theta.iter().map(|v| v.to_string()));
        fields.push(r.lambda.to_string());
        fields.push(r.phase.to_string());
        for v in [r.l_s, r.l_c, r.v, r.v_plus] {
            fields.push(v.to_string());
        }
        fields.push(r.covered.to_string());
        for v in [
            r.ci_width,
            r.beta,
            r.best_y,
            r.simple_regret,
            r.cum_regret,
            r.wall_ms,
        ] {
            fields.push(v.to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn parse_f64(field: &str, row: usize) -> Result<f64> {
    field.parse().map_err(|_| Error::InvalidArgument(format!(
        "run CSV row {row}: non-numeric field {field:?}"
    )))
}

/// Parses a run CSV produced by [`records_to_csv`].
pub fn records_from_csv(text: &str) -> Result<Vec<RoundRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty run CSV".into()))?;
    let names: Vec<&str> = header.split(',').collect();
    let dim = names.iter().filter(|n| n.starts_with('x') && n[1..].parse::<usize>().is_ok()).count();
    let theta_dim = names
        .iter()
        .filter(|n| n.starts_with("theta") && n[5..].parse::<usize>().is_ok())
        .count();
    let expected = 1 + dim + 1 + theta_dim + 13;
    if names.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "run CSV header has {} columns, expected {expected}",
            names.len()
        )));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = lineno + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "run CSV row {row}: {} fields, expected {expected}",
                fields.len()
            )));
        }
        let mut cursor = fields.iter();
        let mut next = || *cursor.next().expect("length checked");
        let t: usize = next().parse().map_err(|_| {
            Error::InvalidArgument(format!("run CSV row {row}: bad round index"))
        })?;
        let x: Vec<f64> = (0..dim)
            .map(|_| parse_f64(next(), row))
            .collect::<Result<_>>()?;
        let y = parse_f64(next(), row)?;
        let theta: Vec<f64> = (0..theta_dim)
            .map(|_| parse_f64(next(), row))
            .collect::<Result<_>>()?;
        let lambda = parse_f64(next(), row)?;
        let phase = match next() {
            "play" => Phase::Play,
            "recovery" => Phase::Recovery,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "run CSV row {row}: unknown phase {other:?}"
                )));
            }
        };
        let l_s = parse_f64(next(), row)?;
        let l_c = parse_f64(next(), row)?;
        let v = parse_f64(next(), row)?;
        let v_plus = parse_f64(next(), row)?;
        let covered = match next() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "run CSV row {row}: unknown covered flag {other:?}"
                )));
            }
        };
        let ci_width = parse_f64(next(), row)?;
        let beta = parse_f64(next(), row)?;
        let best_y = parse_f64(next(), row)?;
        let simple_regret = parse_f64(next(), row)?;
        let cum_regret = parse_f64(next(), row)?;
        let wall_ms = parse_f64(next(), row)?;
        records.push(RoundRecord {
            t,
            x,
            y,
            theta,
            lambda,
            phase,
            l_s,
            l_c,
            v,
            v_plus,
            covered,
            ci_width,
            beta,
            best_y,
            simple_regret,
            cum_regret,
            wall_ms,
        });
    }
    Ok(records)
}

/// Replaces the `wall_ms` column with zeros; byte comparisons of run logs
/// go through this because round timings are informative, not reproducible.
pub fn mask_wall_clock(csv: &str) -> String {
    let mut out = String::with_capacity(csv.len());
    for (i, line) in csv.lines().enumerate() {
        if i == 0 || line.is_empty() {
            out.push_str(line);
        } else {
            match line.rfind(',') {
                Some(pos) => {
                    out.push_str(&line[..=pos]);
                    out.push('0');
                }
                None => out.push_str(line),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<RoundRecord> {
        (1..=3)
            .map(|t| RoundRecord {
                t,
                x: vec![0.1 * t as f64, 1.0 / 3.0],
                y: -0.5 + t as f64,
                theta: vec![0.31622776601683794],
                lambda: 1.0,
                phase: if t == 3 { Phase::Recovery } else { Phase::Play },
                l_s: 0.123456789,
                l_c: -0.4,
                v: -0.4 * t as f64,
                v_plus: 0.0,
                covered: t != 2,
                ci_width: 0.2828,
                beta: 2.0,
                best_y: t as f64,
                simple_regret: 3.0 - t as f64,
                cum_regret: t as f64 * 1.5,
                wall_ms: 12.5,
            })
            .collect()
    }

    #[test]
    fn csv_roundtrip_is_byte_identical() {
        let records = sample_records();
        let csv = records_to_csv(&records);
        let parsed = records_from_csv(&csv).unwrap();
        assert_eq!(parsed, records);
        assert_eq!(records_to_csv(&parsed), csv);
    }

    #[test]
    fn header_matches_contract() {
        let csv = records_to_csv(&sample_records());
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "t,x1,x2,y,theta1,lambda,phase,L_s,L_c,V,V_plus,covered,ci_width,beta,best_y,simple_regret,cum_regret,wall_ms"
        );
    }

    #[test]
    fn wall_clock_mask_zeroes_only_the_last_column() {
        let csv = records_to_csv(&sample_records());
        let masked = mask_wall_clock(&csv);
        let parsed = records_from_csv(&masked).unwrap();
        for (a, b) in parsed.iter().zip(sample_records()) {
            assert_eq!(a.wall_ms, 0.0);
            assert_eq!(a.cum_regret, b.cum_regret);
        }
        assert_eq!(mask_wall_clock(&masked), masked);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let csv = records_to_csv(&sample_records());
        let mut broken = csv.clone();
        broken.push_str("1,2,3\n");
        assert!(records_from_csv(&broken).is_err());
        let bad_float = csv.replace("-0.4", "abc");
        assert!(records_from_csv(&bad_float).is_err());
    }
}
