//! Per-round diagnostic trajectories derived from a run log: running
//! empirical coverage, running mean interval width, cumulative positive
//! violation, and the lengthscale/multiplier paths.

use crate::error::{Error, Result};
use crate::harness::record::RoundRecord;
use crate::losses::Coverage;

/// Emits the diagnostics CSV for a run. Columns:
/// `t,p_hat,mean_ci_width,V_plus,theta1..thetaq,lambda`.
pub fn diagnostics_csv(records: &[RoundRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to diagnose".into()));
    }
    let theta_dim = records[0].theta.len();
    let mut out = String::from("t,p_hat,mean_ci_width,V_plus");
    for j in 1..=theta_dim {
        out.push_str(&format!(",theta{j}"));
    }
    out.push_str(",lambda\n");

    let mut coverage = Coverage::default();
    let mut width_sum = 0.0;
    for r in records {
        let p_hat = coverage.update(r.covered);
        width_sum += r.ci_width;
        let mean_width = width_sum / coverage.total as f64;
        let mut fields = vec![
            r.t.to_string(),
            p_hat.to_string(),
            mean_width.to_string(),
            r.v_plus.to_string(),
        ];
        fields.extend(r.theta.iter().map(|v| v.to_string()));
        fields.push(r.lambda.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}
