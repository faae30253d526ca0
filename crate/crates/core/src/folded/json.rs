//! Machine-readable regression report.

use serde::{Deserialize, Serialize};

use crate::stats::RegressionReport;

pub const JSON_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub schema: u32,
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub scaling: String,
    pub g_squared: f64,
    pub statistic_f: f64,
    pub p_value: f64,
    pub f_star: f64,
    pub ridge_applied: bool,
    pub stacks: Vec<JsonStack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonStack {
    pub stack: String,
    pub delta: f64,
    pub var_pooled: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
    /// Class in the decomposition of the reduced delta; `null` for stacks
    /// that are not significant.
    pub class: Option<String>,
}

impl From<&RegressionReport> for JsonReport {
    fn from(r: &RegressionReport) -> Self {
        JsonReport {
            schema: JSON_SCHEMA_VERSION,
            n1: r.n1,
            n2: r.n2,
            p: r.p(),
            scaling: r.scaling.as_str().to_owned(),
            g_squared: r.outcome.g_squared,
            statistic_f: r.outcome.statistic_f,
            p_value: r.outcome.p_value,
            f_star: r.outcome.critical_f_star,
            ridge_applied: r.outcome.ridge_applied,
            stacks: r
                .rows()
                .into_iter()
                .map(|row| JsonStack {
                    stack: row.stack.to_string(),
                    delta: row.delta,
                    var_pooled: row.var_pooled,
                    ci_low: row.interval.low,
                    ci_high: row.interval.high,
                    significant: row.significant,
                    class: row.class.map(|c| c.as_str().to_owned()),
                })
                .collect(),
        }
    }
}

/// Pretty-printed JSON with a trailing newline. Floats use the shortest
/// representation that round-trips.
pub fn report_to_json(report: &RegressionReport) -> String {
    let mut s = serde_json::to_string_pretty(&JsonReport::from(report))
        .expect("report contains only serializable values");
    s.push('\n');
    s
}
