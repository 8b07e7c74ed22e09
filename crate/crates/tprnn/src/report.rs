//! Report files: `report.json` (machine-readable) and `report.txt` (the
//! aligned terminal table).

use serde::{Deserialize, Serialize};
use tprnn_core::forecast::Method;
use tprnn_core::metrics::{EvalReport, REFERENCE_TABLE};

pub const REPORT_FORMAT: &str = "tprnn-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub method: Method,
    pub rmse_kw: f64,
    pub mae_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    /// Number of evaluated prediction points, per method.
    pub evaluated_points: usize,
    pub report: EvalReport,
    /// Published values, for display only.
    pub reference: Vec<ReferenceRow>,
}

impl ReportFile {
    pub fn new(report: EvalReport) -> Self {
        let evaluated_points = report.rows.first().map_or(0, |r| r.points);
        let reference =
            REFERENCE_TABLE.iter().map(|&(method, rmse_kw, mae_kw)| ReferenceRow { method, rmse_kw, mae_kw }).collect();
        Self { format: REPORT_FORMAT.into(), version: REPORT_VERSION, evaluated_points, report, reference }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let f: ReportFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if f.format != REPORT_FORMAT || f.version != REPORT_VERSION {
            return Err(format!("unsupported report {} v{}", f.format, f.version));
        }
        Ok(f)
    }

    pub fn to_table(&self) -> String {
        let fp = &self.report.fingerprint;
        let mut s = format!(
            "span {} + {} weeks, N={} M={} train={} W={}\n",
            fp.span_start, fp.n_weeks, fp.segment_len, fp.pool_count, fp.train_fraction, fp.window
        );
        s.push_str(&self.report.render_table());
        s
    }
}
