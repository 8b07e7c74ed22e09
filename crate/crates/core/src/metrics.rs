//! Error metrics and the method comparison report.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::forecast::{Method, TracePoint};
use crate::series::NormalizationParams;
use crate::{Error, Result};

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Empty("metric over zero points".to_string()));
    }
    if y.len() != yhat.len() {
        return Err(Error::Shape(format!("{} true values vs {} estimates", y.len(), yhat.len())));
    }
    if y.iter().chain(yhat).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".to_string()));
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(ss / y.len() as f64))
}

/// Mean absolute error.
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let sa: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum();
    Ok(sa / y.len() as f64)
}

/// Published comparison values (kW): method, RMSE, MAE. Shown beside
/// measured results, never asserted.
pub const REFERENCE_TABLE: [(Method, f64, f64); 5] = [
    (Method::Svr, 0.96, 0.77),
    (Method::Arima, 0.81, 0.75),
    (Method::Rnn, 0.75, 0.55),
    (Method::Drnn, 0.39, 0.20),
    (Method::Tprnn, 0.37, 0.19),
];

pub fn reference_row(method: Method) -> (f64, f64) {
    REFERENCE_TABLE.iter().find(|r| r.0 == method).map(|r| (r.1, r.2)).expect("every method has a reference row")
}

/// The experiment settings a report (or checkpoint) was produced under.
/// Two artifacts are comparable only if these match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFingerprint {
    pub dataset_hash: String,
    pub span_start: NaiveDate,
    pub n_weeks: usize,
    /// Segment length in minutes.
    pub segment_len: usize,
    pub pool_count: usize,
    pub train_fraction: f64,
    pub window: usize,
    pub normalization: NormalizationParams,
}

impl ConfigFingerprint {
    /// Names of the fields that differ.
    pub fn mismatches(&self, other: &ConfigFingerprint) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.dataset_hash != other.dataset_hash {
            out.push("dataset_hash");
        }
        if self.span_start != other.span_start {
            out.push("span_start");
        }
        if self.n_weeks != other.n_weeks {
            out.push("n_weeks");
        }
        if self.segment_len != other.segment_len {
            out.push("segment_len");
        }
        if self.pool_count != other.pool_count {
            out.push("pool_count");
        }
        if self.train_fraction.to_bits() != other.train_fraction.to_bits() {
            out.push("train_fraction");
        }
        if self.window != other.window {
            out.push("window");
        }
        if self.normalization != other.normalization {
            out.push("normalization");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTrace {
    pub method: Method,
    pub seed: u64,
    /// Normalized units.
    pub points: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub seed: u64,
    /// kW
    pub rmse: f64,
    /// kW
    pub mae: f64,
    /// Number of evaluated predictions.
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRow {
    pub method: Method,
    pub pool: usize,
    pub rmse: f64,
    pub mae: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpan {
    pub first: NaiveDateTime,
    pub last: NaiveDateTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: ConfigFingerprint,
    pub span: EvalSpan,
    pub rows: Vec<ReportRow>,
    pub per_pool: Vec<PoolRow>,
}

/// Metrics in kW for every method, rows in comparison order. All traces
/// must predict the same minutes with the same true values.
pub fn build_report(traces: &[MethodTrace], fingerprint: &ConfigFingerprint) -> Result<EvalReport> {
    let first = traces.first().ok_or_else(|| Error::Empty("no traces to report".to_string()))?;
    if first.points.is_empty() {
        return Err(Error::Empty(format!("{} trace has no points", first.method)));
    }
    for t in traces {
        let aligned = t.points.len() == first.points.len()
            && t.points.iter().zip(&first.points).all(|(a, b)| a.timestamp == b.timestamp && a.actual.to_bits() == b.actual.to_bits());
        if !aligned {
            return Err(Error::Shape(format!("{} trace is not aligned with {}", t.method, first.method)));
        }
    }
    let mut sorted: Vec<&MethodTrace> = traces.iter().collect();
    sorted.sort_by_key(|t| t.method);
    if sorted.windows(2).any(|w| w[0].method == w[1].method) {
        return Err(Error::Config("a method appears twice in one report".to_string()));
    }

    let norm = NormalizationParams::new(fingerprint.normalization.min, fingerprint.normalization.max)?;
    let kw = |points: &[&TracePoint]| -> (Vec<f64>, Vec<f64>) {
        points
            .iter()
            .map(|p| (norm.denormalize_value(p.actual), norm.denormalize_value(p.predicted)))
            .unzip()
    };
    let mut rows = Vec::new();
    let mut per_pool = Vec::new();
    for t in sorted {
        let all: Vec<&TracePoint> = t.points.iter().collect();
        let (y, yhat) = kw(&all);
        rows.push(ReportRow { method: t.method, seed: t.seed, rmse: rmse(&y, &yhat)?, mae: mae(&y, &yhat)?, points: y.len() });
        for pool in 0..fingerprint.pool_count {
            let pts: Vec<&TracePoint> = t.points.iter().filter(|p| p.pool_index == pool).collect();
            if pts.is_empty() {
                continue;
            }
            let (y, yhat) = kw(&pts);
            per_pool.push(PoolRow { method: t.method, pool, rmse: rmse(&y, &yhat)?, mae: mae(&y, &yhat)?, points: y.len() });
        }
    }
    let span = EvalSpan {
        first: first.points.iter().map(|p| p.timestamp).min().expect("non-empty"),
        last: first.points.iter().map(|p| p.timestamp).max().expect("non-empty"),
    };
    Ok(EvalReport { fingerprint: fingerprint.clone(), span, rows, per_pool })
}

impl EvalReport {
    pub fn row(&self, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Aligned terminal table with the published values alongside.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "evaluated {} .. {}", self.span.first, self.span.last);
        let _ = writeln!(s, "{:<8} {:>10} {:>10} {:>9}   {:>9} {:>9}", "method", "RMSE kW", "MAE kW", "points", "ref RMSE", "ref MAE");
        for r in &self.rows {
            let (ref_rmse, ref_mae) = reference_row(r.method);
            let _ = writeln!(
                s,
                "{:<8} {:>10.4} {:>10.4} {:>9}   {:>9.2} {:>9.2}",
                r.method.name(),
                r.rmse,
                r.mae,
                r.points,
                ref_rmse,
                ref_mae
            );
        }
        s
    }
}
