//! Plot-ready CSV files: prediction traces and raw series exports.

use std::io::{Read, Write};

use chrono::NaiveDateTime;
use tprnn_core::series::LoadSeries;

pub const TRACE_HEADER: [&str; 3] = ["timestamp_iso8601", "actual_kw", "predicted_kw"];
pub const EXPORT_HEADER: [&str; 2] = ["timestamp_iso8601", "gap_kw"];
const ISO: &str = "%Y-%m-%dT%H:%M:%S";

/// One predicted minute in kW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub timestamp: NaiveDateTime,
    pub actual_kw: f64,
    pub predicted_kw: f64,
}

fn iso(t: NaiveDateTime) -> String {
    t.format(ISO).to_string()
}

/// Floats are written in shortest round-trip form, so reading back gives
/// the same bits.
pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([iso(r.timestamp), r.actual_kw.to_string(), r.predicted_kw.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, String> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(format!("trace header must be {}", TRACE_HEADER.join(",")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |what: &str| format!("line {line}: bad {what}");
            Ok(TraceRow {
                timestamp: NaiveDateTime::parse_from_str(&rec[0], ISO).map_err(|_| bad("timestamp"))?,
                actual_kw: rec[1].parse().map_err(|_| bad("actual_kw"))?,
                predicted_kw: rec[2].parse().map_err(|_| bad("predicted_kw"))?,
            })
        })
        .collect()
}

pub fn write_export<W: Write>(out: W, series: &LoadSeries) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EXPORT_HEADER)?;
    for (i, v) in series.values().iter().enumerate() {
        w.write_record([iso(series.timestamp_at(i)), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
