//! Reader for the UCI individual household electric power consumption
//! text file: semicolon separated, `d/m/yyyy` dates, `hh:mm:ss` times and
//! `?` for missing readings.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use tprnn_core::series::RawRecord;

/// The first three header fields; any further columns are read and ignored.
pub const EXPECTED_HEADER: [&str; 3] = ["Date", "Time", "Global_active_power"];

/// Sentinel the source file uses for a missing reading.
pub const MISSING: &[u8] = b"?";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{0}: file is empty")]
    Empty(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("read failed: {0}")]
    Io(String),
}

fn row_error(line: u64, message: impl Into<String>) -> ParseError {
    ParseError::Row { line, message: message.into() }
}

fn parse_date(field: &[u8]) -> Option<NaiveDate> {
    let s = std::str::from_utf8(field).ok()?;
    let mut parts = s.split('/');
    let day: u32 = parts.next()?.parse().ok()?;
    let month: u32 = parts.next()?.parse().ok()?;
    let year: i32 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || !(1000..=9999).contains(&year) {
        return None;
    }
    NaiveDate::from_ymd_opt(year, month, day)
}

/// Minute of day for `hh:mm:ss`. Sub-minute timestamps are rejected since
/// the series is minute-resolution.
fn parse_minute(field: &[u8]) -> Option<u16> {
    let s = std::str::from_utf8(field).ok()?;
    let mut parts = s.split(':');
    let h: u16 = parts.next()?.parse().ok()?;
    let m: u16 = parts.next()?.parse().ok()?;
    let sec: u16 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || h > 23 || m > 59 || sec != 0 {
        return None;
    }
    Some(h * 60 + m)
}

fn parse_gap(field: &[u8]) -> Result<Option<f64>, String> {
    let trimmed = field.trim_ascii();
    if trimmed == MISSING {
        return Ok(None);
    }
    let text = std::str::from_utf8(trimmed).map_err(|_| "global active power is not UTF-8".to_string())?;
    let v: f64 = text.parse().map_err(|_| format!("global active power {text:?} is not a number"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("global active power {text:?} must be finite and non-negative"));
    }
    Ok(Some(v))
}

/// Parses every data row from `reader`, in file order. `source` names the
/// input in error messages.
pub fn parse_ucihpc_reader<R: Read>(reader: R, source: &str) -> Result<Vec<RawRecord>, ParseError> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(b';').has_headers(false).flexible(true).from_reader(reader);
    let mut row = csv::ByteRecord::new();
    let io = |e: csv::Error| ParseError::Io(e.to_string());

    if !rdr.read_byte_record(&mut row).map_err(io)? {
        return Err(ParseError::Empty(source.to_string()));
    }
    let width = row.len();
    let header: Vec<&[u8]> = row.iter().map(<[u8]>::trim_ascii).collect();
    if width < EXPECTED_HEADER.len() || header.iter().zip(EXPECTED_HEADER).any(|(got, want)| *got != want.as_bytes()) {
        return Err(row_error(1, format!("header must start with {}", EXPECTED_HEADER.join(";"))));
    }

    let mut out = Vec::new();
    // dates repeat for 1440 consecutive rows
    let mut last_date: Option<(Vec<u8>, NaiveDate)> = None;
    while rdr.read_byte_record(&mut row).map_err(io)? {
        let line = row.position().map_or(0, |p| p.line());
        if row.len() == 1 && row[0].trim_ascii().is_empty() {
            continue;
        }
        if row.len() != width {
            return Err(row_error(line, format!("expected {width} fields, found {}", row.len())));
        }
        let date_field = row[0].trim_ascii();
        let date = match &last_date {
            Some((raw, d)) if raw.as_slice() == date_field => *d,
            _ => {
                let d = parse_date(date_field).ok_or_else(|| {
                    row_error(line, format!("unparseable date {:?}", String::from_utf8_lossy(date_field)))
                })?;
                last_date = Some((date_field.to_vec(), d));
                d
            }
        };
        let time_field = row[1].trim_ascii();
        let minute = parse_minute(time_field)
            .ok_or_else(|| row_error(line, format!("unparseable time {:?}", String::from_utf8_lossy(time_field))))?;
        let gap = parse_gap(&row[2]).map_err(|m| row_error(line, m))?;
        out.push(RawRecord { date, minute, gap });
    }
    Ok(out)
}

pub fn parse_ucihpc_csv(path: &Path) -> Result<Vec<RawRecord>, ParseError> {
    let file = File::open(path).map_err(|e| ParseError::Io(format!("{}: {e}", path.display())))?;
    parse_ucihpc_reader(std::io::BufReader::with_capacity(1 << 20, file), &path.display().to_string())
}
