//! Minute-resolution global-active-power series: gap completion, min-max
//! scaling and week slicing.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, MINUTES_PER_DAY, MINUTES_PER_WEEK};

/// One row of the source file. `gap` is `None` where the file marks the
/// reading as missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord {
    pub date: NaiveDate,
    /// Minute of day, `0..1440`.
    pub minute: u16,
    /// Global active power in kW.
    pub gap: Option<f64>,
}

impl RawRecord {
    pub fn timestamp(&self) -> NaiveDateTime {
        self.date.and_hms_opt(0, 0, 0).expect("midnight is valid")
            + Duration::minutes(i64::from(self.minute))
    }
}

/// Contiguous per-minute load values. `imputed[i]` is set where `values[i]`
/// was filled in rather than measured.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    start: NaiveDateTime,
    values: Vec<f64>,
    imputed: Vec<bool>,
}

impl LoadSeries {
    pub fn new(start: NaiveDateTime, values: Vec<f64>, imputed: Vec<bool>) -> Result<Self> {
        if values.len() != imputed.len() {
            return Err(Error::Shape(format!(
                "{} values but {} mask entries",
                values.len(),
                imputed.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("series value at minute {i}")));
        }
        Ok(Self { start, values, imputed })
    }

    /// A fully measured series (no imputed minutes).
    pub fn from_values(start: NaiveDateTime, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(start, values, vec![false; n])
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn imputed_mask(&self) -> &[bool] {
        &self.imputed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn imputed_count(&self) -> usize {
        self.imputed.iter().filter(|m| **m).count()
    }

    pub fn timestamp_at(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::minutes(index as i64)
    }

    /// Sub-series of `len` minutes beginning `offset` minutes after the start.
    pub fn slice(&self, offset: usize, len: usize) -> Result<Self> {
        let end = offset
            .checked_add(len)
            .filter(|end| *end <= self.len())
            .ok_or_else(|| {
                Error::OutOfRange(format!(
                    "minutes {offset}..{} of a {}-minute series",
                    offset.saturating_add(len),
                    self.len()
                ))
            })?;
        Ok(Self {
            start: self.timestamp_at(offset),
            values: self.values[offset..end].to_vec(),
            imputed: self.imputed[offset..end].to_vec(),
        })
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Builds a contiguous series from time-ordered records, filling every
/// missing minute with the mean of the present readings at the same minute
/// of day. Minutes of day with no reading anywhere fall back to the global
/// mean.
pub fn impute_missing(records: &[RawRecord]) -> Result<LoadSeries> {
    let first = records
        .first()
        .ok_or_else(|| Error::Empty("no records to impute".to_string()))?;
    let start = first.timestamp();
    let mut prev = start;
    for (index, rec) in records.iter().enumerate().skip(1) {
        let ts = rec.timestamp();
        if ts == prev {
            return Err(Error::DuplicateTimestamp { index });
        }
        if ts < prev {
            return Err(Error::Unsorted { index });
        }
        prev = ts;
    }
    let span = (prev - start).num_minutes() as usize + 1;

    let mut values = vec![f64::NAN; span];
    let mut present = vec![false; span];
    let mut sums = vec![0.0f64; MINUTES_PER_DAY];
    let mut counts = vec![0usize; MINUTES_PER_DAY];
    let mut total = 0.0f64;
    let mut total_count = 0usize;

    for rec in records {
        let Some(gap) = rec.gap else { continue };
        if !gap.is_finite() {
            return Err(Error::NonFinite(format!("reading at {}", rec.timestamp())));
        }
        let pos = (rec.timestamp() - start).num_minutes() as usize;
        values[pos] = gap;
        present[pos] = true;
        let mod_ = usize::from(rec.minute);
        sums[mod_] += gap;
        counts[mod_] += 1;
        total += gap;
        total_count += 1;
    }
    if total_count == 0 {
        return Err(Error::NothingToAverage);
    }
    let global_mean = total / total_count as f64;
    let start_mod = start.num_seconds_from_midnight() as usize / 60;

    let mut imputed = vec![false; span];
    for pos in 0..span {
        if present[pos] {
            continue;
        }
        let mod_ = (start_mod + pos) % MINUTES_PER_DAY;
        values[pos] = if counts[mod_] > 0 {
            sums[mod_] / counts[mod_] as f64
        } else {
            global_mean
        };
        imputed[pos] = true;
    }
    LoadSeries::new(start, values, imputed)
}

/// Min-max scaling bounds in kW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: f64,
    pub max: f64,
}

impl NormalizationParams {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        // also rejects NaN bounds
        if !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidRange { min, max });
        }
        Ok(Self { min, max })
    }

    /// Bounds spanning `values`.
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("cannot fit normalization to no values".to_string()));
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        Self::new(min, max)
    }

    pub fn normalize_value(&self, value: f64) -> f64 {
        (value - self.min) / (self.max - self.min)
    }

    pub fn denormalize_value(&self, value: f64) -> f64 {
        value * (self.max - self.min) + self.min
    }
}

pub fn normalize(series: &LoadSeries, params: &NormalizationParams) -> Result<LoadSeries> {
    let params = NormalizationParams::new(params.min, params.max)?;
    map_values(series, |v| params.normalize_value(v))
}

pub fn denormalize(series: &LoadSeries, params: &NormalizationParams) -> Result<LoadSeries> {
    let params = NormalizationParams::new(params.min, params.max)?;
    map_values(series, |v| params.denormalize_value(v))
}

fn map_values(series: &LoadSeries, f: impl Fn(f64) -> f64) -> Result<LoadSeries> {
    LoadSeries::new(
        series.start,
        series.values.iter().map(|v| f(*v)).collect(),
        series.imputed.clone(),
    )
}

/// `n_weeks` consecutive week-long series starting at midnight of
/// `start_date`.
pub fn slice_weeks(series: &LoadSeries, start_date: NaiveDate, n_weeks: usize) -> Result<Vec<LoadSeries>> {
    if n_weeks == 0 {
        return Ok(Vec::new());
    }
    let begin = start_date.and_hms_opt(0, 0, 0).expect("midnight is valid");
    let offset = (begin - series.start).num_minutes();
    let needed = n_weeks * MINUTES_PER_WEEK;
    if offset < 0 || offset as usize + needed > series.len() {
        return Err(Error::OutOfRange(format!(
            "{n_weeks} week(s) from {start_date} not covered by series {} .. {}",
            series.start,
            series.timestamp_at(series.len().saturating_sub(1))
        )));
    }
    let offset = offset as usize;
    (0..n_weeks)
        .map(|k| series.slice(offset + k * MINUTES_PER_WEEK, MINUTES_PER_WEEK))
        .collect()
}
