//! Time pooling: weeks are cut into fixed-length segments, same-slot
//! segments across weeks form a pool, and each pool is split
//! chronologically into training and test parts.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use chrono::{Duration, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::series::LoadSeries;
use crate::{Error, Result, MINUTES_PER_WEEK};

/// Half-day segment length in minutes.
pub const DEFAULT_SEGMENT_LEN: usize = 720;
/// Half-day slots per week.
pub const DEFAULT_POOL_COUNT: usize = 14;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.67;
pub const DEFAULT_WINDOW: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub week_index: usize,
    /// Position of the segment within its week.
    pub slot_index: usize,
    /// Timestamp of the first value.
    pub start: NaiveDateTime,
    pub values: Vec<f64>,
}

impl Segment {
    pub fn timestamp_at(&self, offset: usize) -> NaiveDateTime {
        self.start + Duration::minutes(offset as i64)
    }
}

/// `m` pools of `n`-minute segments; pool `j` holds slot `j` of every week in
/// week order.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSet {
    n: usize,
    m: usize,
    pools: Vec<Vec<Segment>>,
}

impl PoolSet {
    pub fn new(n: usize, m: usize, pools: Vec<Vec<Segment>>) -> Result<Self> {
        if pools.len() != m {
            return Err(Error::Config(format!("expected {m} pools, got {}", pools.len())));
        }
        for (j, pool) in pools.iter().enumerate() {
            for seg in pool {
                if seg.slot_index != j {
                    return Err(Error::Config(format!(
                        "segment with slot {} placed in pool {j}",
                        seg.slot_index
                    )));
                }
                if seg.values.len() != n {
                    return Err(Error::Shape(format!(
                        "segment of length {} in a pool set with n={n}",
                        seg.values.len()
                    )));
                }
            }
        }
        Ok(Self { n, m, pools })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pools(&self) -> &[Vec<Segment>] {
        &self.pools
    }

    pub fn segment_count(&self) -> usize {
        self.pools.iter().map(Vec::len).sum()
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.pools.iter().flatten()
    }

    /// All segments ordered by (week, slot), i.e. as they occurred in time.
    pub fn chronological(&self) -> Vec<&Segment> {
        let mut segs: Vec<&Segment> = self.segments().collect();
        segs.sort_by_key(|s| (s.week_index, s.slot_index));
        segs
    }

    /// Applies `f` to every value, keeping the pool structure.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let pools = self
            .pools
            .iter()
            .map(|pool| {
                pool.iter()
                    .map(|s| Segment { values: s.values.iter().map(|v| f(*v)).collect(), ..s.clone() })
                    .collect()
            })
            .collect();
        Self { n: self.n, m: self.m, pools }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction {train_fraction} not in (0, 1)")));
        }
        Ok(Self { train_fraction, seed })
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_fraction: DEFAULT_TRAIN_FRACTION, seed: 0 }
    }
}

/// Lookback window and the value that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub input: Vec<f64>,
    pub target: f64,
    pub pool_index: usize,
    pub week_index: usize,
    /// Offset of `input[0]` within its segment.
    pub offset: usize,
}

/// Splits a week into consecutive `n`-value segments.
pub fn segment_week(week: &LoadSeries, n: usize, week_index: usize) -> Result<Vec<Segment>> {
    if n == 0 || week.len() % n != 0 {
        return Err(Error::Config(format!(
            "week of {} minutes is not divisible into segments of {n}",
            week.len()
        )));
    }
    Ok(week
        .values()
        .chunks_exact(n)
        .enumerate()
        .map(|(slot, chunk)| Segment {
            week_index,
            slot_index: slot,
            start: week.timestamp_at(slot * n),
            values: chunk.to_vec(),
        })
        .collect())
}

pub fn build_pools(weeks: &[LoadSeries], n: usize, m: usize) -> Result<PoolSet> {
    if n.checked_mul(m) != Some(MINUTES_PER_WEEK) {
        return Err(Error::Config(format!("n*m must equal {MINUTES_PER_WEEK}, got n={n} m={m}")));
    }
    let mut pools: Vec<Vec<Segment>> = (0..m).map(|_| Vec::with_capacity(weeks.len())).collect();
    for (week_index, week) in weeks.iter().enumerate() {
        if week.len() != MINUTES_PER_WEEK {
            return Err(Error::Shape(format!(
                "week {week_index} has {} minutes, expected {MINUTES_PER_WEEK}",
                week.len()
            )));
        }
        for seg in segment_week(week, n, week_index)? {
            pools[seg.slot_index].push(seg);
        }
    }
    PoolSet::new(n, m, pools)
}

/// Number of training segments for a pool of `count`: `fraction * count`
/// rounded to the nearest integer (halves round up).
fn train_count(fraction: f64, count: usize) -> usize {
    (libm::floor(fraction * count as f64 + 0.5) as usize).min(count)
}

/// Earliest segments of each pool go to training, the rest to test.
pub fn split_pools(pool_set: &PoolSet, cfg: &SplitConfig) -> Result<(PoolSet, PoolSet)> {
    let cfg = SplitConfig::new(cfg.train_fraction, cfg.seed)?;
    let mut train = Vec::with_capacity(pool_set.m);
    let mut test = Vec::with_capacity(pool_set.m);
    for (j, pool) in pool_set.pools.iter().enumerate() {
        if pool.is_empty() {
            return Err(Error::Empty(format!("pool {j} has no segments")));
        }
        let mut sorted = pool.clone();
        sorted.sort_by_key(|s| s.week_index);
        let k = train_count(cfg.train_fraction, sorted.len());
        let rest = sorted.split_off(k);
        train.push(sorted);
        test.push(rest);
    }
    let train = PoolSet::new(pool_set.n, pool_set.m, train)?;
    let test = PoolSet::new(pool_set.n, pool_set.m, test)?;
    if train.segment_count() == 0 {
        return Err(Error::Config("split leaves no training segments".to_string()));
    }
    if test.segment_count() == 0 {
        return Err(Error::Config("split leaves no test segments".to_string()));
    }
    Ok((train, test))
}

/// Stride-1 lookback windows of length `w` inside each segment.
pub fn make_windows<'a>(segments: impl IntoIterator<Item = &'a Segment>, w: usize) -> Result<Vec<WindowSample>> {
    if w == 0 {
        return Err(Error::Config("lookback window must be at least 1".to_string()));
    }
    let mut out = Vec::new();
    for seg in segments {
        let n = seg.values.len();
        if w >= n {
            return Err(Error::Config(format!("lookback {w} must be shorter than segment length {n}")));
        }
        out.extend((0..n - w).map(|offset| WindowSample {
            input: seg.values[offset..offset + w].to_vec(),
            target: seg.values[offset + w],
            pool_index: seg.slot_index,
            week_index: seg.week_index,
            offset,
        }));
    }
    Ok(out)
}

/// Seeded, epoch-wise shuffled batches over samples from every pool.
#[derive(Debug, Clone)]
pub struct PooledBatches {
    samples: Vec<WindowSample>,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl PooledBatches {
    pub fn new(samples: Vec<WindowSample>, batch_size: usize, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("no training samples to batch".to_string()));
        }
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".to_string()));
        }
        Ok(Self { samples, batch_size, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn samples(&self) -> &[WindowSample] {
        &self.samples
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.samples.len().div_ceil(self.batch_size)
    }

    /// Index batches for the next epoch; every sample appears exactly once.
    pub fn next_epoch(&mut self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        order.shuffle(&mut self.rng);
        order.chunks(self.batch_size).map(<[usize]>::to_vec).collect()
    }
}

pub fn pooled_batches(train: &PoolSet, w: usize, batch_size: usize, seed: u64) -> Result<PooledBatches> {
    PooledBatches::new(make_windows(train.segments(), w)?, batch_size, seed)
}
