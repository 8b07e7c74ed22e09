//! Completed-series cache, keyed by the dataset's content hash and the
//! preprocessing version so the multi-million-row parse runs once.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tprnn_core::series::LoadSeries;

/// Bump whenever parsing or imputation changes output.
pub const PREPROCESS_VERSION: &str = "minute-of-day-mean/1";

const MAGIC: &[u8; 8] = b"TPRNNSER";
const SERIES_FORMAT: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Cache key for a dataset hash under the current preprocessing.
pub fn cache_key(dataset_sha256: &str) -> String {
    sha256_hex(format!("{dataset_sha256}\n{PREPROCESS_VERSION}").as_bytes())
}

/// What ingestion found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub dataset_sha256: String,
    pub preprocess_version: String,
    pub raw_records: usize,
    pub missing_records: usize,
    pub total_minutes: usize,
    pub imputed_minutes: usize,
    pub first: NaiveDateTime,
    pub last: NaiveDateTime,
}

#[derive(Debug, Clone)]
pub struct SeriesCache {
    dir: PathBuf,
}

impl SeriesCache {
    pub fn new(root: &Path, dataset_sha256: &str) -> Self {
        Self { dir: root.join(cache_key(dataset_sha256)) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn series_path(&self) -> PathBuf {
        self.dir.join("series.bin")
    }

    fn summary_path(&self) -> PathBuf {
        self.dir.join("summary.json")
    }

    /// The cached series, or `None` if absent. A present but unreadable
    /// entry is an error rather than a silent re-ingest.
    pub fn load(&self) -> io::Result<Option<(LoadSeries, IngestSummary)>> {
        if !self.series_path().exists() || !self.summary_path().exists() {
            return Ok(None);
        }
        let summary: IngestSummary = serde_json::from_slice(&fs::read(self.summary_path())?)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", self.summary_path().display())))?;
        let series = decode_series(&fs::read(self.series_path())?)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", self.series_path().display())))?;
        Ok(Some((series, summary)))
    }

    pub fn store(&self, series: &LoadSeries, summary: &IngestSummary) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        write_atomic(&self.series_path(), &encode_series(series))?;
        let json = serde_json::to_vec_pretty(summary).map_err(io::Error::other)?;
        write_atomic(&self.summary_path(), &json)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

/// `MAGIC`, format u32, start (unix seconds, naive) i64, length u64, then
/// the values as f64 and the imputed mask as one byte each, little endian.
pub fn encode_series(series: &LoadSeries) -> Vec<u8> {
    let n = series.len();
    let mut out = Vec::with_capacity(28 + 9 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SERIES_FORMAT.to_le_bytes());
    out.extend_from_slice(&series.start().and_utc().timestamp().to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in series.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(series.imputed_mask().iter().map(|&b| u8::from(b)));
    out
}

pub fn decode_series(bytes: &[u8]) -> Result<LoadSeries, String> {
    let take = |at: usize, len: usize| bytes.get(at..at + len).ok_or_else(|| "truncated series file".to_string());
    if take(0, 8)? != MAGIC {
        return Err("not a series cache file".to_string());
    }
    let format = u32::from_le_bytes(take(8, 4)?.try_into().expect("4 bytes"));
    if format != SERIES_FORMAT {
        return Err(format!("series format {format}, expected {SERIES_FORMAT}"));
    }
    let secs = i64::from_le_bytes(take(12, 8)?.try_into().expect("8 bytes"));
    let n = usize::try_from(u64::from_le_bytes(take(20, 8)?.try_into().expect("8 bytes"))).map_err(|e| e.to_string())?;
    if bytes.len() != 28 + 9 * n {
        return Err(format!("series file has {} bytes, expected {}", bytes.len(), 28 + 9 * n));
    }
    let start = DateTime::from_timestamp(secs, 0).ok_or("start timestamp out of range")?.naive_utc();
    let values = bytes[28..28 + 8 * n].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let imputed = bytes[28 + 8 * n..]
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(format!("bad mask byte {other}")),
        })
        .collect::<Result<_, _>>()?;
    LoadSeries::new(start, values, imputed).map_err(|e| e.to_string())
}
