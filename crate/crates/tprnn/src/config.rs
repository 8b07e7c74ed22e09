//! Run configuration: a TOML file whose every key is optional, with
//! command-line flags layered on top.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tprnn_core::forecast::{ArimaConfig, Method, RecurrentConfig, SvrConfig};
use tprnn_core::nn::{CellKind, PeepholeKind};
use tprnn_core::pooling::{DEFAULT_POOL_COUNT, DEFAULT_SEGMENT_LEN, DEFAULT_TRAIN_FRACTION, DEFAULT_WINDOW};
use tprnn_core::MINUTES_PER_WEEK;

use crate::error::{RunError, RunResult, Stage};

/// Environment variable naming the directory that holds the dataset file.
pub const DATA_DIR_ENV: &str = "TPRNN_DATA_DIR";
/// File name looked up inside [`DATA_DIR_ENV`].
pub const DATASET_FILE: &str = "household_power_consumption.txt";
pub const DEFAULT_CACHE_DIR: &str = ".tprnn-cache";
/// Bump whenever a default below changes, so manifests say which set applied.
pub const DEFAULTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub start_date: NaiveDate,
    pub weeks: usize,
    pub window: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Methods `reproduce` leaves out.
    pub skip: Vec<Method>,
    pub pooling: PoolingSection,
    pub svr: SvrSection,
    pub arima: ArimaSection,
    pub recurrent: RecurrentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            cache_dir: None,
            start_date: NaiveDate::from_ymd_opt(2006, 12, 18).expect("valid date"),
            weeks: 4,
            window: DEFAULT_WINDOW,
            seed: 0,
            out: PathBuf::from("runs/default"),
            skip: Vec::new(),
            pooling: PoolingSection::default(),
            svr: SvrSection::default(),
            arima: ArimaSection::default(),
            recurrent: RecurrentSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolingSection {
    /// Segment length in minutes.
    pub n: usize,
    /// Number of pools.
    pub m: usize,
    pub train_fraction: f64,
}

impl Default for PoolingSection {
    fn default() -> Self {
        Self { n: DEFAULT_SEGMENT_LEN, m: DEFAULT_POOL_COUNT, train_fraction: DEFAULT_TRAIN_FRACTION }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrSection {
    pub epsilon: f64,
    pub c: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for SvrSection {
    fn default() -> Self {
        let d = SvrConfig::default();
        Self { epsilon: d.epsilon, c: d.c, epochs: d.epochs, lr: d.lr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArimaSection {
    pub p: usize,
    pub d: usize,
}

impl Default for ArimaSection {
    fn default() -> Self {
        let d = ArimaConfig::default();
        Self { p: d.p, d: d.d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecurrentSection {
    pub cell_kind: CellKind,
    pub peephole: PeepholeKind,
    pub layers: usize,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for RecurrentSection {
    fn default() -> Self {
        let d = RecurrentConfig::default();
        Self {
            cell_kind: d.cell_kind,
            peephole: d.peephole,
            layers: d.layers,
            hidden: d.hidden,
            lr: d.lr,
            epochs: d.epochs,
            batch_size: d.batch_size,
            clip_norm: d.clip_norm,
            patience: d.patience,
            validation_fraction: d.validation_fraction,
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub start_date: Option<NaiveDate>,
    pub weeks: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub skip: Vec<Method>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> RunResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| RunError::usage(Stage::Config, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::usage(Stage::Config, format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| RunError::usage(Stage::Config, format!("{}: {}", path.display(), e.message)))
    }

    /// The effective configuration with every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> RunResult<()> {
        if let Some(d) = &o.dataset {
            self.dataset = Some(d.clone());
        }
        if let Some(d) = o.start_date {
            self.start_date = d;
        }
        if let Some(w) = o.weeks {
            self.weeks = w;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        for m in &o.skip {
            if !self.skip.contains(m) {
                self.skip.push(*m);
            }
        }
        self.skip.sort();
        self.validate()
    }

    pub fn validate(&self) -> RunResult<()> {
        let bad = |m: String| Err(RunError::usage(Stage::Config, m));
        let p = &self.pooling;
        if p.n.checked_mul(p.m) != Some(MINUTES_PER_WEEK) {
            return bad(format!("pooling.n * pooling.m must equal {MINUTES_PER_WEEK}, got {} * {}", p.n, p.m));
        }
        if !(p.train_fraction > 0.0 && p.train_fraction < 1.0) {
            return bad(format!("pooling.train_fraction {} not in (0, 1)", p.train_fraction));
        }
        if self.weeks == 0 {
            return bad("weeks must be at least 1".into());
        }
        if self.window == 0 || self.window >= p.n {
            return bad(format!("window {} must be in 1..{}", self.window, p.n));
        }
        for m in Method::ALL {
            self.check_method(m)?;
        }
        Ok(())
    }

    fn check_method(&self, method: Method) -> RunResult<()> {
        let r = match method {
            Method::Svr => tprnn_core::forecast::SvrModel::new(self.svr_config(), self.window).map(drop),
            Method::Arima => tprnn_core::forecast::ArimaModel::new(self.arima_config(), self.window).map(drop),
            m => tprnn_core::forecast::RecurrentModel::new(m, self.recurrent_config(), self.window).map(drop),
        };
        r.map_err(|e| RunError::usage(Stage::Config, format!("[{}] {e}", section(method))))
    }

    pub fn svr_config(&self) -> SvrConfig {
        let s = &self.svr;
        SvrConfig { epsilon: s.epsilon, c: s.c, epochs: s.epochs, lr: s.lr, seed: self.seed }
    }

    pub fn arima_config(&self) -> ArimaConfig {
        ArimaConfig { p: self.arima.p, d: self.arima.d }
    }

    pub fn recurrent_config(&self) -> RecurrentConfig {
        let r = &self.recurrent;
        RecurrentConfig {
            cell_kind: r.cell_kind,
            peephole: r.peephole,
            layers: r.layers,
            hidden: r.hidden,
            lr: r.lr,
            epochs: r.epochs,
            batch_size: r.batch_size,
            clip_norm: r.clip_norm,
            patience: r.patience,
            validation_fraction: r.validation_fraction,
            seed: self.seed,
        }
    }

    /// Methods `reproduce` runs, in report order.
    pub fn methods(&self) -> Vec<Method> {
        Method::ALL.into_iter().filter(|m| !self.skip.contains(m)).collect()
    }

    pub fn cache_root(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
    }

    /// Dataset path: config or flag first, then the data directory from the
    /// environment.
    pub fn resolve_dataset(&self) -> RunResult<PathBuf> {
        if let Some(p) = &self.dataset {
            return Ok(p.clone());
        }
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Ok(PathBuf::from(dir).join(DATASET_FILE)),
            _ => Err(RunError::usage(
                Stage::Config,
                format!("no dataset given: pass --dataset, set `dataset` in the config or set {DATA_DIR_ENV}"),
            )),
        }
    }
}

fn section(method: Method) -> &'static str {
    match method {
        Method::Svr => "svr",
        Method::Arima => "arima",
        _ => "recurrent",
    }
}
