//! The stages behind each subcommand: ingest, prepare, train, evaluate,
//! reproduce and export.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tprnn_core::forecast::{rolling_forecast, ArimaModel, EpochLog, ForecastModel, Method, RecurrentModel, SvrModel};
use tprnn_core::metrics::{build_report, ConfigFingerprint, EvalReport, MethodTrace};
use tprnn_core::pooling::{build_pools, split_pools, PoolSet, SplitConfig};
use tprnn_core::series::{impute_missing, slice_weeks, LoadSeries, NormalizationParams};

use crate::cache::{sha256_file, sha256_hex, IngestSummary, SeriesCache, PREPROCESS_VERSION};
use crate::checkpoint::{Checkpoint, FittedModel};
use crate::config::{RunConfig, DEFAULTS_VERSION};
use crate::error::{RunError, RunResult, Stage};
use crate::report::ReportFile;
use crate::trace::{write_export, write_trace, TraceRow};
use crate::ucihpc::parse_ucihpc_csv;

pub const MANIFEST_FORMAT: &str = "tprnn-manifest";

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: PathBuf,
    pub series: LoadSeries,
    pub summary: IngestSummary,
    /// Whether the series came from the cache.
    pub cached: bool,
}

/// Parses and imputes the dataset, or loads the cached result.
pub fn ingest(cfg: &RunConfig) -> RunResult<Ingested> {
    let dataset = cfg.resolve_dataset()?;
    if !dataset.is_file() {
        return Err(RunError::data(Stage::Ingest, format!("dataset not found: {}", dataset.display())));
    }
    let hash = sha256_file(&dataset).map_err(|e| RunError::io(Stage::Ingest, &dataset, e))?;
    let cache = SeriesCache::new(&cfg.cache_root(), &hash);
    if let Some((series, summary)) = cache.load().map_err(|e| RunError::io(Stage::Ingest, cache.dir(), e))? {
        return Ok(Ingested { dataset, series, summary, cached: true });
    }
    let records = parse_ucihpc_csv(&dataset)
        .map_err(|e| RunError::data(Stage::Ingest, format!("{}: {e}", dataset.display())))?;
    let series = impute_missing(&records)
        .map_err(|e| RunError::data(Stage::Ingest, format!("{}: {e}", dataset.display())))?;
    let missing = records.iter().filter(|r| r.gap.is_none()).count();
    let summary = IngestSummary {
        dataset_sha256: hash,
        preprocess_version: PREPROCESS_VERSION.into(),
        raw_records: records.len(),
        missing_records: missing,
        total_minutes: series.len(),
        imputed_minutes: series.imputed_count(),
        first: series.start(),
        last: series.timestamp_at(series.len() - 1),
    };
    cache.store(&series, &summary).map_err(|e| RunError::io(Stage::Ingest, cache.dir(), e))?;
    Ok(Ingested { dataset, series, summary, cached: false })
}

/// Normalized train/test pools for the configured span.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: PoolSet,
    pub test: PoolSet,
    pub fingerprint: ConfigFingerprint,
}

impl Prepared {
    pub fn normalization(&self) -> NormalizationParams {
        self.fingerprint.normalization
    }
}

pub fn prepare(cfg: &RunConfig, ingested: &Ingested) -> RunResult<Prepared> {
    let core = |e| RunError::from_core(Stage::Prepare, e);
    let weeks = slice_weeks(&ingested.series, cfg.start_date, cfg.weeks).map_err(core)?;
    let p = &cfg.pooling;
    let pools = build_pools(&weeks, p.n, p.m).map_err(core)?;
    let (train, test) = split_pools(&pools, &SplitConfig::new(p.train_fraction, cfg.seed).map_err(core)?).map_err(core)?;
    // scaling is fitted on the training segments only
    let train_values: Vec<f64> = train.segments().flat_map(|s| s.values.iter().copied()).collect();
    let norm = NormalizationParams::fit(&train_values).map_err(core)?;
    let fingerprint = ConfigFingerprint {
        dataset_hash: ingested.summary.dataset_sha256.clone(),
        span_start: cfg.start_date,
        n_weeks: cfg.weeks,
        segment_len: p.n,
        pool_count: p.m,
        train_fraction: p.train_fraction,
        window: cfg.window,
        normalization: norm,
    };
    Ok(Prepared {
        train: train.map_values(|v| norm.normalize_value(v)),
        test: test.map_values(|v| norm.normalize_value(v)),
        fingerprint,
    })
}

/// Fits `method` on the training pools.
pub fn train(
    cfg: &RunConfig,
    prepared: &Prepared,
    method: Method,
    observer: &mut dyn FnMut(&EpochLog),
) -> RunResult<Checkpoint> {
    let config_err = |e| RunError::from_core(Stage::Config, e);
    let mut model = match method {
        Method::Svr => FittedModel::Svr(SvrModel::new(cfg.svr_config(), cfg.window).map_err(config_err)?),
        Method::Arima => FittedModel::Arima(ArimaModel::new(cfg.arima_config(), cfg.window).map_err(config_err)?),
        m => FittedModel::Recurrent(RecurrentModel::new(m, cfg.recurrent_config(), cfg.window).map_err(config_err)?),
    };
    let fitted = match &mut model {
        FittedModel::Svr(m) => m.fit(&prepared.train, observer),
        FittedModel::Arima(m) => m.fit(&prepared.train, observer),
        FittedModel::Recurrent(m) => m.fit(&prepared.train, observer),
    };
    fitted.map_err(|e| RunError::from_core(Stage::Train, e).with_context(method.name()))?;
    Ok(Checkpoint::new(prepared.fingerprint.clone(), cfg.seed, model))
}

/// Rolling forecasts of every checkpoint over the test pools, in kW.
pub struct Evaluation {
    pub report: EvalReport,
    pub traces: Vec<(Method, Vec<TraceRow>)>,
}

pub fn evaluate(prepared: &Prepared, checkpoints: &[Checkpoint]) -> RunResult<Evaluation> {
    let first = checkpoints.first().ok_or_else(|| RunError::usage(Stage::Evaluate, "no checkpoints to evaluate"))?;
    for c in checkpoints {
        let diff = first.fingerprint.mismatches(&c.fingerprint);
        if !diff.is_empty() {
            return Err(RunError::data(
                Stage::Evaluate,
                format!("{} and {} checkpoints are incompatible, mismatched: {}", first.method(), c.method(), diff.join(", ")),
            ));
        }
    }
    let diff = prepared.fingerprint.mismatches(&first.fingerprint);
    if !diff.is_empty() {
        return Err(RunError::data(
            Stage::Evaluate,
            format!("checkpoints were trained under a different configuration, mismatched: {}", diff.join(", ")),
        ));
    }
    let norm = prepared.normalization();
    let segments = prepared.test.chronological();
    let mut method_traces = Vec::with_capacity(checkpoints.len());
    let mut traces = Vec::with_capacity(checkpoints.len());
    for c in checkpoints {
        let points = rolling_forecast(c.model.forecaster(), segments.iter().copied(), prepared.fingerprint.window)
            .map_err(|e| RunError::from_core(Stage::Evaluate, e).with_context(c.method().name()))?;
        let rows = points
            .iter()
            .map(|p| TraceRow {
                timestamp: p.timestamp,
                actual_kw: norm.denormalize_value(p.actual),
                predicted_kw: norm.denormalize_value(p.predicted),
            })
            .collect();
        traces.push((c.method(), rows));
        method_traces.push(MethodTrace { method: c.method(), seed: c.seed, points });
    }
    let report = build_report(&method_traces, &prepared.fingerprint).map_err(|e| RunError::from_core(Stage::Report, e))?;
    traces.sort_by_key(|t| t.0);
    Ok(Evaluation { report, traces })
}

fn write_file(stage: Stage, path: &Path, bytes: &[u8]) -> RunResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| RunError::io(stage, dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| RunError::io(stage, path, e))
}

pub fn checkpoint_path(out: &Path, method: Method) -> PathBuf {
    out.join("checkpoints").join(Checkpoint::file_name(method))
}

pub fn log_path(out: &Path, method: Method) -> PathBuf {
    out.join("logs").join(format!("{}.jsonl", method.key()))
}

pub fn trace_path(out: &Path, method: Method) -> PathBuf {
    out.join("traces").join(format!("{}.csv", method.key()))
}

/// One structured log line per epoch.
pub fn epoch_line(method: Method, e: &EpochLog) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        method: &'a str,
        epoch: usize,
        train_loss: f64,
        val_loss: Option<f64>,
        best: bool,
    }
    serde_json::to_string(&Line { method: method.key(), epoch: e.epoch, train_loss: e.train_loss, val_loss: e.val_loss, best: e.best })
        .expect("log line serializes")
}

/// Writes the checkpoint and its epoch log under `out`; returns the paths.
pub fn save_trained(out: &Path, checkpoint: &Checkpoint) -> RunResult<Vec<PathBuf>> {
    let method = checkpoint.method();
    let path = checkpoint_path(out, method);
    let bytes = checkpoint.to_bytes().map_err(|e| RunError::data(Stage::Train, e.0))?;
    write_file(Stage::Train, &path, &bytes)?;
    let mut written = vec![path];
    if method.is_neural() {
        let log: String = checkpoint.model.log().iter().map(|e| epoch_line(method, e) + "\n").collect();
        let path = log_path(out, method);
        write_file(Stage::Train, &path, log.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `report.json`, `report.txt` and one trace per method.
pub fn save_evaluation(out: &Path, eval: &Evaluation) -> RunResult<Vec<PathBuf>> {
    let file = ReportFile::new(eval.report.clone());
    let mut written = Vec::new();
    for (name, text) in [("report.json", file.to_json()), ("report.txt", file.to_table())] {
        let path = out.join(name);
        write_file(Stage::Report, &path, text.as_bytes())?;
        written.push(path);
    }
    for (method, rows) in &eval.traces {
        let mut buf = Vec::new();
        write_trace(&mut buf, rows).map_err(|e| RunError::data(Stage::Report, e.to_string()))?;
        let path = trace_path(out, *method);
        write_file(Stage::Report, &path, &buf)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub tool_version: String,
    pub defaults_version: u32,
    pub preprocess_version: String,
    pub dataset: PathBuf,
    pub dataset_sha256: String,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub config: RunConfig,
    pub artifacts: Vec<ManifestEntry>,
}

/// Entries the pipeline owns inside an output directory; `--force` clears
/// exactly these.
const OWNED: [&str; 7] = ["checkpoints", "logs", "traces", "report.json", "report.txt", "config.toml", "manifest.json"];

fn prepare_out_dir(out: &Path, force: bool) -> RunResult<()> {
    let non_empty = fs::read_dir(out).map(|mut d| d.next().is_some()).unwrap_or(false);
    if non_empty && !force {
        return Err(RunError::usage(
            Stage::Config,
            format!("output directory {} is not empty; pass --force to overwrite", out.display()),
        ));
    }
    for name in OWNED {
        let p = out.join(name);
        let r = if p.is_dir() { fs::remove_dir_all(&p) } else if p.exists() { fs::remove_file(&p) } else { Ok(()) };
        r.map_err(|e| RunError::io(Stage::Config, &p, e))?;
    }
    fs::create_dir_all(out).map_err(|e| RunError::io(Stage::Config, out, e))
}

/// Every stage end to end under `cfg.out`: checkpoints, logs, traces,
/// report, effective config and a manifest hashing each artifact.
pub fn reproduce(
    cfg: &RunConfig,
    force: bool,
    progress: &mut dyn FnMut(Method, &EpochLog),
) -> RunResult<(Evaluation, Manifest)> {
    let out = cfg.out.as_path();
    prepare_out_dir(out, force)?;
    let methods = cfg.methods();
    if methods.is_empty() {
        return Err(RunError::usage(Stage::Config, "every method is skipped"));
    }
    let ingested = ingest(cfg)?;
    let prepared = prepare(cfg, &ingested)?;
    let mut written = Vec::new();
    let mut checkpoints = Vec::with_capacity(methods.len());
    for method in &methods {
        let ckpt = train(cfg, &prepared, *method, &mut |e| progress(*method, e))?;
        written.extend(save_trained(out, &ckpt)?);
        checkpoints.push(ckpt);
    }
    let eval = evaluate(&prepared, &checkpoints)?;
    written.extend(save_evaluation(out, &eval)?);
    let config_path = out.join("config.toml");
    write_file(Stage::Report, &config_path, cfg.to_toml().as_bytes())?;
    written.push(config_path);

    let mut artifacts = Vec::with_capacity(written.len());
    for path in &written {
        let bytes = fs::read(path).map_err(|e| RunError::io(Stage::Report, path, e))?;
        let rel = path.strip_prefix(out).unwrap_or(path);
        artifacts.push(ManifestEntry {
            path: rel.to_string_lossy().replace('\\', "/"),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
    }
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        defaults_version: DEFAULTS_VERSION,
        preprocess_version: PREPROCESS_VERSION.into(),
        dataset: ingested.dataset.clone(),
        dataset_sha256: ingested.summary.dataset_sha256.clone(),
        seed: cfg.seed,
        methods,
        config: cfg.clone(),
        artifacts,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(Stage::Report, &out.join("manifest.json"), json.as_bytes())?;
    Ok((eval, manifest))
}

/// The configured span of the completed series in kW.
pub fn export(cfg: &RunConfig, ingested: &Ingested, path: &Path) -> RunResult<usize> {
    let weeks = slice_weeks(&ingested.series, cfg.start_date, cfg.weeks).map_err(|e| RunError::from_core(Stage::Export, e))?;
    let values: Vec<f64> = weeks.iter().flat_map(|w| w.values().iter().copied()).collect();
    let imputed: Vec<bool> = weeks.iter().flat_map(|w| w.imputed_mask().iter().copied()).collect();
    let start = weeks.first().map_or(cfg.start_date.and_hms_opt(0, 0, 0).expect("midnight"), LoadSeries::start);
    let span = LoadSeries::new(start, values, imputed).map_err(|e| RunError::from_core(Stage::Export, e))?;
    let mut buf = Vec::new();
    write_export(&mut buf, &span).map_err(|e| RunError::data(Stage::Export, e.to_string()))?;
    write_file(Stage::Export, path, &buf)?;
    Ok(span.len())
}
