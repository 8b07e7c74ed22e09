use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use tprnn::checkpoint::Checkpoint;
use tprnn::config::{Overrides, RunConfig};
use tprnn::pipeline::{self, checkpoint_path, epoch_line};
use tprnn::report::ReportFile;
use tprnn::{RunError, RunResult, Stage};
use tprnn_core::forecast::Method;

/// Short-term household load forecasting with time-pooled deep recurrent
/// networks and SVR / ARIMA / RNN / DRNN baselines.
#[derive(Debug, Parser)]
#[command(name = "tprnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Household power file (default: $TPRNN_DATA_DIR/household_power_consumption.txt).
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// First day of the experiment span, YYYY-MM-DD.
    #[arg(long, value_name = "DATE")]
    start_date: Option<NaiveDate>,
    /// Length of the span in weeks.
    #[arg(long)]
    weeks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (for `export`, the CSV file).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and impute the dataset into the cache and print its summary.
    Ingest(Common),
    /// Train one method and save its checkpoint and epoch log.
    Train {
        #[command(flatten)]
        common: Common,
        /// svr, arima, rnn, drnn or tprnn.
        #[arg(long, value_parser = parse_method)]
        model: Method,
        /// Overwrite an existing checkpoint.
        #[arg(long)]
        force: bool,
    },
    /// Forecast the test pools with saved checkpoints and write the report and traces.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint files (default: every file in <out>/checkpoints).
        checkpoints: Vec<PathBuf>,
    },
    /// Ingest, train every method, evaluate and write a manifest.
    Reproduce {
        #[command(flatten)]
        common: Common,
        /// Methods to leave out, comma separated or repeated.
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        skip: Vec<Method>,
        /// Reuse a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Write the completed series of the span as `timestamp_iso8601,gap_kw` CSV.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        force: bool,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: tprnn_core::Error| e.to_string())
}

fn load_config(c: &Common, skip: &[Method], apply_out: bool) -> RunResult<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        dataset: c.dataset.clone(),
        start_date: c.start_date,
        weeks: c.weeks,
        seed: c.seed,
        out: if apply_out { c.out.clone() } else { None },
        skip: skip.to_vec(),
    })?;
    Ok(cfg)
}

fn progress(method: Method) -> impl FnMut(&tprnn_core::forecast::EpochLog) {
    move |e| eprintln!("{}", epoch_line(method, e))
}

fn refuse_overwrite(path: &Path, force: bool) -> RunResult<()> {
    if path.exists() && !force {
        return Err(RunError::usage(Stage::Config, format!("{} exists; pass --force to overwrite", path.display())));
    }
    Ok(())
}

fn run(cli: Cli) -> RunResult<()> {
    match cli.command {
        Command::Ingest(common) => {
            let cfg = load_config(&common, &[], true)?;
            let ing = pipeline::ingest(&cfg)?;
            let s = &ing.summary;
            if ing.cached {
                println!("cached series found for {}; nothing to do", ing.dataset.display());
            }
            println!("dataset: {}", ing.dataset.display());
            println!("sha256: {}", s.dataset_sha256);
            println!("raw_records: {}", s.raw_records);
            println!("missing_records: {}", s.missing_records);
            println!("total_minutes: {}", s.total_minutes);
            println!("imputed_minutes: {}", s.imputed_minutes);
            println!("span: {} .. {}", s.first, s.last);
        }
        Command::Train { common, model, force } => {
            let cfg = load_config(&common, &[], true)?;
            let path = checkpoint_path(&cfg.out, model);
            refuse_overwrite(&path, force)?;
            let prepared = pipeline::prepare(&cfg, &pipeline::ingest(&cfg)?)?;
            let ckpt = pipeline::train(&cfg, &prepared, model, &mut progress(model))?;
            for p in pipeline::save_trained(&cfg.out, &ckpt)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Evaluate { common, checkpoints } => {
            let cfg = load_config(&common, &[], true)?;
            let paths = if checkpoints.is_empty() { saved_checkpoints(&cfg.out)? } else { checkpoints };
            let loaded = paths
                .iter()
                .map(|p| Checkpoint::load(p).map_err(|e| RunError::data(Stage::Evaluate, e.0)))
                .collect::<RunResult<Vec<_>>>()?;
            let prepared = pipeline::prepare(&cfg, &pipeline::ingest(&cfg)?)?;
            let eval = pipeline::evaluate(&prepared, &loaded)?;
            pipeline::save_evaluation(&cfg.out, &eval)?;
            print!("{}", ReportFile::new(eval.report).to_table());
        }
        Command::Reproduce { common, skip, force } => {
            let cfg = load_config(&common, &skip, true)?;
            let (eval, _) = pipeline::reproduce(&cfg, force, &mut |m, e| eprintln!("{}", epoch_line(m, e)))?;
            print!("{}", ReportFile::new(eval.report).to_table());
            println!("wrote {}", cfg.out.join("manifest.json").display());
        }
        Command::Export { common, force } => {
            let cfg = load_config(&common, &[], false)?;
            let path = common.out.clone().unwrap_or_else(|| cfg.out.join("series.csv"));
            refuse_overwrite(&path, force)?;
            let rows = pipeline::export(&cfg, &pipeline::ingest(&cfg)?, &path)?;
            println!("wrote {rows} rows to {}", path.display());
        }
    }
    Ok(())
}

fn saved_checkpoints(out: &Path) -> RunResult<Vec<PathBuf>> {
    let dir = out.join("checkpoints");
    let entries = std::fs::read_dir(&dir).map_err(|e| RunError::io(Stage::Evaluate, &dir, e))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
    paths.sort();
    if paths.is_empty() {
        return Err(RunError::usage(Stage::Evaluate, format!("no checkpoints in {}", dir.display())));
    }
    Ok(paths)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
