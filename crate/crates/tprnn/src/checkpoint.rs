//! Saved models. Recurrent networks are stored as JSON with named tensors;
//! the AR and SVR baselines as a `key: value` text block. Both formats
//! write floats in shortest round-trip form, so save → load → save is
//! byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tprnn_core::forecast::{
    ArParams, ArimaConfig, ArimaModel, EpochLog, ForecastModel, Method, RecurrentConfig, RecurrentModel, SvrConfig,
    SvrModel, SvrParams,
};
use tprnn_core::metrics::ConfigFingerprint;
use tprnn_core::nn::{init_params, NetConfig, Parameters, StackedNet};

pub const NEURAL_FORMAT: &str = "tprnn-neural-checkpoint";
pub const LINEAR_FORMAT: &str = "tprnn-linear-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct CheckpointError(pub String);

fn err<T>(m: impl Into<String>) -> Result<T, CheckpointError> {
    Err(CheckpointError(m.into()))
}

/// A fitted forecaster of any of the five kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Svr(SvrModel),
    Arima(ArimaModel),
    Recurrent(RecurrentModel),
}

impl FittedModel {
    pub fn forecaster(&self) -> &dyn ForecastModel {
        match self {
            FittedModel::Svr(m) => m,
            FittedModel::Arima(m) => m,
            FittedModel::Recurrent(m) => m,
        }
    }

    pub fn method(&self) -> Method {
        self.forecaster().method()
    }

    pub fn log(&self) -> &[EpochLog] {
        match self {
            FittedModel::Recurrent(m) => &m.log,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NeuralFile {
    format: String,
    version: u32,
    method: Method,
    window: usize,
    seed: u64,
    fingerprint: ConfigFingerprint,
    config: RecurrentConfig,
    training: TrainingSummary,
    tensors: Vec<Tensor>,
}

/// How long a recurrent model trained and which epoch it kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
}

impl TrainingSummary {
    pub fn from_log(log: &[EpochLog]) -> Self {
        Self { epochs_run: log.len(), best_epoch: log.iter().filter(|e| e.best).map(|e| e.epoch).last() }
    }
}

/// A fitted model plus the experiment settings it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub fingerprint: ConfigFingerprint,
    pub seed: u64,
    pub model: FittedModel,
    /// Present for recurrent models.
    pub training: Option<TrainingSummary>,
}

fn net_config(method: Method, cfg: &RecurrentConfig) -> NetConfig {
    NetConfig {
        cell_kind: cfg.cell_kind,
        input: 1,
        hidden: cfg.hidden,
        layers: if method == Method::Rnn { 1 } else { cfg.layers },
        output: 1,
        peephole: cfg.peephole,
    }
}

fn tensors(net: &StackedNet) -> Vec<Tensor> {
    let mut out = Vec::new();
    net.visit(&mut |name, t| {
        out.push(Tensor { name: name.to_string(), dtype: "f64".into(), shape: vec![t.len()], data: t.to_vec() })
    });
    out
}

fn rebuild_net(method: Method, cfg: &RecurrentConfig, tensors: &[Tensor]) -> Result<StackedNet, CheckpointError> {
    let mut net = init_params(&net_config(method, cfg), 0).map_err(|e| CheckpointError(e.to_string()))?;
    let layout = net.layout();
    if layout.len() != tensors.len() {
        return err(format!("{} tensors stored, the configured network has {}", tensors.len(), layout.len()));
    }
    let mut flat = Vec::with_capacity(net.param_count());
    for ((name, _, len), t) in layout.iter().zip(tensors) {
        if *name != t.name || t.shape != [*len] || t.data.len() != *len || t.dtype != "f64" {
            return err(format!("tensor {:?} does not match expected {name} of {len} f64 values", t.name));
        }
        if let Some(v) = t.data.iter().find(|v| !v.is_finite()) {
            return err(format!("tensor {name} holds non-finite value {v}"));
        }
        flat.extend_from_slice(&t.data);
    }
    net.load_flat(&flat);
    Ok(net)
}

impl Checkpoint {
    pub fn new(fingerprint: ConfigFingerprint, seed: u64, model: FittedModel) -> Self {
        let training = match &model {
            FittedModel::Recurrent(m) => Some(TrainingSummary::from_log(&m.log)),
            _ => None,
        };
        Self { fingerprint, seed, model, training }
    }

    pub fn method(&self) -> Method {
        self.model.method()
    }

    pub fn window(&self) -> usize {
        self.model.forecaster().lookback()
    }

    /// Conventional file name for a method.
    pub fn file_name(method: Method) -> String {
        match method {
            Method::Svr | Method::Arima => format!("{}.txt", method.key()),
            _ => format!("{}.json", method.key()),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        match &self.model {
            FittedModel::Recurrent(m) => {
                let net = m.net.as_ref().ok_or_else(|| CheckpointError(format!("{} model is not fitted", m.method)))?;
                let file = NeuralFile {
                    format: NEURAL_FORMAT.into(),
                    version: FORMAT_VERSION,
                    method: m.method,
                    window: m.window,
                    seed: self.seed,
                    fingerprint: self.fingerprint.clone(),
                    config: m.config,
                    training: self.training.unwrap_or_else(|| TrainingSummary::from_log(&m.log)),
                    tensors: tensors(net),
                };
                let mut out = serde_json::to_vec_pretty(&file).map_err(|e| CheckpointError(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
            FittedModel::Svr(m) => {
                let p = m.params.as_ref().ok_or_else(|| CheckpointError("SVR model is not fitted".into()))?;
                let mut s = self.linear_header(Method::Svr, m.window);
                let c = &m.config;
                let _ = writeln!(s, "epsilon: {:?}\nc: {:?}\nepochs: {}\nlr: {:?}", c.epsilon, c.c, c.epochs, c.lr);
                let _ = writeln!(s, "b: {:?}\nw: {}", p.b, floats(&p.w));
                self.linear_footer(&mut s)?;
                Ok(s.into_bytes())
            }
            FittedModel::Arima(m) => {
                let p = m.params.as_ref().ok_or_else(|| CheckpointError("ARIMA model is not fitted".into()))?;
                let mut s = self.linear_header(Method::Arima, m.window);
                let _ = writeln!(s, "p: {}\nd: {}\nfallback: {}", m.config.p, m.config.d, m.fallback);
                let _ = writeln!(s, "mu: {:?}\ndelta: {:?}\nphi: {}", p.mu, p.delta, floats(&p.phi));
                self.linear_footer(&mut s)?;
                Ok(s.into_bytes())
            }
        }
    }

    fn linear_header(&self, method: Method, window: usize) -> String {
        format!(
            "format: {LINEAR_FORMAT}\nversion: {FORMAT_VERSION}\nmethod: {}\nwindow: {window}\nseed: {}\n",
            method.key(),
            self.seed
        )
    }

    fn linear_footer(&self, s: &mut String) -> Result<(), CheckpointError> {
        let fp = serde_json::to_string(&self.fingerprint).map_err(|e| CheckpointError(e.to_string()))?;
        let _ = writeln!(s, "fingerprint: {fp}");
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let text = std::str::from_utf8(bytes).map_err(|_| CheckpointError("checkpoint is not UTF-8".into()))?;
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_text(text)
        }
    }

    fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let f: NeuralFile = serde_json::from_str(text).map_err(|e| CheckpointError(format!("bad checkpoint JSON: {e}")))?;
        if f.format != NEURAL_FORMAT || f.version != FORMAT_VERSION {
            return err(format!("unsupported checkpoint {} v{}", f.format, f.version));
        }
        if !f.method.is_neural() {
            return err(format!("{} is not a neural method", f.method));
        }
        let net = rebuild_net(f.method, &f.config, &f.tensors)?;
        let model =
            RecurrentModel::from_net(f.method, f.config, f.window, net).map_err(|e| CheckpointError(e.to_string()))?;
        Ok(Self { fingerprint: f.fingerprint, seed: f.seed, model: FittedModel::Recurrent(model), training: Some(f.training) })
    }

    fn from_text(text: &str) -> Result<Self, CheckpointError> {
        let mut kv = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(':').ok_or_else(|| CheckpointError(format!("line {}: expected `key: value`", i + 1)))?;
            if kv.insert(k.trim(), v.trim()).is_some() {
                return err(format!("line {}: duplicate key {}", i + 1, k.trim()));
            }
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| CheckpointError(format!("missing key {k}")));
        let num = |k: &str| -> Result<f64, CheckpointError> {
            get(k)?.parse().map_err(|_| CheckpointError(format!("{k} is not a number")))
        };
        let int = |k: &str| -> Result<u64, CheckpointError> {
            get(k)?.parse().map_err(|_| CheckpointError(format!("{k} is not an integer")))
        };
        if get("format")? != LINEAR_FORMAT || int("version")? != u64::from(FORMAT_VERSION) {
            return err("not a linear checkpoint of a supported version");
        }
        let method: Method = get("method")?.parse().map_err(|e: tprnn_core::Error| CheckpointError(e.to_string()))?;
        let window = int("window")? as usize;
        let seed = int("seed")?;
        let fingerprint: ConfigFingerprint =
            serde_json::from_str(get("fingerprint")?).map_err(|e| CheckpointError(format!("fingerprint: {e}")))?;
        let core = |e: tprnn_core::Error| CheckpointError(e.to_string());
        let model = match method {
            Method::Svr => {
                let config =
                    SvrConfig { epsilon: num("epsilon")?, c: num("c")?, epochs: int("epochs")? as usize, lr: num("lr")?, seed };
                let mut m = SvrModel::new(config, window).map_err(core)?;
                let w = parse_floats(get("w")?)?;
                if w.len() != window {
                    return err(format!("{} SVR weights for window {window}", w.len()));
                }
                m.params = Some(SvrParams { w, b: num("b")?, epsilon: config.epsilon, c: config.c });
                FittedModel::Svr(m)
            }
            Method::Arima => {
                let config = ArimaConfig { p: int("p")? as usize, d: int("d")? as usize };
                let phi = parse_floats(get("phi")?)?;
                let params = ArParams { p: phi.len(), phi, delta: num("delta")?, mu: num("mu")? };
                let mut m = ArimaModel::from_params(config, window, params).map_err(core)?;
                m.fallback = match get("fallback")? {
                    "true" => true,
                    "false" => false,
                    other => return err(format!("fallback {other:?} is not a boolean")),
                };
                FittedModel::Arima(m)
            }
            other => return err(format!("{other} checkpoints are JSON, not text")),
        };
        Ok(Self { fingerprint, seed, model, training: None })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| CheckpointError(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|e| CheckpointError(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes).map_err(|e| CheckpointError(format!("{}: {e}", path.display())))
    }
}

fn floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

fn parse_floats(s: &str) -> Result<Vec<f64>, CheckpointError> {
    s.split_whitespace()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => err(format!("{t:?} is not a finite number")),
        })
        .collect()
}
