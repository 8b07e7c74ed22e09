//! Recurrent forecasters: single-layer RNN, stacked DRNN and the
//! time-pooled TPRNN.
//!
//! All three share architecture family, optimizer and windowing. RNN and
//! DRNN consume their training windows as one chronological stream; TPRNN
//! uses the same network as DRNN but draws each mini-batch from all pools
//! at once through [`PooledBatches`].

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{EpochLog, ForecastModel, Method};
use crate::nn::{
    backward_accumulate, init_params, optimizer_step, stacked_forward, AdamConfig, AdamState, CellKind, NetConfig,
    PeepholeKind, StackedNet,
};
use crate::pooling::{make_windows, PoolSet, PooledBatches, WindowSample};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrentConfig {
    pub cell_kind: CellKind,
    pub peephole: PeepholeKind,
    /// Depth of DRNN / TPRNN; the RNN baseline always has one layer.
    pub layers: usize,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Chronological tail of the training windows held out for early
    /// stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for RecurrentConfig {
    fn default() -> Self {
        Self {
            cell_kind: CellKind::Lstm,
            peephole: PeepholeKind::Diagonal,
            layers: 2,
            hidden: 32,
            lr: 1e-3,
            epochs: 30,
            batch_size: 32,
            clip_norm: 5.0,
            patience: 5,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl RecurrentConfig {
    fn net_config(&self, method: Method) -> NetConfig {
        NetConfig {
            cell_kind: self.cell_kind,
            input: 1,
            hidden: self.hidden,
            layers: if method == Method::Rnn { 1 } else { self.layers },
            output: 1,
            peephole: self.peephole,
        }
    }

    fn validate(&self, method: Method) -> Result<()> {
        if !method.is_neural() {
            return Err(Error::Config(format!("{method} is not a recurrent method")));
        }
        if method != Method::Rnn && self.layers < 2 {
            return Err(Error::Config(format!("{method} needs at least 2 layers, got {}", self.layers)));
        }
        if self.hidden == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("hidden size, batch size and epochs must be positive".to_string()));
        }
        if !(self.lr > 0.0) || !(self.clip_norm > 0.0) {
            return Err(Error::Config("learning rate and clip norm must be positive".to_string()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!("validation fraction {} not in [0, 1)", self.validation_fraction)));
        }
        Ok(())
    }
}

/// Fitted recurrent forecaster.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentModel {
    pub method: Method,
    pub config: RecurrentConfig,
    pub window: usize,
    pub net: Option<StackedNet>,
    pub log: Vec<EpochLog>,
}

impl RecurrentModel {
    pub fn new(method: Method, config: RecurrentConfig, window: usize) -> Result<Self> {
        config.validate(method)?;
        if window == 0 {
            return Err(Error::Config("lookback window must be at least 1".to_string()));
        }
        Ok(Self { method, config, window, net: None, log: Vec::new() })
    }

    pub fn from_net(method: Method, config: RecurrentConfig, window: usize, net: StackedNet) -> Result<Self> {
        let mut m = Self::new(method, config, window)?;
        let want = config.net_config(method);
        if net.cell_kind() != want.cell_kind || net.hidden_sizes() != vec![want.hidden; want.layers] || net.input_size() != 1 || net.output_size() != 1 {
            return Err(Error::Shape(format!("network does not match the {method} configuration")));
        }
        m.net = Some(net);
        Ok(m)
    }

    /// Trains on `samples` (in chronological order), holding out the tail
    /// for early stopping.
    pub fn fit_samples(&mut self, samples: &[WindowSample], observer: &mut dyn FnMut(&EpochLog)) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::Empty("no training windows".to_string()));
        }
        if let Some(s) = samples.iter().find(|s| s.input.len() != self.window) {
            return Err(Error::Shape(format!("window of {} values, model lookback {}", s.input.len(), self.window)));
        }
        let n_val = (samples.len() as f64 * self.config.validation_fraction) as usize;
        let (train, val) = samples.split_at(samples.len() - n_val);
        if train.is_empty() {
            return Err(Error::Empty("validation split leaves no training windows".to_string()));
        }
        let feed = match self.method {
            Method::Tprnn => Feed::Pooled(PooledBatches::new(train.to_vec(), self.config.batch_size, self.shuffle_seed())?),
            _ => Feed::Chronological,
        };
        let (net, log) = train_network(self.config.net_config(self.method), train, val, feed, &self.config, observer)?;
        self.net = Some(net);
        self.log = log;
        Ok(())
    }

    fn shuffle_seed(&self) -> u64 {
        self.config.seed ^ 0x9e37_79b9_7f4a_7c15
    }
}

impl ForecastModel for RecurrentModel {
    fn method(&self) -> Method {
        self.method
    }

    fn lookback(&self) -> usize {
        self.window
    }

    fn fit(&mut self, train: &PoolSet, observer: &mut dyn FnMut(&EpochLog)) -> Result<()> {
        let samples = make_windows(train.chronological(), self.window)?;
        self.fit_samples(&samples, observer)
    }

    fn predict(&self, context: &[f64]) -> Result<f64> {
        let net = self.net.as_ref().ok_or_else(|| Error::Config(format!("{} model is not fitted", self.method)))?;
        if context.len() != self.window {
            return Err(Error::Shape(format!("context of {} values, model window {}", context.len(), self.window)));
        }
        Ok(net.predict_last(context)?[0])
    }
}

/// RNN (one layer) or DRNN trained on a chronological stream of windows.
pub fn train_recurrent(method: Method, samples: &[WindowSample], config: &RecurrentConfig) -> Result<RecurrentModel> {
    if !matches!(method, Method::Rnn | Method::Drnn) {
        return Err(Error::Config(format!("train_recurrent handles RNN and DRNN, not {method}")));
    }
    let window = samples.first().map(|s| s.input.len()).ok_or_else(|| Error::Empty("no training windows".to_string()))?;
    let mut model = RecurrentModel::new(method, *config, window)?;
    model.fit_samples(samples, &mut |_| {})?;
    Ok(model)
}

/// DRNN architecture fed with cross-pool shuffled batches.
pub fn train_tprnn(pool_train: &PoolSet, window: usize, config: &RecurrentConfig) -> Result<RecurrentModel> {
    let mut model = RecurrentModel::new(Method::Tprnn, *config, window)?;
    model.fit(pool_train, &mut |_| {})?;
    Ok(model)
}

enum Feed {
    Chronological,
    Pooled(PooledBatches),
}

/// Squared error of the last-step output for each window.
fn sample_loss(net: &StackedNet, s: &WindowSample) -> Result<f64> {
    let r = net.predict_last(&s.input)?[0] - s.target;
    Ok(r * r)
}

/// Mean squared one-step error over `samples`.
pub fn mean_squared_error(net: &StackedNet, samples: &[WindowSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples to evaluate".to_string()));
    }
    let mut sum = 0.0;
    for s in samples {
        sum += sample_loss(net, s)?;
    }
    Ok(sum / samples.len() as f64)
}

fn train_network(
    net_cfg: NetConfig,
    train: &[WindowSample],
    val: &[WindowSample],
    mut feed: Feed,
    cfg: &RecurrentConfig,
    observer: &mut dyn FnMut(&EpochLog),
) -> Result<(StackedNet, Vec<EpochLog>)> {
    let mut net = init_params(&net_cfg, cfg.seed)?;
    let adam = AdamConfig { lr: cfg.lr, clip_norm: Some(cfg.clip_norm), ..AdamConfig::default() };
    let mut state = AdamState::new();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, StackedNet)> = None;
    let mut stale = 0usize;
    let zero = net.zero_state();

    for epoch in 0..cfg.epochs {
        let batches: Vec<Vec<usize>> = match &mut feed {
            Feed::Chronological => (0..train.len())
                .collect::<Vec<_>>()
                .chunks(cfg.batch_size)
                .map(<[usize]>::to_vec)
                .collect(),
            Feed::Pooled(pb) => pb.next_epoch(),
        };
        let mut loss_sum = 0.0;
        for batch in &batches {
            let mut grad = net.zeros_like();
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let s = &train[i];
                let seq: Vec<[f64; 1]> = s.input.iter().map(|v| [*v]).collect();
                let trace = stacked_forward(&net, &seq, &zero)?;
                let r = trace.outputs[seq.len() - 1][0] - s.target;
                loss_sum += r * r;
                let mut dy = vec![vec![0.0]; seq.len()];
                dy[seq.len() - 1][0] = scale * r;
                backward_accumulate(&net, &trace, &dy, &mut grad)?;
            }
            if !loss_sum.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            optimizer_step(&mut net, &grad, &mut state, &adam).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch },
                other => other,
            })?;
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_loss = if val.is_empty() { None } else { Some(mean_squared_error(&net, val)?) };
        if !train_loss.is_finite() || val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }

        let score = val_loss.unwrap_or(train_loss);
        let improved = best.as_ref().is_none_or(|(b, _)| score < *b);
        if improved {
            best = Some((score, net.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        let entry = EpochLog { epoch, train_loss, val_loss, best: improved };
        observer(&entry);
        log.push(entry);
        if val_loss.is_some() && stale >= cfg.patience {
            break;
        }
    }
    let net = best.map(|(_, n)| n).unwrap_or(net);
    Ok((net, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pooling::Segment;
    use chrono::NaiveDate;

    fn ramp_samples(n: usize, w: usize) -> Vec<WindowSample> {
        let values: Vec<f64> = (0..n + w).map(|t| 0.5 + 0.3 * libm::sin(t as f64 * 0.2)).collect();
        let seg = Segment {
            week_index: 0,
            slot_index: 0,
            start: NaiveDate::from_ymd_opt(2007, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            values,
        };
        make_windows([&seg], w).unwrap()
    }

    fn small() -> RecurrentConfig {
        RecurrentConfig { hidden: 4, layers: 2, epochs: 3, batch_size: 8, ..Default::default() }
    }

    #[test]
    fn deterministic_given_seed() {
        let samples = ramp_samples(60, 5);
        let a = train_recurrent(Method::Drnn, &samples, &small()).unwrap();
        let b = train_recurrent(Method::Drnn, &samples, &small()).unwrap();
        assert_eq!(a.net, b.net);
        assert_eq!(a.log, b.log);
        let c = train_recurrent(Method::Drnn, &samples, &RecurrentConfig { seed: 9, ..small() }).unwrap();
        assert_ne!(a.net, c.net);
    }

    #[test]
    fn training_reduces_loss() {
        let samples = ramp_samples(200, 5);
        let cfg = RecurrentConfig { epochs: 15, lr: 1e-2, ..small() };
        let m = train_recurrent(Method::Rnn, &samples, &cfg).unwrap();
        assert_eq!(m.net.as_ref().unwrap().layers().len(), 1);
        let first = m.log[0].train_loss;
        let last = m.log.last().unwrap().train_loss;
        assert!(last < first, "{first} -> {last}");
        assert!(m.predict(&samples[0].input).unwrap().is_finite());
    }

    #[test]
    fn configuration_errors() {
        assert!(RecurrentModel::new(Method::Drnn, RecurrentConfig { layers: 1, ..small() }, 5).is_err());
        assert!(RecurrentModel::new(Method::Svr, small(), 5).is_err());
        assert!(train_recurrent(Method::Tprnn, &ramp_samples(10, 5), &small()).is_err());
        assert!(train_recurrent(Method::Rnn, &[], &small()).is_err());
        let m = RecurrentModel::new(Method::Rnn, small(), 5).unwrap();
        assert!(m.predict(&[0.0; 5]).is_err());
    }

    #[test]
    fn divergence_names_the_epoch() {
        let samples = ramp_samples(40, 5);
        let mut bad = samples.clone();
        bad[3].target = f64::INFINITY;
        let err = train_recurrent(Method::Rnn, &bad, &RecurrentConfig { validation_fraction: 0.0, ..small() }).unwrap_err();
        assert_eq!(err, Error::Diverged { epoch: 0 });
    }
}
