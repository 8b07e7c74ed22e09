//! Linear ε-insensitive support vector regression in the primal,
//! `f(x) = wᵀx + b`, trained by stochastic subgradient descent on
//! `½‖w‖² + c · Σ max(0, |wᵀxᵢ + b − yᵢ| − ε)`.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EpochLog, ForecastModel, Method};
use crate::nn::linalg::{axpy, dot};
use crate::pooling::{make_windows, PoolSet};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub w: Vec<f64>,
    pub b: f64,
    pub epsilon: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    pub epsilon: f64,
    pub c: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self { epsilon: 0.01, c: 1.0, epochs: 20, lr: 1e-3, seed: 0 }
    }
}

impl SvrConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !(self.c > 0.0) || !(self.lr > 0.0) {
            return Err(Error::Config(format!(
                "SVR needs epsilon >= 0, c > 0, lr > 0 (got {}, {}, {})",
                self.epsilon, self.c, self.lr
            )));
        }
        Ok(())
    }
}

/// Primal objective value.
pub fn svr_objective(params: &SvrParams, features: &[Vec<f64>], targets: &[f64]) -> f64 {
    let hinge: f64 = features
        .iter()
        .zip(targets)
        .map(|(x, y)| ((dot(&params.w, x) + params.b - y).abs() - params.epsilon).max(0.0))
        .sum();
    0.5 * dot(&params.w, &params.w) + params.c * hinge
}

pub fn svr_fit(features: &[Vec<f64>], targets: &[f64], cfg: &SvrConfig) -> Result<SvrParams> {
    let dim = features.first().map_or(0, Vec::len);
    svr_fit_from(features, targets, cfg, SvrParams { w: vec![0.0; dim], b: 0.0, epsilon: cfg.epsilon, c: cfg.c })
}

/// Subgradient descent from `init`. Each epoch visits the samples in a
/// seeded random order with step `lr / sqrt(epoch + 1)`; the returned
/// parameters are the average of the end-of-epoch iterates over the second
/// half of training.
pub fn svr_fit_from(features: &[Vec<f64>], targets: &[f64], cfg: &SvrConfig, init: SvrParams) -> Result<SvrParams> {
    cfg.validate()?;
    if features.is_empty() {
        return Err(Error::Empty("SVR needs at least one sample".to_string()));
    }
    if features.len() != targets.len() {
        return Err(Error::Shape(format!("{} feature rows vs {} targets", features.len(), targets.len())));
    }
    let dim = init.w.len();
    if features.iter().any(|x| x.len() != dim) {
        return Err(Error::Shape(format!("every feature row must have {dim} entries")));
    }
    let n = features.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = init.w;
    let mut b = init.b;
    let mut order: Vec<usize> = (0..n).collect();
    let mut avg_w = vec![0.0; dim];
    let mut avg_b = 0.0;
    let mut averaged = 0usize;
    let tail_start = cfg.epochs / 2;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let eta = cfg.lr / libm::sqrt((epoch + 1) as f64);
        for &i in &order {
            let x = &features[i];
            let r = dot(&w, x) + b - targets[i];
            let g = if r > cfg.epsilon {
                1.0
            } else if r < -cfg.epsilon {
                -1.0
            } else {
                0.0
            };
            let shrink = 1.0 - eta / n as f64;
            w.iter_mut().for_each(|v| *v *= shrink);
            if g != 0.0 {
                axpy(-eta * cfg.c * g, x, &mut w);
                b -= eta * cfg.c * g;
            }
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        if epoch >= tail_start {
            axpy(1.0, &w, &mut avg_w);
            avg_b += b;
            averaged += 1;
        }
    }
    if averaged > 0 {
        let k = averaged as f64;
        w = avg_w.into_iter().map(|v| v / k).collect();
        b = avg_b / k;
    }
    Ok(SvrParams { w, b, epsilon: cfg.epsilon, c: cfg.c })
}

pub fn svr_predict(params: &SvrParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.w.len() {
        return Err(Error::Shape(format!("SVR expects {} features, got {}", params.w.len(), x.len())));
    }
    Ok(dot(&params.w, x) + params.b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub config: SvrConfig,
    pub window: usize,
    pub params: Option<SvrParams>,
}

impl SvrModel {
    pub fn new(config: SvrConfig, window: usize) -> Result<Self> {
        config.validate()?;
        if window == 0 {
            return Err(Error::Config("SVR window must be at least 1".to_string()));
        }
        Ok(Self { config, window, params: None })
    }
}

impl ForecastModel for SvrModel {
    fn method(&self) -> Method {
        Method::Svr
    }

    fn lookback(&self) -> usize {
        self.window
    }

    fn fit(&mut self, train: &PoolSet, _observer: &mut dyn FnMut(&EpochLog)) -> Result<()> {
        let samples = make_windows(train.chronological(), self.window)?;
        let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
        let features: Vec<Vec<f64>> = samples.into_iter().map(|s| s.input).collect();
        self.params = Some(svr_fit(&features, &targets, &self.config)?);
        Ok(())
    }

    fn predict(&self, context: &[f64]) -> Result<f64> {
        let params = self.params.as_ref().ok_or_else(|| Error::Config("SVR model is not fitted".to_string()))?;
        svr_predict(params, context)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_is_affine() {
        let p = SvrParams { w: vec![1.0, -1.0], b: 0.0, epsilon: 0.1, c: 1.0 };
        assert_eq!(svr_predict(&p, &[3.0, 1.0]).unwrap(), 2.0);
        let flat = SvrParams { w: vec![0.0; 3], b: 0.7, epsilon: 0.1, c: 1.0 };
        assert_eq!(svr_predict(&flat, &[5.0, -2.0, 9.0]).unwrap(), 0.7);
        assert!(svr_predict(&p, &[1.0]).is_err());
        let q = SvrParams { w: vec![0.3, -1.2], b: 0.4, ..p };
        let x = [2.0, 5.0];
        for alpha in [0.0, 0.25, 0.8, -1.5] {
            let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let bx: Vec<f64> = x.iter().map(|v| (1.0 - alpha) * v).collect();
            let lhs = svr_predict(&q, &ax).unwrap() + svr_predict(&q, &bx).unwrap() - q.b;
            assert!((lhs - svr_predict(&q, &x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn inside_tube_only_regularizer_acts() {
        let features = vec![vec![0.0], vec![1.0], vec![2.0]];
        let targets = [0.001, -0.002, 0.003];
        let cfg = SvrConfig { epsilon: 0.01, c: 10.0, epochs: 50, lr: 1e-2, seed: 1 };
        let fit = svr_fit(&features, &targets, &cfg).unwrap();
        assert_eq!(fit.w, [0.0]);
        assert_eq!(fit.b, 0.0);
    }

    #[test]
    fn wide_tube_shrinks_weights() {
        let features: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0]).collect();
        let targets: Vec<f64> = features.iter().map(|x| 0.1 * x[0]).collect();
        let cfg = SvrConfig { epsilon: 1.0, c: 1.0, epochs: 100, lr: 0.1, seed: 3 };
        let init = SvrParams { w: vec![0.8], b: 0.0, epsilon: 1.0, c: 1.0 };
        let fit = svr_fit_from(&features, &targets, &cfg, init).unwrap();
        assert!(fit.w[0].abs() < 0.8 * 0.5);
    }

    #[test]
    fn errors() {
        let cfg = SvrConfig::default();
        assert!(svr_fit(&[], &[], &cfg).is_err());
        assert!(svr_fit(&[vec![1.0]], &[1.0, 2.0], &cfg).is_err());
        assert!(svr_fit(&[vec![1.0]], &[1.0], &SvrConfig { c: 0.0, ..cfg }).is_err());
        assert!(svr_fit(&[vec![1.0]], &[1.0], &SvrConfig { epsilon: -1.0, ..cfg }).is_err());
        let huge = SvrConfig { lr: 1e300, c: 1e300, epochs: 3, ..cfg };
        assert!(matches!(svr_fit(&[vec![1e10]], &[-1e10], &huge), Err(Error::Diverged { .. })));
    }
}
