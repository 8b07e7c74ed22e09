//! Autoregressive baseline: AR(p) fitted by least squares, optionally on a
//! `d`-times differenced series (ARIMA(p, d, 0)).

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{EpochLog, ForecastModel, Method};
use crate::pooling::PoolSet;
use crate::{Error, Result};

/// `y(t) = delta + Σ phi[i-1] · y(t - i)`, with `delta = (1 - Σ phi) · mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArParams {
    pub p: usize,
    pub phi: Vec<f64>,
    pub delta: f64,
    pub mu: f64,
}

impl ArParams {
    pub fn new(phi: Vec<f64>, mu: f64) -> Self {
        let delta = (1.0 - phi.iter().sum::<f64>()) * mu;
        Self { p: phi.len(), phi, delta, mu }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArFit {
    pub params: ArParams,
    /// Set when the lag matrix was singular and the mean predictor was used.
    pub fallback: bool,
}

/// Least-squares fit of an AR(p) on one series.
pub fn ar_fit(series: &[f64], p: usize) -> Result<ArFit> {
    ar_fit_segments(&[series], p)
}

/// Least-squares fit pooling lag rows from several independent series.
/// Lags never reach across series boundaries.
pub fn ar_fit_segments(segments: &[&[f64]], p: usize) -> Result<ArFit> {
    if p == 0 {
        return Err(Error::Config("AR order must be at least 1".to_string()));
    }
    let usable: Vec<&[f64]> = segments.iter().copied().filter(|s| s.len() > p).collect();
    let rows: usize = usable.iter().map(|s| s.len() - p).sum();
    if rows < 2 || segments.iter().all(|s| s.len() <= p + 1) {
        return Err(Error::Empty(format!("need more than p + 1 = {} values to fit AR({p})", p + 1)));
    }
    let n: usize = segments.iter().map(|s| s.len()).sum();
    let mu = segments.iter().flat_map(|s| s.iter()).sum::<f64>() / n as f64;

    // normal equations on the demeaned process
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for s in &usable {
        for t in p..s.len() {
            let y = s[t] - mu;
            for i in 0..p {
                let xi = s[t - 1 - i] - mu;
                xty[i] += xi * y;
                for j in 0..=i {
                    xtx[i * p + j] += xi * (s[t - 1 - j] - mu);
                }
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[j * p + i] = xtx[i * p + j];
        }
    }
    match solve_spd(&mut xtx, &mut xty, p) {
        Some(()) => Ok(ArFit { params: ArParams::new(xty, mu), fallback: false }),
        None => Ok(ArFit { params: ArParams::new(vec![0.0; p], mu), fallback: true }),
    }
}

/// Gaussian elimination with partial pivoting; `None` when the system is
/// numerically singular. Solution is left in `b`.
fn solve_spd(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|x, y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))?;
        if a[piv * n + col].abs() <= 1e-12 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * b[k];
        }
        b[col] = acc / a[col * n + col];
    }
    b.iter().all(|v| v.is_finite()).then_some(())
}

/// One-step prediction; `context` holds the last `p` values, most recent
/// last.
pub fn ar_predict(params: &ArParams, context: &[f64]) -> Result<f64> {
    if context.len() != params.p {
        return Err(Error::Shape(format!("AR({}) needs {} context values, got {}", params.p, params.p, context.len())));
    }
    Ok(params.delta + params.phi.iter().zip(context.iter().rev()).map(|(phi, y)| phi * y).sum::<f64>())
}

/// Applies first differencing `d` times.
pub fn differencing(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::Empty(format!("cannot difference {} values {d} times", series.len())));
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// First value of the series at each differencing level `0..d`; with the
/// differenced series these reconstruct the original exactly.
pub fn differencing_heads(series: &[f64], d: usize) -> Result<Vec<f64>> {
    (0..d).map(|k| differencing(series, k).map(|s| s[0])).collect()
}

pub fn inverse_differencing(diffed: &[f64], heads: &[f64]) -> Vec<f64> {
    let mut out = diffed.to_vec();
    for head in heads.iter().rev() {
        let mut level = Vec::with_capacity(out.len() + 1);
        let mut acc = *head;
        level.push(acc);
        for v in &out {
            acc += v;
            level.push(acc);
        }
        out = level;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaConfig {
    pub p: usize,
    pub d: usize,
}

impl Default for ArimaConfig {
    fn default() -> Self {
        Self { p: 5, d: 1 }
    }
}

/// ARIMA(p, d, 0) forecaster over a fixed lookback window.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel {
    pub config: ArimaConfig,
    pub window: usize,
    pub params: Option<ArParams>,
    pub fallback: bool,
}

impl ArimaModel {
    pub fn new(config: ArimaConfig, window: usize) -> Result<Self> {
        if config.p == 0 || config.p + config.d > window {
            return Err(Error::Config(format!(
                "ARIMA(p={}, d={}) needs 1 <= p and p + d <= window {window}",
                config.p, config.d
            )));
        }
        Ok(Self { config, window, params: None, fallback: false })
    }

    pub fn from_params(config: ArimaConfig, window: usize, params: ArParams) -> Result<Self> {
        let mut m = Self::new(config, window)?;
        if params.p != config.p || params.phi.len() != config.p {
            return Err(Error::Shape("AR coefficients do not match order p".to_string()));
        }
        m.params = Some(params);
        Ok(m)
    }

    pub fn fit_segments(&mut self, segments: &[&[f64]]) -> Result<()> {
        let diffed: Vec<Vec<f64>> = segments
            .iter()
            .filter(|s| s.len() > self.config.d)
            .map(|s| differencing(s, self.config.d))
            .collect::<Result<_>>()?;
        let refs: Vec<&[f64]> = diffed.iter().map(Vec::as_slice).collect();
        let fit = ar_fit_segments(&refs, self.config.p)?;
        self.params = Some(fit.params);
        self.fallback = fit.fallback;
        Ok(())
    }
}

impl ForecastModel for ArimaModel {
    fn method(&self) -> Method {
        Method::Arima
    }

    fn lookback(&self) -> usize {
        self.window
    }

    fn fit(&mut self, train: &PoolSet, _observer: &mut dyn FnMut(&EpochLog)) -> Result<()> {
        let segs: Vec<&[f64]> = train.chronological().into_iter().map(|s| s.values.as_slice()).collect();
        self.fit_segments(&segs)
    }

    fn predict(&self, context: &[f64]) -> Result<f64> {
        let params = self.params.as_ref().ok_or_else(|| Error::Config("ARIMA model is not fitted".to_string()))?;
        if context.len() != self.window {
            return Err(Error::Shape(format!("context of {} values, model window {}", context.len(), self.window)));
        }
        let (p, d) = (self.config.p, self.config.d);
        let tail = &context[context.len() - (p + d)..];
        // last value at each differencing level 0..=d
        let mut lasts = Vec::with_capacity(d + 1);
        let mut level = tail.to_vec();
        for _ in 0..d {
            lasts.push(level[level.len() - 1]);
            level = level.windows(2).map(|w| w[1] - w[0]).collect();
        }
        let mut next = ar_predict(params, &level)?;
        for last in lasts.iter().rev() {
            next += last;
        }
        Ok(next)
    }
}
