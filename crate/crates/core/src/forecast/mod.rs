//! The forecasting contract and its five implementations.

pub mod ar;
pub mod recurrent;
pub mod svr;

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::pooling::{PoolSet, Segment};
use crate::{Error, Result};

pub use ar::{ar_fit, ar_fit_segments, ar_predict, differencing, inverse_differencing, ArParams, ArimaConfig, ArimaModel};
pub use recurrent::{train_recurrent, train_tprnn, RecurrentConfig, RecurrentModel};
pub use svr::{svr_fit, svr_fit_from, svr_predict, SvrConfig, SvrModel, SvrParams};

/// The compared methods, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Svr,
    Arima,
    Rnn,
    Drnn,
    Tprnn,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Svr, Method::Arima, Method::Rnn, Method::Drnn, Method::Tprnn];

    pub fn name(self) -> &'static str {
        match self {
            Method::Svr => "SVR",
            Method::Arima => "ARIMA",
            Method::Rnn => "RNN",
            Method::Drnn => "DRNN",
            Method::Tprnn => "TPRNN",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Method::Svr => "svr",
            Method::Arima => "arima",
            Method::Rnn => "rnn",
            Method::Drnn => "drnn",
            Method::Tprnn => "tprnn",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, Method::Rnn | Method::Drnn | Method::Tprnn)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.key().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}; expected svr, arima, rnn, drnn or tprnn")))
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Whether this epoch produced the parameters kept so far.
    pub best: bool,
}

/// A one-step-ahead forecaster over a fixed lookback window, in normalized
/// units.
pub trait ForecastModel {
    fn method(&self) -> Method;

    fn lookback(&self) -> usize;

    fn fit(&mut self, train: &PoolSet, observer: &mut dyn FnMut(&EpochLog)) -> Result<()>;

    /// Next value after `context`, which holds exactly `lookback()` values,
    /// most recent last.
    fn predict(&self, context: &[f64]) -> Result<f64>;

    fn name(&self) -> &'static str {
        self.method().name()
    }
}

/// A predicted minute next to the value that actually occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub timestamp: NaiveDateTime,
    pub pool_index: usize,
    pub week_index: usize,
    pub actual: f64,
    pub predicted: f64,
}

/// Teacher-forced one-step-ahead predictions: every position after the
/// first `w` minutes of each segment is predicted from the true preceding
/// `w` values.
pub fn rolling_forecast<'a>(
    model: &dyn ForecastModel,
    segments: impl IntoIterator<Item = &'a Segment>,
    w: usize,
) -> Result<Vec<TracePoint>> {
    if model.lookback() != w {
        return Err(Error::Config(format!("{} uses a lookback of {}, asked for {w}", model.name(), model.lookback())));
    }
    let mut out = Vec::new();
    for seg in segments {
        if seg.values.len() < w + 1 {
            return Err(Error::Shape(format!(
                "segment of {} values is shorter than lookback + 1 = {}",
                seg.values.len(),
                w + 1
            )));
        }
        for pos in w..seg.values.len() {
            let predicted = model.predict(&seg.values[pos - w..pos])?;
            if !predicted.is_finite() {
                return Err(Error::NonFinite(format!("{} prediction at {}", model.name(), seg.timestamp_at(pos))));
            }
            out.push(TracePoint {
                timestamp: seg.timestamp_at(pos),
                pool_index: seg.slot_index,
                week_index: seg.week_index,
                actual: seg.values[pos],
                predicted,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use chrono::NaiveDate;

    struct Persistence(usize);

    impl ForecastModel for Persistence {
        fn method(&self) -> Method {
            Method::Arima
        }
        fn lookback(&self) -> usize {
            self.0
        }
        fn fit(&mut self, _: &PoolSet, _: &mut dyn FnMut(&EpochLog)) -> Result<()> {
            Ok(())
        }
        fn predict(&self, context: &[f64]) -> Result<f64> {
            Ok(context[context.len() - 1])
        }
    }

    fn seg(values: Vec<f64>) -> Segment {
        Segment {
            week_index: 0,
            slot_index: 2,
            start: NaiveDate::from_ymd_opt(2007, 1, 1).unwrap().and_hms_opt(12, 0, 0).unwrap(),
            values,
        }
    }

    #[test]
    fn persistence_on_constant_data() {
        let s = seg(vec![1.25; 720]);
        let trace = rolling_forecast(&Persistence(60), [&s], 60).unwrap();
        assert_eq!(trace.len(), 660);
        assert!(trace.iter().all(|p| p.actual == p.predicted));
        assert_eq!(trace[0].timestamp, s.timestamp_at(60));
        assert_eq!(trace[0].pool_index, 2);
    }

    #[test]
    fn alignment_and_errors() {
        let s = seg(vec![0.0, 1.0, 2.0, 3.0]);
        let trace = rolling_forecast(&Persistence(2), [&s], 2).unwrap();
        assert_eq!(trace.iter().map(|p| (p.actual, p.predicted)).collect::<Vec<_>>(), [(2.0, 1.0), (3.0, 2.0)]);
        assert!(rolling_forecast(&Persistence(4), [&s], 4).is_err());
        assert!(rolling_forecast(&Persistence(2), [&s], 3).is_err());
    }

    #[test]
    fn method_names() {
        assert_eq!("TPRNN".parse::<Method>().unwrap(), Method::Tprnn);
        assert_eq!("svr".parse::<Method>().unwrap(), Method::Svr);
        assert!("lstm".parse::<Method>().is_err());
        assert_eq!(Method::ALL.map(Method::name), ["SVR", "ARIMA", "RNN", "DRNN", "TPRNN"]);
    }
}
