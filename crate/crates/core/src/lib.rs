//! Algorithmic core for short-term load forecasting with time-pooled deep
//! recurrent networks.
//!
//! Everything here is pure computation over in-memory data and builds without
//! `std`; file formats, caching and the command line live in the `tprnn`
//! companion crate.
//!
//! * [`series`] completes a minute-resolution load series and scales it.
//! * [`pooling`] cuts weeks into half-day segments and groups them by slot.
//! * [`nn`] holds the LSTM / vanilla stacked network, BPTT and the optimizer.
//! * [`forecast`] implements the five forecasters behind one contract.
//! * [`metrics`] computes RMSE / MAE and the comparison report.

#![no_std]

extern crate alloc;

pub mod error;
pub mod forecast;
pub mod metrics;
pub mod nn;
pub mod pooling;
pub mod series;

pub use error::{Error, Result};

/// Minutes in one day.
pub const MINUTES_PER_DAY: usize = 24 * 60;
/// Minutes in one week.
pub const MINUTES_PER_WEEK: usize = 7 * MINUTES_PER_DAY;
