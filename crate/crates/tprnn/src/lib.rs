//! Data ingestion, file formats and the experiment pipeline for
//! time-pooled recurrent load forecasting. Numerical work lives in
//! [`tprnn_core`].

pub mod cache;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod trace;
pub mod ucihpc;

pub use error::{ErrorKind, RunError, RunResult, Stage};
