//! Forecast evaluation with tolerance-banded penalties, classical models,
//! hyperparameter optimizers, and a repeated-run comparison protocol.

pub mod evaluation;
pub mod metrics;
pub mod models;
pub mod timeseries;
pub mod optimizers;
pub mod stats;
pub mod config;
pub mod protocol;
