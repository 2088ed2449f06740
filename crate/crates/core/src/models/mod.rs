//! Classical forecasting models behind one fit/predict interface.
//!
//! Regression-style models consume the series through sliding lag windows
//! and forecast several steps ahead by feeding their own predictions back.

mod arima;
mod knn;
mod linear;
mod smoothing;
pub mod space;
mod tree;

use std::fmt;

use thiserror::Error;

pub use arima::{Arima, ArimaFit};
pub use knn::Knn;
pub use linear::{
    coordinate_descent, ElasticNetRegression, HuberRegression, LassoRegression, LinearRegression,
    PolynomialRegression, RidgeRegression,
};
pub use smoothing::Ses;
pub use space::{Domain, DomainSpec, HyperparameterPoint, HyperparameterSpace, ParamValue, Scale};
pub use tree::DecisionTree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("insufficient data: need at least {needed} training points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("design matrix is singular")]
    SingularDesign,
    #[error("{0} did not converge")]
    NonConvergence(&'static str),
    #[error("model `{0}` is not implemented")]
    NotImplemented(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid hyperparameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("model produced a non-finite forecast")]
    NonFiniteForecast,
}

/// Which optimizer family a model is tuned with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchKind {
    /// Exhaustive search over a finite grid.
    Exhaustive,
    /// Search over a continuous box.
    Continuous,
}

impl fmt::Display for SearchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchKind::Exhaustive => "ES",
            SearchKind::Continuous => "SCS",
        })
    }
}

pub trait FittedModel: Send + Sync {
    /// Forecasts the next `h` values after the training series.
    fn predict(&self, h: usize) -> Result<Vec<f64>, ModelError>;
}

pub trait ForecastModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn search_kind(&self) -> SearchKind;

    /// Literature configuration used as the non-optimized baseline.
    fn fixed_point(&self) -> HyperparameterPoint;

    fn space(&self) -> HyperparameterSpace;

    /// Fits on `train`. Parameters missing from `point` take their fixed
    /// value. `seasonal_period` sizes the default lag window.
    fn fit(
        &self,
        train: &[f64],
        seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError>;
}

pub const IMPLEMENTED: [&str; 10] = [
    "ses", "arima", "knn", "lr", "lsr", "rr", "enr", "dtr", "plr", "hr",
];

/// Registered names of models outside the implemented classical set.
pub const NOT_IMPLEMENTED: [&str; 9] = [
    "svr", "gbr", "rfr", "xgboost", "catboost", "br", "mlp", "lstm", "dnn_lstm",
];

pub fn model_by_name(name: &str) -> Result<Box<dyn ForecastModel>, ModelError> {
    let model: Box<dyn ForecastModel> = match name {
        "ses" => Box::new(Ses),
        "arima" => Box::new(Arima),
        "knn" => Box::new(Knn),
        "lr" => Box::new(LinearRegression),
        "lsr" => Box::new(LassoRegression),
        "rr" => Box::new(RidgeRegression),
        "enr" => Box::new(ElasticNetRegression),
        "dtr" => Box::new(DecisionTree),
        "plr" => Box::new(PolynomialRegression),
        "hr" => Box::new(HuberRegression),
        other if NOT_IMPLEMENTED.contains(&other) => {
            return Err(ModelError::NotImplemented(other.to_string()))
        }
        other => return Err(ModelError::UnknownModel(other.to_string())),
    };
    Ok(model)
}

// ---------------------------------------------------------------------------
// parameter access

fn invalid(name: &str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}

pub(crate) fn param_f64(point: &HyperparameterPoint, name: &str, default: f64) -> Result<f64, ModelError> {
    match point.get(name) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| invalid(name, format!("expected a number, got `{v}`"))),
    }
}

pub(crate) fn param_usize(point: &HyperparameterPoint, name: &str, default: usize) -> Result<usize, ModelError> {
    match point.get(name) {
        None => Ok(default),
        Some(ParamValue::Int(i)) if *i >= 0 => Ok(*i as usize),
        Some(ParamValue::Real(r)) if r.is_finite() && *r >= 0.0 => Ok(r.round() as usize),
        Some(v) => Err(invalid(name, format!("expected a non-negative integer, got `{v}`"))),
    }
}

pub(crate) fn check_params(point: &HyperparameterPoint, known: &[&str]) -> Result<(), ModelError> {
    match point.iter().find(|(k, _)| !known.contains(k)) {
        Some((k, _)) => Err(invalid(k, "not a parameter of this model")),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// lag features

/// Default lag window: the seasonal period, limited to a quarter of the
/// training length, never below 2.
pub fn lag_window(n_train: usize, seasonal_period: usize) -> usize {
    seasonal_period.min(n_train / 4).max(2)
}

/// Resolves the lag window from an optional `lags` parameter and checks
/// that at least two windows exist.
pub(crate) fn resolve_lags(
    train: &[f64],
    seasonal_period: usize,
    point: &HyperparameterPoint,
) -> Result<usize, ModelError> {
    let lags = param_usize(point, "lags", lag_window(train.len(), seasonal_period))?;
    if lags == 0 {
        return Err(invalid("lags", "must be at least 1"));
    }
    if train.len() < lags + 2 {
        return Err(ModelError::InsufficientData {
            needed: lags + 2,
            got: train.len(),
        });
    }
    Ok(lags)
}

/// Sliding windows of width `lags` and the value that follows each.
pub fn lag_design(train: &[f64], lags: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    train
        .windows(lags + 1)
        .map(|w| (w[..lags].to_vec(), w[lags]))
        .unzip()
}

/// Multi-step forecast by feeding one-step predictions back as inputs.
pub(crate) fn recursive_forecast<F>(
    history: &[f64],
    lags: usize,
    h: usize,
    mut step: F,
) -> Result<Vec<f64>, ModelError>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut buf: Vec<f64> = history[history.len() - lags..].to_vec();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let next = step(&buf[buf.len() - lags..]);
        if !next.is_finite() {
            return Err(ModelError::NonFiniteForecast);
        }
        out.push(next);
        buf.push(next);
    }
    Ok(out)
}

/// Column means and standard deviations (zero spread mapped to 1).
pub(crate) fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let p = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut sd = vec![0.0; p];
    for r in rows {
        for ((s, x), m) in sd.iter_mut().zip(r).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    for s in &mut sd {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    (mean, sd)
}
