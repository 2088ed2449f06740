//! Forecast accuracy metrics: MAE, RMSE, R², GRA, RMSSE and MASE.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {actual} actual vs {predicted} predicted")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("actual values have zero variance")]
    ZeroVariance,
    #[error("actual values have zero total volume")]
    ZeroTotalVolume,
    #[error("training series has no variation for the naive scale")]
    FlatTrainingSeries,
}

fn check(actual: &[f64], predicted: &[f64]) -> Result<(), MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if actual.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFiniteInput);
    }
    Ok(())
}

fn sum_abs_err(actual: &[f64], predicted: &[f64]) -> f64 {
    actual.iter().zip(predicted).map(|(y, p)| (y - p).abs()).sum()
}

fn sum_sq_err(actual: &[f64], predicted: &[f64]) -> f64 {
    actual
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum()
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check(actual, predicted)?;
    Ok(sum_abs_err(actual, predicted) / actual.len() as f64)
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check(actual, predicted)?;
    Ok((sum_sq_err(actual, predicted) / actual.len() as f64).sqrt())
}

/// Coefficient of determination; negative when the fit is worse than the
/// mean of `actual`.
pub fn r2(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check(actual, predicted)?;
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let sst: f64 = actual.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok(1.0 - sum_sq_err(actual, predicted) / sst)
}

/// Global relative accuracy: one minus the relative gap between forecast
/// and observed absolute totals.
pub fn gra(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check(actual, predicted)?;
    let total_actual: f64 = actual.iter().map(|v| v.abs()).sum();
    if total_actual == 0.0 {
        return Err(MetricError::ZeroTotalVolume);
    }
    let total_pred: f64 = predicted.iter().map(|v| v.abs()).sum();
    Ok(1.0 - (total_pred - total_actual).abs() / total_actual)
}

/// Window over which the one-step naive error is measured for the scaled
/// metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleWindow {
    /// In-sample naive error over the training series.
    #[default]
    Train,
    /// Naive error over the test actuals themselves.
    Test,
}

fn naive_scale<F: Fn(f64) -> f64>(series: &[f64], f: F) -> Result<f64, MetricError> {
    if series.len() < 2 {
        return Err(MetricError::FlatTrainingSeries);
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFiniteInput);
    }
    let total: f64 = series.windows(2).map(|w| f(w[1] - w[0])).sum();
    if total == 0.0 {
        return Err(MetricError::FlatTrainingSeries);
    }
    Ok(total / (series.len() - 1) as f64)
}

pub fn rmsse(train: &[f64], actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    rmsse_with(train, actual, predicted, ScaleWindow::Train)
}

pub fn rmsse_with(
    train: &[f64],
    actual: &[f64],
    predicted: &[f64],
    window: ScaleWindow,
) -> Result<f64, MetricError> {
    check(actual, predicted)?;
    let reference = match window {
        ScaleWindow::Train => train,
        ScaleWindow::Test => actual,
    };
    let scale = naive_scale(reference, |d| d * d)?;
    let mse = sum_sq_err(actual, predicted) / actual.len() as f64;
    Ok((mse / scale).sqrt())
}

pub fn mase(train: &[f64], actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    mase_with(train, actual, predicted, ScaleWindow::Train)
}

pub fn mase_with(
    train: &[f64],
    actual: &[f64],
    predicted: &[f64],
    window: ScaleWindow,
) -> Result<f64, MetricError> {
    check(actual, predicted)?;
    let reference = match window {
        ScaleWindow::Train => train,
        ScaleWindow::Test => actual,
    };
    let scale = naive_scale(reference, f64::abs)?;
    Ok(sum_abs_err(actual, predicted) / actual.len() as f64 / scale)
}

/// Whether a larger or smaller value of a metric is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

/// The seven recorded quantities, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    R2,
    Mae,
    Rmse,
    Rmsse,
    Mase,
    Gra,
    ExecTime,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::R2,
        Metric::Mae,
        Metric::Rmse,
        Metric::Rmsse,
        Metric::Mase,
        Metric::Gra,
        Metric::ExecTime,
    ];

    pub fn direction(self) -> Direction {
        match self {
            Metric::R2 | Metric::Gra => Direction::HigherIsBetter,
            _ => Direction::LowerIsBetter,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::R2 => "r2",
            Metric::Mae => "mae",
            Metric::Rmse => "rmse",
            Metric::Rmsse => "rmsse",
            Metric::Mase => "mase",
            Metric::Gra => "gra",
            Metric::ExecTime => "exec_time",
        }
    }

    /// Row label used in the comparison tables.
    pub fn label(self) -> &'static str {
        match self {
            Metric::R2 => "R²",
            Metric::Mae => "MAE",
            Metric::Rmse => "RMSE",
            Metric::Rmsse => "RMSSE",
            Metric::Mase => "MASE",
            Metric::Gra => "GRA",
            Metric::ExecTime => "Execution Time",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

/// All six accuracy metrics plus wall-clock seconds for one fitted model
/// on one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
    pub gra: f64,
    pub rmsse: f64,
    pub mase: f64,
    pub exec_time: f64,
}

impl MetricBundle {
    pub fn compute(
        train: &[f64],
        actual: &[f64],
        predicted: &[f64],
        exec_time: f64,
        window: ScaleWindow,
    ) -> Result<Self, MetricError> {
        Ok(Self {
            r2: r2(actual, predicted)?,
            mae: mae(actual, predicted)?,
            rmse: rmse(actual, predicted)?,
            gra: gra(actual, predicted)?,
            rmsse: rmsse_with(train, actual, predicted, window)?,
            mase: mase_with(train, actual, predicted, window)?,
            exec_time,
        })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::R2 => self.r2,
            Metric::Mae => self.mae,
            Metric::Rmse => self.rmse,
            Metric::Rmsse => self.rmsse,
            Metric::Mase => self.mase,
            Metric::Gra => self.gra,
            Metric::ExecTime => self.exec_time,
        }
    }

    pub fn set(&mut self, metric: Metric, value: f64) {
        match metric {
            Metric::R2 => self.r2 = value,
            Metric::Mae => self.mae = value,
            Metric::Rmse => self.rmse = value,
            Metric::Rmsse => self.rmsse = value,
            Metric::Mase => self.mase = value,
            Metric::Gra => self.gra = value,
            Metric::ExecTime => self.exec_time = value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(close(mae(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 2.0 / 3.0));
        assert_eq!(mae(&[-1.0, 1.0], &[1.0, -1.0]).unwrap(), 2.0);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[4.0, 5.0], &[4.0, 5.0]).unwrap(), 0.0);
        assert!(close(
            rmse(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(),
            (2.0f64 / 3.0).sqrt()
        ));
        assert_eq!(rmse(&[10.0], &[5.0]).unwrap(), 5.0);
    }

    #[test]
    fn r2_examples() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        assert_eq!(r2(&y, &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!(close(r2(&y, &[1.5, 2.0, 2.5]).unwrap(), 0.75));
        assert_eq!(r2(&[2.0, 2.0], &[1.0, 3.0]), Err(MetricError::ZeroVariance));
    }

    #[test]
    fn gra_examples() {
        assert_eq!(gra(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert!(close(gra(&[10.0, 10.0], &[12.0, 10.0]).unwrap(), 0.9));
        assert_eq!(gra(&[5.0], &[15.0]).unwrap(), -1.0);
        assert_eq!(gra(&[0.0, 0.0], &[1.0, 1.0]), Err(MetricError::ZeroTotalVolume));
    }

    #[test]
    fn scaled_examples() {
        let train = [1.0, 2.0, 4.0];
        let y = [5.0, 7.0];
        let p = [4.0, 8.0];
        assert_eq!(rmsse(&train, &y, &y).unwrap(), 0.0);
        assert!(close(rmsse(&train, &y, &p).unwrap(), 1.0 / 2.5f64.sqrt()));
        assert!(close(mase(&train, &y, &p).unwrap(), 2.0 / 3.0));
        assert_eq!(mase(&train, &y, &y).unwrap(), 0.0);
        assert_eq!(
            rmsse(&[3.0, 3.0, 3.0], &y, &p),
            Err(MetricError::FlatTrainingSeries)
        );
        assert_eq!(
            mase(&[3.0, 3.0, 3.0], &y, &p),
            Err(MetricError::FlatTrainingSeries)
        );
    }

    #[test]
    fn test_window_scaling() {
        // naive abs diffs over test actuals [5,7,4]: (2+3)/2 = 2.5
        let y = [5.0, 7.0, 4.0];
        let p = [5.0, 6.0, 6.0];
        let m = mase_with(&[1.0, 2.0], &y, &p, ScaleWindow::Test).unwrap();
        assert!(close(m, 1.0 / 2.5));
    }

    #[test]
    fn error_paths() {
        assert_eq!(
            mae(&[1.0], &[1.0, 2.0]),
            Err(MetricError::LengthMismatch {
                actual: 1,
                predicted: 2
            })
        );
        assert_eq!(rmse(&[], &[]), Err(MetricError::EmptyInput));
        assert_eq!(mae(&[f64::NAN], &[1.0]), Err(MetricError::NonFiniteInput));
        assert_eq!(
            mase(&[1.0, 2.0], &[1.0], &[1.0, 2.0]),
            Err(MetricError::LengthMismatch {
                actual: 1,
                predicted: 2
            })
        );
    }

    #[test]
    fn naive_forecast_on_random_walk_has_mase_near_one() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ratios = Vec::new();
        for _ in 0..400 {
            let mut walk = vec![100.0];
            for _ in 0..60 {
                let step: f64 = rng.random_range(-1.0..1.0);
                walk.push(walk.last().unwrap() + step);
            }
            let (train, test) = walk.split_at(40);
            // one-step naive: each test point predicted by its predecessor
            let pred: Vec<f64> = std::iter::once(train[train.len() - 1])
                .chain(test[..test.len() - 1].iter().copied())
                .collect();
            ratios.push(mase(train, test, &pred).unwrap());
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 1.0).abs() < 0.1, "mean MASE {mean}");
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..60)) {
            let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert!(rmse(&y, &p).unwrap() >= mae(&y, &p).unwrap() * (1.0 - 1e-12));
        }

        #[test]
        fn scaling_behaviour(
            pairs in prop::collection::vec((1.0f64..1e3, 1.0f64..1e3), 3..40),
            train in prop::collection::vec(1.0f64..1e3, 3..40),
            c in 0.1f64..50.0,
        ) {
            let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
            let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
            let ts: Vec<f64> = train.iter().map(|v| v * c).collect();
            let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1e-9);
            prop_assert!(rel(mae(&ys, &ps).unwrap(), c * mae(&y, &p).unwrap()));
            prop_assert!(rel(rmse(&ys, &ps).unwrap(), c * rmse(&y, &p).unwrap()));
            prop_assert!(rel(gra(&ys, &ps).unwrap(), gra(&y, &p).unwrap()));
            if let Ok(v) = r2(&y, &p) {
                prop_assert!((r2(&ys, &ps).unwrap() - v).abs() <= 1e-9 * v.abs().max(1.0));
            }
            if let Ok(v) = mase(&train, &y, &p) {
                prop_assert!(rel(mase(&ts, &ys, &ps).unwrap(), v));
                prop_assert!(rel(rmsse(&ts, &ys, &ps).unwrap(), rmsse(&train, &y, &p).unwrap()));
            }
        }

        #[test]
        fn permutation_invariance(
            pairs in prop::collection::vec((1.0f64..1e3, 1.0f64..1e3), 3..40),
            seed: u64,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (ys, ps): (Vec<f64>, Vec<f64>) = shuffled.into_iter().unzip();
            let train = [1.0, 3.0, 2.0, 5.0];
            let near = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
            prop_assert!(near(mae(&ys, &ps).unwrap(), mae(&y, &p).unwrap()));
            prop_assert!(near(rmse(&ys, &ps).unwrap(), rmse(&y, &p).unwrap()));
            prop_assert!(near(gra(&ys, &ps).unwrap(), gra(&y, &p).unwrap()));
            prop_assert!(near(mase(&train, &ys, &ps).unwrap(), mase(&train, &y, &p).unwrap()));
            prop_assert!(near(rmsse(&train, &ys, &ps).unwrap(), rmsse(&train, &y, &p).unwrap()));
            if let Ok(v) = r2(&y, &p) {
                prop_assert!(near(r2(&ys, &ps).unwrap(), v));
            }
        }
    }
}
