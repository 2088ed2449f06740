//! Evaluation functions scored by the hyperparameter search: the
//! hierarchical evaluation function (HEF) and the plain-MAE baseline (MAEF).
//!
//! Both map a model's test predictions and their metrics to a scalar that
//! the optimizer minimizes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("training series needs at least 2 observations, got {0}")]
    SeriesTooShort(usize),
    #[error("non-finite input")]
    NonFiniteInput,
}

/// Floor applied to the training mean when it is numerically zero.
pub const MEAN_GUARD: f64 = 1e-6;

/// Relative weights of (1 − R²), MAE/ȳ and RMSE/ȳ in the base score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricWeights {
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            r2: 1.0,
            mae: 1.0,
            rmse: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyLevel {
    /// MAE within tolerance, RMSE beyond it.
    Level1,
    /// RMSE within tolerance, MAE beyond it.
    Level2,
    /// Both beyond tolerance.
    Level3,
    /// Negative predictions.
    Level4,
}

/// Multipliers for each penalty level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyMultipliers {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

impl Default for PenaltyMultipliers {
    fn default() -> Self {
        Self {
            l1: 1.2,
            l2: 1.3,
            l3: 1.5,
            l4: 1.8,
        }
    }
}

impl PenaltyMultipliers {
    pub fn multiplier(&self, level: PenaltyLevel) -> f64 {
        match level {
            PenaltyLevel::Level1 => self.l1,
            PenaltyLevel::Level2 => self.l2,
            PenaltyLevel::Level3 => self.l3,
            PenaltyLevel::Level4 => self.l4,
        }
    }
}

impl PenaltyLevel {
    pub fn multiplier(self) -> f64 {
        PenaltyMultipliers::default().multiplier(self)
    }
}

pub fn apply_penalty(base_score: f64, level: PenaltyLevel) -> f64 {
    base_score * level.multiplier()
}

/// Training mean with the near-zero guard applied.
pub fn guarded_mean(y_train: &[f64]) -> f64 {
    let mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
    if mean.abs() < MEAN_GUARD {
        MEAN_GUARD
    } else {
        mean
    }
}

/// Population standard deviation over |guarded mean|.
pub fn coefficient_of_variation(y_train: &[f64]) -> Result<f64, EvalError> {
    if y_train.len() < 2 {
        return Err(EvalError::SeriesTooShort(y_train.len()));
    }
    if y_train.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteInput);
    }
    let n = y_train.len() as f64;
    let raw_mean = y_train.iter().sum::<f64>() / n;
    let var = y_train.iter().map(|v| (v - raw_mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / guarded_mean(y_train).abs())
}

/// MAE tolerance coefficient for a CV value.
pub fn mae_tolerance_for_cv(cv: f64) -> f64 {
    if cv < 0.2 {
        0.1
    } else if cv < 0.5 {
        0.2
    } else if cv < 1.0 {
        0.3
    } else {
        0.4
    }
}

/// RMSE tolerance coefficient for a CV value; one notch looser than MAE.
pub fn rmse_tolerance_for_cv(cv: f64) -> f64 {
    if cv < 0.2 {
        0.15
    } else if cv < 0.5 {
        0.25
    } else if cv < 1.0 {
        0.35
    } else {
        0.4
    }
}

pub fn recommend_mae_tolerance(y_train: &[f64]) -> Result<f64, EvalError> {
    coefficient_of_variation(y_train).map(mae_tolerance_for_cv)
}

pub fn recommend_rmse_tolerance(y_train: &[f64]) -> Result<f64, EvalError> {
    coefficient_of_variation(y_train).map(rmse_tolerance_for_cv)
}

/// Scoring contract used by the optimizers. Lower is better.
pub trait EvaluationFunction: Send + Sync {
    fn name(&self) -> &'static str;

    fn score(
        &self,
        predictions: &[f64],
        r2: f64,
        mae: f64,
        rmse: f64,
        y_train: &[f64],
    ) -> Result<f64, EvalError>;
}

/// Hierarchical evaluation function.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hef {
    pub weights: MetricWeights,
    pub penalties: PenaltyMultipliers,
    /// Apply the negative-prediction multiplier on top of the threshold
    /// branch instead of replacing it.
    pub stack_level4: bool,
}

/// Intermediate values of one HEF evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HefBreakdown {
    pub mean: f64,
    pub mae_threshold: f64,
    pub rmse_threshold: f64,
    pub base_score: f64,
    pub level: Option<PenaltyLevel>,
    pub negative_predictions: bool,
    pub score: f64,
}

impl Hef {
    pub fn breakdown(
        &self,
        predictions: &[f64],
        r2: f64,
        mae: f64,
        rmse: f64,
        y_train: &[f64],
    ) -> Result<HefBreakdown, EvalError> {
        let cv = coefficient_of_variation(y_train)?;
        if !(r2.is_finite() && mae.is_finite() && rmse.is_finite())
            || predictions.iter().any(|p| !p.is_finite())
        {
            return Err(EvalError::NonFiniteInput);
        }
        let mean = guarded_mean(y_train);
        let mae_threshold = mae_tolerance_for_cv(cv) * mean;
        let rmse_threshold = rmse_tolerance_for_cv(cv) * mean;

        let w = &self.weights;
        let base_score = w.r2 * (1.0 - r2) + w.mae * (mae / mean) + w.rmse * (rmse / mean);

        let mae_ok = mae < mae_threshold;
        let rmse_ok = rmse < rmse_threshold;
        let level = match (mae_ok, rmse_ok) {
            (true, true) => None,
            (true, false) => Some(PenaltyLevel::Level1),
            (false, true) => Some(PenaltyLevel::Level2),
            (false, false) => Some(PenaltyLevel::Level3),
        };
        let mut score = match level {
            None => base_score,
            Some(l) => base_score * self.penalties.multiplier(l),
        };
        let negative_predictions = predictions.iter().any(|&p| p < 0.0);
        if negative_predictions {
            let source = if self.stack_level4 { score } else { base_score };
            score = source * self.penalties.l4;
        }
        Ok(HefBreakdown {
            mean,
            mae_threshold,
            rmse_threshold,
            base_score,
            level,
            negative_predictions,
            score,
        })
    }
}

impl EvaluationFunction for Hef {
    fn name(&self) -> &'static str {
        "hef"
    }

    fn score(
        &self,
        predictions: &[f64],
        r2: f64,
        mae: f64,
        rmse: f64,
        y_train: &[f64],
    ) -> Result<f64, EvalError> {
        self.breakdown(predictions, r2, mae, rmse, y_train)
            .map(|b| b.score)
    }
}

pub fn hef_score(
    predictions: &[f64],
    r2: f64,
    mae: f64,
    rmse: f64,
    y_train: &[f64],
) -> Result<f64, EvalError> {
    Hef::default().score(predictions, r2, mae, rmse, y_train)
}

/// Baseline evaluation: the MAE itself.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Maef;

impl EvaluationFunction for Maef {
    fn name(&self) -> &'static str {
        "maef"
    }

    fn score(
        &self,
        _predictions: &[f64],
        _r2: f64,
        mae: f64,
        _rmse: f64,
        _y_train: &[f64],
    ) -> Result<f64, EvalError> {
        if !mae.is_finite() {
            return Err(EvalError::NonFiniteInput);
        }
        Ok(maef_score(mae))
    }
}

pub fn maef_score(mae: f64) -> f64 {
    mae
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Mean 10, population std 0.5 (CV 0.05).
    fn calm_train() -> Vec<f64> {
        vec![9.5, 10.5, 9.5, 10.5]
    }

    #[test]
    fn mae_tolerance_bands() {
        assert_eq!(mae_tolerance_for_cv(0.1), 0.1);
        assert_eq!(mae_tolerance_for_cv(0.2), 0.2);
        assert_eq!(mae_tolerance_for_cv(0.49), 0.2);
        assert_eq!(mae_tolerance_for_cv(0.5), 0.3);
        assert_eq!(mae_tolerance_for_cv(1.0), 0.4);
        assert_eq!(mae_tolerance_for_cv(1.7), 0.4);
    }

    #[test]
    fn rmse_tolerance_bands() {
        assert_eq!(rmse_tolerance_for_cv(0.1), 0.15);
        assert_eq!(rmse_tolerance_for_cv(0.2), 0.25);
        assert_eq!(rmse_tolerance_for_cv(0.6), 0.35);
        assert_eq!(rmse_tolerance_for_cv(3.0), 0.4);
    }

    #[test]
    fn tolerance_from_series() {
        assert_eq!(recommend_mae_tolerance(&calm_train()).unwrap(), 0.1);
        assert_eq!(recommend_rmse_tolerance(&calm_train()).unwrap(), 0.15);
        // mean 1, population std 1 -> CV 1.0
        assert_eq!(recommend_mae_tolerance(&[0.0, 2.0]).unwrap(), 0.4);
        assert_eq!(recommend_mae_tolerance(&[1.0]), Err(EvalError::SeriesTooShort(1)));
        // negative mean uses |mean| for the CV
        assert_eq!(recommend_mae_tolerance(&[-9.5, -10.5]).unwrap(), 0.1);
    }

    #[test]
    fn penalty_examples() {
        assert!((apply_penalty(0.19, PenaltyLevel::Level4) - 0.342).abs() < 1e-12);
        assert!((apply_penalty(3.7, PenaltyLevel::Level1) / 3.7 - 1.2).abs() < 1e-12);
        for l in [
            PenaltyLevel::Level1,
            PenaltyLevel::Level2,
            PenaltyLevel::Level3,
            PenaltyLevel::Level4,
        ] {
            assert_eq!(apply_penalty(0.0, l), 0.0);
        }
    }

    #[test]
    fn hef_examples() {
        let y = calm_train();
        let ok = [9.0, 11.0];
        assert!((hef_score(&ok, 0.9, 0.5, 0.8, &y).unwrap() - 0.19).abs() < 1e-12);
        assert!((hef_score(&ok, 0.9, 1.2, 0.8, &y).unwrap() - 0.338).abs() < 1e-12);
        assert!((hef_score(&[9.0, -1.0], 0.9, 0.5, 0.8, &y).unwrap() - 0.342).abs() < 1e-12);
    }

    #[test]
    fn stacked_level4() {
        let hef = Hef {
            stack_level4: true,
            ..Hef::default()
        };
        // base 0.26, level 2 -> 0.338, stacked -> 0.6084
        let s = hef.score(&[-1.0], 0.9, 1.2, 0.8, &calm_train()).unwrap();
        assert!((s - 0.26 * 1.3 * 1.8).abs() < 1e-12);
    }

    #[test]
    fn zero_mean_guard() {
        let b = Hef::default()
            .breakdown(&[0.0], 0.5, 0.1, 0.1, &[-1.0, 1.0])
            .unwrap();
        assert_eq!(b.mean, MEAN_GUARD);
    }

    #[test]
    fn non_finite_inputs_error() {
        let y = calm_train();
        assert_eq!(
            hef_score(&[f64::NAN], 0.9, 0.5, 0.8, &y),
            Err(EvalError::NonFiniteInput)
        );
        assert_eq!(
            hef_score(&[1.0], f64::INFINITY, 0.5, 0.8, &y),
            Err(EvalError::NonFiniteInput)
        );
        assert_eq!(hef_score(&[1.0], 0.9, 0.5, 0.8, &[1.0]), Err(EvalError::SeriesTooShort(1)));
    }

    #[test]
    fn maef_is_identity() {
        assert_eq!(maef_score(0.0), 0.0);
        assert_eq!(maef_score(2.75), 2.75);
        assert!(maef_score(1.0) < maef_score(1.5));
        assert_eq!(Maef.score(&[], 0.0, 2.5, 9.0, &[]).unwrap(), 2.5);
    }

    #[test]
    fn perfect_fit_scores_zero() {
        for y in [vec![1.0, 2.0, 3.0], vec![100.0, 0.5], calm_train()] {
            assert_eq!(hef_score(&[1.0, 2.0], 1.0, 0.0, 0.0, &y).unwrap(), 0.0);
        }
    }

    proptest! {
        #[test]
        fn monotone_within_branch(r2 in -2.0f64..1.0, mae in 0.01f64..5.0, rmse in 0.01f64..5.0, d in 1e-6f64..1e-3) {
            let y = calm_train();
            let hef = Hef::default();
            let at = |r2: f64, mae: f64, rmse: f64| hef.breakdown(&[1.0], r2, mae, rmse, &y).unwrap();
            let b = at(r2, mae, rmse);
            let up_r2 = at(r2 + d, mae, rmse);
            prop_assert!(up_r2.score < b.score);
            let up_mae = at(r2, mae + d, rmse);
            if up_mae.level == b.level {
                prop_assert!(up_mae.score > b.score);
            }
            let up_rmse = at(r2, mae, rmse + d);
            if up_rmse.level == b.level {
                prop_assert!(up_rmse.score > b.score);
            }
        }

        #[test]
        fn penalty_ordering(base in 0.0f64..100.0) {
            let p = PenaltyMultipliers::default();
            let s: Vec<f64> = [1.0, p.l1, p.l2, p.l3, p.l4].iter().map(|m| base * m).collect();
            prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
