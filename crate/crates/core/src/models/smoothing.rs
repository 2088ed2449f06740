use super::{
    check_params, param_f64, Domain, FittedModel, ForecastModel, HyperparameterPoint,
    HyperparameterSpace, ModelError, SearchKind,
};

/// Simple exponential smoothing. The level starts at the first observation
/// and the forecast is flat at the final level.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ses;

pub const SES_ALPHA: f64 = 0.2;

struct SesFit {
    level: f64,
}

impl FittedModel for SesFit {
    fn predict(&self, h: usize) -> Result<Vec<f64>, ModelError> {
        Ok(vec![self.level; h])
    }
}

/// Final smoothed level of `values` for smoothing constant `alpha`.
pub fn ses_level(values: &[f64], alpha: f64) -> f64 {
    let mut level = values[0];
    for &y in &values[1..] {
        level = alpha * y + (1.0 - alpha) * level;
    }
    level
}

impl ForecastModel for Ses {
    fn name(&self) -> &'static str {
        "ses"
    }

    fn search_kind(&self) -> SearchKind {
        SearchKind::Continuous
    }

    fn fixed_point(&self) -> HyperparameterPoint {
        HyperparameterPoint::new().with("alpha", SES_ALPHA)
    }

    fn space(&self) -> HyperparameterSpace {
        HyperparameterSpace::new().with("alpha", Domain::real(0.01, 0.99))
    }

    fn fit(
        &self,
        train: &[f64],
        _seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError> {
        check_params(point, &["alpha"])?;
        if train.len() < 3 {
            return Err(ModelError::InsufficientData {
                needed: 3,
                got: train.len(),
            });
        }
        let alpha = param_f64(point, "alpha", SES_ALPHA)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ModelError::InvalidParameter {
                name: "alpha".into(),
                reason: format!("must lie in [0, 1], got {alpha}"),
            });
        }
        Ok(Box::new(SesFit {
            level: ses_level(train, alpha),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_a_fixed_point() {
        for alpha in [0.01, 0.2, 0.99] {
            let p = HyperparameterPoint::new().with("alpha", alpha);
            let f = Ses.fit(&[7.5; 12], 12, &p).unwrap();
            assert_eq!(f.predict(5).unwrap(), vec![7.5; 5]);
        }
    }

    #[test]
    fn recursion_by_hand() {
        // level: 1 -> 0.5*3+0.5*1=2 -> 0.5*2+0.5*2=2 -> 0.5*6+0.5*2=4
        assert_eq!(ses_level(&[1.0, 3.0, 2.0, 6.0], 0.5), 4.0);
    }

    #[test]
    fn shift_equivariance() {
        let train = [3.0, 8.0, 1.0, 4.0, 9.0, 2.0];
        let shifted: Vec<f64> = train.iter().map(|v| v + 64.0).collect();
        let p = Ses.fixed_point();
        let a = Ses.fit(&train, 12, &p).unwrap().predict(3).unwrap();
        let b = Ses.fit(&shifted, 12, &p).unwrap().predict(3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 64.0).abs() < 1e-12);
        }
    }
}
