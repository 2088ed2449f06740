use super::{
    check_params, lag_design, param_usize, recursive_forecast, resolve_lags, Domain, FittedModel,
    ForecastModel, HyperparameterPoint, HyperparameterSpace, ModelError, SearchKind,
};

/// k-nearest-neighbour regression over lag windows (Euclidean distance,
/// unweighted mean of neighbour targets).
#[derive(Debug, Clone, Copy, Default)]
pub struct Knn;

pub const KNN_NEIGHBORS: usize = 5;

struct KnnFit {
    windows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    k: usize,
    lags: usize,
    history: Vec<f64>,
}

impl KnnFit {
    fn predict_one(&self, query: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .windows
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let d: f64 = w.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        // ties resolved by window position
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist[..self.k].iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / self.k as f64
    }
}

impl FittedModel for KnnFit {
    fn predict(&self, h: usize) -> Result<Vec<f64>, ModelError> {
        recursive_forecast(&self.history, self.lags, h, |w| self.predict_one(w))
    }
}

impl ForecastModel for Knn {
    fn name(&self) -> &'static str {
        "knn"
    }

    fn search_kind(&self) -> SearchKind {
        SearchKind::Exhaustive
    }

    fn fixed_point(&self) -> HyperparameterPoint {
        HyperparameterPoint::new().with("n_neighbors", KNN_NEIGHBORS as i64)
    }

    fn space(&self) -> HyperparameterSpace {
        HyperparameterSpace::new().with("n_neighbors", Domain::int_grid(1..=15))
    }

    /// `k` above the number of available windows is clipped to that number.
    fn fit(
        &self,
        train: &[f64],
        seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError> {
        check_params(point, &["n_neighbors", "lags"])?;
        let lags = resolve_lags(train, seasonal_period, point)?;
        let k = param_usize(point, "n_neighbors", KNN_NEIGHBORS)?;
        if k == 0 {
            return Err(ModelError::InvalidParameter {
                name: "n_neighbors".into(),
                reason: "must be at least 1".into(),
            });
        }
        let (windows, targets) = lag_design(train, lags);
        Ok(Box::new(KnnFit {
            k: k.min(windows.len()),
            windows,
            targets,
            lags,
            history: train.to_vec(),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_neighbours_gives_mean_target() {
        let train = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0];
        let lags = 3;
        let (_, targets) = lag_design(&train, lags);
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        let p = HyperparameterPoint::new()
            .with("n_neighbors", targets.len() as i64)
            .with("lags", lags as i64);
        let f = Knn.fit(&train, 12, &p).unwrap().predict(3).unwrap();
        for v in f {
            assert!((v - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn one_neighbour_by_brute_force() {
        let train = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 2.0, 3.1];
        let p = HyperparameterPoint::new()
            .with("n_neighbors", 1i64)
            .with("lags", 2i64);
        // last window [2, 3.1] is nearest to [2, 3] whose successor is 10
        let f = Knn.fit(&train, 12, &p).unwrap().predict(1).unwrap();
        assert_eq!(f, vec![10.0]);
    }
}
