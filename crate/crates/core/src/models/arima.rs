//! ARIMA(p, d, q) estimated by conditional sum of squares.

use super::{
    check_params, param_usize, Domain, FittedModel, ForecastModel, HyperparameterPoint,
    HyperparameterSpace, ModelError, SearchKind,
};

#[derive(Debug, Clone, Copy, Default)]
pub struct Arima;

const MAX_COEF: f64 = 5.0;
const PENALTY: f64 = 1e300;

/// Estimated ARIMA model. `intercept`, `ar` and `ma` describe the
/// differenced series in its original units.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaFit {
    pub d: usize,
    pub intercept: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub css: f64,
    // standardized differenced series and its residuals
    scaled: Vec<f64>,
    residuals: Vec<f64>,
    center: f64,
    spread: f64,
    scaled_intercept: f64,
    // last value of each differencing level, level 0 first
    anchors: Vec<f64>,
}

fn difference(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Residuals of the CSS recursion; the first `p` are fixed at zero.
fn css_residuals(w: &[f64], c: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let p = ar.len();
    let mut e = vec![0.0; w.len()];
    for t in p..w.len() {
        let mut fit = c;
        for (i, phi) in ar.iter().enumerate() {
            fit += phi * w[t - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                fit += theta * e[t - 1 - j];
            }
        }
        e[t] = w[t] - fit;
    }
    e
}

fn css(w: &[f64], params: &[f64], p: usize) -> f64 {
    if params.iter().skip(1).any(|v| v.abs() > MAX_COEF) {
        return PENALTY;
    }
    if !invertible(&params[1 + p..]) {
        return PENALTY;
    }
    let e = css_residuals(w, params[0], &params[1..1 + p], &params[1 + p..]);
    let sse: f64 = e.iter().map(|v| v * v).sum();
    if sse.is_finite() {
        sse
    } else {
        PENALTY
    }
}

/// True when every root of `1 + θ₁B + … + θ_qB^q` lies outside the unit
/// circle, checked by the step-down recursion on reflection coefficients.
fn invertible(theta: &[f64]) -> bool {
    let mut a = theta.to_vec();
    while let Some(&k) = a.last() {
        if k.abs() >= 1.0 {
            return false;
        }
        let m = a.len();
        let denom = 1.0 - k * k;
        a = (0..m - 1).map(|i| (a[i] - k * a[m - 2 - i]) / denom).collect();
    }
    true
}

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
}

/// Nelder–Mead simplex minimization.
pub(crate) fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    steps: &[f64],
    max_evals: usize,
) -> Minimum {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut evals = n + 1;
    let mut converged = false;

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let f_spread = values[n] - values[0];
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_spread <= 1e-12 * (1.0 + values[0].abs()) || x_spread <= 1e-9 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let towards = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (w - c))
                .collect()
        };

        let reflected = towards(-1.0);
        let f_r = f(&reflected);
        evals += 1;
        if f_r < values[0] {
            let expanded = towards(-2.0);
            let f_e = f(&expanded);
            evals += 1;
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
        } else if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
        } else {
            let (candidate, f_c) = if f_r < values[n] {
                let c = towards(-0.5);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = towards(0.5);
                let fc = f(&c);
                (c, fc)
            };
            evals += 1;
            if f_c < values[n].min(f_r) {
                simplex[n] = candidate;
                values[n] = f_c;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = best[j] + 0.5 * (simplex[i][j] - best[j]);
                    }
                    values[i] = f(&simplex[i]);
                }
                evals += n;
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    Minimum {
        x: simplex[best].clone(),
        f: values[best],
        converged,
    }
}

impl ArimaFit {
    pub fn estimate(train: &[f64], p: usize, d: usize, q: usize) -> Result<Self, ModelError> {
        let needed = (d + p + 2).max(3);
        if train.len() < needed {
            return Err(ModelError::InsufficientData {
                needed,
                got: train.len(),
            });
        }
        let mut anchors = Vec::with_capacity(d);
        let mut w = train.to_vec();
        for _ in 0..d {
            anchors.push(*w.last().unwrap());
            w = difference(&w);
        }

        let m = w.len() as f64;
        let center = w.iter().sum::<f64>() / m;
        let var = w.iter().map(|v| (v - center).powi(2)).sum::<f64>() / m;
        let spread = var.sqrt();
        let degenerate = spread <= 1e-12 * center.abs().max(1.0);
        let spread = if degenerate { 1.0 } else { spread };
        let scaled: Vec<f64> = w.iter().map(|v| (v - center) / spread).collect();

        let (params, sse) = if degenerate {
            (vec![0.0; 1 + p + q], 0.0)
        } else {
            let start = vec![0.0; 1 + p + q];
            let steps = vec![0.1; 1 + p + q];
            let objective = |x: &[f64]| css(&scaled, x, p);
            let budget = 4000 * (1 + p + q);
            let mut best = nelder_mead(objective, &start, &steps, budget);
            // restart from the optimum: once to escape a collapsed simplex,
            // and up to three times while the search has not settled
            let mut restarts = 0;
            while p + q > 0 && restarts < 4 {
                let again = nelder_mead(objective, &best.x, &steps, budget);
                restarts += 1;
                // a restart that cannot improve the optimum means the search
                // sits on a flat ridge (typically the invertibility boundary)
                let stalled = again.f >= best.f - 1e-10 * (1.0 + best.f.abs());
                let settled = (best.converged && again.converged) || stalled;
                if stalled {
                    best.converged = true;
                }
                if again.f <= best.f {
                    best = again;
                }
                if settled {
                    break;
                }
            }
            if !best.converged || best.f >= PENALTY {
                return Err(ModelError::NonConvergence("arima"));
            }
            (best.x, best.f)
        };

        let scaled_intercept = params[0];
        let ar = params[1..1 + p].to_vec();
        let ma = params[1 + p..].to_vec();
        let residuals = css_residuals(&scaled, scaled_intercept, &ar, &ma);
        let intercept = center * (1.0 - ar.iter().sum::<f64>()) + spread * scaled_intercept;
        Ok(Self {
            d,
            intercept,
            ar,
            ma,
            css: sse * spread * spread,
            scaled,
            residuals,
            center,
            spread,
            scaled_intercept,
            anchors,
        })
    }

    pub fn forecast(&self, h: usize) -> Result<Vec<f64>, ModelError> {
        let mut w = self.scaled.clone();
        let mut e = self.residuals.clone();
        for _ in 0..h {
            let t = w.len();
            let mut next = self.scaled_intercept;
            for (i, phi) in self.ar.iter().enumerate() {
                if t > i {
                    next += phi * w[t - 1 - i];
                }
            }
            for (j, theta) in self.ma.iter().enumerate() {
                if t > j {
                    next += theta * e[t - 1 - j];
                }
            }
            w.push(next);
            e.push(0.0);
        }
        let mut out: Vec<f64> = w[self.scaled.len()..]
            .iter()
            .map(|v| self.center + self.spread * v)
            .collect();
        for anchor in self.anchors.iter().rev() {
            let mut level = *anchor;
            for v in out.iter_mut() {
                level += *v;
                *v = level;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteForecast);
        }
        Ok(out)
    }
}

impl FittedModel for ArimaFit {
    fn predict(&self, h: usize) -> Result<Vec<f64>, ModelError> {
        self.forecast(h)
    }
}

impl ForecastModel for Arima {
    fn name(&self) -> &'static str {
        "arima"
    }

    fn search_kind(&self) -> SearchKind {
        SearchKind::Exhaustive
    }

    fn fixed_point(&self) -> HyperparameterPoint {
        HyperparameterPoint::new()
            .with("p", 1i64)
            .with("d", 1i64)
            .with("q", 1i64)
    }

    fn space(&self) -> HyperparameterSpace {
        HyperparameterSpace::new()
            .with("p", Domain::int_grid(0..=3))
            .with("d", Domain::int_grid(0..=2))
            .with("q", Domain::int_grid(0..=3))
    }

    fn fit(
        &self,
        train: &[f64],
        _seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError> {
        check_params(point, &["p", "d", "q"])?;
        let p = param_usize(point, "p", 1)?;
        let d = param_usize(point, "d", 1)?;
        let q = param_usize(point, "q", 1)?;
        Ok(Box::new(ArimaFit::estimate(train, p, d, q)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ar1(phi: f64, c: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut y = vec![c / (1.0 - phi)];
        for _ in 1..n {
            let prev = *y.last().unwrap();
            y.push(c + phi * prev + noise.sample(&mut rng));
        }
        y
    }

    /// CSS for AR(1) over a fine φ grid with the intercept profiled out.
    fn brute_force_ar1(y: &[f64]) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for k in -990..=990 {
            let phi = k as f64 / 1000.0;
            let resid: Vec<f64> = y.windows(2).map(|w| w[1] - phi * w[0]).collect();
            let c = resid.iter().sum::<f64>() / resid.len() as f64;
            let sse: f64 = resid.iter().map(|r| (r - c) * (r - c)).sum();
            if sse < best.0 {
                best = (sse, phi, c);
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn ar1_matches_brute_force_css() {
        for (seed, phi) in [(1, 0.6), (2, -0.4), (3, 0.9)] {
            let y = ar1(phi, 2.0, 200, seed);
            let fit = ArimaFit::estimate(&y, 1, 0, 0).unwrap();
            let (phi_bf, c_bf) = brute_force_ar1(&y);
            assert!((fit.ar[0] - phi_bf).abs() < 1.5e-3, "{} vs {}", fit.ar[0], phi_bf);
            assert!((fit.intercept - c_bf).abs() < 0.02 * c_bf.abs().max(1.0));
        }
    }

    #[test]
    fn forecast_on_random_walk_with_drift() {
        // d=1, p=q=0: forecast is last value plus the mean step
        let y: Vec<f64> = (0..30).map(|t| 5.0 + 2.0 * t as f64).collect();
        let f = ArimaFit::estimate(&y, 0, 1, 0).unwrap().forecast(3).unwrap();
        for (k, v) in f.iter().enumerate() {
            assert!((v - (63.0 + 2.0 * (k + 1) as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_equivariance_with_differencing() {
        let y = ar1(0.5, 1.0, 80, 9)
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some((*acc * 8.0).round() / 8.0)
            })
            .collect::<Vec<f64>>();
        let shifted: Vec<f64> = y.iter().map(|v| v + 1024.0).collect();
        let p = Arima.fixed_point();
        let a = Arima.fit(&y, 12, &p).unwrap().predict(5).unwrap();
        let b = Arima.fit(&shifted, 12, &p).unwrap().predict(5).unwrap();
        for (x, z) in a.iter().zip(&b) {
            assert!((z - x - 1024.0).abs() < 1e-6, "{x} {z}");
        }
    }

    #[test]
    fn full_grid_fits() {
        let y: Vec<f64> = ar1(0.3, 10.0, 60, 4)
            .iter()
            .enumerate()
            .map(|(t, v)| v + 0.1 * t as f64)
            .collect();
        for point in Arima.space().grid_points() {
            let f = Arima.fit(&y, 12, &point);
            assert!(f.is_ok(), "{point}: {:?}", f.err());
            assert!(f.unwrap().predict(6).unwrap().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn invertibility_region() {
        assert!(invertible(&[]));
        assert!(invertible(&[0.9]));
        assert!(!invertible(&[-1.3]));
        // (1 - 0.5B)(1 - 0.8B) = 1 - 1.3B + 0.4B²
        assert!(invertible(&[-1.3, 0.4]));
        // (1 - 2B)(1 - 0.5B) = 1 - 2.5B + B²
        assert!(!invertible(&[-2.5, 1.0]));
        // (1 - 1.25B)(1 + 0.5B) = 1 - 0.75B - 0.625B²
        assert!(!invertible(&[-0.75, -0.625]));
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(rosen, &[-1.2, 1.0], &[0.1, 0.1], 10_000);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3);
    }
}
