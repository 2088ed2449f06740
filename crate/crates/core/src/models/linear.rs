//! Linear models on lag windows: OLS, lasso, ridge, elastic net, Huber and
//! polynomial regression.

use nalgebra::{DMatrix, DVector};

use super::{
    check_params, column_stats, lag_design, param_f64, param_usize, recursive_forecast,
    resolve_lags, Domain, FittedModel, ForecastModel, HyperparameterPoint, HyperparameterSpace,
    ModelError, SearchKind,
};

pub const PENALTY_ALPHA: f64 = 0.01;
pub const ENET_L1_RATIO: f64 = 0.1;
pub const HUBER_EPSILON: f64 = 1.0;
pub const HUBER_ALPHA: f64 = 1e-4;
pub const POLY_DEGREE: usize = 2;
/// Lag windows wider than this are truncated for polynomial expansion.
pub const POLY_MAX_LAGS: usize = 12;

const CD_MAX_SWEEPS: usize = 10_000;
const CD_TOL: f64 = 1e-10;

/// Affine model on (optionally standardized) lag windows.
struct LinearFit {
    lags: usize,
    history: Vec<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    coef: Vec<f64>,
    intercept: f64,
}

impl LinearFit {
    fn predict_one(&self, window: &[f64]) -> f64 {
        self.intercept
            + window
                .iter()
                .zip(&self.coef)
                .zip(self.mean.iter().zip(&self.sd))
                .map(|((x, c), (m, s))| c * (x - m) / s)
                .sum::<f64>()
    }
}

impl FittedModel for LinearFit {
    fn predict(&self, h: usize) -> Result<Vec<f64>, ModelError> {
        recursive_forecast(&self.history, self.lags, h, |w| self.predict_one(w))
    }
}

fn standardize(rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (mean, sd) = column_stats(rows);
    let z = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(mean.iter().zip(&sd))
                .map(|(x, (m, s))| (x - m) / s)
                .collect()
        })
        .collect();
    (z, mean, sd)
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn check_alpha(name: &str, value: f64) -> Result<f64, ModelError> {
    if value < 0.0 {
        return Err(ModelError::InvalidParameter {
            name: name.into(),
            reason: format!("must be non-negative, got {value}"),
        });
    }
    Ok(value)
}

/// Solves `(A + ridge·I) x = b` by Cholesky, adding jitter once if needed.
fn solve_spd(mut a: DMatrix<f64>, b: DVector<f64>, ridge: f64) -> Result<DVector<f64>, ModelError> {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)] += ridge;
    }
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(&b));
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    for i in 0..n {
        a[(i, i)] += 1e-10 * scale;
    }
    a.cholesky()
        .map(|ch| ch.solve(&b))
        .ok_or(ModelError::SingularDesign)
}

/// Elastic-net coordinate descent on centred data, minimizing
/// `1/(2n)·‖y − Xw‖² + α·ρ·‖w‖₁ + α·(1−ρ)/2·‖w‖²`.
pub fn coordinate_descent(x: &[Vec<f64>], y: &[f64], alpha: f64, l1_ratio: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let p = x[0].len();
    let l1 = alpha * l1_ratio;
    let l2 = alpha * (1.0 - l1_ratio);
    let norms: Vec<f64> = (0..p)
        .map(|j| x.iter().map(|r| r[j] * r[j]).sum::<f64>() / n)
        .collect();
    let mut w = vec![0.0; p];
    let mut resid = y.to_vec();
    for _ in 0..CD_MAX_SWEEPS {
        let mut max_step: f64 = 0.0;
        let mut max_w: f64 = 0.0;
        for j in 0..p {
            if norms[j] == 0.0 {
                continue;
            }
            let rho = x.iter().zip(&resid).map(|(r, e)| r[j] * e).sum::<f64>() / n + norms[j] * w[j];
            let updated = soft_threshold(rho, l1) / (norms[j] + l2);
            let delta = updated - w[j];
            if delta != 0.0 {
                for (e, r) in resid.iter_mut().zip(x) {
                    *e -= delta * r[j];
                }
                w[j] = updated;
            }
            max_step = max_step.max(delta.abs());
            max_w = max_w.max(updated.abs());
        }
        if max_step <= CD_TOL * max_w.max(1.0) {
            break;
        }
    }
    w
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn penalized_fit(
    train: &[f64],
    lags: usize,
    alpha: f64,
    l1_ratio: f64,
) -> Result<LinearFit, ModelError> {
    let (rows, targets) = lag_design(train, lags);
    let (z, mean, sd) = standardize(&rows);
    let y_mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let yc: Vec<f64> = targets.iter().map(|v| v - y_mean).collect();
    let coef = coordinate_descent(&z, &yc, alpha, l1_ratio);
    Ok(LinearFit {
        lags,
        history: train.to_vec(),
        mean,
        sd,
        coef,
        intercept: y_mean,
    })
}

// ---------------------------------------------------------------------------

/// Ordinary least squares with intercept; minimum-norm solution when the
/// design is rank deficient.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearRegression;

impl ForecastModel for LinearRegression {
    fn name(&self) -> &'static str {
        "lr"
    }

    fn search_kind(&self) -> SearchKind {
        SearchKind::Exhaustive
    }

    fn fixed_point(&self) -> HyperparameterPoint {
        HyperparameterPoint::new()
    }

    fn space(&self) -> HyperparameterSpace {
        HyperparameterSpace::new().with("lags", Domain::int_grid([2, 3, 4, 6, 8, 12]))
    }

    fn fit(
        &self,
        train: &[f64],
        seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError> {
        check_params(point, &["lags"])?;
        let lags = resolve_lags(train, seasonal_period, point)?;
        let (rows, targets) = lag_design(train, lags);
        let design = DMatrix::from_fn(rows.len(), lags + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                rows[i][j - 1]
            }
        });
        let svd = design.svd(true, true);
        let top = svd.singular_values.max();
        if top == 0.0 {
            return Err(ModelError::SingularDesign);
        }
        let beta = svd
            .solve(&DVector::from_vec(targets), 1e-10 * top)
            .map_err(|_| ModelError::SingularDesign)?;
        Ok(Box::new(LinearFit {
            lags,
            history: train.to_vec(),
            mean: vec![0.0; lags],
            sd: vec![1.0; lags],
            coef: beta.iter().skip(1).copied().collect(),
            intercept: beta[0],
        }))
    }
}

/// L1-penalized regression on standardized lags.
#[derive(Debug, Clone, Copy, Default)]
pub struct LassoRegression;

impl ForecastModel for LassoRegression {
    fn name(&self) -> &'static str {
        "lsr"
    }

    fn search_kind(&self) -> SearchKind {
        SearchKind::Continuous
    }

    fn fixed_point(&self) -> HyperparameterPoint {
        HyperparameterPoint::new().with("alpha", PENALTY_ALPHA)
    }

    fn space(&self) -> HyperparameterSpace {
        HyperparameterSpace::new().with("alpha", Domain::log(1e-4, 10.0))
    }

    fn fit(
        &self,
        train: &[f64],
        seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError> {
        check_params(point, &["alpha", "lags"])?;
        let lags = resolve_lags(train, seasonal_period, point)?;
        let alpha = check_alpha("alpha", param_f64(point, "alpha", PENALTY_ALPHA)?)?;
        Ok(Box::new(penalized_fit(train, lags, alpha, 1.0)?))
    }
}

/// L1/L2 mixture on standardized lags.
#[derive(Debug, Clone, Copy, Default)]
pub struct ElasticNetRegression;

impl ForecastModel for ElasticNetRegression {
    fn name(&self) -> &'static str {
        "enr"
    }

    fn search_kind(&self) -> SearchKind {
        SearchKind::Continuous
    }

    fn fixed_point(&self) -> HyperparameterPoint {
        HyperparameterPoint::new()
            .with("alpha", PENALTY_ALPHA)
            .with("l1_ratio", ENET_L1_RATIO)
    }

    fn space(&self) -> HyperparameterSpace {
        HyperparameterSpace::new()
            .with("alpha", Domain::log(1e-4, 10.0))
            .with("l1_ratio", Domain::real(0.0, 1.0))
    }

    fn fit(
        &self,
        train: &[f64],
        seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError> {
        check_params(point, &["alpha", "l1_ratio", "lags"])?;
        let lags = resolve_lags(train, seasonal_period, point)?;
        let alpha = check_alpha("alpha", param_f64(point, "alpha", PENALTY_ALPHA)?)?;
        let ratio = param_f64(point, "l1_ratio", ENET_L1_RATIO)?;
        if !(0.0..=1.0).contains(&ratio) {
            return Err(ModelError::InvalidParameter {
                name: "l1_ratio".into(),
                reason: format!("must lie in [0, 1], got {ratio}"),
            });
        }
        Ok(Box::new(penalized_fit(train, lags, alpha, ratio)?))
    }
}

/// L2-penalized regression (`‖y − Xw‖² + α‖w‖²`) on standardized lags,
/// solved in closed form.
#[derive(Debug, Clone, Copy, Default)]
pub struct RidgeRegression;

impl ForecastModel for RidgeRegression {
    fn name(&self) -> &'static str {
        "rr"
    }

    fn search_kind(&self) -> SearchKind {
        SearchKind::Continuous
    }

    fn fixed_point(&self) -> HyperparameterPoint {
        HyperparameterPoint::new().with("alpha", PENALTY_ALPHA)
    }

    fn space(&self) -> HyperparameterSpace {
        HyperparameterSpace::new().with("alpha", Domain::log(1e-4, 10.0))
    }

    fn fit(
        &self,
        train: &[f64],
        seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError> {
        check_params(point, &["alpha", "lags"])?;
        let lags = resolve_lags(train, seasonal_period, point)?;
        let alpha = check_alpha("alpha", param_f64(point, "alpha", PENALTY_ALPHA)?)?;
        let (rows, targets) = lag_design(train, lags);
        let (z, mean, sd) = standardize(&rows);
        let y_mean = targets.iter().sum::<f64>() / targets.len() as f64;
        let x = to_matrix(&z);
        let y = DVector::from_iterator(targets.len(), targets.iter().map(|v| v - y_mean));
        let coef = solve_spd(x.transpose() * &x, x.transpose() * y, alpha)?;
        Ok(Box::new(LinearFit {
            lags,
            history: train.to_vec(),
            mean,
            sd,
            coef: coef.iter().copied().collect(),
            intercept: y_mean,
        }))
    }
}

// ---------------------------------------------------------------------------

/// Huber-loss regression by iteratively reweighted least squares, with the
/// residual scale re-estimated from the MAD at every step.
#[derive(Debug, Clone, Copy, Default)]
pub struct HuberRegression;

const IRLS_MAX_ITER: usize = 200;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub(crate) fn huber_irls(
    z: &[Vec<f64>],
    y: &[f64],
    epsilon: f64,
    alpha: f64,
) -> Result<Vec<f64>, ModelError> {
    let n = z.len();
    let p = z[0].len() + 1;
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { z[i][j - 1] });
    let target = DVector::from_column_slice(y);
    let weighted_solve = |weights: &[f64]| -> Result<DVector<f64>, ModelError> {
        let mut xtwx = DMatrix::zeros(p, p);
        let mut xtwy = DVector::zeros(p);
        for i in 0..n {
            let row = design.row(i);
            let w = weights[i];
            for a in 0..p {
                xtwy[a] += w * row[a] * target[i];
                for b in 0..p {
                    xtwx[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        for a in 1..p {
            xtwx[(a, a)] += alpha;
        }
        solve_spd(xtwx, xtwy, 0.0)
    };

    let mut beta = weighted_solve(&vec![1.0; n])?;
    for _ in 0..IRLS_MAX_ITER {
        let resid: Vec<f64> = (0..n)
            .map(|i| target[i] - design.row(i).dot(&beta.transpose()))
            .collect();
        let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
        // a zero MAD means most rows are fitted exactly; keep a floor so the
        // remaining rows are still downweighted
        let scale = (median(&mut abs) / 0.6745).max(1e-9 * target.amax().max(1.0));
        let cut = epsilon * scale;
        let weights: Vec<f64> = resid
            .iter()
            .map(|r| if r.abs() <= cut { 1.0 } else { cut / r.abs() })
            .collect();
        let next = weighted_solve(&weights)?;
        let step = (&next - &beta).amax();
        beta = next;
        if step <= 1e-9 * beta.amax().max(1.0) {
            return Ok(beta.iter().copied().collect());
        }
    }
    Err(ModelError::NonConvergence("huber regression"))
}

impl ForecastModel for HuberRegression {
    fn name(&self) -> &'static str {
        "hr"
    }

    fn search_kind(&self) -> SearchKind {
        SearchKind::Continuous
    }

    fn fixed_point(&self) -> HyperparameterPoint {
        HyperparameterPoint::new()
            .with("epsilon", HUBER_EPSILON)
            .with("alpha", HUBER_ALPHA)
    }

    fn space(&self) -> HyperparameterSpace {
        HyperparameterSpace::new()
            .with("epsilon", Domain::real(1.0, 2.0))
            .with("alpha", Domain::log(1e-4, 1.0))
    }

    fn fit(
        &self,
        train: &[f64],
        seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError> {
        check_params(point, &["epsilon", "alpha", "lags"])?;
        let lags = resolve_lags(train, seasonal_period, point)?;
        let epsilon = param_f64(point, "epsilon", HUBER_EPSILON)?;
        if epsilon <= 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "epsilon".into(),
                reason: format!("must be positive, got {epsilon}"),
            });
        }
        let alpha = check_alpha("alpha", param_f64(point, "alpha", HUBER_ALPHA)?)?;
        let (rows, targets) = lag_design(train, lags);
        let (z, mean, sd) = standardize(&rows);
        let beta = huber_irls(&z, &targets, epsilon, alpha)?;
        Ok(Box::new(LinearFit {
            lags,
            history: train.to_vec(),
            mean,
            sd,
            coef: beta[1..].to_vec(),
            intercept: beta[0],
        }))
    }
}

// ---------------------------------------------------------------------------

/// Exponents of every monomial of total degree ≤ `degree` in `vars`
/// variables, constant term first.
pub(crate) fn monomials(vars: usize, degree: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, vars: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            return;
        }
        for v in start..vars {
            cur.push(v);
            out.push(cur.clone());
            extend(v, vars, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = vec![Vec::new()];
    extend(0, vars, degree, &mut Vec::new(), &mut out);
    out.sort_by_key(Vec::len);
    out
}

fn expand(x: &[f64], terms: &[Vec<usize>]) -> Vec<f64> {
    terms
        .iter()
        .map(|t| t.iter().map(|&v| x[v]).product())
        .collect()
}

/// Polynomial regression: all monomials of the standardized lags up to the
/// given degree, fitted by lightly ridge-stabilized least squares.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolynomialRegression;

struct PolyFit {
    lags: usize,
    history: Vec<f64>,
    center: f64,
    scale: f64,
    terms: Vec<Vec<usize>>,
    coef: Vec<f64>,
}

impl FittedModel for PolyFit {
    fn predict(&self, h: usize) -> Result<Vec<f64>, ModelError> {
        recursive_forecast(&self.history, self.lags, h, |w| {
            let z: Vec<f64> = w.iter().map(|v| (v - self.center) / self.scale).collect();
            let phi = expand(&z, &self.terms);
            self.center + self.scale * phi.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()
        })
    }
}

impl ForecastModel for PolynomialRegression {
    fn name(&self) -> &'static str {
        "plr"
    }

    fn search_kind(&self) -> SearchKind {
        SearchKind::Exhaustive
    }

    fn fixed_point(&self) -> HyperparameterPoint {
        HyperparameterPoint::new().with("degree", POLY_DEGREE as i64)
    }

    fn space(&self) -> HyperparameterSpace {
        HyperparameterSpace::new().with("degree", Domain::int_grid(1..=4))
    }

    fn fit(
        &self,
        train: &[f64],
        seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError> {
        check_params(point, &["degree", "lags"])?;
        let degree = param_usize(point, "degree", POLY_DEGREE)?;
        if degree == 0 {
            return Err(ModelError::InvalidParameter {
                name: "degree".into(),
                reason: "must be at least 1".into(),
            });
        }
        let mut lags = resolve_lags(train, seasonal_period, point)?;
        if point.get("lags").is_none() {
            lags = lags.min(POLY_MAX_LAGS);
        }
        let n = train.len() as f64;
        let center = train.iter().sum::<f64>() / n;
        let spread = (train.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n).sqrt();
        let scale = if spread > 1e-12 * center.abs().max(1.0) { spread } else { 1.0 };
        let z: Vec<f64> = train.iter().map(|v| (v - center) / scale).collect();
        let (rows, targets) = lag_design(&z, lags);
        let terms = monomials(lags, degree);
        let phi: Vec<Vec<f64>> = rows.iter().map(|r| expand(r, &terms)).collect();
        let m = to_matrix(&phi);
        let y = DVector::from_vec(targets);
        let d = terms.len();
        let coef = if d <= phi.len() {
            let gram = m.transpose() * &m;
            let ridge = 1e-8 * (gram.trace() / d as f64).max(1e-12);
            solve_spd(gram, m.transpose() * y, ridge)?
        } else {
            // dual form: w = Φᵀ (ΦΦᵀ + λI)⁻¹ y
            let gram = &m * m.transpose();
            let ridge = 1e-8 * (gram.trace() / phi.len() as f64).max(1e-12);
            let dual = solve_spd(gram, y, ridge)?;
            m.transpose() * dual
        };
        Ok(Box::new(PolyFit {
            lags,
            history: train.to_vec(),
            center,
            scale,
            terms,
            coef: coef.iter().copied().collect(),
        }))
    }
}
