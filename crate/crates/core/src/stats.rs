//! Normality screening, two-sample location tests and the pooled
//! two-proportion Z-test, with p-values carried in log space so that
//! extreme statistics do not underflow.

use std::f64::consts::{LN_10, PI, SQRT_2};
use std::fmt;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::erf::erfc;
use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample of size {0} is too small (need at least 3)")]
    SampleTooSmall(usize),
    #[error("sample of size {0} is too large (at most 5000)")]
    SampleTooLarge(usize),
    #[error("sample has zero variance")]
    DegenerateSample,
    #[error("samples have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid counts: {0}")]
    InvalidCounts(String),
    #[error("pooled proportion is 0 or 1; the test is undefined")]
    DegeneratePooled,
    #[error("sample contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestName {
    ShapiroWilk,
    WelchT,
    MannWhitneyU,
    TwoPropZ,
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestName::ShapiroWilk => "shapiro_wilk",
            TestName::WelchT => "welch_t",
            TestName::MannWhitneyU => "mann_whitney_u",
            TestName::TwoPropZ => "two_prop_z",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Base-10 log of the p-value, finite even where `p_value` underflows.
    pub log10_p: f64,
    pub test_name: TestName,
    pub significant: bool,
}

impl TestResult {
    fn new(test_name: TestName, statistic: f64, p_value: f64, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            statistic,
            p_value,
            log10_p: p_value.log10(),
            test_name,
            significant: p_value < alpha,
        }
    }

    fn from_log10(test_name: TestName, statistic: f64, log10_p: f64, alpha: f64) -> Self {
        let log10_p = log10_p.min(0.0);
        let p_value = 10f64.powf(log10_p);
        Self {
            statistic,
            p_value,
            log10_p,
            test_name,
            significant: log10_p < alpha.log10(),
        }
    }
}

// ---------------------------------------------------------------------------
// normal tail in log space

/// `ln erfc(x)` for `x ≥ 0`, accurate far beyond the range where `erfc`
/// underflows.
pub fn ln_erfc(x: f64) -> f64 {
    assert!(x >= 0.0, "ln_erfc expects a non-negative argument");
    if x < 3.0 {
        return erfc(x).ln();
    }
    // erfc(x) = exp(-x²)·erfcx(x); erfcx from its continued fraction,
    // evaluated bottom-up
    let mut tail = x;
    for k in (1..=80).rev() {
        tail = x + (k as f64 / 2.0) / tail;
    }
    -x * x - PI.sqrt().ln() - tail.ln()
}

/// Base-10 log of the two-sided normal p-value `erfc(|z|/√2)`.
pub fn log10_two_sided_p(z: f64) -> f64 {
    ln_erfc(z.abs() / SQRT_2) / LN_10
}

fn normal_upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

// ---------------------------------------------------------------------------
// Shapiro–Wilk (Royston's approximation)

fn poly(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

/// Half of the antisymmetric coefficient vector, largest first.
fn sw_coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![0.5f64.sqrt()];
    }
    let an = n as f64;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let m: Vec<f64> = (1..=half)
        .map(|i| normal.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;
    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

/// Shapiro–Wilk W and its p-value.
pub fn shapiro_wilk(sample: &[f64], alpha: f64) -> Result<TestResult, StatsError> {
    let n = sample.len();
    if n < 3 {
        return Err(StatsError::SampleTooSmall(n));
    }
    if n > 5000 {
        return Err(StatsError::SampleTooLarge(n));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 1e-12 * x[0].abs().max(x[n - 1].abs()) {
        return Err(StatsError::DegenerateSample);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let ssq: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let a = sw_coefficients(n);
    let norm: f64 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
    let num: f64 = a.iter().enumerate().map(|(i, ai)| ai * (x[n - 1 - i] - x[i])).sum();
    let w = (num * num / (norm * ssq)).min(1.0);

    let p = if n == 3 {
        (6.0 / PI * (w.sqrt().asin() - (0.75f64).sqrt().asin())).max(0.0)
    } else {
        let an = n as f64;
        let mut y = (1.0 - w).ln();
        let (m, s) = if n <= 11 {
            let gamma = poly(&G, an);
            if y >= gamma {
                return Ok(TestResult::new(TestName::ShapiroWilk, w, 1e-99, alpha));
            }
            y = -(gamma - y).ln();
            (poly(&C3, an), poly(&C4, an).exp())
        } else {
            let xx = an.ln();
            (poly(&C5, xx), poly(&C6, xx).exp())
        };
        normal_upper_tail((y - m) / s)
    };
    Ok(TestResult::new(TestName::ShapiroWilk, w, p, alpha))
}

fn is_normal(sample: &[f64], alpha: f64) -> bool {
    shapiro_wilk(sample, alpha).is_ok_and(|r| !r.significant)
}

// ---------------------------------------------------------------------------
// location tests

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance t-test. Positive statistic means `a` is larger.
pub fn welch_t(a: &[f64], b: &[f64], alpha: f64) -> TestResult {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let qa = va / na;
    let qb = vb / nb;
    let se2 = qa + qb;
    let diff = ma - mb;
    if se2 == 0.0 {
        let (t, p) = if diff == 0.0 { (0.0, 1.0) } else { (diff.signum() * f64::INFINITY, 0.0) };
        return TestResult::new(TestName::WelchT, t, p, alpha);
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = 2.0 * dist.cdf(-t.abs());
    TestResult::new(TestName::WelchT, t, p, alpha)
}

/// Mann–Whitney U with the normal approximation, tie correction and a 0.5
/// continuity correction. The statistic is U for `a`.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alpha: f64) -> TestResult {
    let (n1, n2) = (a.len(), b.len());
    let mut all: Vec<(f64, usize)> = a
        .iter()
        .map(|&v| (v, 0))
        .chain(b.iter().map(|&v| (v, 1)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += all[i..=j].iter().filter(|e| e.1 == 0).count() as f64 * rank;
        i = j + 1;
    }
    let (f1, f2, fn_) = (n1 as f64, n2 as f64, n as f64);
    let u1 = rank_sum_a - f1 * (f1 + 1.0) / 2.0;
    let mu = f1 * f2 / 2.0;
    let var = f1 * f2 / 12.0 * ((fn_ + 1.0) - tie_term / (fn_ * (fn_ - 1.0)));
    if var <= 0.0 {
        return TestResult::new(TestName::MannWhitneyU, u1, 1.0, alpha);
    }
    let u = u1.max(f1 * f2 - u1);
    let z = (u - mu - 0.5) / var.sqrt();
    let p = (2.0 * normal_upper_tail(z)).min(1.0);
    TestResult::new(TestName::MannWhitneyU, u1, p, alpha)
}

/// Which sample sits higher, as seen by the test that was run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    AHigher,
    BHigher,
    Tied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PairedComparison {
    /// The two samples are equal element by element; no test is run.
    Identical,
    Tested { result: TestResult, location: Location },
}

impl PairedComparison {
    pub fn result(&self) -> Option<&TestResult> {
        match self {
            PairedComparison::Identical => None,
            PairedComparison::Tested { result, .. } => Some(result),
        }
    }

    pub fn is_significant(&self) -> bool {
        self.result().is_some_and(|r| r.significant)
    }
}

/// Compares two repeated-run samples: Welch's t when both pass the
/// Shapiro–Wilk screen at `alpha` (a zero-variance sample does not pass),
/// otherwise Mann–Whitney U.
pub fn compare_paired_runs(a: &[f64], b: &[f64], alpha: f64) -> Result<PairedComparison, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(StatsError::SampleTooSmall(a.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    if a.iter().zip(b).all(|(x, y)| x == y) {
        return Ok(PairedComparison::Identical);
    }
    let (result, location) = if is_normal(a, alpha) && is_normal(b, alpha) {
        let r = welch_t(a, b, alpha);
        (r, location_from_sign(r.statistic))
    } else {
        let r = mann_whitney_u(a, b, alpha);
        let centre = (a.len() * b.len()) as f64 / 2.0;
        (r, location_from_sign(r.statistic - centre))
    };
    Ok(PairedComparison::Tested { result, location })
}

fn location_from_sign(s: f64) -> Location {
    if s > 0.0 {
        Location::AHigher
    } else if s < 0.0 {
        Location::BHigher
    } else {
        Location::Tied
    }
}

// ---------------------------------------------------------------------------
// two-proportion Z

/// Pooled two-proportion Z-test; `Z > 0` when `x1/n1 > x2/n2`.
pub fn two_proportion_z(x1: u64, n1: u64, x2: u64, n2: u64, alpha: f64) -> Result<TestResult, StatsError> {
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::InvalidCounts("group sizes must be positive".into()));
    }
    if x1 > n1 || x2 > n2 {
        return Err(StatsError::InvalidCounts(format!(
            "successes exceed group size ({x1}/{n1}, {x2}/{n2})"
        )));
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (f1 + f2);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Err(StatsError::DegeneratePooled);
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / f1 + 1.0 / f2)).sqrt();
    let z = (x1 as f64 / f1 - x2 as f64 / f2) / se;
    Ok(TestResult::from_log10(TestName::TwoPropZ, z, log10_two_sided_p(z), alpha))
}
