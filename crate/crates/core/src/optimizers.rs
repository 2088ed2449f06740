//! Hyperparameter search: exhaustive grid, particle swarm, and a compact
//! tree-structured Parzen estimator. All three minimize an [`Objective`].

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::models::{Domain, HyperparameterPoint, HyperparameterSpace, ParamValue, Scale, SearchKind};

pub const DEFAULT_GRID_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("grid has {size} points, above the cap of {cap}")]
    GridTooLarge { size: String, cap: usize },
    #[error("search space is empty")]
    EmptySpace,
    #[error("parameter `{0}` has a domain this optimizer cannot search")]
    UnsupportedDomain(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
}

/// Score to minimize for a hyperparameter point.
pub trait Objective: Sync {
    fn evaluate(&self, point: &HyperparameterPoint) -> Result<f64, String>;
}

impl<F> Objective for F
where
    F: Fn(&HyperparameterPoint) -> Result<f64, String> + Sync,
{
    fn evaluate(&self, point: &HyperparameterPoint) -> Result<f64, String> {
        self(point)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: HyperparameterPoint,
    /// `+∞` when the objective failed or returned a non-finite value.
    pub score: f64,
    pub eval_index: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_point: HyperparameterPoint,
    pub best_score: f64,
    pub trace: Vec<TrialRecord>,
}

impl SearchResult {
    /// Best entry of a trace: smallest score, ties to the earliest trial.
    fn from_trace(trace: Vec<TrialRecord>) -> Self {
        let best = trace
            .iter()
            .min_by(|a, b| a.score.total_cmp(&b.score).then(a.eval_index.cmp(&b.eval_index)))
            .expect("non-empty trace");
        Self {
            best_point: best.point.clone(),
            best_score: best.score,
            trace,
        }
    }

    pub fn failures(&self) -> usize {
        self.trace.iter().filter(|t| t.score == f64::INFINITY).count()
    }
}

fn evaluate_one(objective: &dyn Objective, point: HyperparameterPoint, eval_index: usize) -> TrialRecord {
    let start = Instant::now();
    let score = match objective.evaluate(&point) {
        Ok(s) if s.is_finite() => s,
        Ok(s) => {
            log::debug!("trial {eval_index} ({point}) returned {s}; scored +inf");
            f64::INFINITY
        }
        Err(e) => {
            log::debug!("trial {eval_index} ({point}) failed: {e}");
            f64::INFINITY
        }
    };
    TrialRecord {
        point,
        score,
        eval_index,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Evaluates a batch concurrently; results come back in input order.
fn evaluate_batch(
    objective: &dyn Objective,
    points: Vec<HyperparameterPoint>,
    first_index: usize,
) -> Vec<TrialRecord> {
    points
        .into_par_iter()
        .enumerate()
        .map(|(i, p)| evaluate_one(objective, p, first_index + i))
        .collect()
}

// ---------------------------------------------------------------------------
// grid search

/// Evaluates every point of a finite space. Ties go to the lexicographically
/// smallest point in declared parameter order.
pub fn grid_search(
    space: &HyperparameterSpace,
    objective: &dyn Objective,
    cap: usize,
) -> Result<SearchResult, OptimizerError> {
    if let Some((name, _)) = space.params().iter().find(|(_, d)| !d.is_finite()) {
        return Err(OptimizerError::UnsupportedDomain(name.clone()));
    }
    if space.params().iter().any(|(_, d)| d.is_empty()) {
        return Err(OptimizerError::EmptySpace);
    }
    let size = space.grid_size().ok_or_else(|| OptimizerError::GridTooLarge {
        size: "more than usize::MAX".into(),
        cap,
    })?;
    if size > cap {
        return Err(OptimizerError::GridTooLarge {
            size: size.to_string(),
            cap,
        });
    }
    let trace = evaluate_batch(objective, space.grid_points(), 0);
    let best = trace
        .iter()
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then_with(|| a.point.lex_cmp(&b.point))
        })
        .expect("grid has at least one point");
    Ok(SearchResult {
        best_point: best.point.clone(),
        best_score: best.score,
        trace,
    })
}

// ---------------------------------------------------------------------------
// continuous coordinates

/// One searchable dimension in internal coordinates.
#[derive(Debug, Clone)]
enum Axis {
    /// Interval `[lo, hi]`; log-scale domains live in log space.
    Interval { lo: f64, hi: f64, log: bool, int: bool },
    /// Finite list of choices.
    Choice(Vec<ParamValue>),
}

impl Axis {
    fn from_domain(name: &str, domain: &Domain) -> Result<Self, OptimizerError> {
        if domain.is_empty() {
            return Err(OptimizerError::EmptySpace);
        }
        Ok(match domain {
            Domain::Real { min, max, scale } => {
                if !min.is_finite() || !max.is_finite() {
                    return Err(OptimizerError::UnsupportedDomain(name.into()));
                }
                let log = *scale == Scale::Log;
                let (lo, hi) = if log { (min.ln(), max.ln()) } else { (*min, *max) };
                Axis::Interval { lo, hi, log, int: false }
            }
            Domain::Int { min, max } => Axis::Interval {
                lo: *min as f64,
                hi: *max as f64,
                log: false,
                int: true,
            },
            Domain::Grid(values) => Axis::Choice(values.clone()),
        })
    }

    fn decode(&self, x: f64) -> ParamValue {
        match self {
            Axis::Interval { lo, hi, log, int } => {
                let x = x.clamp(*lo, *hi);
                if *int {
                    ParamValue::Int(x.round() as i64)
                } else if *log {
                    ParamValue::Real(x.exp().clamp(lo.exp(), hi.exp()))
                } else {
                    ParamValue::Real(x)
                }
            }
            Axis::Choice(values) => values[(x as usize).min(values.len() - 1)].clone(),
        }
    }
}

fn axes(space: &HyperparameterSpace) -> Result<Vec<(String, Axis)>, OptimizerError> {
    if space.dims() == 0 {
        return Err(OptimizerError::EmptySpace);
    }
    space
        .params()
        .iter()
        .map(|(k, d)| Axis::from_domain(k, d).map(|a| (k.clone(), a)))
        .collect()
}

fn decode(axes: &[(String, Axis)], coords: &[f64]) -> HyperparameterPoint {
    let mut p = HyperparameterPoint::new();
    for ((name, axis), &x) in axes.iter().zip(coords) {
        p.set(name, axis.decode(x));
    }
    p
}

// ---------------------------------------------------------------------------
// particle swarm

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    /// Maximum speed per dimension as a fraction of the box width.
    pub velocity_clamp: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 20,
            iterations: 50,
            inertia: 0.729,
            c1: 1.49445,
            c2: 1.49445,
            velocity_clamp: 0.5,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: &str| Err(OptimizerError::InvalidConfig(m.into()));
        if self.swarm_size < 2 {
            return bad("pso swarm_size must be at least 2");
        }
        if self.iterations == 0 {
            return bad("pso iterations must be positive");
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return bad("pso inertia must lie in (0, 1)");
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return bad("pso c1 and c2 must be positive");
        }
        if !(self.velocity_clamp > 0.0) {
            return bad("pso velocity_clamp must be positive");
        }
        Ok(())
    }

    pub fn budget(&self) -> usize {
        self.swarm_size * self.iterations
    }
}

/// Particle swarm over a box. The initial swarm counts as the first of
/// `iterations` generations, so the trace holds `swarm_size·iterations`
/// evaluations. Integer parameters move continuously and are rounded when
/// evaluated.
pub fn pso_minimize(
    space: &HyperparameterSpace,
    objective: &dyn Objective,
    config: &PsoConfig,
) -> Result<SearchResult, OptimizerError> {
    config.validate()?;
    let axes = axes(space)?;
    let bounds: Vec<(f64, f64)> = axes
        .iter()
        .map(|(name, a)| match a {
            Axis::Interval { lo, hi, .. } => Ok((*lo, *hi)),
            Axis::Choice(_) => Err(OptimizerError::UnsupportedDomain(name.clone())),
        })
        .collect::<Result<_, _>>()?;
    let dims = bounds.len();
    let vmax: Vec<f64> = bounds.iter().map(|(lo, hi)| config.velocity_clamp * (hi - lo)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut pos: Vec<Vec<f64>> = (0..config.swarm_size)
        .map(|_| bounds.iter().map(|&(lo, hi)| uniform(&mut rng, lo, hi)).collect())
        .collect();
    let mut vel: Vec<Vec<f64>> = (0..config.swarm_size)
        .map(|_| vmax.iter().map(|&v| uniform(&mut rng, -v, v)).collect())
        .collect();

    let mut trace = Vec::with_capacity(config.budget());
    let mut pbest = pos.clone();
    let mut pbest_score = vec![f64::INFINITY; config.swarm_size];
    let mut gbest = pos[0].clone();
    let mut gbest_score = f64::INFINITY;

    for generation in 0..config.iterations {
        if generation > 0 {
            for i in 0..config.swarm_size {
                for d in 0..dims {
                    let r1: f64 = rng.random();
                    let r2: f64 = rng.random();
                    let v = config.inertia * vel[i][d]
                        + config.c1 * r1 * (pbest[i][d] - pos[i][d])
                        + config.c2 * r2 * (gbest[d] - pos[i][d]);
                    vel[i][d] = v.clamp(-vmax[d], vmax[d]);
                    pos[i][d] = (pos[i][d] + vel[i][d]).clamp(bounds[d].0, bounds[d].1);
                }
            }
        }
        let points = pos.iter().map(|x| decode(&axes, x)).collect();
        let records = evaluate_batch(objective, points, trace.len());
        for (i, r) in records.iter().enumerate() {
            if r.score < pbest_score[i] {
                pbest_score[i] = r.score;
                pbest[i] = pos[i].clone();
            }
            if r.score < gbest_score {
                gbest_score = r.score;
                gbest = pos[i].clone();
            }
        }
        trace.extend(records);
    }
    Ok(SearchResult::from_trace(trace))
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

// ---------------------------------------------------------------------------
// tree-structured Parzen estimator

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeConfig {
    pub trials: usize,
    pub startup: usize,
    pub gamma: f64,
    pub candidates: usize,
    /// Multiplier on the neighbour-gap bandwidth of each Parzen kernel.
    pub bandwidth_scale: f64,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            trials: 60,
            startup: 10,
            gamma: 0.25,
            candidates: 24,
            bandwidth_scale: 1.0,
            seed: 0,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: &str| Err(OptimizerError::InvalidConfig(m.into()));
        if self.trials == 0 || self.startup == 0 {
            return bad("tpe trials and startup must be positive");
        }
        if self.startup > self.trials {
            return bad("tpe startup must not exceed trials");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("tpe gamma must lie in (0, 1)");
        }
        if self.candidates == 0 {
            return bad("tpe candidates must be positive");
        }
        if !(self.bandwidth_scale > 0.0) {
            return bad("tpe bandwidth_scale must be positive");
        }
        Ok(())
    }
}

const MIN_BANDWIDTH: f64 = 0.01;

/// Coordinates for TPE: intervals are mapped to the unit interval, choices
/// are indices.
fn unit_to_axis(axis: &Axis, u: f64) -> f64 {
    match axis {
        Axis::Interval { lo, hi, .. } => lo + u * (hi - lo),
        Axis::Choice(_) => u,
    }
}

fn sample_uniform_unit(axes: &[(String, Axis)], rng: &mut ChaCha8Rng) -> Vec<f64> {
    axes.iter()
        .map(|(_, a)| match a {
            Axis::Interval { .. } => rng.random::<f64>(),
            Axis::Choice(v) => rng.random_range(0..v.len()) as f64,
        })
        .collect()
}

fn decode_unit(axes: &[(String, Axis)], u: &[f64]) -> HyperparameterPoint {
    let coords: Vec<f64> = axes.iter().zip(u).map(|((_, a), &x)| unit_to_axis(a, x)).collect();
    decode(axes, &coords)
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Mixture of Gaussians truncated to [0, 1] plus a uniform prior component
/// carrying the weight of one observation. Each kernel's bandwidth is the
/// larger gap to its sorted neighbours (the prior sits at 0.5), clipped to
/// [1/min(100, n+1), 1].
struct Parzen {
    centers: Vec<f64>,
    bandwidths: Vec<f64>,
}

impl Parzen {
    fn fit(obs: &[f64], scale: f64) -> Self {
        let n = obs.len();
        let mut sorted: Vec<(f64, Option<usize>)> = obs.iter().enumerate().map(|(i, &x)| (x, Some(i))).collect();
        sorted.push((0.5, None));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let floor = (1.0 / (n as f64 + 1.0).min(100.0)).max(MIN_BANDWIDTH);
        let mut bandwidths = vec![0.0; n];
        for (k, &(x, idx)) in sorted.iter().enumerate() {
            let Some(i) = idx else { continue };
            let left = if k > 0 { x - sorted[k - 1].0 } else { 0.0 };
            let right = if k + 1 < sorted.len() { sorted[k + 1].0 - x } else { 0.0 };
            bandwidths[i] = (scale * left.max(right)).clamp(floor, 1.0);
        }
        Self {
            centers: obs.to_vec(),
            bandwidths,
        }
    }

    fn weight(&self) -> f64 {
        1.0 / (self.centers.len() as f64 + 1.0)
    }

    fn pdf(&self, x: f64) -> f64 {
        let kernels: f64 = self
            .centers
            .iter()
            .zip(&self.bandwidths)
            .map(|(&c, &h)| {
                let mass = std_normal_cdf((1.0 - c) / h) - std_normal_cdf(-c / h);
                let z = (x - c) / h;
                (-0.5 * z * z).exp() / (h * (2.0 * std::f64::consts::PI).sqrt() * mass)
            })
            .sum();
        self.weight() * (1.0 + kernels)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let pick = rng.random_range(0..=self.centers.len());
        if pick == self.centers.len() {
            return rng.random();
        }
        let (c, h) = (self.centers[pick], self.bandwidths[pick]);
        for _ in 0..64 {
            let x = c + h * standard_normal(rng);
            if (0.0..=1.0).contains(&x) {
                return x;
            }
        }
        c
    }
}

/// Box–Muller draw.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Laplace-smoothed category frequencies.
fn category_probs(obs: &[f64], k: usize) -> Vec<f64> {
    let mut counts = vec![1.0; k];
    for &o in obs {
        counts[o as usize] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

fn sample_category(probs: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let mut u: f64 = rng.random();
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i as f64;
        }
        u -= p;
    }
    (probs.len() - 1) as f64
}

/// Simplified TPE: `startup` uniform draws, then at each step the history
/// is split at the γ-quantile and the candidate from the good-set density
/// with the highest good/bad density ratio is evaluated.
pub fn tpe_minimize(
    space: &HyperparameterSpace,
    objective: &dyn Objective,
    config: &TpeConfig,
) -> Result<SearchResult, OptimizerError> {
    config.validate()?;
    let axes = axes(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let startup: Vec<Vec<f64>> = (0..config.startup)
        .map(|_| sample_uniform_unit(&axes, &mut rng))
        .collect();
    let points = startup.iter().map(|u| decode_unit(&axes, u)).collect();
    let mut trace = evaluate_batch(objective, points, 0);
    let mut history = startup;

    while trace.len() < config.trials {
        let mut order: Vec<usize> = (0..trace.len()).collect();
        order.sort_by(|&a, &b| trace[a].score.total_cmp(&trace[b].score).then(a.cmp(&b)));
        let n_good = ((config.gamma * trace.len() as f64).ceil() as usize).clamp(1, trace.len() - 1);
        let (good, bad) = order.split_at(n_good);

        let mut candidates: Vec<Vec<f64>> = vec![Vec::with_capacity(axes.len()); config.candidates];
        let mut log_ratio = vec![0.0; config.candidates];
        for (d, (_, axis)) in axes.iter().enumerate() {
            let g_obs: Vec<f64> = good.iter().map(|&i| history[i][d]).collect();
            let b_obs: Vec<f64> = bad.iter().map(|&i| history[i][d]).collect();
            match axis {
                Axis::Interval { .. } => {
                    let l = Parzen::fit(&g_obs, config.bandwidth_scale);
                    let g = Parzen::fit(&b_obs, config.bandwidth_scale);
                    for (c, lr) in candidates.iter_mut().zip(&mut log_ratio) {
                        let x = l.sample(&mut rng);
                        *lr += l.pdf(x).ln() - g.pdf(x).ln();
                        c.push(x);
                    }
                }
                Axis::Choice(values) => {
                    let l = category_probs(&g_obs, values.len());
                    let g = category_probs(&b_obs, values.len());
                    for (c, lr) in candidates.iter_mut().zip(&mut log_ratio) {
                        let x = sample_category(&l, &mut rng);
                        *lr += l[x as usize].ln() - g[x as usize].ln();
                        c.push(x);
                    }
                }
            }
        }
        let pick = (0..config.candidates)
            .max_by(|&a, &b| log_ratio[a].total_cmp(&log_ratio[b]).then(b.cmp(&a)))
            .expect("at least one candidate");
        let chosen = candidates.swap_remove(pick);
        trace.push(evaluate_one(objective, decode_unit(&axes, &chosen), trace.len()));
        history.push(chosen);
    }
    Ok(SearchResult::from_trace(trace))
}

/// Uniform random search with the same draw sequence as TPE's startup phase.
pub fn random_search(
    space: &HyperparameterSpace,
    objective: &dyn Objective,
    trials: usize,
    seed: u64,
) -> Result<SearchResult, OptimizerError> {
    if trials == 0 {
        return Err(OptimizerError::InvalidConfig("random search needs at least one trial".into()));
    }
    let axes = axes(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..trials)
        .map(|_| decode_unit(&axes, &sample_uniform_unit(&axes, &mut rng)))
        .collect();
    Ok(SearchResult::from_trace(evaluate_batch(objective, points, 0)))
}

// ---------------------------------------------------------------------------
// routing

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Grid,
    Pso,
    Tpe,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Grid => "grid",
            OptimizerKind::Pso => "pso",
            OptimizerKind::Tpe => "tpe",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" => Ok(OptimizerKind::Grid),
            "pso" => Ok(OptimizerKind::Pso),
            "tpe" => Ok(OptimizerKind::Tpe),
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

/// Exhaustive-search models go to the grid; continuous-search models to the
/// configured continuous optimizer.
pub fn route(kind: SearchKind, continuous: OptimizerKind) -> OptimizerKind {
    match kind {
        SearchKind::Exhaustive => OptimizerKind::Grid,
        SearchKind::Continuous => match continuous {
            OptimizerKind::Grid => OptimizerKind::Pso,
            other => other,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub cap: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { cap: DEFAULT_GRID_CAP }
    }
}

/// All optimizer settings; `scs` picks the continuous optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub scs: OptimizerKind,
    pub grid: GridConfig,
    pub pso: PsoConfig,
    pub tpe: TpeConfig,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            scs: OptimizerKind::Pso,
            grid: GridConfig::default(),
            pso: PsoConfig::default(),
            tpe: TpeConfig::default(),
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.scs == OptimizerKind::Grid {
            return Err(OptimizerError::InvalidConfig(
                "opt.scs must be `pso` or `tpe`".into(),
            ));
        }
        self.pso.validate()?;
        self.tpe.validate()
    }

    /// Runs `kind` with its configured settings and the given seed.
    pub fn search(
        &self,
        kind: OptimizerKind,
        space: &HyperparameterSpace,
        objective: &dyn Objective,
        seed: u64,
    ) -> Result<SearchResult, OptimizerError> {
        match kind {
            OptimizerKind::Grid => grid_search(space, objective, self.grid.cap),
            OptimizerKind::Pso => pso_minimize(space, objective, &PsoConfig { seed, ..self.pso.clone() }),
            OptimizerKind::Tpe => tpe_minimize(space, objective, &TpeConfig { seed, ..self.tpe.clone() }),
        }
    }
}

/// Writes a trace as CSV: `eval_index,<params…>,score,wall_time`.
pub fn write_trace_csv<W: Write>(
    out: W,
    space: &HyperparameterSpace,
    trace: &[TrialRecord],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["eval_index".to_string()];
    header.extend(space.params().iter().map(|(k, _)| k.clone()));
    header.extend(["score".to_string(), "wall_time".to_string()]);
    w.write_record(&header)?;
    for t in trace {
        let mut row = vec![t.eval_index.to_string()];
        for (k, _) in space.params() {
            row.push(t.point.get(k).map(|v| v.to_string()).unwrap_or_default());
        }
        row.push(t.score.to_string());
        row.push(t.wall_time.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
