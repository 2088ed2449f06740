//! Repeated-run experiment protocol: every (series, split, model, condition,
//! repetition) task is fitted, tuned and scored on its test segment; the
//! results are then compared condition against condition, one series and
//! metric at a time.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{Condition, ExperimentConfig, Timing};
use crate::evaluation::EvaluationFunction;
use crate::metrics::{self, Direction, Metric, MetricBundle};
use crate::models::{model_by_name, ForecastModel, HyperparameterPoint, HyperparameterSpace};
use crate::optimizers::{route, Objective};
use crate::stats::{compare_paired_runs, two_proportion_z, Location, PairedComparison, StatsError};
use crate::timeseries::{split_values, Dataset, SplitRatio, TimeSeries};

pub const RESULTS_FILE: &str = "results.csv";
pub const TRACES_FILE: &str = "traces.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const CASES_FILE: &str = "cases.csv";
pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const Z_SUMMARY_FILE: &str = "z_summary.csv";

const RESULTS_HEADER: [&str; 8] = ["series_id", "model", "condition", "optimizer", "split", "rep", "metric", "value"];
const TRACES_HEADER: [&str; 10] = [
    "series_id", "model", "condition", "optimizer", "split", "rep", "best_params", "best_score", "evaluations", "failed_evaluations",
];
const FAILURES_HEADER: [&str; 7] = ["series_id", "model", "condition", "optimizer", "split", "rep", "reason"];

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed results file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("{0}")]
    Config(String),
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ProtocolError + '_ {
    move |source| ProtocolError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ProtocolError + '_ {
    move |e| ProtocolError::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

// ---------------------------------------------------------------------------
// tasks

/// Identifies one task of the sweep.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskKey {
    pub series_id: String,
    pub model: String,
    pub condition: Condition,
    pub split: SplitRatio,
    pub rep: usize,
}

/// Seed for one task, derived from the master seed and the task identity.
pub fn derive_seed(master: u64, key: &TaskKey) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for part in [
        key.series_id.as_str(),
        key.model.as_str(),
        key.condition.as_str(),
        key.split.as_str(),
    ] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.update((key.rep as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Optimizer column value: `none` for the fixed baseline.
pub fn optimizer_label(config: &ExperimentConfig, model: &dyn ForecastModel, condition: Condition) -> String {
    match condition {
        Condition::Baseline => "none".into(),
        _ => route(model.search_kind(), config.opt.scs).to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSummary {
    pub best_params: String,
    pub best_score: f64,
    pub evaluations: usize,
    pub failed_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub key: TaskKey,
    pub optimizer: String,
    pub metrics: MetricBundle,
    pub search: Option<SearchSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskFailure {
    pub key: TaskKey,
    pub optimizer: String,
    pub reason: String,
}

/// Score of `point` under `eval` on one train/test split.
pub fn split_objective<'a>(
    model: &'a dyn ForecastModel,
    eval: &'a dyn EvaluationFunction,
    train: &'a [f64],
    test: &'a [f64],
    period: usize,
) -> impl Objective + 'a {
    move |point: &HyperparameterPoint| -> Result<f64, String> {
        let fitted = model.fit(train, period, point).map_err(|e| e.to_string())?;
        let pred = fitted.predict(test.len()).map_err(|e| e.to_string())?;
        let mae = metrics::mae(test, &pred).map_err(|e| e.to_string())?;
        let rmse = metrics::rmse(test, &pred).map_err(|e| e.to_string())?;
        let r2 = if eval.name() == "maef" {
            f64::NAN
        } else {
            metrics::r2(test, &pred).map_err(|e| e.to_string())?
        };
        eval.score(&pred, r2, mae, rmse, train).map_err(|e| e.to_string())
    }
}

/// Runs one task. The measured time covers the search and the final fit
/// and forecast.
pub fn run_task(
    config: &ExperimentConfig,
    series: &TimeSeries,
    key: &TaskKey,
) -> Result<TaskRecord, TaskFailure> {
    let model = model_by_name(&key.model).map_err(|e| TaskFailure {
        key: key.clone(),
        optimizer: "none".into(),
        reason: e.to_string(),
    })?;
    let optimizer = optimizer_label(config, model.as_ref(), key.condition);
    let fail = |reason: String| TaskFailure {
        key: key.clone(),
        optimizer: optimizer.clone(),
        reason,
    };
    let split = split_values(series.values(), key.split).map_err(|e| fail(e.to_string()))?;
    let period = series.frequency().seasonal_period();
    let start = Instant::now();

    let (point, search) = match config.evaluation_function(key.condition) {
        None => (model.fixed_point(), None),
        Some(eval) => {
            let space: HyperparameterSpace = config.space_for(&key.model).map_err(|e| fail(e.to_string()))?;
            let objective = split_objective(model.as_ref(), eval.as_ref(), &split.train, &split.test, period);
            let kind = route(model.search_kind(), config.opt.scs);
            let seed = derive_seed(config.protocol.seed, key);
            let result = config
                .opt
                .search(kind, &space, &objective, seed)
                .map_err(|e| fail(e.to_string()))?;
            if !result.best_score.is_finite() {
                return Err(fail(format!("all {} evaluations failed", result.trace.len())));
            }
            let summary = SearchSummary {
                best_params: result.best_point.to_string(),
                best_score: result.best_score,
                evaluations: result.trace.len(),
                failed_evaluations: result.failures(),
            };
            (result.best_point, Some(summary))
        }
    };

    let fitted = model
        .fit(&split.train, period, &point)
        .map_err(|e| fail(e.to_string()))?;
    let pred = fitted.predict(split.horizon()).map_err(|e| fail(e.to_string()))?;
    let exec_time = match config.protocol.timing {
        Timing::Wall => start.elapsed().as_secs_f64(),
        Timing::Disabled => 0.0,
    };
    let bundle = MetricBundle::compute(&split.train, &split.test, &pred, exec_time, config.metrics.scale_window)
        .map_err(|e| fail(e.to_string()))?;
    Ok(TaskRecord {
        key: key.clone(),
        optimizer,
        metrics: bundle,
        search,
    })
}

/// Every task of the sweep in canonical order: dataset order, then split,
/// model, condition and repetition as configured.
pub fn plan(config: &ExperimentConfig, dataset: &Dataset) -> Vec<TaskKey> {
    let p = &config.protocol;
    let mut keys = Vec::new();
    for s in dataset.series() {
        for &split in &p.splits {
            for model in &p.models {
                for &condition in &p.conditions {
                    for rep in 0..p.repetitions {
                        keys.push(TaskKey {
                            series_id: s.id().to_string(),
                            model: model.clone(),
                            condition,
                            split,
                            rep,
                        });
                    }
                }
            }
        }
    }
    keys
}

// ---------------------------------------------------------------------------
// results store

fn key_fields(key: &TaskKey, optimizer: &str) -> [String; 6] {
    [
        key.series_id.clone(),
        key.model.clone(),
        key.condition.to_string(),
        optimizer.to_string(),
        key.split.to_string(),
        key.rep.to_string(),
    ]
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

fn write_record_rows<W: Write>(w: &mut csv::Writer<W>, r: &TaskRecord) -> csv::Result<()> {
    let base = key_fields(&r.key, &r.optimizer);
    for m in Metric::ALL {
        let mut row: Vec<String> = base.to_vec();
        row.push(m.as_str().to_string());
        row.push(fmt_f64(r.metrics.get(m)));
        w.write_record(&row)?;
    }
    Ok(())
}

fn write_trace_row<W: Write>(w: &mut csv::Writer<W>, r: &TaskRecord) -> csv::Result<()> {
    if let Some(s) = &r.search {
        let mut row: Vec<String> = key_fields(&r.key, &r.optimizer).to_vec();
        row.extend([
            s.best_params.clone(),
            fmt_f64(s.best_score),
            s.evaluations.to_string(),
            s.failed_evaluations.to_string(),
        ]);
        w.write_record(&row)?;
    }
    Ok(())
}

fn write_failure_row<W: Write>(w: &mut csv::Writer<W>, f: &TaskFailure) -> csv::Result<()> {
    let mut row: Vec<String> = key_fields(&f.key, &f.optimizer).to_vec();
    row.push(f.reason.clone());
    w.write_record(&row)
}

/// Contents of a results directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsStore {
    pub records: Vec<TaskRecord>,
    pub failures: Vec<TaskFailure>,
}

fn parse_key(path: &Path, row: &csv::StringRecord) -> Result<(TaskKey, String), ProtocolError> {
    let bad = |reason: String| ProtocolError::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let field = |i: usize| row.get(i).ok_or_else(|| bad(format!("row has too few fields: {row:?}")));
    Ok((
        TaskKey {
            series_id: field(0)?.to_string(),
            model: field(1)?.to_string(),
            condition: field(2)?.parse().map_err(bad)?,
            split: field(4)?.parse().map_err(|e: crate::timeseries::DataError| bad(e.to_string()))?,
            rep: field(5)?.parse().map_err(|_| bad(format!("bad rep `{}`", row.get(5).unwrap_or(""))))?,
        },
        field(3)?.to_string(),
    ))
}

/// Reads rows, stopping quietly at a malformed final line (an interrupted
/// append).
fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>, ProtocolError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(csv_err(path))?;
    let expected = rdr.headers().map_err(csv_err(path))?.len();
    let mut rows = Vec::new();
    for r in rdr.records() {
        match r {
            Ok(row) if row.len() == expected => rows.push(row),
            Ok(row) => {
                log::warn!("{}: ignoring incomplete row {:?}", path.display(), row);
            }
            Err(e) => {
                log::warn!("{}: ignoring unreadable tail: {e}", path.display());
                break;
            }
        }
    }
    Ok(rows)
}

impl ResultsStore {
    /// Loads a results directory. Records missing any metric (an interrupted
    /// write) are dropped.
    pub fn load(dir: &Path) -> Result<Self, ProtocolError> {
        let results_path = dir.join(RESULTS_FILE);
        let mut partial: BTreeMap<TaskKey, (String, BTreeMap<Metric, f64>)> = BTreeMap::new();
        for row in read_rows(&results_path)? {
            let (key, optimizer) = parse_key(&results_path, &row)?;
            let metric: Metric = row[6].parse().map_err(|e: String| ProtocolError::Malformed {
                path: results_path.clone(),
                reason: e,
            })?;
            let Ok(value) = row[7].parse::<f64>() else {
                log::warn!("{}: ignoring unparsable value `{}`", results_path.display(), &row[7]);
                continue;
            };
            partial.entry(key).or_insert_with(|| (optimizer, BTreeMap::new())).1.insert(metric, value);
        }

        let traces_path = dir.join(TRACES_FILE);
        let mut traces: HashMap<TaskKey, SearchSummary> = HashMap::new();
        for row in read_rows(&traces_path)? {
            let (key, _) = parse_key(&traces_path, &row)?;
            let (Ok(best_score), Ok(evaluations), Ok(failed)) =
                (row[7].parse(), row[8].parse(), row[9].parse())
            else {
                continue;
            };
            traces.insert(
                key,
                SearchSummary {
                    best_params: row[6].to_string(),
                    best_score,
                    evaluations,
                    failed_evaluations: failed,
                },
            );
        }

        let mut records = Vec::new();
        for (key, (optimizer, values)) in partial {
            if values.len() != Metric::ALL.len() {
                log::warn!("dropping incomplete record {key:?}");
                continue;
            }
            let mut bundle = MetricBundle {
                r2: 0.0,
                mae: 0.0,
                rmse: 0.0,
                gra: 0.0,
                rmsse: 0.0,
                mase: 0.0,
                exec_time: 0.0,
            };
            for (m, v) in values {
                bundle.set(m, v);
            }
            let search = traces.remove(&key);
            records.push(TaskRecord {
                key,
                optimizer,
                metrics: bundle,
                search,
            });
        }

        let failures_path = dir.join(FAILURES_FILE);
        let mut failures = Vec::new();
        for row in read_rows(&failures_path)? {
            let (key, optimizer) = parse_key(&failures_path, &row)?;
            failures.push(TaskFailure {
                key,
                optimizer,
                reason: row[6].to_string(),
            });
        }
        Ok(Self { records, failures })
    }

    /// Writes all three files in canonical task order, replacing any
    /// existing ones atomically.
    pub fn save(&self, dir: &Path, order: &[TaskKey]) -> Result<(), ProtocolError> {
        let rank: HashMap<&TaskKey, usize> = order.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let pos = |k: &TaskKey| rank.get(k).copied().unwrap_or(usize::MAX);
        let mut records: Vec<&TaskRecord> = self.records.iter().collect();
        records.sort_by(|a, b| pos(&a.key).cmp(&pos(&b.key)).then_with(|| a.key.cmp(&b.key)));
        let mut failures: Vec<&TaskFailure> = self.failures.iter().collect();
        failures.sort_by(|a, b| pos(&a.key).cmp(&pos(&b.key)).then_with(|| a.key.cmp(&b.key)));

        write_atomically(&dir.join(RESULTS_FILE), |w| {
            w.write_record(RESULTS_HEADER)?;
            records.iter().try_for_each(|r| write_record_rows(w, r))
        })?;
        write_atomically(&dir.join(TRACES_FILE), |w| {
            w.write_record(TRACES_HEADER)?;
            records.iter().try_for_each(|r| write_trace_row(w, r))
        })?;
        write_atomically(&dir.join(FAILURES_FILE), |w| {
            w.write_record(FAILURES_HEADER)?;
            failures.iter().try_for_each(|f| write_failure_row(w, f))
        })
    }

    /// Number of `results.csv` data rows (one per metric per task).
    pub fn row_count(&self) -> usize {
        self.records.len() * Metric::ALL.len()
    }
}

fn write_atomically<F>(path: &Path, body: F) -> Result<(), ProtocolError>
where
    F: FnOnce(&mut csv::Writer<BufWriter<File>>) -> csv::Result<()>,
{
    let tmp = path.with_extension("csv.tmp");
    let file = File::create(&tmp).map_err(io_err(&tmp))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    body(&mut w).map_err(csv_err(&tmp))?;
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Append-only writers used while the sweep is running.
struct Appender {
    results: csv::Writer<File>,
    traces: csv::Writer<File>,
    failures: csv::Writer<File>,
}

fn open_append(path: &Path, header: &[&str]) -> Result<csv::Writer<File>, ProtocolError> {
    let fresh = !path.exists() || fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    if !fresh {
        // a torn final line would glue onto the next append
        let bytes = fs::read(path).map_err(io_err(path))?;
        if bytes.last() != Some(&b'\n') {
            let cut = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            fs::write(path, &bytes[..cut]).map_err(io_err(path))?;
        }
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(header).map_err(csv_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    Ok(w)
}

impl Appender {
    fn open(dir: &Path) -> Result<Self, ProtocolError> {
        Ok(Self {
            results: open_append(&dir.join(RESULTS_FILE), &RESULTS_HEADER)?,
            traces: open_append(&dir.join(TRACES_FILE), &TRACES_HEADER)?,
            failures: open_append(&dir.join(FAILURES_FILE), &FAILURES_HEADER)?,
        })
    }

    fn record(&mut self, outcome: &Result<TaskRecord, TaskFailure>) -> std::io::Result<()> {
        let to_io = |e: csv::Error| std::io::Error::other(e.to_string());
        match outcome {
            Ok(r) => {
                write_trace_row(&mut self.traces, r).map_err(to_io)?;
                self.traces.flush()?;
                write_record_rows(&mut self.results, r).map_err(to_io)?;
                self.results.flush()
            }
            Err(f) => {
                write_failure_row(&mut self.failures, f).map_err(to_io)?;
                self.failures.flush()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub planned: usize,
    pub skipped: usize,
    pub completed: usize,
    pub failed: usize,
    pub result_rows: usize,
}

/// Runs the sweep into `out_dir`, skipping tasks already recorded there.
/// Each finished task is appended immediately; at the end the files are
/// rewritten in canonical order.
pub fn run_experiment(
    config: &ExperimentConfig,
    dataset: &Dataset,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<RunSummary, ProtocolError> {
    config.validate().map_err(|e| ProtocolError::Config(e.to_string()))?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let existing = ResultsStore::load(out_dir)?;
    // drop incomplete tails before appending so the files stay well formed
    existing.save(out_dir, &plan(config, dataset))?;

    let done: BTreeSet<TaskKey> = existing
        .records
        .iter()
        .map(|r| r.key.clone())
        .chain(existing.failures.iter().map(|f| f.key.clone()))
        .collect();
    let order = plan(config, dataset);
    let todo: Vec<&TaskKey> = order.iter().filter(|k| !done.contains(*k)).collect();
    log::info!(
        "{} tasks planned, {} already recorded, {} to run",
        order.len(),
        order.len() - todo.len(),
        todo.len()
    );

    let appender = Mutex::new(Appender::open(out_dir)?);
    let progress = std::sync::atomic::AtomicUsize::new(0);
    let total = todo.len();
    let work = || -> Result<Vec<Result<TaskRecord, TaskFailure>>, ProtocolError> {
        todo.par_iter()
            .map(|key| {
                let series = dataset.get(&key.series_id).expect("planned from dataset");
                let outcome = run_task(config, series, key);
                if let Err(f) = &outcome {
                    log::warn!("task {:?} failed: {}", f.key, f.reason);
                }
                appender
                    .lock()
                    .expect("appender lock")
                    .record(&outcome)
                    .map_err(io_err(out_dir))?;
                let n = progress.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                if n.is_multiple_of(100) || n == total {
                    log::info!("{n}/{total} tasks finished");
                }
                Ok(outcome)
            })
            .collect()
    };
    let outcomes = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ProtocolError::Pool(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    drop(appender);

    let mut store = existing;
    let skipped = done.len();
    let mut completed = 0;
    let mut failed = 0;
    for o in outcomes {
        match o {
            Ok(r) => {
                completed += 1;
                store.records.push(r);
            }
            Err(f) => {
                failed += 1;
                store.failures.push(f);
            }
        }
    }
    store.save(out_dir, &order)?;
    Ok(RunSummary {
        planned: order.len(),
        skipped,
        completed,
        failed,
        result_rows: store.row_count(),
    })
}

// ---------------------------------------------------------------------------
// case counting

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    ImprovesA,
    ImprovesB,
    NoChange,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ImprovesA => "improves_a",
            Verdict::ImprovesB => "improves_b",
            Verdict::NoChange => "no_change",
        }
    }
}

/// Verdict for one (series, model, metric) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseOutcome {
    pub optimizer: String,
    pub split: SplitRatio,
    pub series_id: String,
    pub model: String,
    pub metric: Metric,
    pub verdict: Verdict,
    pub test: Option<String>,
    pub p_value: Option<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct VerdictCounts {
    pub improves_a: u64,
    pub improves_b: u64,
    pub no_change: u64,
}

impl VerdictCounts {
    pub fn total(&self) -> u64 {
        self.improves_a + self.improves_b + self.no_change
    }

    fn add(&mut self, v: Verdict) {
        match v {
            Verdict::ImprovesA => self.improves_a += 1,
            Verdict::ImprovesB => self.improves_b += 1,
            Verdict::NoChange => self.no_change += 1,
        }
    }
}

/// Verdict counts per metric for one optimizer and split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseTable {
    pub a: Condition,
    pub b: Condition,
    pub optimizer: String,
    pub split: SplitRatio,
    pub counts: BTreeMap<Metric, VerdictCounts>,
    /// Cells that could not be compared (missing or unequal repetitions).
    pub skipped: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseAnalysis {
    pub tables: Vec<CaseTable>,
    pub outcomes: Vec<CaseOutcome>,
}

fn verdict_for(metric: Metric, cmp: &PairedComparison) -> Verdict {
    match cmp {
        PairedComparison::Identical => Verdict::NoChange,
        PairedComparison::Tested { result, location } => {
            if !result.significant {
                return Verdict::NoChange;
            }
            match (metric.direction(), location) {
                (_, Location::Tied) => Verdict::NoChange,
                (Direction::HigherIsBetter, Location::AHigher)
                | (Direction::LowerIsBetter, Location::BHigher) => Verdict::ImprovesA,
                _ => Verdict::ImprovesB,
            }
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Compares conditions `a` and `b` cell by cell. The optimizer of a cell is
/// the one used by whichever side searched (the baseline has none).
pub fn count_cases(records: &[TaskRecord], a: Condition, b: Condition, alpha: f64) -> CaseAnalysis {
    type Cell = (SplitRatio, String, String);
    let mut side: BTreeMap<(Cell, Condition), Vec<&TaskRecord>> = BTreeMap::new();
    let mut optimizer_of: BTreeMap<Cell, String> = BTreeMap::new();
    for r in records.iter().filter(|r| r.key.condition == a || r.key.condition == b) {
        let cell: Cell = (r.key.split, r.key.series_id.clone(), r.key.model.clone());
        if r.optimizer != "none" {
            optimizer_of.insert(cell.clone(), r.optimizer.clone());
        }
        side.entry((cell, r.key.condition)).or_default().push(r);
    }
    let cells: BTreeSet<Cell> = side.keys().map(|(c, _)| c.clone()).collect();

    let mut tables: BTreeMap<(String, SplitRatio), CaseTable> = BTreeMap::new();
    let mut outcomes = Vec::new();
    for cell in cells {
        let optimizer = optimizer_of.get(&cell).cloned().unwrap_or_else(|| "none".into());
        let (split, series_id, model) = cell.clone();
        let table = tables.entry((optimizer.clone(), split)).or_insert_with(|| CaseTable {
            a,
            b,
            optimizer: optimizer.clone(),
            split,
            counts: Metric::ALL.iter().map(|m| (*m, VerdictCounts::default())).collect(),
            skipped: 0,
        });
        let mut ra = side.get(&(cell.clone(), a)).cloned().unwrap_or_default();
        let mut rb = side.get(&(cell.clone(), b)).cloned().unwrap_or_default();
        ra.sort_by_key(|r| r.key.rep);
        rb.sort_by_key(|r| r.key.rep);
        if ra.len() != rb.len() || ra.len() < 3 {
            log::warn!(
                "skipping {series_id}/{model}/{split}: {} repetitions for {a}, {} for {b}",
                ra.len(),
                rb.len()
            );
            table.skipped += 1;
            continue;
        }
        for metric in Metric::ALL {
            let va: Vec<f64> = ra.iter().map(|r| r.metrics.get(metric)).collect();
            let vb: Vec<f64> = rb.iter().map(|r| r.metrics.get(metric)).collect();
            let (verdict, test, p) = match compare_paired_runs(&va, &vb, alpha) {
                Ok(cmp) => (
                    verdict_for(metric, &cmp),
                    cmp.result().map(|r| r.test_name.to_string()),
                    cmp.result().map(|r| r.p_value),
                ),
                Err(e) => {
                    log::warn!("{series_id}/{model}/{metric}: {e}; counted as no change");
                    (Verdict::NoChange, None, None)
                }
            };
            table.counts.get_mut(&metric).expect("all metrics").add(verdict);
            outcomes.push(CaseOutcome {
                optimizer: optimizer.clone(),
                split,
                series_id: series_id.clone(),
                model: model.clone(),
                metric,
                verdict,
                test,
                p_value: p,
                mean_a: mean(&va),
                mean_b: mean(&vb),
            });
        }
    }
    CaseAnalysis {
        tables: tables.into_values().collect(),
        outcomes,
    }
}

/// Writes case tables with one row per (optimizer, split, metric).
pub fn write_case_tables<W: Write>(out: W, tables: &[CaseTable], a: Condition, b: Condition) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let improves_a = format!("Improves {}", a.label());
    let improves_b = format!("Improves {}", b.label());
    w.write_record(["optimizer", "split", "Metric", &improves_a, &improves_b, "No Change", "skipped"])?;
    for t in tables {
        for (m, c) in &t.counts {
            w.write_record([
                t.optimizer.clone(),
                t.split.to_string(),
                m.label().to_string(),
                c.improves_a.to_string(),
                c.improves_b.to_string(),
                c.no_change.to_string(),
                t.skipped.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

const OUTCOME_HEADER: [&str; 10] = [
    "optimizer", "split", "series_id", "model", "metric", "verdict", "test", "p_value", "mean_a", "mean_b",
];

pub fn write_outcomes<W: Write>(out: W, outcomes: &[CaseOutcome]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OUTCOME_HEADER)?;
    for o in outcomes {
        w.write_record([
            o.optimizer.clone(),
            o.split.to_string(),
            o.series_id.clone(),
            o.model.clone(),
            o.metric.as_str().to_string(),
            o.verdict.as_str().to_string(),
            o.test.clone().unwrap_or_default(),
            o.p_value.map(fmt_f64).unwrap_or_default(),
            fmt_f64(o.mean_a),
            fmt_f64(o.mean_b),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_outcomes(path: &Path) -> Result<Vec<CaseOutcome>, ProtocolError> {
    let bad = |reason: String| ProtocolError::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err(path))?;
        if row.len() != OUTCOME_HEADER.len() {
            return Err(bad(format!("expected {} fields, got {}", OUTCOME_HEADER.len(), row.len())));
        }
        let verdict = match &row[5] {
            "improves_a" => Verdict::ImprovesA,
            "improves_b" => Verdict::ImprovesB,
            "no_change" => Verdict::NoChange,
            other => return Err(bad(format!("unknown verdict `{other}`"))),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
        out.push(CaseOutcome {
            optimizer: row[0].to_string(),
            split: row[1].parse().map_err(|e: crate::timeseries::DataError| bad(e.to_string()))?,
            series_id: row[2].to_string(),
            model: row[3].to_string(),
            metric: row[4].parse().map_err(bad)?,
            verdict,
            test: (!row[6].is_empty()).then(|| row[6].to_string()),
            p_value: if row[7].is_empty() { None } else { Some(num(&row[7])?) },
            mean_a: num(&row[8])?,
            mean_b: num(&row[9])?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Z summaries

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZSummary {
    pub pair: String,
    pub optimizer: String,
    pub split: SplitRatio,
    /// Metric name, or `pooled` for all metrics together.
    pub metric_scope: String,
    pub result: Result<(f64, f64), String>,
}

/// Two-proportion Z over (cases improving A, compared cells) against
/// (cases improving B, compared cells).
pub fn z_for_counts(c: &VerdictCounts, alpha: f64) -> Result<crate::stats::TestResult, StatsError> {
    let n = c.total();
    two_proportion_z(c.improves_a, n, c.improves_b, n, alpha)
}

/// Per-metric and pooled Z statistics for every table.
pub fn z_summary(tables: &[CaseTable], alpha: f64) -> Vec<ZSummary> {
    let mut out = Vec::new();
    for t in tables {
        let pair = format!("{}_vs_{}", t.a, t.b);
        let mut pooled = VerdictCounts::default();
        let mut push = |scope: String, c: &VerdictCounts| {
            out.push(ZSummary {
                pair: pair.clone(),
                optimizer: t.optimizer.clone(),
                split: t.split,
                metric_scope: scope,
                result: z_for_counts(c, alpha)
                    .map(|r| (r.statistic, r.log10_p))
                    .map_err(|e| e.to_string()),
            });
        };
        for (m, c) in &t.counts {
            pooled.improves_a += c.improves_a;
            pooled.improves_b += c.improves_b;
            pooled.no_change += c.no_change;
            push(m.as_str().to_string(), c);
        }
        push("pooled".into(), &pooled);
    }
    out
}

/// CSV `pair,optimizer,split,metric_scope,Z,log10_p`; undefined tests leave
/// both numbers empty.
pub fn write_z_summary<W: Write>(out: W, rows: &[ZSummary]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pair", "optimizer", "split", "metric_scope", "Z", "log10_p"])?;
    for r in rows {
        let (z, lp) = match r.result {
            Ok((z, lp)) => (fmt_f64(z), fmt_f64(lp)),
            Err(_) => (String::new(), String::new()),
        };
        w.write_record([r.pair.clone(), r.optimizer.clone(), r.split.to_string(), r.metric_scope.clone(), z, lp])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// improvement report

/// Percentage improvement of A over B; positive means A is better.
pub fn improvement_pct(metric: Metric, mean_a: f64, mean_b: f64) -> f64 {
    if mean_a == mean_b {
        return 0.0;
    }
    let gain = match metric.direction() {
        Direction::HigherIsBetter => mean_a - mean_b,
        Direction::LowerIsBetter => mean_b - mean_a,
    };
    100.0 * gain / mean_b.abs()
}

/// Writes one `improvement_<metric>.csv` per metric under `dir` and returns
/// the paths written.
pub fn write_improvement_report(dir: &Path, outcomes: &[CaseOutcome]) -> Result<Vec<PathBuf>, ProtocolError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut paths = Vec::new();
    for metric in Metric::ALL {
        let path = dir.join(format!("improvement_{}.csv", metric.as_str()));
        write_atomically(&path, |w| {
            w.write_record(["optimizer", "split", "series_id", "model", "verdict", "improvement_pct"])?;
            for o in outcomes.iter().filter(|o| o.metric == metric) {
                w.write_record([
                    o.optimizer.clone(),
                    o.split.to_string(),
                    o.series_id.clone(),
                    o.model.clone(),
                    o.verdict.as_str().to_string(),
                    fmt_f64(improvement_pct(metric, o.mean_a, o.mean_b)),
                ])?;
            }
            Ok(())
        })?;
        paths.push(path);
    }
    Ok(paths)
}

/// Loads results, counts cases for the configured pair and writes the case
/// table, per-cell outcomes and Z summaries into `out_dir`.
pub fn compare_results(
    results_dir: &Path,
    out_dir: &Path,
    a: Condition,
    b: Condition,
    alpha: f64,
) -> Result<CaseAnalysis, ProtocolError> {
    let store = ResultsStore::load(results_dir)?;
    if !store.failures.is_empty() {
        log::warn!("{} failed tasks are excluded from the comparison", store.failures.len());
    }
    let analysis = count_cases(&store.records, a, b, alpha);
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let z = z_summary(&analysis.tables, alpha);
    let mut cases = Vec::new();
    write_case_tables(&mut cases, &analysis.tables, a, b).map_err(csv_err(out_dir))?;
    let mut cells = Vec::new();
    write_outcomes(&mut cells, &analysis.outcomes).map_err(csv_err(out_dir))?;
    let mut zs = Vec::new();
    write_z_summary(&mut zs, &z).map_err(csv_err(out_dir))?;
    for (name, bytes) in [(CASES_FILE, cases), (OUTCOMES_FILE, cells), (Z_SUMMARY_FILE, zs)] {
        let path = out_dir.join(name);
        let tmp = path.with_extension("csv.tmp");
        fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
    }
    Ok(analysis)
}
