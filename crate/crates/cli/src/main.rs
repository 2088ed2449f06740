//! hef-lab: validate demand datasets, draw stratified samples, run HEF/MAEF
//! search experiments and summarise the results.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use hef_core::config::{Condition, ConfigError, ExperimentConfig};
use hef_core::protocol::{self, OUTCOMES_FILE};
use hef_core::timeseries::{self, LoadError};

#[derive(Parser, Debug)]
#[command(name = "hef-lab", version, about = "Hierarchical evaluation function experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML experiment configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set protocol.repetitions=5`
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Master seed; takes precedence over HEF_LAB_SEED and the config file
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum number of concurrent tasks
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a long-format dataset for schema, gap and finiteness problems
    Validate {
        #[arg(long)]
        data: PathBuf,
    },
    /// Draw a stratified sample sized by Cochran's formula
    Sample {
        #[arg(long)]
        data: PathBuf,
        /// Output CSV
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
        #[arg(long, default_value_t = 0.05)]
        margin: f64,
        #[arg(long, default_value_t = 0.5)]
        proportion: f64,
    },
    /// Run (or resume) the experiment sweep
    Run {
        /// Dataset CSV; defaults to `protocol.dataset` from the config
        #[arg(long)]
        data: Option<PathBuf>,
        /// Results directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Build case tables and Z summaries from a results directory
    Compare {
        /// Results directory written by `run`
        #[arg(long)]
        results: PathBuf,
        /// Output directory; defaults to the results directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Conditions to compare, e.g. `hef,maef`
        #[arg(long, value_delimiter = ',')]
        pair: Option<Vec<Condition>>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Write per-metric improvement distributions from case outcomes
    Report {
        /// Directory holding outcomes.csv (written by `compare`), or the file itself
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit code 1 for bad input, 2 for everything else.
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Runtime(e.into()),
            _ => Failure::Invalid(e.into()),
        }
    }
}

fn load_config(global: &Global) -> Result<ExperimentConfig, Failure> {
    let mut config = match &global.config {
        Some(path) => ExperimentConfig::load(path, &global.overrides)?,
        None => ExperimentConfig::from_toml("", &global.overrides)?,
    };
    config.resolve_seed(global.seed)?;
    Ok(config)
}

fn load_dataset(path: &Path) -> Result<timeseries::Dataset, Failure> {
    timeseries::load_csv(path).map_err(|e| match e {
        LoadError::Io(io) => Failure::Runtime(anyhow!(io).context(format!("reading {}", path.display()))),
        other => Failure::Invalid(anyhow!(other).context(format!("dataset {}", path.display()))),
    })
}

fn ensure_writable_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let meta = fs::metadata(dir).with_context(|| format!("inspecting {}", dir.display()))?;
    if meta.permissions().readonly() {
        return Err(Failure::Runtime(anyhow!("{} is not writable", dir.display())));
    }
    Ok(())
}

fn validate(data: &Path) -> Result<ExitCode, Failure> {
    let file = fs::File::open(data).with_context(|| format!("reading {}", data.display()))?;
    let name = data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let (dataset, issues) = timeseries::scan_csv(&name, std::io::BufReader::new(file));
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for issue in &issues {
        let line = serde_json::to_string(issue).context("encoding issue")?;
        writeln!(out, "{line}").context("writing stdout")?;
        eprintln!("{}: {issue}", data.display());
    }
    if issues.is_empty() {
        let count = dataset.map(|d| d.len()).unwrap_or(0);
        eprintln!("{}: ok, {count} series", data.display());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{}: {} issue(s)", data.display(), issues.len());
        Ok(ExitCode::from(1))
    }
}

fn sample(
    global: &Global,
    data: &Path,
    out: &Path,
    confidence: f64,
    margin: f64,
    proportion: f64,
) -> Result<ExitCode, Failure> {
    let config = load_config(global)?;
    let dataset = load_dataset(data)?;
    let target = timeseries::sample_size(dataset.len(), confidence, margin, proportion)
        .map_err(|e| Failure::Invalid(e.into()))?;
    let sampled = timeseries::stratified_sample(&dataset, target, config.protocol.seed)
        .map_err(|e| Failure::Invalid(e.into()))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_writable_dir(parent)?;
    }
    let tmp = out.with_extension("csv.tmp");
    let file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    timeseries::write_csv(&sampled, std::io::BufWriter::new(file))
        .with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "sampled {} of {} series (seed {}) -> {}",
        sampled.len(),
        dataset.len(),
        config.protocol.seed,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run(global: &Global, data: Option<&Path>, out: &Path) -> Result<ExitCode, Failure> {
    let config = load_config(global)?;
    let data = data
        .map(Path::to_path_buf)
        .or_else(|| config.protocol.dataset.clone())
        .ok_or_else(|| Failure::Invalid(anyhow!("no dataset: pass --data or set protocol.dataset")))?;
    let dataset = load_dataset(&data)?;
    ensure_writable_dir(out)?;
    log::info!(
        "experiment `{}`: {} series, seed {}",
        config.protocol.name,
        dataset.len(),
        config.protocol.seed
    );
    let summary = protocol::run_experiment(&config, &dataset, out, global.jobs).map_err(|e| Failure::Runtime(e.into()))?;
    println!(
        "planned {} tasks: {} already done, {} completed, {} failed; {} result rows in {}",
        summary.planned,
        summary.skipped,
        summary.completed,
        summary.failed,
        summary.result_rows,
        out.join(protocol::RESULTS_FILE).display()
    );
    Ok(ExitCode::SUCCESS)
}

fn compare(
    global: &Global,
    results: &Path,
    out: Option<&Path>,
    pair: Option<&[Condition]>,
    alpha: Option<f64>,
) -> Result<ExitCode, Failure> {
    let config = load_config(global)?;
    let (a, b) = match pair {
        Some([a, b]) => (*a, *b),
        Some(_) => return Err(Failure::Invalid(anyhow!("--pair takes exactly two conditions"))),
        None => config.pair(),
    };
    if a == b {
        return Err(Failure::Invalid(anyhow!("cannot compare `{a}` with itself")));
    }
    let alpha = alpha.unwrap_or(config.protocol.alpha);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::Invalid(anyhow!("alpha must lie in (0, 1)")));
    }
    if !results.join(protocol::RESULTS_FILE).exists() {
        return Err(Failure::Invalid(anyhow!(
            "{} holds no {}",
            results.display(),
            protocol::RESULTS_FILE
        )));
    }
    let out = out.unwrap_or(results);
    ensure_writable_dir(out)?;
    let analysis = protocol::compare_results(results, out, a, b, alpha).map_err(|e| Failure::Runtime(e.into()))?;
    let skipped: u64 = analysis.tables.iter().map(|t| t.skipped).sum();
    println!(
        "{} case tables, {} cells ({} skipped) -> {}",
        analysis.tables.len(),
        analysis.outcomes.len(),
        skipped,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn report(cases: &Path, out: &Path) -> Result<ExitCode, Failure> {
    let path = if cases.is_dir() { cases.join(OUTCOMES_FILE) } else { cases.to_path_buf() };
    if !path.exists() {
        return Err(Failure::Invalid(anyhow!("{} does not exist", path.display())));
    }
    let outcomes = protocol::read_outcomes(&path).map_err(|e| Failure::Invalid(e.into()))?;
    ensure_writable_dir(out)?;
    let written = protocol::write_improvement_report(out, &outcomes).map_err(|e| Failure::Runtime(e.into()))?;
    for p in &written {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::Validate { data } => validate(data),
        Command::Sample {
            data,
            out,
            confidence,
            margin,
            proportion,
        } => sample(g, data, out, *confidence, *margin, *proportion),
        Command::Run { data, out } => run(g, data.as_deref(), out),
        Command::Compare {
            results,
            out,
            pair,
            alpha,
        } => compare(g, results, out.as_deref(), pair.as_deref(), *alpha),
        Command::Report { cases, out } => report(cases, out),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
