//! Experiment configuration: a TOML document with dotted sections plus
//! `key=value` overrides applied before deserialization.
//!
//! ```toml
//! [protocol]
//! splits = ["80:20"]
//! models = ["ses", "lr", "knn"]
//! conditions = ["hef", "maef"]
//! repetitions = 21
//! seed = 42
//!
//! [opt]
//! scs = "pso"
//!
//! [models.knn.space]
//! n_neighbors = { grid = [1, 3, 5, 7] }
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{EvaluationFunction, Hef, Maef};
use crate::metrics::ScaleWindow;
use crate::models::{model_by_name, Domain, DomainSpec, HyperparameterSpace, ModelError};
use crate::optimizers::OptimizerSettings;
use crate::timeseries::SplitRatio;

pub const SEED_ENV: &str = "HEF_LAB_SEED";
pub const DEFAULT_REPETITIONS: usize = 21;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("invalid override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Arm of an experiment: the fixed literature configuration, or a search
/// scored by one of the two evaluation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Baseline,
    Hef,
    Maef,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Baseline => "baseline",
            Condition::Hef => "hef",
            Condition::Maef => "maef",
        }
    }

    /// Column label used in case tables.
    pub fn label(self) -> &'static str {
        match self {
            Condition::Baseline => "Baseline",
            Condition::Hef => "HEF",
            Condition::Maef => "MAEF",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" | "fixed" => Ok(Condition::Baseline),
            "hef" => Ok(Condition::Hef),
            "maef" => Ok(Condition::Maef),
            other => Err(format!("unknown condition `{other}`")),
        }
    }
}

/// Whether exec_time holds measured wall-clock seconds or a constant zero
/// (useful when result files must be byte-for-byte reproducible).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    #[default]
    Wall,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub name: String,
    pub dataset: Option<PathBuf>,
    pub splits: Vec<SplitRatio>,
    pub models: Vec<String>,
    pub conditions: Vec<Condition>,
    pub repetitions: usize,
    pub seed: u64,
    pub alpha: f64,
    pub timing: Timing,
    /// Conditions compared by `compare`, as (A, B).
    pub pair: Option<(Condition, Condition)>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            dataset: None,
            splits: vec![SplitRatio::R80_20],
            models: vec!["ses".into(), "lr".into(), "knn".into()],
            conditions: vec![Condition::Hef, Condition::Maef],
            repetitions: DEFAULT_REPETITIONS,
            seed: 0,
            alpha: crate::stats::DEFAULT_ALPHA,
            timing: Timing::Wall,
            pair: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub scale_window: ScaleWindow,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Per-parameter domain overrides, merged into the model's own space.
    pub space: BTreeMap<String, DomainSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolConfig,
    pub opt: OptimizerSettings,
    pub hef: Hef,
    pub metrics: MetricsConfig,
    pub models: BTreeMap<String, ModelConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.protocol;
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if p.repetitions < 2 {
            return invalid(format!("protocol.repetitions must be at least 2, got {}", p.repetitions));
        }
        if p.splits.is_empty() {
            return invalid("protocol.splits is empty".into());
        }
        if p.models.is_empty() {
            return invalid("protocol.models is empty".into());
        }
        if p.conditions.len() < 2 {
            return invalid("protocol.conditions needs at least two conditions".into());
        }
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return invalid(format!("protocol.alpha must lie in (0, 1), got {}", p.alpha));
        }
        if let Some((a, b)) = p.pair {
            if a == b || !p.conditions.contains(&a) || !p.conditions.contains(&b) {
                return invalid("protocol.pair must name two distinct configured conditions".into());
            }
        }
        for name in &p.models {
            model_by_name(name).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        for name in self.models.keys() {
            if !p.models.contains(name) {
                log::warn!("space override for model `{name}`, which is not in protocol.models");
            }
            self.space_for(name).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        self.opt
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// The comparison pair, defaulting to the first two conditions.
    pub fn pair(&self) -> (Condition, Condition) {
        self.protocol
            .pair
            .unwrap_or((self.protocol.conditions[0], self.protocol.conditions[1]))
    }

    /// The model's search space with any configured overrides applied.
    pub fn space_for(&self, model: &str) -> Result<HyperparameterSpace, ModelError> {
        let m = model_by_name(model)?;
        let mut space = m.space();
        if let Some(cfg) = self.models.get(model) {
            for (param, spec) in &cfg.space {
                let domain = Domain::try_from(spec.clone()).map_err(|reason| {
                    ModelError::InvalidParameter {
                        name: format!("models.{model}.space.{param}"),
                        reason,
                    }
                })?;
                if domain.is_empty() {
                    return Err(ModelError::InvalidParameter {
                        name: format!("models.{model}.space.{param}"),
                        reason: "domain is empty".into(),
                    });
                }
                space.set(param, domain);
            }
        }
        Ok(space)
    }

    pub fn evaluation_function(&self, condition: Condition) -> Option<Box<dyn EvaluationFunction>> {
        match condition {
            Condition::Baseline => None,
            Condition::Hef => Some(Box::new(self.hef.clone())),
            Condition::Maef => Some(Box::new(Maef)),
        }
    }

    /// Seed precedence: explicit value, then the environment variable,
    /// then the configuration file.
    pub fn resolve_seed(&mut self, explicit: Option<u64>) -> Result<(), ConfigError> {
        if let Some(s) = explicit {
            self.protocol.seed = s;
        } else if let Ok(v) = std::env::var(SEED_ENV) {
            self.protocol.seed = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }
}

/// Sets a dotted key in a TOML table. The value is read as a TOML literal
/// and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(assignment.into()));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let parts: Vec<&str> = key.split('.').collect();
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(format!("{assignment} (`{part}` is not a table)")))?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ParamValue;
    use crate::optimizers::OptimizerKind;

    #[test]
    fn defaults_from_empty_document() {
        let c = ExperimentConfig::from_toml("", &[]).unwrap();
        assert_eq!(c.protocol.repetitions, 21);
        assert_eq!(c.opt.scs, OptimizerKind::Pso);
        assert_eq!(c.opt.pso.swarm_size, 20);
        assert_eq!(c.hef.weights.rmse, 0.5);
        assert_eq!(c.pair(), (Condition::Hef, Condition::Maef));
    }

    #[test]
    fn full_document() {
        let text = r#"
            [protocol]
            splits = ["91:9", "70:30"]
            models = ["knn", "rr"]
            conditions = ["baseline", "hef", "maef"]
            repetitions = 5
            seed = 7
            timing = "disabled"
            pair = ["hef", "baseline"]

            [opt]
            scs = "tpe"
            tpe.trials = 30
            grid.cap = 500

            [hef]
            stack_level4 = true
            penalties.l4 = 2.0

            [metrics]
            scale_window = "test"

            [models.knn.space]
            n_neighbors = { grid = [1, 3] }
            [models.rr.space]
            alpha = { min = 0.001, max = 1.0, scale = "log" }
        "#;
        let c = ExperimentConfig::from_toml(text, &[]).unwrap();
        assert_eq!(c.protocol.splits, vec![SplitRatio::R91_9, SplitRatio::R70_30]);
        assert_eq!(c.protocol.timing, Timing::Disabled);
        assert_eq!(c.pair(), (Condition::Hef, Condition::Baseline));
        assert_eq!(c.opt.tpe.trials, 30);
        assert_eq!(c.opt.grid.cap, 500);
        assert!(c.hef.stack_level4);
        assert_eq!(c.hef.penalties.l4, 2.0);
        assert_eq!(c.hef.penalties.l1, 1.2);
        assert_eq!(c.metrics.scale_window, ScaleWindow::Test);
        let knn = c.space_for("knn").unwrap();
        assert_eq!(knn.grid_size(), Some(2));
        let rr = c.space_for("rr").unwrap();
        assert!(rr.contains(&crate::models::HyperparameterPoint::new().with("alpha", 0.5)));
        assert!(!rr.contains(&crate::models::HyperparameterPoint::new().with("alpha", 5.0)));
    }

    #[test]
    fn overrides() {
        let c = ExperimentConfig::from_toml(
            "[protocol]\nrepetitions = 4\n",
            &[
                "protocol.repetitions=9".into(),
                "opt.pso.swarm_size = 8".into(),
                "protocol.models=[\"ses\"]".into(),
                "opt.scs=tpe".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.protocol.repetitions, 9);
        assert_eq!(c.opt.pso.swarm_size, 8);
        assert_eq!(c.protocol.models, vec!["ses".to_string()]);
        assert_eq!(c.opt.scs, OptimizerKind::Tpe);
        assert!(matches!(
            ExperimentConfig::from_toml("", &["nokey".into()]),
            Err(ConfigError::Override(_))
        ));
    }

    #[test]
    fn rejects_bad_documents() {
        for text in [
            "[protocol]\nrepetitions = 1\n",
            "[protocol]\nmodels = [\"lstm\"]\n",
            "[protocol]\nmodels = [\"prophet\"]\n",
            "[protocol]\nconditions = [\"hef\"]\n",
            "[protocol]\nsplits = [\"50:50\"]\n",
            "[protocol]\nunknown = 1\n",
            "[opt]\nscs = \"grid\"\n",
            "[models.knn.space]\nn_neighbors = { min = 5, max = 1 }\n",
        ] {
            assert!(ExperimentConfig::from_toml(text, &[]).is_err(), "{text}");
        }
    }

    #[test]
    fn grid_values_keep_types() {
        let c = ExperimentConfig::from_toml(
            "[models.dtr.space]\nmax_depth = { grid = [3, \"none\"] }\n",
            &[],
        )
        .unwrap();
        let s = c.space_for("dtr").unwrap();
        assert_eq!(
            s.params()[0].1,
            Domain::Grid(vec![ParamValue::Int(3), ParamValue::Cat("none".into())])
        );
    }

    #[test]
    fn shipped_example_parses() {
        let text = include_str!("../../../configs/example.toml");
        let c = ExperimentConfig::from_toml(text, &[]).unwrap();
        assert_eq!(c.protocol.repetitions, 21);
        assert_eq!(c.space_for("knn").unwrap().grid_size(), Some(5));
    }
}
