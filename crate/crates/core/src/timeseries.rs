//! Series and dataset model, temporal splitting, finite-population sample
//! sizing and stratified sampling.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("series `{0}` has no observations")]
    EmptySeries(String),
    #[error("series `{id}` has a non-finite value at t={t}")]
    NonFiniteValue { id: String, t: usize },
    #[error("series of length {len} is too short for a {ratio} split")]
    SeriesTooShort { len: usize, ratio: SplitRatio },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("target sample size {target} exceeds population of {population}")]
    TargetTooLarge { target: usize, population: usize },
    #[error("duplicate series id `{0}`")]
    DuplicateId(String),
    #[error("series `{0}` has no stratum")]
    MissingStratum(String),
    #[error("unknown frequency `{0}`")]
    UnknownFrequency(String),
    #[error("unknown split ratio `{0}`")]
    UnknownRatio(String),
}

/// Recording frequency of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Daily,
    Weekly,
    Monthly,
}

impl Frequency {
    pub fn periods_per_year(self) -> usize {
        match self {
            Frequency::Daily => 365,
            Frequency::Weekly => 52,
            Frequency::Monthly => 12,
        }
    }

    /// Dominant seasonal cycle used to size lag windows. Daily demand uses
    /// the weekly cycle; the others use their yearly cycle.
    pub fn seasonal_period(self) -> usize {
        match self {
            Frequency::Daily => 7,
            Frequency::Weekly => 52,
            Frequency::Monthly => 12,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Frequency::Daily => "daily",
            Frequency::Weekly => "weekly",
            Frequency::Monthly => "monthly",
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Frequency {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "daily" | "d" => Ok(Frequency::Daily),
            "weekly" | "w" => Ok(Frequency::Weekly),
            "monthly" | "m" => Ok(Frequency::Monthly),
            other => Err(DataError::UnknownFrequency(other.to_string())),
        }
    }
}

/// One identified, frequency-tagged demand series. Values are in temporal
/// order; index 0 is t = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    id: String,
    frequency: Frequency,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        id: impl Into<String>,
        frequency: Frequency,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        let id = id.into();
        if values.is_empty() {
            return Err(DataError::EmptySeries(id));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFiniteValue { id, t: pos + 1 });
        }
        Ok(Self {
            id,
            frequency,
            values,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A named collection of series with a stratum label per series.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    series: Vec<TimeSeries>,
    strata: BTreeMap<String, String>,
}

impl Dataset {
    /// Builds a dataset where every series is stratified by its frequency.
    pub fn new(name: impl Into<String>, series: Vec<TimeSeries>) -> Result<Self, DataError> {
        let strata = series
            .iter()
            .map(|s| (s.id.clone(), s.frequency.to_string()))
            .collect();
        Self::with_strata(name, series, strata)
    }

    pub fn with_strata(
        name: impl Into<String>,
        series: Vec<TimeSeries>,
        strata: BTreeMap<String, String>,
    ) -> Result<Self, DataError> {
        let mut seen = HashSet::with_capacity(series.len());
        for s in &series {
            if !seen.insert(s.id.as_str()) {
                return Err(DataError::DuplicateId(s.id.clone()));
            }
            if !strata.contains_key(&s.id) {
                return Err(DataError::MissingStratum(s.id.clone()));
            }
        }
        let strata = strata
            .into_iter()
            .filter(|(id, _)| seen.contains(id.as_str()))
            .collect();
        Ok(Self {
            name: name.into(),
            series,
            strata,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn strata(&self) -> &BTreeMap<String, String> {
        &self.strata
    }

    pub fn stratum_of(&self, id: &str) -> Option<&str> {
        self.strata.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|s| s.id == id)
    }
}

/// Train:test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitRatio {
    R91_9,
    R80_20,
    R70_30,
}

impl SplitRatio {
    pub const ALL: [SplitRatio; 3] = [SplitRatio::R91_9, SplitRatio::R80_20, SplitRatio::R70_30];

    /// Test share in percent.
    pub fn test_percent(self) -> usize {
        match self {
            SplitRatio::R91_9 => 9,
            SplitRatio::R80_20 => 20,
            SplitRatio::R70_30 => 30,
        }
    }

    pub fn test_fraction(self) -> f64 {
        self.test_percent() as f64 / 100.0
    }

    /// Test length for a series of `n` points: round-half-up of the test
    /// share, at least one.
    pub fn test_len(self, n: usize) -> usize {
        ((self.test_percent() * n + 50) / 100).max(1)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SplitRatio::R91_9 => "91:9",
            SplitRatio::R80_20 => "80:20",
            SplitRatio::R70_30 => "70:30",
        }
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitRatio {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "91:9" | "91/9" => Ok(SplitRatio::R91_9),
            "80:20" | "80/20" => Ok(SplitRatio::R80_20),
            "70:30" | "70/30" => Ok(SplitRatio::R70_30),
            other => Err(DataError::UnknownRatio(other.to_string())),
        }
    }
}

impl Serialize for SplitRatio {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SplitRatio {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Chronological train/test partition of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<f64>,
    pub test: Vec<f64>,
    pub ratio: SplitRatio,
}

impl Split {
    pub fn horizon(&self) -> usize {
        self.test.len()
    }
}

pub const MIN_TRAIN_LEN: usize = 3;

/// Splits `series` so that the test set holds its last `h` observations.
pub fn temporal_split(series: &TimeSeries, ratio: SplitRatio) -> Result<Split, DataError> {
    split_values(series.values(), ratio)
}

pub fn split_values(values: &[f64], ratio: SplitRatio) -> Result<Split, DataError> {
    let n = values.len();
    let too_short = DataError::SeriesTooShort { len: n, ratio };
    if n < 4 {
        return Err(too_short);
    }
    let h = ratio.test_len(n);
    if n < h + MIN_TRAIN_LEN {
        return Err(too_short);
    }
    let (train, test) = values.split_at(n - h);
    Ok(Split {
        train: train.to_vec(),
        test: test.to_vec(),
        ratio,
    })
}

/// Two-sided standard-normal quantile for a confidence level.
pub fn two_sided_z(confidence: f64) -> f64 {
    let normal = Normal::standard();
    normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

/// Cochran sample size with finite-population correction, rounded up and
/// capped at the population.
pub fn sample_size(
    population: usize,
    confidence: f64,
    margin: f64,
    proportion: f64,
) -> Result<usize, DataError> {
    if population == 0 {
        return Err(DataError::InvalidParameter("population must be ≥ 1".into()));
    }
    for (name, v) in [
        ("confidence", confidence),
        ("margin", margin),
        ("proportion", proportion),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(DataError::InvalidParameter(format!(
                "{name} must lie in (0, 1), got {v}"
            )));
        }
    }
    let z = two_sided_z(confidence);
    let n0 = z * z * proportion * (1.0 - proportion) / (margin * margin);
    let n = n0 / (1.0 + (n0 - 1.0) / population as f64);
    Ok((n.ceil() as usize).clamp(1, population))
}

/// Largest-remainder allocation of `target` across strata of the given
/// sizes. Remainder ties go to the earlier stratum.
pub fn allocate_proportional(sizes: &[usize], target: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| s * target / total).collect();
    let mut remainders: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| (s * target % total, i))
        .collect();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut missing = target - alloc.iter().sum::<usize>();
    for &(_, i) in &remainders {
        if missing == 0 {
            break;
        }
        if alloc[i] < sizes[i] {
            alloc[i] += 1;
            missing -= 1;
        }
    }
    alloc
}

/// Draws `target` series, allocating across strata proportionally and
/// sampling without replacement inside each stratum. The output keeps the
/// original dataset order.
pub fn stratified_sample(dataset: &Dataset, target: usize, seed: u64) -> Result<Dataset, DataError> {
    let population = dataset.len();
    if target > population {
        return Err(DataError::TargetTooLarge { target, population });
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.series.iter().enumerate() {
        let label = dataset
            .stratum_of(&s.id)
            .ok_or_else(|| DataError::MissingStratum(s.id.clone()))?;
        groups.entry(label).or_default().push(i);
    }
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let alloc = allocate_proportional(&sizes, target);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; population];
    for (members, &take) in groups.values().zip(&alloc) {
        for j in index::sample(&mut rng, members.len(), take) {
            chosen[members[j]] = true;
        }
    }
    let series: Vec<TimeSeries> = dataset
        .series
        .iter()
        .zip(&chosen)
        .filter(|(_, &c)| c)
        .map(|(s, _)| s.clone())
        .collect();
    let strata = series
        .iter()
        .map(|s| (s.id.clone(), dataset.strata[&s.id].clone()))
        .collect();
    Dataset::with_strata(dataset.name.clone(), series, strata)
}

/// A problem found while reading a long-format CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvIssue {
    /// 1-based line in the file; 0 for whole-file problems.
    pub line: u64,
    pub series_id: Option<String>,
    pub message: String,
}

impl fmt::Display for CsvIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.series_id {
            Some(id) => write!(f, "line {}: series `{}`: {}", self.line, id, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{} issue(s), first: {}", .0.len(), .0[0])]
    Invalid(Vec<CsvIssue>),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub const CSV_HEADER: [&str; 4] = ["series_id", "frequency", "t", "value"];

struct PendingSeries {
    id: String,
    frequency: Frequency,
    stratum: Option<String>,
    values: Vec<f64>,
    first_line: u64,
}

/// Parses the long-format CSV (`series_id,frequency,t,value[,stratum]`),
/// collecting every issue instead of stopping at the first one.
pub fn scan_csv<R: Read>(name: &str, reader: R) -> (Option<Dataset>, Vec<CsvIssue>) {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut issues = Vec::new();
    let issue = |line: u64, id: Option<&str>, msg: String| CsvIssue {
        line,
        series_id: id.map(str::to_string),
        message: msg,
    };

    let header = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            issues.push(issue(1, None, format!("unreadable header: {e}")));
            return (None, issues);
        }
    };
    let cols: Vec<&str> = header.iter().collect();
    let has_stratum = cols.len() == 5 && cols[4] == "stratum";
    if cols.len() < 4 || cols[..4] != CSV_HEADER || (cols.len() > 4 && !has_stratum) {
        issues.push(issue(
            1,
            None,
            format!(
                "header must be `series_id,frequency,t,value[,stratum]`, got `{}`",
                cols.join(",")
            ),
        ));
        return (None, issues);
    }

    let mut done: Vec<PendingSeries> = Vec::new();
    let mut finished_ids: HashSet<String> = HashSet::new();
    let mut current: Option<PendingSeries> = None;
    let mut broken: HashSet<String> = HashSet::new();

    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                issues.push(issue(line, None, format!("malformed row: {e}")));
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != cols.len() {
            issues.push(issue(
                line,
                None,
                format!("expected {} fields, found {}", cols.len(), record.len()),
            ));
            continue;
        }
        let id = record[0].to_string();
        if id.is_empty() {
            issues.push(issue(line, None, "empty series_id".into()));
            continue;
        }
        let freq = match record[1].parse::<Frequency>() {
            Ok(f) => f,
            Err(e) => {
                issues.push(issue(line, Some(&id), e.to_string()));
                broken.insert(id);
                continue;
            }
        };
        let t = match record[2].parse::<usize>() {
            Ok(t) if t >= 1 => t,
            _ => {
                issues.push(issue(
                    line,
                    Some(&id),
                    format!("t must be a positive integer, got `{}`", &record[2]),
                ));
                broken.insert(id);
                continue;
            }
        };
        let value = match record[3].parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            Ok(_) => {
                issues.push(issue(line, Some(&id), format!("non-finite value `{}`", &record[3])));
                broken.insert(id);
                continue;
            }
            Err(_) => {
                issues.push(issue(line, Some(&id), format!("non-numeric value `{}`", &record[3])));
                broken.insert(id);
                continue;
            }
        };
        let stratum = has_stratum.then(|| record[4].to_string());

        let switching = current.as_ref().is_none_or(|c| c.id != id);
        if switching {
            if let Some(prev) = current.take() {
                finished_ids.insert(prev.id.clone());
                done.push(prev);
            }
            if finished_ids.contains(&id) {
                issues.push(issue(line, Some(&id), "rows for this series are not contiguous".into()));
                broken.insert(id.clone());
            }
            if t != 1 {
                issues.push(issue(line, Some(&id), format!("series must start at t=1, found t={t}")));
                broken.insert(id.clone());
            }
            current = Some(PendingSeries {
                id,
                frequency: freq,
                stratum,
                values: vec![value],
                first_line: line,
            });
            continue;
        }
        let cur = current.as_mut().expect("current series");
        let expected = cur.values.len() + 1;
        if t != expected {
            issues.push(issue(
                line,
                Some(&id),
                format!("gap or disorder in t: expected {expected}, found {t}"),
            ));
            broken.insert(id.clone());
        }
        if freq != cur.frequency {
            issues.push(issue(
                line,
                Some(&id),
                format!("frequency changes from {} to {}", cur.frequency, freq),
            ));
            broken.insert(id.clone());
        }
        if stratum.is_some() && stratum != cur.stratum {
            issues.push(issue(line, Some(&id), "stratum changes within series".into()));
            broken.insert(id.clone());
        }
        cur.values.push(value);
    }
    if let Some(prev) = current.take() {
        done.push(prev);
    }
    if done.is_empty() && issues.is_empty() {
        issues.push(issue(0, None, "file contains no data rows".into()));
    }
    if !issues.is_empty() || !broken.is_empty() {
        return (None, issues);
    }

    let mut strata = BTreeMap::new();
    let mut series = Vec::with_capacity(done.len());
    for p in done {
        let label = p.stratum.unwrap_or_else(|| p.frequency.to_string());
        strata.insert(p.id.clone(), label);
        match TimeSeries::new(p.id, p.frequency, p.values) {
            Ok(s) => series.push(s),
            Err(e) => issues.push(issue(p.first_line, None, e.to_string())),
        }
    }
    if !issues.is_empty() {
        return (None, issues);
    }
    match Dataset::with_strata(name, series, strata) {
        Ok(ds) => (Some(ds), issues),
        Err(e) => {
            issues.push(issue(0, None, e.to_string()));
            (None, issues)
        }
    }
}

pub fn read_csv<R: Read>(name: &str, reader: R) -> Result<Dataset, LoadError> {
    match scan_csv(name, reader) {
        (Some(ds), _) => Ok(ds),
        (None, issues) => Err(LoadError::Invalid(issues)),
    }
}

pub fn load_csv(path: &std::path::Path) -> Result<Dataset, LoadError> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let file = std::fs::File::open(path)?;
    read_csv(&name, std::io::BufReader::new(file))
}

/// Writes the dataset in long format. The stratum column is emitted only
/// when some stratum differs from the series frequency.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<(), std::io::Error> {
    let custom = dataset
        .series
        .iter()
        .any(|s| dataset.strata[&s.id] != s.frequency.as_str());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = CSV_HEADER.to_vec();
    if custom {
        header.push("stratum");
    }
    w.write_record(&header)?;
    for s in &dataset.series {
        for (i, v) in s.values.iter().enumerate() {
            let t = (i + 1).to_string();
            let v = v.to_string();
            let mut row = vec![s.id.as_str(), s.frequency.as_str(), t.as_str(), v.as_str()];
            if custom {
                row.push(dataset.strata[&s.id].as_str());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(n: usize) -> TimeSeries {
        TimeSeries::new("s", Frequency::Weekly, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            TimeSeries::new("a", Frequency::Daily, vec![]),
            Err(DataError::EmptySeries(_))
        ));
        assert_eq!(
            TimeSeries::new("a", Frequency::Daily, vec![1.0, f64::NAN]),
            Err(DataError::NonFiniteValue {
                id: "a".into(),
                t: 2
            })
        );
    }

    #[test]
    fn split_examples() {
        let s = temporal_split(&series(100), SplitRatio::R80_20).unwrap();
        assert_eq!(s.train.len(), 80);
        assert_eq!(s.test.len(), 20);
        assert_eq!(s.test[0], 80.0);

        let s = temporal_split(&series(10), SplitRatio::R91_9).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (9, 1));

        for r in SplitRatio::ALL {
            assert!(matches!(
                temporal_split(&series(3), r),
                Err(DataError::SeriesTooShort { .. })
            ));
        }
    }

    #[test]
    fn split_rounds_half_up() {
        // 30% of 5 = 1.5 -> 2
        assert_eq!(SplitRatio::R70_30.test_len(5), 2);
        // 9% of 50 = 4.5 -> 5
        assert_eq!(SplitRatio::R91_9.test_len(50), 5);
        assert_eq!(SplitRatio::R91_9.test_len(4), 1);
        // 70:30 on n=4 leaves 3 for training
        let s = temporal_split(&series(4), SplitRatio::R70_30).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (3, 1));
    }

    #[test]
    fn sample_size_table_values() {
        assert_eq!(sample_size(294, 0.99, 0.05, 0.5).unwrap(), 204);
        assert_eq!(sample_size(1428, 0.99, 0.05, 0.5).unwrap(), 454);
        assert_eq!(sample_size(1, 0.99, 0.05, 0.5).unwrap(), 1);
        assert_eq!(sample_size(1_000_000_000, 0.99, 0.05, 0.5).unwrap(), 664);
        // The formula gives 456 for a population of 1454, not 650.
        assert_eq!(sample_size(1454, 0.99, 0.05, 0.5).unwrap(), 456);
    }

    #[test]
    fn sample_size_rejects_bad_parameters() {
        assert!(sample_size(0, 0.99, 0.05, 0.5).is_err());
        assert!(sample_size(10, 1.0, 0.05, 0.5).is_err());
        assert!(sample_size(10, 0.99, 0.0, 0.5).is_err());
        assert!(sample_size(10, 0.99, 0.05, 1.5).is_err());
    }

    #[test]
    fn z_for_99_percent() {
        assert!((two_sided_z(0.99) - 2.5758293).abs() < 1e-7);
    }

    #[test]
    fn allocation_60_40() {
        assert_eq!(allocate_proportional(&[60, 40], 10), vec![6, 4]);
        assert_eq!(allocate_proportional(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(allocate_proportional(&[5, 3], 8), vec![5, 3]);
    }

    fn two_strata(a: usize, b: usize) -> Dataset {
        let mut series = Vec::new();
        let mut strata = BTreeMap::new();
        for i in 0..a + b {
            let id = format!("s{i:03}");
            strata.insert(id.clone(), if i < a { "A" } else { "B" }.to_string());
            series.push(TimeSeries::new(id, Frequency::Monthly, vec![i as f64; 5]).unwrap());
        }
        Dataset::with_strata("toy", series, strata).unwrap()
    }

    #[test]
    fn stratified_sample_examples() {
        let ds = two_strata(60, 40);
        let s = stratified_sample(&ds, 10, 7).unwrap();
        let in_a = s.strata().values().filter(|v| *v == "A").count();
        assert_eq!((in_a, s.len() - in_a), (6, 4));
        assert_eq!(s, stratified_sample(&ds, 10, 7).unwrap());
        assert_eq!(stratified_sample(&ds, 100, 3).unwrap(), ds);
        assert!(matches!(
            stratified_sample(&ds, 101, 3),
            Err(DataError::TargetTooLarge { .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = TimeSeries::new("x", Frequency::Daily, vec![1.0]).unwrap();
        assert!(matches!(
            Dataset::new("d", vec![a.clone(), a]),
            Err(DataError::DuplicateId(_))
        ));
    }

    #[test]
    fn csv_round_trip_and_issues() {
        let text = "series_id,frequency,t,value\na,weekly,1,1.5\na,weekly,2,2\nb,monthly,1,3\n";
        let ds = read_csv("x", text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.get("a").unwrap().values(), &[1.5, 2.0]);
        assert_eq!(ds.stratum_of("b"), Some("monthly"));
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        assert_eq!(read_csv("x", out.as_slice()).unwrap(), ds);

        let gap = "series_id,frequency,t,value\na,weekly,1,1\na,weekly,3,2\n";
        let (ds, issues) = scan_csv("x", gap.as_bytes());
        assert!(ds.is_none());
        assert_eq!(issues[0].series_id.as_deref(), Some("a"));
        assert_eq!(issues[0].line, 3);

        let bad = "series_id,frequency,t,value\na,weekly,1,abc\n";
        let (_, issues) = scan_csv("x", bad.as_bytes());
        assert_eq!(issues[0].line, 2);
        assert!(issues[0].message.contains("non-numeric"));

        let inf = "series_id,frequency,t,value\na,weekly,1,inf\n";
        assert!(scan_csv("x", inf.as_bytes()).1[0].message.contains("non-finite"));

        let split = "series_id,frequency,t,value\na,weekly,1,1\nb,weekly,1,1\na,weekly,2,1\n";
        assert!(scan_csv("x", split.as_bytes())
            .1
            .iter()
            .any(|i| i.message.contains("contiguous")));
    }

    #[test]
    fn csv_custom_strata() {
        let text = "series_id,frequency,t,value,stratum\na,daily,1,1,food\nb,daily,1,2,toys\n";
        let ds = read_csv("x", text.as_bytes()).unwrap();
        assert_eq!(ds.stratum_of("a"), Some("food"));
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("series_id,frequency,t,value,stratum"));
    }

    proptest! {
        #[test]
        fn split_reconstructs(values in prop::collection::vec(-1e6f64..1e6, 4..300)) {
            for r in SplitRatio::ALL {
                match split_values(&values, r) {
                    Ok(s) => {
                        prop_assert!(s.test.len() >= 1);
                        prop_assert!(s.train.len() >= MIN_TRAIN_LEN);
                        let joined: Vec<f64> = s.train.iter().chain(&s.test).copied().collect();
                        prop_assert_eq!(joined, values.clone());
                    }
                    Err(_) => prop_assert!(values.len() < r.test_len(values.len()) + MIN_TRAIN_LEN),
                }
            }
        }

        #[test]
        fn sample_size_monotone(n in 1usize..20_000) {
            let a = sample_size(n, 0.99, 0.05, 0.5).unwrap();
            let b = sample_size(n + 1, 0.99, 0.05, 0.5).unwrap();
            prop_assert!(a <= n);
            prop_assert!(a <= b);
        }

        #[test]
        fn stratified_proportions(a in 1usize..80, b in 1usize..80, frac in 0.0f64..=1.0, seed: u64) {
            let ds = two_strata(a, b);
            let target = ((a + b) as f64 * frac).round() as usize;
            let s = stratified_sample(&ds, target, seed).unwrap();
            prop_assert_eq!(s.len(), target);
            let got_a = s.strata().values().filter(|v| *v == "A").count() as f64;
            let want_a = target as f64 * a as f64 / (a + b) as f64;
            prop_assert!((got_a - want_a).abs() <= 1.0);
        }
    }
}
