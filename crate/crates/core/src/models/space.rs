//! Hyperparameter points and search spaces.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Real(r) => Some(*r),
            ParamValue::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            ParamValue::Cat(s) => Some(s),
            _ => None,
        }
    }

    /// Total order: numbers compare by value and sort before categories.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ParamValue::Cat(a), ParamValue::Cat(b)) => a.cmp(b),
            (ParamValue::Cat(_), _) => Ordering::Greater,
            (_, ParamValue::Cat(_)) => Ordering::Less,
            (a, b) => a
                .as_f64()
                .unwrap()
                .total_cmp(&b.as_f64().unwrap()),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
            ParamValue::Cat(s) => f.write_str(s),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Cat(v.to_string())
    }
}

/// One configuration θ: named values in declared parameter order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HyperparameterPoint {
    entries: Vec<(String, ParamValue)>,
}

impl HyperparameterPoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.set(name, value.into());
        self
    }

    pub fn set(&mut self, name: &str, value: ParamValue) {
        match self.entries.iter_mut().find(|(k, _)| k == name) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((name.to_string(), value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.entries.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamValue)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lexicographic comparison in declared parameter order.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        for ((ka, va), (kb, vb)) in self.entries.iter().zip(&other.entries) {
            let o = ka.cmp(kb).then_with(|| va.total_cmp(vb));
            if o != Ordering::Equal {
                return o;
            }
        }
        self.entries.len().cmp(&other.entries.len())
    }
}

impl fmt::Display for HyperparameterPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// Domain of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Grid(Vec<ParamValue>),
    Real { min: f64, max: f64, scale: Scale },
    Int { min: i64, max: i64 },
}

impl Domain {
    pub fn real(min: f64, max: f64) -> Self {
        Domain::Real {
            min,
            max,
            scale: Scale::Linear,
        }
    }

    pub fn log(min: f64, max: f64) -> Self {
        Domain::Real {
            min,
            max,
            scale: Scale::Log,
        }
    }

    pub fn int_grid(values: impl IntoIterator<Item = i64>) -> Self {
        Domain::Grid(values.into_iter().map(ParamValue::Int).collect())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Domain::Grid(_))
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Domain::Grid(v) => v.is_empty(),
            Domain::Real { min, max, scale } => {
                !(min <= max) || (*scale == Scale::Log && *min <= 0.0)
            }
            Domain::Int { min, max } => min > max,
        }
    }

    pub fn contains(&self, value: &ParamValue) -> bool {
        match self {
            Domain::Grid(v) => v.iter().any(|g| g.total_cmp(value) == Ordering::Equal),
            Domain::Real { min, max, .. } => value
                .as_f64()
                .is_some_and(|x| x >= *min && x <= *max),
            Domain::Int { min, max } => match value {
                ParamValue::Int(i) => i >= min && i <= max,
                _ => false,
            },
        }
    }
}

/// How a domain is written in an experiment config:
/// `{ grid = [...] }` or `{ min = .., max = .., scale = "log" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<ParamValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
}

impl TryFrom<DomainSpec> for Domain {
    type Error = String;

    fn try_from(spec: DomainSpec) -> Result<Self, Self::Error> {
        match spec {
            DomainSpec {
                grid: Some(values),
                min: None,
                max: None,
                scale: None,
            } => Ok(Domain::Grid(values)),
            DomainSpec {
                grid: None,
                min: Some(ParamValue::Int(min)),
                max: Some(ParamValue::Int(max)),
                scale: None | Some(Scale::Linear),
            } => Ok(Domain::Int { min, max }),
            DomainSpec {
                grid: None,
                min: Some(min),
                max: Some(max),
                scale,
            } => match (min.as_f64(), max.as_f64()) {
                (Some(min), Some(max)) => Ok(Domain::Real {
                    min,
                    max,
                    scale: scale.unwrap_or_default(),
                }),
                _ => Err("min/max must be numeric".into()),
            },
            _ => Err("domain needs either `grid` or both `min` and `max`".into()),
        }
    }
}

/// The search space Θ: one domain per parameter, in declared order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HyperparameterSpace {
    params: Vec<(String, Domain)>,
}

impl HyperparameterSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, domain: Domain) -> Self {
        self.set(name, domain);
        self
    }

    pub fn set(&mut self, name: &str, domain: Domain) {
        match self.params.iter_mut().find(|(k, _)| k == name) {
            Some(slot) => slot.1 = domain,
            None => self.params.push((name.to_string(), domain)),
        }
    }

    pub fn params(&self) -> &[(String, Domain)] {
        &self.params
    }

    pub fn dims(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty() || self.params.iter().any(|(_, d)| d.is_empty())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|(_, d)| d.is_finite())
    }

    /// Number of grid points, `None` if any domain is continuous or the
    /// product overflows.
    pub fn grid_size(&self) -> Option<usize> {
        self.params.iter().try_fold(1usize, |acc, (_, d)| match d {
            Domain::Grid(v) => acc.checked_mul(v.len()),
            _ => None,
        })
    }

    /// All grid points, last parameter varying fastest.
    pub fn grid_points(&self) -> Vec<HyperparameterPoint> {
        let Some(total) = self.grid_size() else {
            return Vec::new();
        };
        let grids: Vec<(&str, &[ParamValue])> = self
            .params
            .iter()
            .map(|(k, d)| match d {
                Domain::Grid(v) => (k.as_str(), v.as_slice()),
                _ => unreachable!("checked by grid_size"),
            })
            .collect();
        let mut points = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut entries = vec![(String::new(), ParamValue::Int(0)); grids.len()];
            for (slot, (name, values)) in entries.iter_mut().zip(&grids).rev() {
                *slot = (name.to_string(), values[idx % values.len()].clone());
                idx /= values.len();
            }
            points.push(HyperparameterPoint { entries });
        }
        points
    }

    /// Whether every value in `point` that names a declared parameter lies
    /// inside that parameter's domain.
    pub fn contains(&self, point: &HyperparameterPoint) -> bool {
        point.iter().all(|(k, v)| {
            self.params
                .iter()
                .find(|(name, _)| name == k)
                .is_none_or(|(_, d)| d.contains(v))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_enumeration_order() {
        let space = HyperparameterSpace::new()
            .with("p", Domain::int_grid([0, 1]))
            .with("q", Domain::int_grid([5, 6, 7]));
        let pts = space.grid_points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0].to_string(), "p=0;q=5");
        assert_eq!(pts[1].to_string(), "p=0;q=6");
        assert_eq!(pts[5].to_string(), "p=1;q=7");
        assert!(pts.windows(2).all(|w| w[0].lex_cmp(&w[1]) == Ordering::Less));
    }

    #[test]
    fn mixed_grid_orders_numbers_first() {
        let a = ParamValue::Int(12);
        let b = ParamValue::Cat("none".into());
        assert_eq!(a.total_cmp(&b), Ordering::Less);
        assert_eq!(ParamValue::Int(2).total_cmp(&ParamValue::Real(2.0)), Ordering::Equal);
    }

    #[test]
    fn contains_and_domain_spec() {
        let d: Domain = DomainSpec {
            grid: None,
            min: Some(ParamValue::Real(1e-4)),
            max: Some(ParamValue::Real(10.0)),
            scale: Some(Scale::Log),
        }
        .try_into()
        .unwrap();
        assert!(d.contains(&ParamValue::Real(0.01)));
        assert!(!d.contains(&ParamValue::Real(11.0)));
        let i: Domain = DomainSpec {
            grid: None,
            min: Some(ParamValue::Int(1)),
            max: Some(ParamValue::Int(15)),
            scale: None,
        }
        .try_into()
        .unwrap();
        assert_eq!(i, Domain::Int { min: 1, max: 15 });
        assert!(Domain::try_from(DomainSpec {
            grid: None,
            min: None,
            max: None,
            scale: None
        })
        .is_err());
    }

    #[test]
    fn toml_domain_specs() {
        #[derive(Deserialize)]
        struct W {
            a: DomainSpec,
            b: DomainSpec,
        }
        let w: W = toml::from_str(
            "a = { grid = [2, 3, \"none\"] }\nb = { min = 0.0001, max = 10.0, scale = \"log\" }",
        )
        .unwrap();
        let a: Domain = w.a.try_into().unwrap();
        assert_eq!(
            a,
            Domain::Grid(vec![
                ParamValue::Int(2),
                ParamValue::Int(3),
                ParamValue::Cat("none".into())
            ])
        );
        let b: Domain = w.b.try_into().unwrap();
        assert_eq!(b, Domain::log(1e-4, 10.0));
    }
}
