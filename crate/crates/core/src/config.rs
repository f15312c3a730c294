//! Versioned JSON configuration files.
//!
//! A file carries `schema_version` and exactly one section:
//!
//! ```json
//! { "schema_version": 1,
//!   "experiment": { "family": { "family": "power_log", "c": 0.25, "a": 1.0, "b": 0.0 },
//!                   "n": 2, "coprime": true, "q0": 1, "q": 1000,
//!                   "samples": 100000, "seed": 7, "q_grid": [10, 100, 1000] } }
//! ```
//!
//! Parse errors name the offending field by its path in the document.

use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fibering::{DiscreteSpace, ProductSet};
use crate::harness::Battery;
use crate::psi::{padic_weighted_psi, ApproxFunction, WeightFn};
use crate::sampler::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<Battery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padic: Option<PadicConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber: Option<FiberConfig>,
}

/// The single populated section of a [`Config`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Section<'a> {
    Experiment(&'a ExperimentConfig),
    Battery(&'a Battery),
    Padic(&'a PadicConfig),
    Fiber(&'a FiberConfig),
}

/// Weighted inequality `∏ ‖q α_i‖ <= ψ(q) / ∏ f_i(|q|_{p_i})` sampled at
/// `experiment.samples` random points `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PadicConfig {
    pub experiment: ExperimentConfig,
    pub primes: Vec<u64>,
    pub weights: Vec<WeightFn>,
}

impl PadicConfig {
    pub fn weighted_family(&self) -> Result<ApproxFunction> {
        padic_weighted_psi(&self.experiment.family, &self.primes, &self.weights)
    }
}

/// Product set given by rational weights (`"1/3"`) and a 0/1 matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub x_weights: Vec<String>,
    pub y_weights: Vec<String>,
    pub matrix: Vec<Vec<u8>>,
}

impl FiberConfig {
    pub fn product_set(&self) -> Result<ProductSet<BigRational>> {
        let space = |field: &str, ws: &[String]| -> Result<DiscreteSpace<BigRational>> {
            let weights = ws
                .iter()
                .map(|w| {
                    BigRational::from_str(w.trim())
                        .map_err(|_| Error::config(field, format!("`{w}` is not a rational like 1/3")))
                })
                .collect::<Result<Vec<_>>>()?;
            DiscreteSpace::new(weights).map_err(|e| Error::config(field, e.to_string()))
        };
        let x = space("fiber.x_weights", &self.x_weights)?;
        let y = space("fiber.y_weights", &self.y_weights)?;
        let member = self
            .matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| match v {
                        0 => Ok(false),
                        1 => Ok(true),
                        _ => Err(Error::config("fiber.matrix", format!("entries must be 0 or 1 (got {v})"))),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        ProductSet::new(x, y, member).map_err(|e| Error::config("fiber.matrix", e.to_string()))
    }
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { field, message } => Error::Config {
            field: format!("{prefix}.{field}"),
            message,
        },
        other => Error::config(prefix, other.to_string()),
    }
}

impl Config {
    pub fn experiment(cfg: ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: Some(cfg),
            battery: None,
            padic: None,
            fiber: None,
        }
    }

    pub fn battery(b: Battery) -> Self {
        Self {
            battery: Some(b),
            ..Self::empty()
        }
    }

    fn empty() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: None,
            battery: None,
            padic: None,
            fiber: None,
        }
    }

    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".to_string() } else { path }, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        match self.section()? {
            Section::Experiment(e) => e.validate().map_err(|e| prefixed("experiment", e)),
            Section::Battery(b) => b.validate().map_err(|e| prefixed("battery", e)),
            Section::Padic(p) => {
                p.experiment.validate().map_err(|e| prefixed("padic.experiment", e))?;
                p.weighted_family().map(|_| ()).map_err(|e| prefixed("padic", e))
            }
            Section::Fiber(f) => f.product_set().map(|_| ()),
        }
    }

    pub fn section(&self) -> Result<Section<'_>> {
        let mut found = Vec::new();
        if let Some(e) = &self.experiment {
            found.push(Section::Experiment(e));
        }
        if let Some(b) = &self.battery {
            found.push(Section::Battery(b));
        }
        if let Some(p) = &self.padic {
            found.push(Section::Padic(p));
        }
        if let Some(f) = &self.fiber {
            found.push(Section::Fiber(f));
        }
        match found.len() {
            1 => Ok(found[0]),
            0 => Err(Error::config("<root>", "expected one of experiment, battery, padic, fiber")),
            _ => Err(Error::config("<root>", "only one of experiment, battery, padic, fiber may be given")),
        }
    }

    /// Every experiment config in the file, for flag overrides.
    pub fn experiments_mut(&mut self) -> Vec<&mut ExperimentConfig> {
        let mut out: Vec<&mut ExperimentConfig> = Vec::new();
        if let Some(e) = self.experiment.as_mut() {
            out.push(e);
        }
        if let Some(b) = self.battery.as_mut() {
            out.extend(b.entries.iter_mut().map(|e| &mut e.config));
        }
        if let Some(p) = self.padic.as_mut() {
            out.push(&mut p.experiment);
        }
        out
    }

    /// Canonical serialization; re-parsing it reproduces `self`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, lowercase hex.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(compact.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPERIMENT: &str = r#"{
        "schema_version": 1,
        "experiment": {
            "family": { "family": "power_log", "c": 0.25, "a": 1.0, "b": 0.0 },
            "n": 2, "coprime": true, "q0": 1, "q": 1000,
            "samples": 1000, "seed": 7, "q_grid": [10, 100, 1000]
        }
    }"#;

    fn field_of(text: &str) -> String {
        match Config::parse(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_and_round_trips() {
        let cfg = Config::parse(EXPERIMENT).unwrap();
        assert!(matches!(cfg.section().unwrap(), Section::Experiment(_)));
        let again = Config::parse(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn errors_name_the_field() {
        let unknown_family = EXPERIMENT.replace("\"power_log\"", "\"nope\"");
        assert_eq!(field_of(&unknown_family), "experiment.family.family");
        let bad_version = EXPERIMENT.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert_eq!(field_of(&bad_version), "schema_version");
        let missing_version = EXPERIMENT.replace("\"schema_version\": 1,", "");
        assert_eq!(field_of(&missing_version), "<root>");
        let bad_q0 = EXPERIMENT.replace("\"q0\": 1", "\"q0\": 5000");
        assert_eq!(field_of(&bad_q0), "experiment.q0");
        let typo = EXPERIMENT.replace("\"samples\"", "\"sample\"");
        assert!(field_of(&typo).starts_with("experiment"));
        let bad_c = EXPERIMENT.replace("\"c\": 0.25", "\"c\": -1.0");
        assert_eq!(field_of(&bad_c), "experiment.family");
        assert_eq!(field_of(r#"{"schema_version": 1}"#), "<root>");
    }

    #[test]
    fn fiber_section() {
        let text = r#"{"schema_version": 1, "fiber": {
            "x_weights": ["1/2", "1/2"], "y_weights": ["1/3", "2/3"],
            "matrix": [[1, 1], [0, 1]] }}"#;
        let cfg = Config::parse(text).unwrap();
        let Section::Fiber(f) = cfg.section().unwrap() else { panic!() };
        assert_eq!(f.product_set().unwrap().product_measure().unwrap(), BigRational::new(5.into(), 6.into()));
        let bad = text.replace("\"2/3\"", "\"1/3\"");
        assert_eq!(field_of(&bad), "fiber.y_weights");
        let bad = text.replace("[0, 1]", "[0, 2]");
        assert_eq!(field_of(&bad), "fiber.matrix");
    }

    #[test]
    fn padic_section() {
        let text = r#"{"schema_version": 1, "padic": {
            "experiment": { "family": { "family": "power_log", "c": 1.0, "a": 1.0, "b": 0.0 },
                            "n": 1, "q0": 1, "q": 100, "samples": 4, "seed": 1 },
            "primes": [2], "weights": [{ "kind": "identity" }] }}"#;
        Config::parse(text).unwrap();
        let bad = text.replace("[2]", "[4]");
        assert_eq!(field_of(&bad), "padic");
    }
}
