use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use smallball::dist::{DiscreteDist, WeightVector};
use smallball::num::{self, Rational};

use crate::CliError;

/// The JSON config file. Every field is optional; command-line flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        // input paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for v in cfg.inputs.values_mut() {
            if v != "rademacher" && Path::new(v.as_str()).is_relative() {
                *v = base.join(&*v).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }
}

/// Merged parameters of one run, with typed accessors.
#[derive(Debug, Clone, Default)]
pub struct Params {
    pub inputs: BTreeMap<String, String>,
    pub values: BTreeMap<String, Value>,
}

fn bad(key: &str, v: &Value, what: &str) -> CliError {
    CliError::Usage(format!("parameter {key} = {v} is not {what}"))
}

impl Params {
    pub fn new(cfg: &ExperimentConfig, inputs: BTreeMap<String, String>, flags: BTreeMap<String, Value>) -> Self {
        let mut p = Params {
            inputs: cfg.inputs.clone(),
            values: cfg.params.clone(),
        };
        p.inputs.extend(inputs);
        p.values.extend(flags);
        p
    }

    /// Checks that every referenced input file exists.
    pub fn validate(&self) -> Result<(), CliError> {
        for (k, v) in &self.inputs {
            if !(k == "dist" && v == "rademacher") && !Path::new(v).exists() {
                return Err(CliError::Usage(format!("input {k}: {v} does not exist")));
            }
        }
        Ok(())
    }

    pub fn set_default(&mut self, key: &str, v: impl Into<Value>) {
        self.values.entry(key.to_string()).or_insert_with(|| v.into());
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key).filter(|v| !v.is_null())
    }

    fn require(&self, key: &str) -> Result<&Value, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Usage(format!("missing parameter {key}")))
    }

    pub fn rational(&self, key: &str) -> Result<Rational, CliError> {
        let v = self.require(key)?;
        num::from_json(v).map_err(|_| bad(key, v, "a rational number"))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let v = self.require(key)?;
        match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.parse().ok().or_else(|| num::parse_rational(s).ok().map(|r| num::to_f64(&r))),
            _ => None,
        }
        .ok_or_else(|| bad(key, v, "a number"))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        let v = self.require(key)?;
        match v {
            Value::Number(n) => n.as_u64(),
            Value::String(s) => s.parse().ok(),
            _ => None,
        }
        .ok_or_else(|| bad(key, v, "a nonnegative integer"))
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        Ok(self.u64(key)? as usize)
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key).map(|_| self.usize(key)).transpose()
    }

    pub fn string(&self, key: &str) -> Result<String, CliError> {
        let v = self.require(key)?;
        match v {
            Value::String(s) => Ok(s.clone()),
            other => Ok(other.to_string()),
        }
    }

    pub fn has(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    /// A list given as a JSON array or a comma-separated string.
    pub fn list(&self, key: &str) -> Result<Vec<Value>, CliError> {
        let v = self.require(key)?;
        Ok(match v {
            Value::Array(xs) => xs.clone(),
            Value::String(s) => s
                .split(',')
                .map(|t| Value::String(t.trim().to_string()))
                .filter(|t| t.as_str() != Some(""))
                .collect(),
            other => vec![other.clone()],
        })
    }

    pub fn rational_list(&self, key: &str) -> Result<Vec<Rational>, CliError> {
        self.list(key)?
            .iter()
            .map(|v| num::from_json(v).map_err(|_| bad(key, v, "a rational number")))
            .collect()
    }

    pub fn dist(&self) -> Result<DiscreteDist, CliError> {
        match self.inputs.get("dist").map(String::as_str) {
            None | Some("rademacher") => Ok(DiscreteDist::rademacher()),
            Some(path) => read_json(path),
        }
    }

    pub fn weights(&self) -> Result<WeightVector, CliError> {
        let path = self
            .inputs
            .get("weights")
            .ok_or_else(|| CliError::Usage("missing input --weights".into()))?;
        read_json(path)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid input {path}: {e}")))
}
