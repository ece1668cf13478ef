//! Settings resolution: built-in defaults, then the settings file, then command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::{NoiseArgs, NoiseKindArg};
use crate::error::{CliError, CliResult};
use rstab::noise::{NoiseKind, NoiseSpec};

/// The parsed settings file, as a JSON tree.
#[derive(Debug, Clone, Default)]
pub struct SettingsFile {
    pub root: Value,
}

impl SettingsFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(SettingsFile { root: Value::Null });
        };
        let text = std::fs::read_to_string(path)?;
        let root = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::config("<file>", format!("line {}: {e}", e.line())))?
        } else {
            let t: toml::Value = toml::from_str(&text).map_err(|e| CliError::config("<file>", e.message().to_string()))?;
            serde_json::to_value(t).map_err(|e| CliError::config("<file>", e.to_string()))?
        };
        if !root.is_object() {
            return Err(CliError::config("<file>", "top level must be a table"));
        }
        Ok(SettingsFile { root })
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.root.get(key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    /// `T::default()` overlaid with the `section` block and then with `overrides`.
    pub fn resolve<T>(&self, section: &str, overrides: Value) -> CliResult<T>
    where
        T: Serialize + DeserializeOwned + Default,
    {
        let mut v = serde_json::to_value(T::default()).expect("defaults serialize");
        if let Some(block) = self.get(section) {
            merge(&mut v, block.clone());
        }
        merge(&mut v, overrides);
        typed(section, v)
    }

    /// Like [`resolve`](Self::resolve) for types without defaults; the block must exist.
    pub fn required<T: DeserializeOwned>(&self, section: &str) -> CliResult<T> {
        let v = self
            .get(section)
            .cloned()
            .ok_or_else(|| CliError::config(section, "missing block"))?;
        typed(section, v)
    }
}

fn typed<T: DeserializeOwned>(section: &str, v: Value) -> CliResult<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { section.to_string() } else { format!("{section}.{path}") };
        CliError::config(field, e.into_inner().to_string())
    })
}

/// Recursive overlay; objects merge key by key, everything else is replaced.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (_, Value::Null) => {}
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Collects the flags that were actually given.
#[derive(Default)]
pub struct Overrides(Map<String, Value>);

impl Overrides {
    pub fn set<T: Serialize>(mut self, key: &str, v: Option<T>) -> Self {
        if let Some(v) = v {
            self.0.insert(key.to_string(), serde_json::to_value(v).expect("flag values serialize"));
        }
        self
    }

    pub fn value(self) -> Value {
        Value::Object(self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    pub kind: NoiseKind,
    pub hurst: f64,
    pub dim: usize,
    pub horizon: f64,
    pub steps: usize,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        NoiseSettings {
            kind: NoiseKind::Fbm,
            hurst: 0.45,
            dim: 1,
            horizon: 1.0,
            steps: 1024,
        }
    }
}

impl NoiseSettings {
    pub fn resolve(file: &SettingsFile, a: &NoiseArgs) -> CliResult<Self> {
        let kind = a.kind.map(|k| match k {
            NoiseKindArg::Fbm => NoiseKind::Fbm,
            NoiseKindArg::BmIto => NoiseKind::BmIto,
            NoiseKindArg::BmStrat => NoiseKind::BmStrat,
        });
        let o = Overrides::default()
            .set("kind", kind)
            .set("hurst", a.hurst)
            .set("dim", a.dim)
            .set("horizon", a.horizon)
            .set("steps", a.steps);
        let s: NoiseSettings = file.resolve("noise", o.value())?;
        s.spec(0).validate()?;
        Ok(s)
    }

    pub fn spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            kind: self.kind,
            hurst: self.hurst,
            dim: self.dim,
            horizon: self.horizon,
            fine_steps: self.steps,
            seed,
        }
    }
}

/// `s,t` as two numbers.
pub fn parse_pair(s: &str, flag: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(CliError::Usage(format!("--{flag} expects two numbers `s,t`"))),
        },
        _ => Err(CliError::Usage(format!("--{flag} expects two numbers `s,t`"))),
    }
}

pub fn parse_vector(s: &str, flag: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--{flag} expects comma-separated numbers")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = SettingsFile {
            root: json!({"noise": {"hurst": 0.4, "steps": 64}}),
        };
        let o = Overrides::default().set("steps", Some(128usize)).set("dim", None::<usize>);
        let s: NoiseSettings = file.resolve("noise", o.value()).unwrap();
        assert_eq!((s.hurst, s.steps, s.dim), (0.4, 128, 1));
    }

    #[test]
    fn bad_field_reports_its_path() {
        let file = SettingsFile {
            root: json!({"noise": {"hurst": "high"}}),
        };
        match file.resolve::<NoiseSettings>("noise", Value::Null) {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "noise.hurst"),
            other => panic!("{other:?}"),
        }
        let file = SettingsFile {
            root: json!({"noise": {"hurts": 0.4}}),
        };
        assert!(matches!(
            file.resolve::<NoiseSettings>("noise", Value::Null),
            Err(CliError::Config { .. })
        ));
    }

    #[test]
    fn pairs_and_vectors() {
        assert_eq!(parse_pair("0, 1.5", "window").unwrap(), (0.0, 1.5));
        assert!(parse_pair("0", "window").is_err());
        assert_eq!(parse_vector("1,-2", "y0").unwrap(), vec![1.0, -2.0]);
    }
}
