//! Run manifests: what was run, with which resolved inputs, and what it wrote.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the subcommand, its fully resolved settings and the seed.
    pub config_hash: String,
    pub seed: u64,
    pub version: &'static str,
    pub wall_clock_secs: f64,
    pub outputs: Vec<String>,
}

pub struct Recorder {
    started: Instant,
    command: &'static str,
    seed: u64,
    settings: Value,
}

impl Recorder {
    pub fn new(command: &'static str, seed: u64) -> Self {
        Recorder {
            started: Instant::now(),
            command,
            seed,
            settings: Value::Null,
        }
    }

    pub fn settings(&mut self, v: impl Serialize) {
        self.settings = serde_json::to_value(v).expect("settings serialize");
    }

    pub fn hash(&self) -> String {
        // serde_json maps are ordered, so this rendering is canonical
        let doc = json!({
            "command": self.command,
            "settings": self.settings,
            "seed": self.seed,
        });
        format!("{:x}", Sha256::digest(doc.to_string().as_bytes()))
    }

    /// Writes `manifest.json` into `dir`, listing every other file there.
    pub fn finish(&self, dir: &Path) -> CliResult<()> {
        let mut outputs: Vec<String> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != "manifest.json")
            .collect();
        outputs.sort();
        let m = RunManifest {
            command_line: std::env::args().collect(),
            config_hash: self.hash(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
            outputs,
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_covers_settings_and_seed() {
        let mut a = Recorder::new("pvar", 1);
        a.settings(json!({"p": 2.5}));
        let base = a.hash();
        a.settings(json!({"p": 2.0}));
        assert_ne!(a.hash(), base);
        let mut b = Recorder::new("pvar", 2);
        b.settings(json!({"p": 2.5}));
        assert_ne!(b.hash(), base);
        let mut c = Recorder::new("pvar", 1);
        c.settings(json!({"p": 2.5}));
        assert_eq!(c.hash(), base);
    }
}
