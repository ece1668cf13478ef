pub mod criterion;
pub mod experiment;
pub mod models;
pub mod paths;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::args::Format;
use crate::config::SettingsFile;
use crate::error::CliResult;

pub struct Ctx {
    pub file: SettingsFile,
    pub seed: u64,
    pub format: Format,
}

impl Ctx {
    /// Prints `value` as pretty JSON, or the `csv` rendering when that format was asked for.
    pub fn emit(&self, value: &impl Serialize, csv: impl FnOnce() -> String) -> CliResult<()> {
        let text = match self.format {
            Format::Json => serde_json::to_string_pretty(value)? + "\n",
            Format::Csv => csv(),
        };
        std::io::stdout().write_all(text.as_bytes())?;
        Ok(())
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
