//! Run directory layout: resolved config, CSV tables and `summary.json`.

use std::fs;
use std::path::{Path, PathBuf};

use renewlab::persist::sha256_hex;
use renewlab::report::Report;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<renewlab::report::Check>,
    #[serde(default)]
    pub values: serde_json::Map<String, serde_json::Value>,
}

pub struct RunDir {
    pub path: PathBuf,
    config_sha: String,
    seed: u64,
}

impl RunDir {
    pub fn create(path: &Path, config: &RunConfig) -> Result<Self, Failure> {
        fs::create_dir_all(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let json = serde_json::to_string_pretty(config).expect("config serializes");
        fs::write(path.join("config.resolved.json"), &json).map_err(|e| Failure::Io(e.to_string()))?;
        Ok(RunDir { path: path.to_path_buf(), config_sha: sha256_hex(json.as_bytes()), seed: config.seed })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
        let io = |e: csv::Error| Failure::Io(format!("{name}: {e}"));
        let mut w = csv::Writer::from_path(self.file(name)).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        w.flush().map_err(|e| Failure::Io(e.to_string()))
    }

    pub fn summary(
        &self,
        command: &str,
        report: &Report,
        values: serde_json::Map<String, serde_json::Value>,
    ) -> Result<Summary, Failure> {
        let s = Summary {
            command: command.to_string(),
            version: renewlab::VERSION.to_string(),
            config_sha256: self.config_sha.clone(),
            seed: self.seed,
            pass: report.all_pass(),
            checks: report.checks.clone(),
            values,
        };
        let json = serde_json::to_string_pretty(&s).expect("summary serializes");
        fs::write(self.file("summary.json"), json).map_err(|e| Failure::Io(e.to_string()))?;
        Ok(s)
    }
}

/// Shortest round-trip formatting, so repeated runs give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}
