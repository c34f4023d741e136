//! One JSON manifest per run.

use std::path::Path;

use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;

/// File name of the manifest inside the output directory.
pub const MANIFEST_FILE: &str = "manifest.json";

/// Version string baked in at build time.
pub const VERSION: &str = env!("FRACSYM_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub version: String,
    /// `key = value` echo of the resolved configuration.
    pub config: String,
    pub wall_clock_seconds: f64,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, wall_clock_seconds: f64, summary: serde_json::Value, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            experiment: config.experiment,
            version: VERSION.to_string(),
            config: config.echo(),
            wall_clock_seconds,
            summary,
            checks,
            passed,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    /// 0 when every check passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}
