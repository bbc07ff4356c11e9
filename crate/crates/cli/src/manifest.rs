//! The run manifest: a JSON record written before the pipeline starts and
//! finalized afterwards, so interrupted or failed runs are detectable by
//! their status.

use crate::config::ExperimentConfig;
use krausopt::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    /// "running" until finalized, then "complete" or "failed".
    pub status: String,
    pub library_version: String,
    pub config: ExperimentConfig,
    pub per_run_seeds: Vec<u64>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: Option<u64>,
    pub wall_ms: Option<u64>,
    /// Output files relative to the manifest directory, in run order.
    pub outputs: Vec<String>,
    pub error: Option<String>,
    #[serde(skip)]
    t0: Option<Instant>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunManifest {
    pub fn begin(config: ExperimentConfig, per_run_seeds: Vec<u64>) -> Self {
        RunManifest {
            status: "running".into(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            config,
            per_run_seeds,
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
            wall_ms: None,
            outputs: Vec::new(),
            error: None,
            t0: Some(Instant::now()),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    fn finish(&mut self, status: &str) {
        self.status = status.into();
        self.finished_unix_ms = Some(now_ms());
        self.wall_ms = self.t0.map(|t| t.elapsed().as_millis() as u64);
    }

    pub fn complete(&mut self, outputs: Vec<String>) {
        self.outputs = outputs;
        self.finish("complete");
    }

    pub fn fail(&mut self, error: &krausopt::Error) {
        self.error = Some(error.to_string());
        self.finish("failed");
    }
}
