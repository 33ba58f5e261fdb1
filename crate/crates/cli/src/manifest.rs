//! Run manifest: everything needed to reproduce a run bit-exactly under
//! deterministic mode, written atomically at run end.

use std::path::Path;

use serde::Serialize;

use sdr_core::training::TrainConfig;

use crate::common::{write_atomic, CliResult};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub code_version: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<TrainConfig>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            format_version: 1,
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: String::new(),
            status: "ok".to_string(),
            config: None,
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self, status: &str, outputs: Vec<String>) {
        self.finished_at = chrono::Utc::now().to_rfc3339();
        self.status = status.to_string();
        self.outputs = outputs;
    }

    pub fn write(&self, path: &Path) -> CliResult {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| crate::common::io_error("serializing manifest", e))?;
        write_atomic(path, &json)
    }
}
