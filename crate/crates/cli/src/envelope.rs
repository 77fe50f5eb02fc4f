//! Result envelopes: every JSON output carries the tool version, the fully
//! resolved configuration and the seed, so any result can be reproduced by
//! replaying its own config.

use serde::Serialize;
use std::path::Path;

use crate::error::{CliError, Result};

pub const ENVELOPE_SCHEMA: &str = "nvcharge-envelope";
pub const ENVELOPE_VERSION: &str = "1.0";

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct ResultEnvelope<C: Serialize, P: Serialize> {
    pub schema: &'static str,
    pub schema_version: &'static str,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: C,
    pub payload: P,
    /// Only present on request (`--timing`): wall-clock values would break
    /// byte-identical reruns.
    pub timing: Option<Timing>,
}

impl<C: Serialize, P: Serialize> ResultEnvelope<C, P> {
    pub fn new(command: &'static str, seed: u64, config: C, payload: P) -> Self {
        Self {
            schema: ENVELOPE_SCHEMA,
            schema_version: ENVELOPE_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            payload,
            timing: None,
        }
    }

    pub fn with_timing(mut self, timing: Option<Timing>) -> Self {
        self.timing = timing;
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(CliError::io(path))?;
            }
        }
        let mut text = serde_json::to_string_pretty(self).expect("serializable envelope");
        text.push('\n');
        std::fs::write(path, text).map_err(CliError::io(path))
    }
}

/// Load an envelope written by another command and hand back its payload.
pub fn read_payload(path: &Path, expect_command: &str) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_str())
        .unwrap_or("0");
    let major: u32 = version.split('.').next().and_then(|v| v.parse().ok()).unwrap_or(0);
    if major > 1 {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            found: format!("{ENVELOPE_SCHEMA} v{version}"),
            supported: 1,
        });
    }
    let command = value.get("command").and_then(|v| v.as_str()).unwrap_or("");
    if command != expect_command {
        return Err(CliError::Usage(format!(
            "{} holds a '{command}' result, expected '{expect_command}'",
            path.display()
        )));
    }
    value
        .get("payload")
        .cloned()
        .ok_or_else(|| CliError::Usage(format!("{} has no payload", path.display())))
}
