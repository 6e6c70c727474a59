//! Execution of model-written analysis code.
//!
//! The real executor is an external harness process (see `harness/protocol.md`)
//! driven through [`HarnessClient`]. When its handshake fails the pipeline
//! falls back to [`StubExecutor`], a deterministic stand-in that lets the rest
//! of the system run and be tested without Python.

mod harness;
mod stub;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use harness::HarnessClient;
pub use stub::StubExecutor;

pub const DEFAULT_TIMEOUT_S: f64 = 60.0;
/// Libraries the harness must report for agentic execution.
pub const REQUIRED_LIBRARIES: [&str; 4] = ["pandas", "matplotlib", "seaborn", "numpy"];

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("harness unavailable: {0}")]
    Unavailable(String),
    #[error("harness is missing required libraries: {}", .0.join(", "))]
    MissingLibraries(Vec<String>),
    #[error("invalid execution request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRequest {
    pub code: String,
    pub dataset_csv: PathBuf,
    pub target_plot: PathBuf,
    pub timeout_s: f64,
    pub allowed_write_dir: PathBuf,
}

impl ExecutionRequest {
    pub fn validate(&self) -> Result<(), SandboxError> {
        if self.code.trim().is_empty() {
            return Err(SandboxError::InvalidRequest("code is empty".into()));
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(SandboxError::InvalidRequest(format!(
                "timeout_s must be positive, got {}",
                self.timeout_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    RuntimeError,
    Timeout,
    SetupError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub exit_status: ExitStatus,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub plot_written: bool,
    #[serde(default)]
    pub duration_s: f64,
}

impl ExecutionResult {
    pub fn setup_error(message: impl Into<String>) -> Self {
        ExecutionResult {
            exit_status: ExitStatus::SetupError,
            stdout: String::new(),
            stderr: message.into(),
            plot_written: false,
            duration_s: 0.0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.exit_status == ExitStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityReport {
    pub harness_version: String,
    #[serde(default)]
    pub python_version: Option<String>,
    /// Library name to version; `None` when the import failed.
    #[serde(default)]
    pub libraries: BTreeMap<String, Option<String>>,
}

impl CapabilityReport {
    pub fn missing(&self) -> Vec<String> {
        REQUIRED_LIBRARIES
            .iter()
            .filter(|l| !matches!(self.libraries.get(**l), Some(Some(_))))
            .map(|l| l.to_string())
            .collect()
    }
}

pub trait CodeExecutor: Send + Sync {
    fn name(&self) -> &str;
    fn handshake(&self) -> Result<CapabilityReport, SandboxError>;
    fn execute(&self, request: &ExecutionRequest) -> ExecutionResult;
}

/// Uses the harness when its handshake succeeds, else the stub.
pub fn select_executor(harness: Option<HarnessClient>) -> Box<dyn CodeExecutor> {
    if let Some(h) = harness {
        match h.handshake() {
            Ok(report) => {
                tracing::info!(version = %report.harness_version, "using sandbox harness");
                return Box::new(h);
            }
            Err(e) => tracing::warn!(error = %e, "sandbox harness unavailable, using stub executor"),
        }
    }
    Box::new(StubExecutor)
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Width and height from a PNG header.
pub fn png_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    if bytes.len() < 24 || &bytes[..8] != PNG_SIGNATURE || &bytes[12..16] != b"IHDR" {
        return None;
    }
    let w = u32::from_be_bytes(bytes[16..20].try_into().ok()?);
    let h = u32::from_be_bytes(bytes[20..24].try_into().ok()?);
    Some((w, h))
}

/// True when `path` holds a non-empty PNG.
pub fn is_png_file(path: &Path) -> bool {
    std::fs::read(path)
        .map(|b| png_dimensions(&b).is_some())
        .unwrap_or(false)
}
