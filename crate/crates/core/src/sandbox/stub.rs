use std::time::Instant;

use super::{CapabilityReport, CodeExecutor, ExecutionRequest, ExecutionResult, ExitStatus, SandboxError};
use crate::util::atomic_write;

/// Valid 1x1 RGBA PNG.
pub(crate) const ONE_PIXEL_PNG: &[u8] = &[
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52,
    0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x06, 0x00, 0x00, 0x00, 0x1f, 0x15, 0xc4,
    0x89, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x00, 0x01, 0x00, 0x00,
    0x05, 0x00, 0x01, 0x0d, 0x0a, 0x2d, 0xb4, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae,
    0x42, 0x60, 0x82,
];

const PLOT_MARKERS: [&str; 5] = ["plt.", ".plot(", "savefig", "sns.", "df.plot"];

/// Deterministic stand-in for the Python harness. It does not interpret
/// code; it pattern-matches a few constructs:
///
/// - a missing dataset is a `setup_error`;
/// - `raise` or `1/0` yields a `runtime_error` with a Python-style traceback;
/// - `print(len(df))` prints the dataset's row count;
/// - any plotting call writes a 1x1 PNG to the target path.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubExecutor;

impl StubExecutor {
    fn row_count(path: &std::path::Path) -> Result<usize, String> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
        let mut n = 0;
        for record in reader.records() {
            record.map_err(|e| e.to_string())?;
            n += 1;
        }
        Ok(n)
    }

    fn exception(code: &str) -> Option<String> {
        if code.contains("1/0") || code.contains("1 / 0") {
            return Some("ZeroDivisionError: division by zero".into());
        }
        let line = code.lines().find(|l| l.trim_start().starts_with("raise"))?;
        let raised = line.trim_start().trim_start_matches("raise").trim();
        let name: String = raised
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .collect();
        let message = raised
            .split_once('(')
            .map(|(_, rest)| rest.trim_end_matches(')').trim_matches(|c| c == '"' || c == '\''))
            .unwrap_or("");
        let name = if name.is_empty() { "RuntimeError".to_string() } else { name };
        Some(format!("{name}: {message}"))
    }
}

impl CodeExecutor for StubExecutor {
    fn name(&self) -> &str {
        "stub"
    }

    fn handshake(&self) -> Result<CapabilityReport, SandboxError> {
        Ok(CapabilityReport {
            harness_version: "stub".into(),
            python_version: None,
            libraries: Default::default(),
        })
    }

    fn execute(&self, request: &ExecutionRequest) -> ExecutionResult {
        let started = Instant::now();
        if let Err(e) = request.validate() {
            return ExecutionResult::setup_error(e.to_string());
        }
        let rows = match Self::row_count(&request.dataset_csv) {
            Ok(n) => n,
            Err(e) => {
                return ExecutionResult::setup_error(format!(
                    "cannot load dataset {}: {e}",
                    request.dataset_csv.display()
                ))
            }
        };
        let mut result = ExecutionResult {
            exit_status: ExitStatus::Ok,
            stdout: String::new(),
            stderr: String::new(),
            plot_written: false,
            duration_s: 0.0,
        };
        if let Some(exc) = Self::exception(&request.code) {
            result.exit_status = ExitStatus::RuntimeError;
            result.stderr = format!(
                "Traceback (most recent call last):\n  File \"<analysis>\", line 1, in <module>\n{exc}\n"
            );
        } else {
            if request.code.contains("print(len(df))") {
                result.stdout = format!("{rows}\n");
            }
            if PLOT_MARKERS.iter().any(|m| request.code.contains(m)) {
                match atomic_write(&request.target_plot, ONE_PIXEL_PNG) {
                    Ok(()) => result.plot_written = true,
                    Err(e) => {
                        result.exit_status = ExitStatus::RuntimeError;
                        result.stderr = format!("cannot save figure: {e}\n");
                    }
                }
            }
        }
        result.duration_s = started.elapsed().as_secs_f64();
        result
    }
}
