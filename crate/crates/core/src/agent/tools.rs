use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::guard::{PathGuard, PathVerdict};
use crate::llm::{ImageAttachment, ParamKind, ParamSpec, ToolCall, ToolSpec};
use crate::prompting::{RunPaths, AGENT_TOOLS};
use crate::sandbox::{png_dimensions, CodeExecutor, ExecutionRequest, ExecutionResult};
use crate::util::atomic_write;

pub const DEFAULT_HEAD_LINES: usize = 20;
const MAX_HEAD_LINES: usize = 1000;
/// Tool output longer than this is truncated before it goes back to the model.
const MAX_OBSERVATION_CHARS: usize = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolStatus {
    Ok,
    Error,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ToolPayload {
    Text(String),
    Execution(ExecutionResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: String,
    pub tool: String,
    pub status: ToolStatus,
    pub payload: ToolPayload,
    /// Set on denials: the path that was refused.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denied_path: Option<String>,
    /// Run-relative file written by this call (code iterations).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saved_code: Option<String>,
}

impl ToolResult {
    fn text(call: &ToolCall, status: ToolStatus, text: impl Into<String>) -> Self {
        ToolResult {
            call_id: call.id.clone(),
            tool: call.name.clone(),
            status,
            payload: ToolPayload::Text(text.into()),
            denied_path: None,
            saved_code: None,
        }
    }

    fn denied(call: &ToolCall, path: String, reason: String) -> Self {
        let mut r = Self::text(call, ToolStatus::Denied, format!("access denied: {path}: {reason}"));
        r.denied_path = Some(path);
        r
    }

    /// Observation text sent back to the model.
    pub fn observation(&self) -> String {
        let text = match &self.payload {
            ToolPayload::Text(t) => t.clone(),
            ToolPayload::Execution(r) => format!(
                "exit_status: {}\nplot_written: {}\nstdout:\n{}\nstderr:\n{}",
                serde_json::to_value(r.exit_status)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                r.plot_written,
                r.stdout,
                r.stderr
            ),
        };
        truncate(&text, MAX_OBSERVATION_CHARS)
    }
}

fn truncate(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        return text.to_string();
    }
    let kept: String = text.chars().take(max).collect();
    format!("{kept}\n[truncated]")
}

fn param(name: &str, kind: ParamKind, description: &str, required: bool) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        kind,
        description: description.into(),
        required,
    }
}

/// The five tools offered in agentic mode, in prompt order.
pub fn tool_specs() -> Vec<ToolSpec> {
    AGENT_TOOLS
        .iter()
        .map(|(name, description)| {
            let parameters = match *name {
                "list_files" => vec![param(
                    "path",
                    ParamKind::String,
                    "Directory to list, e.g. ./data/ (default)",
                    false,
                )],
                "read_file_head" => vec![
                    param("path", ParamKind::String, "File to read, e.g. ./data/<table>.csv", true),
                    param("n", ParamKind::Integer, "Number of lines (default 20)", false),
                ],
                "execute_python_code" => vec![param(
                    "code",
                    ParamKind::String,
                    "Python code; the dataset is preloaded as df",
                    true,
                )],
                "read_visualization_image" => vec![param(
                    "path",
                    ParamKind::String,
                    "Image to read (default: the target plot)",
                    false,
                )],
                "get_human_feedback" => vec![param(
                    "request",
                    ParamKind::String,
                    "What you need help with",
                    true,
                )],
                other => unreachable!("no parameter list for tool {other}"),
            };
            ToolSpec {
                name: name.to_string(),
                description: description.to_string(),
                parameters,
            }
        })
        .collect()
}

/// State a dispatcher needs for one run.
pub struct ToolContext<'a> {
    pub guard: &'a PathGuard,
    pub paths: &'a RunPaths,
    pub executor: &'a dyn CodeExecutor,
    pub dataset_csv: PathBuf,
    pub exec_timeout_s: f64,
    pub head_lines: usize,
    /// Number of code iterations saved so far.
    pub code_iterations: usize,
    pub iteration: usize,
}

fn str_arg<'c>(call: &'c ToolCall, name: &str) -> Option<&'c str> {
    call.arguments.get(name).and_then(Value::as_str)
}

fn int_arg(call: &ToolCall, name: &str) -> Option<i64> {
    match call.arguments.get(name)? {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

// Handlers return their failure as the tool result the model will see.
#[allow(clippy::result_large_err)]
impl ToolContext<'_> {
    fn guarded(&self, call: &ToolCall, path: &str) -> Result<PathBuf, ToolResult> {
        match self.guard.check(path) {
            PathVerdict::Allowed { resolved } => Ok(resolved),
            PathVerdict::Denied { path, reason } => Err(ToolResult::denied(call, path, reason)),
        }
    }

    /// Runs one validated tool call. Image payloads are returned separately so
    /// the caller can attach them to the observation message.
    pub fn dispatch(&mut self, call: &ToolCall) -> (ToolResult, Option<ImageAttachment>) {
        let outcome = match call.name.as_str() {
            "list_files" => self.list_files(call),
            "read_file_head" => self.read_file_head(call),
            "execute_python_code" => Ok(self.execute(call)),
            "read_visualization_image" => return self.read_image(call),
            "get_human_feedback" => self.feedback(call),
            other => Ok(ToolResult::text(call, ToolStatus::Error, format!("unknown tool {other}"))),
        };
        (outcome.unwrap_or_else(|r| r), None)
    }

    fn list_files(&self, call: &ToolCall) -> Result<ToolResult, ToolResult> {
        let path = str_arg(call, "path").unwrap_or("data/");
        let dir = self.guarded(call, path)?;
        let entries = std::fs::read_dir(&dir).map_err(|e| {
            ToolResult::text(call, ToolStatus::Error, format!("cannot list {path}: {e}"))
        })?;
        let mut names: Vec<String> = entries
            .filter_map(Result::ok)
            .map(|e| {
                let mut n = e.file_name().to_string_lossy().into_owned();
                if e.file_type().map(|t| t.is_dir()).unwrap_or(false) {
                    n.push('/');
                }
                n
            })
            .collect();
        names.sort();
        Ok(ToolResult::text(call, ToolStatus::Ok, names.join("\n")))
    }

    fn read_file_head(&self, call: &ToolCall) -> Result<ToolResult, ToolResult> {
        let path = str_arg(call, "path").unwrap_or_default();
        let n = int_arg(call, "n").unwrap_or(self.head_lines as i64);
        if n < 1 || n as usize > MAX_HEAD_LINES {
            return Err(ToolResult::text(
                call,
                ToolStatus::Error,
                format!("n must be between 1 and {MAX_HEAD_LINES}"),
            ));
        }
        let file = self.guarded(call, path)?;
        let f = std::fs::File::open(&file).map_err(|e| {
            ToolResult::text(call, ToolStatus::Error, format!("cannot read {path}: {e}"))
        })?;
        let mut lines = Vec::new();
        for line in BufReader::new(f).lines().take(n as usize) {
            match line {
                Ok(l) => lines.push(l),
                Err(e) => {
                    return Err(ToolResult::text(
                        call,
                        ToolStatus::Error,
                        format!("cannot read {path}: {e}"),
                    ))
                }
            }
        }
        Ok(ToolResult::text(call, ToolStatus::Ok, lines.join("\n")))
    }

    fn execute(&mut self, call: &ToolCall) -> ToolResult {
        let code = str_arg(call, "code").unwrap_or_default();
        self.code_iterations += 1;
        let name = RunPaths::code_file_name(self.code_iterations);
        if let Err(e) = atomic_write(&self.paths.dir.join(&name), code.as_bytes()) {
            self.code_iterations -= 1;
            return ToolResult::text(call, ToolStatus::Error, format!("cannot save code: {e}"));
        }
        let result = self.executor.execute(&ExecutionRequest {
            code: code.to_string(),
            dataset_csv: self.dataset_csv.clone(),
            target_plot: self.paths.target_plot.clone(),
            timeout_s: self.exec_timeout_s,
            allowed_write_dir: self.paths.dir.clone(),
        });
        ToolResult {
            call_id: call.id.clone(),
            tool: call.name.clone(),
            status: if result.is_ok() { ToolStatus::Ok } else { ToolStatus::Error },
            payload: ToolPayload::Execution(result),
            denied_path: None,
            saved_code: Some(name),
        }
    }

    fn read_image(&self, call: &ToolCall) -> (ToolResult, Option<ImageAttachment>) {
        let default = self.paths.shown(crate::prompting::TARGET_PLOT);
        let path = str_arg(call, "path").unwrap_or(&default);
        let file = match self.guarded(call, path) {
            Ok(f) => f,
            Err(r) => return (r, None),
        };
        match std::fs::read(&file) {
            Err(e) => (
                ToolResult::text(call, ToolStatus::Error, format!("cannot read {path}: {e}")),
                None,
            ),
            Ok(bytes) => match png_dimensions(&bytes) {
                None => (
                    ToolResult::text(call, ToolStatus::Error, format!("{path} is not a PNG image")),
                    None,
                ),
                Some((w, h)) => (
                    ToolResult::text(
                        call,
                        ToolStatus::Ok,
                        format!("PNG image {w}x{h}, {} bytes (attached)", bytes.len()),
                    ),
                    Some(ImageAttachment::png(&bytes)),
                ),
            },
        }
    }

    fn feedback(&self, call: &ToolCall) -> Result<ToolResult, ToolResult> {
        let request = str_arg(call, "request").unwrap_or_default();
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.paths.feedback_file)
            .map_err(|e| ToolResult::text(call, ToolStatus::Error, format!("cannot log request: {e}")))?;
        writeln!(f, "[iteration {}] {}", self.iteration, request.trim())
            .map_err(|e| ToolResult::text(call, ToolStatus::Error, format!("cannot log request: {e}")))?;
        Ok(ToolResult::text(
            call,
            ToolStatus::Ok,
            "Request logged. No human reviewer is available during this run; continue on your own.",
        ))
    }
}

/// Relative path of `p` inside `dir`, for records that must not depend on
/// where the output directory lives.
pub fn relative_to(p: &Path, dir: &Path) -> String {
    p.strip_prefix(dir)
        .unwrap_or(p)
        .to_string_lossy()
        .into_owned()
}
