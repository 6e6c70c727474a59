//! Run orchestration for both experiment modes.
//!
//! A run retrieves the top-1 table for the task, assembles the prompt and
//! then either makes a single completion (zero-shot) or drives the tool loop
//! (agentic) for at most `max_iters` model turns. Everything a run produces
//! lives under `<output_dir>/<run_id>/`:
//!
//! ```text
//! manifest.json   run record plus the settings it ran with
//! llm_log         one JSON line per model call
//! agent_log       one JSON line per loop event
//! code_iter_<n>.py
//! plot.png
//! feedback.txt    requests sent to get_human_feedback
//! ```

mod guard;
mod tools;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::catalog::{load_dataset, sample_row, CatalogError, StoredDataset};
use crate::llm::{ChatProvider, FinishReason, Gateway, LlmError, Message, ModelTurn, ProviderSettings, RetryPolicy};
use crate::prompting::{
    assemble_agentic, assemble_zero_shot, dataset_context, ModuleId, PromptBundle, PromptError,
    RunPaths,
};
use crate::retrieval::{EmbeddingProvider, RankedMatch, RetrievalError, RetrievalIndex};
use crate::sandbox::{is_png_file, CodeExecutor, ExecutionRequest, DEFAULT_TIMEOUT_S};
use crate::tasks::TaskSpec;
use crate::util::{atomic_write, sanitize_component};

pub use guard::{canonicalize_lenient, PathGuard, PathVerdict};
pub use tools::{tool_specs, ToolPayload, ToolResult, ToolStatus, DEFAULT_HEAD_LINES};

pub const DEFAULT_MAX_ITERS: usize = 25;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AgentError + '_ {
    move |source| AgentError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ZeroShot,
    Agentic,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ZeroShot => "zero_shot",
            Mode::Agentic => "agentic",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "zero_shot" | "zero-shot" => Ok(Mode::ZeroShot),
            "agentic" => Ok(Mode::Agentic),
            other => Err(format!("unknown mode {other:?} (zero_shot, agentic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub max_iters: usize,
    pub enabled_modules: BTreeSet<ModuleId>,
    pub mode: Mode,
    /// Label for the model + settings combination, e.g. `o1-high`.
    pub model_config: String,
    /// Recorded in the manifest; the provider itself is passed to [`AgentRunner::run`].
    pub provider: Option<ProviderSettings>,
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub exec_timeout_s: f64,
    pub head_lines: usize,
}

impl AgentConfig {
    pub fn new(model_config: impl Into<String>, mode: Mode, data_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        AgentConfig {
            max_iters: DEFAULT_MAX_ITERS,
            enabled_modules: BTreeSet::new(),
            mode,
            model_config: model_config.into(),
            provider: None,
            data_dir: data_dir.into(),
            output_dir: output_dir.into(),
            exec_timeout_s: DEFAULT_TIMEOUT_S,
            head_lines: DEFAULT_HEAD_LINES,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_iters == 0 {
            return Err(AgentError::Config("max_iters must be at least 1".into()));
        }
        if self.model_config.trim().is_empty() {
            return Err(AgentError::Config("model_config is empty".into()));
        }
        if !(self.exec_timeout_s.is_finite() && self.exec_timeout_s > 0.0) {
            return Err(AgentError::Config("exec_timeout_s must be positive".into()));
        }
        if self.head_lines == 0 {
            return Err(AgentError::Config("head_lines must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    ExhaustedIters,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::ExhaustedIters => "exhausted_iters",
            RunStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: ModelTurn,
    pub tool_results: Vec<ToolResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub model_config: String,
    pub mode: Mode,
    pub task: TaskSpec,
    pub retrieved: RankedMatch,
    pub turns: Vec<TurnRecord>,
    /// Saved code files, relative to the run directory, in execution order.
    pub code_iterations: Vec<String>,
    /// Relative to the run directory.
    pub final_plot: Option<String>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub prompt_hashes: BTreeMap<String, String>,
    pub executor: String,
    pub started_unix_ms: u64,
    pub duration_s: f64,
}

impl RunRecord {
    /// Copy with run id, timestamps and durations cleared, for comparing
    /// replays of the same script.
    pub fn normalized(&self) -> RunRecord {
        let mut r = self.clone();
        r.run_id.clear();
        r.started_unix_ms = 0;
        r.duration_s = 0.0;
        for t in &mut r.turns {
            for res in &mut t.tool_results {
                if let ToolPayload::Execution(e) = &mut res.payload {
                    e.duration_s = 0.0;
                }
            }
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub max_iters: usize,
    pub modules: Vec<ModuleId>,
    pub exec_timeout_s: f64,
    /// No memory cap is applied to executed code.
    pub memory_limit_mb: Option<u64>,
    pub head_lines: usize,
    pub provider: Option<ProviderSettings>,
    pub provider_name: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub record: RunRecord,
    pub settings: RunSettings,
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, AgentError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| AgentError::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}

/// Body of the first fenced code block (the language tag line is dropped).
pub fn extract_code_block(text: &str) -> Option<String> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```")?;
    let code = body[..end].trim_end();
    (!code.trim().is_empty()).then(|| format!("{code}\n"))
}

struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    fn open(path: &Path) -> Result<Self, AgentError> {
        let file = File::create(path).map_err(io_err(path))?;
        Ok(EventLog {
            path: path.to_path_buf(),
            file,
        })
    }

    fn event(&mut self, value: serde_json::Value) -> Result<(), AgentError> {
        let mut line = serde_json::to_vec(&value).expect("event serializes");
        line.push(b'\n');
        self.file.write_all(&line).map_err(io_err(&self.path))
    }
}

struct Outcome {
    turns: Vec<TurnRecord>,
    status: RunStatus,
    reason: Option<String>,
    bundle: PromptBundle,
}

fn failed(turns: Vec<TurnRecord>, bundle: PromptBundle, reason: impl Into<String>) -> Outcome {
    Outcome {
        turns,
        status: RunStatus::Failed,
        reason: Some(reason.into()),
        bundle,
    }
}

/// Executes runs against a fixed index, embedder and executor. Shareable
/// across threads; each [`run`](AgentRunner::run) call is independent.
pub struct AgentRunner<'a> {
    config: AgentConfig,
    index: &'a RetrievalIndex,
    embedder: &'a dyn EmbeddingProvider,
    executor: &'a dyn CodeExecutor,
    retry: RetryPolicy,
}

impl<'a> AgentRunner<'a> {
    pub fn new(
        config: AgentConfig,
        index: &'a RetrievalIndex,
        embedder: &'a dyn EmbeddingProvider,
        executor: &'a dyn CodeExecutor,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(AgentRunner {
            config,
            index,
            embedder,
            executor,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn run_id(&self, task: &TaskSpec) -> String {
        sanitize_component(&format!(
            "{}-{}-{}",
            self.config.model_config, self.config.mode, task.id
        ))
    }

    pub fn run_paths(&self, task: &TaskSpec) -> Result<RunPaths, AgentError> {
        Ok(RunPaths::new(&self.config.output_dir, &self.run_id(task))?)
    }

    /// Record of an earlier run of `task`, if its manifest is readable.
    pub fn existing(&self, task: &TaskSpec) -> Option<RunRecord> {
        let paths = self.run_paths(task).ok()?;
        read_manifest(&paths.manifest).ok().map(|m| m.record)
    }

    pub fn run(&self, task: &TaskSpec, provider: Box<dyn ChatProvider>) -> Result<RunRecord, AgentError> {
        let started = Instant::now();
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let paths = self.run_paths(task)?;
        if paths.dir.exists() {
            std::fs::remove_dir_all(&paths.dir).map_err(io_err(&paths.dir))?;
        }
        std::fs::create_dir_all(&paths.dir).map_err(io_err(&paths.dir))?;

        let top = self
            .index
            .query(&task.prompt, 1, self.embedder)?
            .into_iter()
            .next()
            .ok_or(RetrievalError::EmptyIndex)?;
        let (table, meta) = load_dataset(&self.config.data_dir, &top.table)?;
        let dataset_csv = StoredDataset::paths_for(&self.config.data_dir, &top.table).csv_path;

        let mut gateway = Gateway::new(provider)
            .with_retry(self.retry)
            .with_log(&paths.llm_log)?;
        let mut log = EventLog::open(&paths.log_file)?;
        log.event(json!({"event": "start", "run_id": paths.run_id, "mode": self.config.mode,
            "task": task, "retrieved": top, "executor": self.executor.name()}))?;

        let outcome = match self.config.mode {
            Mode::ZeroShot => {
                let bundle = assemble_zero_shot(
                    &meta,
                    sample_row(&table)?,
                    &task.prompt,
                    &self.config.enabled_modules,
                )?;
                self.write_prompt(&paths, &bundle)?;
                self.zero_shot(bundle, &paths, &dataset_csv, &mut gateway, &mut log)?
            }
            Mode::Agentic => {
                let context = dataset_context(&meta, &format!("./data/{}.csv", top.table));
                let bundle = assemble_agentic(&paths, &context, &self.config.enabled_modules)?;
                self.write_prompt(&paths, &bundle)?;
                self.agentic(bundle, task, &paths, dataset_csv, &mut gateway, &mut log)?
            }
        };

        let code_iterations: Vec<String> = outcome
            .turns
            .iter()
            .flat_map(|t| &t.tool_results)
            .filter_map(|r| r.saved_code.clone())
            .collect();
        let final_plot = is_png_file(&paths.target_plot)
            .then(|| tools::relative_to(&paths.target_plot, &paths.dir));
        let record = RunRecord {
            run_id: paths.run_id.clone(),
            model_config: self.config.model_config.clone(),
            mode: self.config.mode,
            task: task.clone(),
            retrieved: top,
            turns: outcome.turns,
            code_iterations,
            final_plot,
            status: outcome.status,
            reason: outcome.reason,
            prompt_hashes: outcome.bundle.hashes(),
            executor: self.executor.name().to_string(),
            started_unix_ms,
            duration_s: started.elapsed().as_secs_f64(),
        };
        log.event(json!({"event": "finish", "status": record.status, "reason": record.reason,
            "code_iterations": record.code_iterations.len(), "model_calls": gateway.calls()}))?;

        let manifest = RunManifest {
            record: record.clone(),
            settings: RunSettings {
                max_iters: self.config.max_iters,
                modules: self.config.enabled_modules.iter().copied().collect(),
                exec_timeout_s: self.config.exec_timeout_s,
                memory_limit_mb: None,
                head_lines: self.config.head_lines,
                provider: self.config.provider.clone(),
                provider_name: gateway.provider_name().to_string(),
                model: gateway.model().to_string(),
            },
        };
        let bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        atomic_write(&paths.manifest, &bytes).map_err(io_err(&paths.manifest))?;
        tracing::info!(run_id = %record.run_id, status = ?record.status, "run finished");
        Ok(record)
    }

    fn write_prompt(&self, paths: &RunPaths, bundle: &PromptBundle) -> Result<(), AgentError> {
        let mut text = String::new();
        if !bundle.system_text.is_empty() {
            text.push_str("=== system ===\n");
            text.push_str(&bundle.system_text);
        }
        if let Some(user) = &bundle.user_text {
            text.push_str("=== user ===\n");
            text.push_str(user);
        }
        let path = paths.dir.join("prompt.txt");
        atomic_write(&path, text.as_bytes()).map_err(io_err(&path))
    }

    fn zero_shot(
        &self,
        bundle: PromptBundle,
        paths: &RunPaths,
        dataset_csv: &Path,
        gateway: &mut Gateway,
        log: &mut EventLog,
    ) -> Result<Outcome, AgentError> {
        let user = bundle.user_text.clone().unwrap_or_default();
        let turn = match gateway.complete(&bundle.system_text, &[Message::user(user)], &[]) {
            Ok(t) => t,
            Err(e) => return Ok(failed(Vec::new(), bundle, format!("provider error: {e}"))),
        };
        log.event(json!({"event": "turn", "iteration": 1, "turn": turn}))?;
        if turn.finish_reason == FinishReason::Error {
            let reason = turn.diagnostics.clone().unwrap_or_else(|| "provider error".into());
            return Ok(failed(vec![TurnRecord { turn, tool_results: vec![] }], bundle, reason));
        }
        let Some(code) = extract_code_block(&turn.text) else {
            return Ok(failed(vec![TurnRecord { turn, tool_results: vec![] }], bundle, "no code block"));
        };
        let name = RunPaths::code_file_name(1);
        let code_path = paths.dir.join(&name);
        atomic_write(&code_path, code.as_bytes()).map_err(io_err(&code_path))?;
        let result = self.executor.execute(&ExecutionRequest {
            code,
            dataset_csv: dataset_csv.to_path_buf(),
            target_plot: paths.target_plot.clone(),
            timeout_s: self.config.exec_timeout_s,
            allowed_write_dir: paths.dir.clone(),
        });
        log.event(json!({"event": "execution", "iteration": 1, "result": result}))?;
        let (status, reason) = match (result.is_ok(), result.plot_written) {
            (true, true) => (RunStatus::Completed, None),
            (true, false) => (RunStatus::Failed, Some("code ran but produced no plot".to_string())),
            (false, _) => (
                RunStatus::Failed,
                Some(format!("execution failed: {:?}", result.exit_status)),
            ),
        };
        let exec = ToolResult {
            call_id: "zero_shot".into(),
            tool: "execute_python_code".into(),
            status: if result.is_ok() { ToolStatus::Ok } else { ToolStatus::Error },
            payload: ToolPayload::Execution(result),
            denied_path: None,
            saved_code: Some(name),
        };
        Ok(Outcome {
            turns: vec![TurnRecord { turn, tool_results: vec![exec] }],
            status,
            reason,
            bundle,
        })
    }

    fn agentic(
        &self,
        bundle: PromptBundle,
        task: &TaskSpec,
        paths: &RunPaths,
        dataset_csv: PathBuf,
        gateway: &mut Gateway,
        log: &mut EventLog,
    ) -> Result<Outcome, AgentError> {
        let guard = PathGuard::new(&self.config.data_dir, &self.config.output_dir, &paths.dir)
            .map_err(io_err(&paths.dir))?;
        let specs = tool_specs();
        let mut ctx = tools::ToolContext {
            guard: &guard,
            paths,
            executor: self.executor,
            dataset_csv,
            exec_timeout_s: self.config.exec_timeout_s,
            head_lines: self.config.head_lines,
            code_iterations: 0,
            iteration: 0,
        };
        let mut history = vec![Message::user(task.prompt.clone())];
        let mut turns = Vec::new();

        for iteration in 1..=self.config.max_iters {
            ctx.iteration = iteration;
            let turn = match gateway.complete(&bundle.system_text, &history, &specs) {
                Ok(t) => t,
                Err(e) => return Ok(failed(turns, bundle, format!("provider error: {e}"))),
            };
            log.event(json!({"event": "turn", "iteration": iteration, "turn": turn}))?;

            if turn.finish_reason == FinishReason::Error {
                let reason = turn.diagnostics.clone().unwrap_or_else(|| "provider error".into());
                turns.push(TurnRecord { turn, tool_results: vec![] });
                return Ok(failed(turns, bundle, reason));
            }
            if turn.tool_calls.is_empty() {
                turns.push(TurnRecord { turn, tool_results: vec![] });
                let plot_ok = is_png_file(&paths.target_plot);
                return Ok(if plot_ok && ctx.code_iterations > 0 {
                    Outcome {
                        turns,
                        status: RunStatus::Completed,
                        reason: None,
                        bundle,
                    }
                } else {
                    failed(turns, bundle, "model stopped without producing a plot")
                });
            }

            history.push(Message::assistant(&turn));
            let mut results = Vec::new();
            for call in &turn.tool_calls {
                let (result, image) = ctx.dispatch(call);
                log.event(json!({"event": "tool", "iteration": iteration, "result": result}))?;
                let mut msg = Message::tool_result(call.id.clone(), result.observation());
                if let Some(img) = image {
                    msg = msg.with_image(img);
                }
                history.push(msg);
                results.push(result);
            }
            turns.push(TurnRecord { turn, tool_results: results });
        }
        Ok(Outcome {
            turns,
            status: RunStatus::ExhaustedIters,
            reason: Some(format!("no stop turn within {} iterations", self.config.max_iters)),
            bundle,
        })
    }
}
