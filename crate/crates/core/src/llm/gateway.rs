use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::json;

use super::{ChatProvider, ChatRequest, FinishReason, LlmError, Message, ModelTurn, Role, ToolSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_attempts: 1,
            ..Default::default()
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

pub struct Gateway {
    provider: Box<dyn ChatProvider>,
    retry: RetryPolicy,
    log: Option<(PathBuf, File)>,
    calls: usize,
}

impl Gateway {
    pub fn new(provider: Box<dyn ChatProvider>) -> Self {
        Gateway {
            provider,
            retry: RetryPolicy::default(),
            log: None,
            calls: 0,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Appends one JSON line per call to `path`.
    pub fn with_log(mut self, path: &Path) -> Result<Self, LlmError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| LlmError::Log {
                path: path.display().to_string(),
                source,
            })?;
        self.log = Some((path.to_path_buf(), file));
        Ok(self)
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn model(&self) -> &str {
        self.provider.model()
    }

    /// Number of completed `complete` calls (successful or not).
    pub fn calls(&self) -> usize {
        self.calls
    }

    /// One completion. Transport failures that are retryable are retried with
    /// capped exponential backoff; tool calls that reference unknown tools or
    /// carry invalid arguments turn the result into an error finish.
    pub fn complete(
        &mut self,
        system: &str,
        history: &[Message],
        tools: &[ToolSpec],
    ) -> Result<ModelTurn, LlmError> {
        validate_history(history)?;
        validate_tools(tools)?;
        let request = ChatRequest {
            system: system.to_string(),
            messages: history.to_vec(),
            tools: tools.to_vec(),
        };
        let started = Instant::now();
        let mut attempt = 0;
        let result = loop {
            attempt += 1;
            match self.provider.complete(&request) {
                Err(e) if e.is_retryable() && attempt < self.retry.max_attempts => {
                    tracing::warn!(attempt, error = %e, "retrying model call");
                    std::thread::sleep(self.retry.delay(attempt));
                }
                other => break other,
            }
        };
        self.calls += 1;
        let result = result.map(|turn| check_turn(turn, tools));
        self.write_log(&request, &result, started.elapsed(), attempt)?;
        result
    }

    fn write_log(
        &mut self,
        request: &ChatRequest,
        result: &Result<ModelTurn, LlmError>,
        latency: Duration,
        attempts: u32,
    ) -> Result<(), LlmError> {
        let Some((path, file)) = self.log.as_mut() else {
            return Ok(());
        };
        let outcome = match result {
            Ok(turn) => json!({"response": turn}),
            Err(e) => json!({"error": e.to_string()}),
        };
        let mut entry = json!({
            "seq": self.calls,
            "provider": self.provider.name(),
            "model": self.provider.model(),
            "request": request,
            "latency_ms": latency.as_millis() as u64,
            "attempts": attempts,
        });
        if let (Some(e), Some(o)) = (entry.as_object_mut(), outcome.as_object()) {
            e.extend(o.clone());
        }
        let mut line = serde_json::to_vec(&entry).expect("log entry serializes");
        line.push(b'\n');
        file.write_all(&line)
            .and_then(|_| file.flush())
            .map_err(|source| LlmError::Log {
                path: path.display().to_string(),
                source,
            })
    }
}

fn validate_history(history: &[Message]) -> Result<(), LlmError> {
    let first = history
        .first()
        .ok_or_else(|| LlmError::InvalidHistory("history is empty".into()))?;
    if first.role != Role::User {
        return Err(LlmError::InvalidHistory(
            "history must start with a user message".into(),
        ));
    }
    let mut call_ids = HashSet::new();
    for (i, m) in history.iter().enumerate() {
        match m.role {
            Role::Assistant => call_ids.extend(m.tool_calls.iter().map(|c| c.id.as_str())),
            Role::Tool => {
                let id = m.tool_call_id.as_deref().ok_or_else(|| {
                    LlmError::InvalidHistory(format!("tool message {i} has no tool_call_id"))
                })?;
                if !call_ids.contains(id) {
                    return Err(LlmError::InvalidHistory(format!(
                        "tool message {i} answers unknown call {id:?}"
                    )));
                }
            }
            Role::User => {}
        }
        if m.role != Role::Assistant && !m.tool_calls.is_empty() {
            return Err(LlmError::InvalidHistory(format!(
                "message {i} carries tool calls but is not from the assistant"
            )));
        }
    }
    Ok(())
}

fn validate_tools(tools: &[ToolSpec]) -> Result<(), LlmError> {
    let mut seen = HashSet::new();
    for t in tools {
        if t.name.is_empty() || !t.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(LlmError::InvalidTools(format!("bad tool name {:?}", t.name)));
        }
        if !seen.insert(t.name.as_str()) {
            return Err(LlmError::InvalidTools(format!("duplicate tool {:?}", t.name)));
        }
    }
    Ok(())
}

fn check_turn(mut turn: ModelTurn, tools: &[ToolSpec]) -> ModelTurn {
    if turn.finish_reason == FinishReason::Error {
        return turn;
    }
    for call in &turn.tool_calls {
        let problem = match tools.iter().find(|t| t.name == call.name) {
            None => Some(format!("call to unknown tool {:?}", call.name)),
            Some(spec) => spec.check_arguments(&call.arguments).err(),
        };
        if let Some(problem) = problem {
            let raw = serde_json::to_value(&turn.tool_calls).ok();
            turn.finish_reason = FinishReason::Error;
            turn.diagnostics = Some(problem);
            turn.raw = turn.raw.or(raw);
            return turn;
        }
    }
    if !turn.tool_calls.is_empty() {
        turn.finish_reason = FinishReason::ToolUse;
    }
    turn
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ParamKind, ParamSpec, ScriptedProvider};
    use serde_json::json;

    struct Flaky {
        failures_left: u32,
        calls: u32,
    }

    impl ChatProvider for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn model(&self) -> &str {
            "m"
        }
        fn complete(&mut self, _: &ChatRequest) -> Result<ModelTurn, LlmError> {
            self.calls += 1;
            if self.failures_left > 0 {
                self.failures_left -= 1;
                return Err(LlmError::Transport {
                    message: "503".into(),
                    retryable: true,
                });
            }
            Ok(ModelTurn::text("ok"))
        }
    }

    fn fast() -> RetryPolicy {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(2),
        }
    }

    fn tool() -> ToolSpec {
        ToolSpec {
            name: "list_files".into(),
            description: "Lists files in directory".into(),
            parameters: vec![ParamSpec {
                name: "path".into(),
                kind: ParamKind::String,
                description: "dir".into(),
                required: false,
            }],
        }
    }

    #[test]
    fn retries_transient_failures() {
        let mut g = Gateway::new(Box::new(Flaky { failures_left: 2, calls: 0 })).with_retry(fast());
        assert_eq!(g.complete("s", &[Message::user("hi")], &[]).unwrap().text, "ok");
        let mut g = Gateway::new(Box::new(Flaky { failures_left: 3, calls: 0 })).with_retry(fast());
        assert!(g.complete("s", &[Message::user("hi")], &[]).is_err());
    }

    #[test]
    fn backoff_is_capped() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(1), Duration::from_millis(500));
        assert_eq!(p.delay(2), Duration::from_secs(1));
        assert_eq!(p.delay(40), Duration::from_secs(8));
    }

    #[test]
    fn rejects_bad_history() {
        let mut g = Gateway::new(Box::new(ScriptedProvider::new(vec![])));
        assert!(matches!(
            g.complete("s", &[], &[]),
            Err(LlmError::InvalidHistory(_))
        ));
        let orphan = [Message::user("hi"), Message::tool_result("c9", "x")];
        assert!(matches!(
            g.complete("s", &orphan, &[]),
            Err(LlmError::InvalidHistory(_))
        ));
        assert!(matches!(
            g.complete("s", &[Message::user("hi")], &[tool(), tool()]),
            Err(LlmError::InvalidTools(_))
        ));
    }

    #[test]
    fn unknown_tool_or_bad_args_become_error_finish() {
        let provider = ScriptedProvider::new(vec![
            ModelTurn::tool_call("c1", "delete_everything", json!({})),
            ModelTurn::tool_call("c2", "list_files", json!({"path": 7})),
            ModelTurn::tool_call("c3", "list_files", json!({"path": "data/"})),
        ]);
        let mut g = Gateway::new(Box::new(provider));
        let h = [Message::user("hi")];
        let t = g.complete("s", &h, &[tool()]).unwrap();
        assert_eq!(t.finish_reason, FinishReason::Error);
        assert!(t.diagnostics.unwrap().contains("delete_everything"));
        assert_eq!(g.complete("s", &h, &[tool()]).unwrap().finish_reason, FinishReason::Error);
        assert_eq!(g.complete("s", &h, &[tool()]).unwrap().finish_reason, FinishReason::ToolUse);
        assert_eq!(g.calls(), 3);
    }

    #[test]
    fn log_has_one_line_per_call() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("llm_log");
        let provider = ScriptedProvider::new(vec![ModelTurn::text("a"), ModelTurn::text("b")]);
        let mut g = Gateway::new(Box::new(provider)).with_log(&path).unwrap();
        g.complete("sys", &[Message::user("q")], &[]).unwrap();
        g.complete("sys", &[Message::user("q")], &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<serde_json::Value> =
            text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1]["response"]["text"], "b");
        assert_eq!(lines[0]["request"]["system"], "sys");
    }
}
