use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde_json::Value;

use super::{ChatProvider, ChatRequest, LlmError, ModelTurn};

/// Returns pre-recorded turns in order. Once the script runs out every call
/// yields an error turn, unless the provider was built with [`repeating`].
///
/// [`repeating`]: ScriptedProvider::repeating
pub struct ScriptedProvider {
    name: String,
    turns: VecDeque<ModelTurn>,
    repeat: Option<ModelTurn>,
    calls: Arc<AtomicUsize>,
    requests: Vec<ChatRequest>,
}

impl ScriptedProvider {
    pub fn new(turns: Vec<ModelTurn>) -> Self {
        ScriptedProvider {
            name: "scripted".into(),
            turns: turns.into(),
            repeat: None,
            calls: Arc::new(AtomicUsize::new(0)),
            requests: Vec::new(),
        }
    }

    /// Answers every call with the same turn.
    pub fn repeating(turn: ModelTurn) -> Self {
        let mut p = Self::new(Vec::new());
        p.repeat = Some(turn);
        p
    }

    /// JSON array of turns, e.g. `[{"text": "..."}, {"tool_calls": [...]}]`.
    pub fn from_script_file(path: &Path) -> Result<Self, LlmError> {
        let bytes = std::fs::read(path).map_err(|source| LlmError::Log {
            path: path.display().to_string(),
            source,
        })?;
        let turns: Vec<ModelTurn> = serde_json::from_slice(&bytes)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(turns))
    }

    /// Replays the responses recorded in a gateway log.
    pub fn from_log(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|source| LlmError::Log {
            path: path.display().to_string(),
            source,
        })?;
        let mut turns = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let entry: Value = serde_json::from_str(line)
                .map_err(|e| LlmError::Decode(format!("{} line {}: {e}", path.display(), i + 1)))?;
            let Some(resp) = entry.get("response") else {
                return Err(LlmError::Decode(format!(
                    "{} line {} has no recorded response",
                    path.display(),
                    i + 1
                )));
            };
            turns.push(
                serde_json::from_value(resp.clone())
                    .map_err(|e| LlmError::Decode(format!("line {}: {e}", i + 1)))?,
            );
        }
        let mut p = Self::new(turns);
        p.name = "replay".into();
        Ok(p)
    }

    /// Shared counter of `complete` calls, readable after the provider is moved.
    pub fn call_counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.calls)
    }

    pub fn requests(&self) -> &[ChatRequest] {
        &self.requests
    }
}

impl ChatProvider for ScriptedProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn model(&self) -> &str {
        "scripted"
    }

    fn complete(&mut self, request: &ChatRequest) -> Result<ModelTurn, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.requests.push(request.clone());
        if let Some(turn) = self.turns.pop_front() {
            return Ok(turn);
        }
        Ok(match &self.repeat {
            Some(turn) => turn.clone(),
            None => ModelTurn::error("script exhausted", None),
        })
    }
}
