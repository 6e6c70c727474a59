//! Provider-neutral chat interface.
//!
//! [`Gateway`] wraps a [`ChatProvider`] with history validation, retry of
//! transient transport failures, tool-call validation and a JSONL log of every
//! request/response pair. Adapters exist for OpenAI-style chat completions
//! (also used for open-weight models behind compatible servers) and for the
//! Anthropic messages API. [`ScriptedProvider`] replays canned turns.

mod anthropic;
mod gateway;
mod http;
mod openai;
mod scripted;

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use anthropic::AnthropicProvider;
pub use gateway::{Gateway, RetryPolicy};
pub use http::{build_provider, ProviderKind, ProviderSettings};
pub use openai::OpenAiProvider;
pub use scripted::ScriptedProvider;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("invalid conversation history: {0}")]
    InvalidHistory(String),
    #[error("invalid tool list: {0}")]
    InvalidTools(String),
    #[error("cannot decode provider response: {0}")]
    Decode(String),
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("llm log {path}: {source}")]
    Log {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport { retryable: true, .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
    /// Result of a tool call; `tool_call_id` links it to the call.
    Tool,
}

/// Image passed to a vision-capable model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageAttachment {
    pub media_type: String,
    pub data_base64: String,
}

impl ImageAttachment {
    pub fn png(bytes: &[u8]) -> Self {
        ImageAttachment {
            media_type: "image/png".into(),
            data_base64: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<ImageAttachment>,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
            tool_call_id: None,
            tool_calls: Vec::new(),
            images: Vec::new(),
        }
    }

    /// Assistant message echoing a model turn. Reasoning traces are dropped.
    pub fn assistant(turn: &ModelTurn) -> Self {
        Message {
            role: Role::Assistant,
            content: turn.text.clone(),
            tool_call_id: None,
            tool_calls: turn.tool_calls.clone(),
            images: Vec::new(),
        }
    }

    pub fn tool_result(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Message {
            role: Role::Tool,
            content: content.into(),
            tool_call_id: Some(call_id.into()),
            tool_calls: Vec::new(),
            images: Vec::new(),
        }
    }

    pub fn with_image(mut self, image: ImageAttachment) -> Self {
        self.images.push(image);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    String,
    Integer,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub description: String,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParamSpec>,
}

impl ToolSpec {
    /// JSON Schema object describing the arguments.
    pub fn json_schema(&self) -> Value {
        let mut props = Map::new();
        for p in &self.parameters {
            let ty = match p.kind {
                ParamKind::String => "string",
                ParamKind::Integer => "integer",
                ParamKind::Boolean => "boolean",
            };
            props.insert(
                p.name.clone(),
                serde_json::json!({"type": ty, "description": p.description}),
            );
        }
        let required: Vec<&str> = self
            .parameters
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        serde_json::json!({"type": "object", "properties": props, "required": required})
    }

    /// Checks required parameters and argument types.
    pub fn check_arguments(&self, args: &Map<String, Value>) -> Result<(), String> {
        for p in &self.parameters {
            match args.get(&p.name) {
                None | Some(Value::Null) if p.required => {
                    return Err(format!("{}: missing required argument {:?}", self.name, p.name))
                }
                None | Some(Value::Null) => {}
                Some(v) => {
                    let ok = match p.kind {
                        ParamKind::String => v.is_string(),
                        ParamKind::Integer => {
                            v.is_u64() || v.is_i64() || v.as_str().is_some_and(|s| s.trim().parse::<i64>().is_ok())
                        }
                        ParamKind::Boolean => v.is_boolean(),
                    };
                    if !ok {
                        return Err(format!(
                            "{}: argument {:?} has the wrong type",
                            self.name, p.name
                        ));
                    }
                }
            }
        }
        if let Some(extra) = args
            .keys()
            .find(|k| !self.parameters.iter().any(|p| &p.name == *k))
        {
            return Err(format!("{}: unknown argument {extra:?}", self.name));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    #[default]
    Stop,
    ToolUse,
    Length,
    /// The turn could not be used (malformed tool call, exhausted script, ...).
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelTurn {
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    /// Provider-exposed reasoning, kept for the log only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_trace: Option<String>,
    #[serde(default)]
    pub finish_reason: FinishReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
    /// Raw provider payload when decoding failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<Value>,
}

impl ModelTurn {
    pub fn text(text: impl Into<String>) -> Self {
        ModelTurn {
            text: text.into(),
            ..Default::default()
        }
    }

    pub fn tool_call(id: &str, name: &str, arguments: Value) -> Self {
        let arguments = match arguments {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        ModelTurn {
            tool_calls: vec![ToolCall {
                id: id.into(),
                name: name.into(),
                arguments,
            }],
            finish_reason: FinishReason::ToolUse,
            ..Default::default()
        }
    }

    pub fn error(diagnostics: impl Into<String>, raw: Option<Value>) -> Self {
        ModelTurn {
            finish_reason: FinishReason::Error,
            diagnostics: Some(diagnostics.into()),
            raw,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub system: String,
    pub messages: Vec<Message>,
    pub tools: Vec<ToolSpec>,
}

pub trait ChatProvider: Send {
    fn name(&self) -> &str;
    fn model(&self) -> &str;
    fn complete(&mut self, request: &ChatRequest) -> Result<ModelTurn, LlmError>;
}

pub(crate) fn transport_error(status: u16, message: String) -> LlmError {
    LlmError::Transport {
        message,
        retryable: status == 429 || status >= 500,
    }
}

pub(crate) const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);
