use serde_json::{json, Map, Value};

use super::http::{agent, post_json};
use super::{
    ChatProvider, ChatRequest, FinishReason, LlmError, ModelTurn, ProviderSettings, Role, ToolCall,
    Usage,
};

const DEFAULT_BASE: &str = "https://api.openai.com/v1";

/// Chat-completions adapter. Works with any server that speaks the same
/// format (hosted open-weight models included) via `base_url`.
pub struct OpenAiProvider {
    settings: ProviderSettings,
    agent: ureq::Agent,
    key: Option<String>,
}

impl OpenAiProvider {
    pub fn new(settings: ProviderSettings) -> Result<Self, LlmError> {
        if settings.model.is_empty() {
            return Err(LlmError::Config("model name is required".into()));
        }
        let key = settings.api_key()?;
        Ok(OpenAiProvider {
            agent: agent(settings.timeout()),
            key,
            settings,
        })
    }
}

impl ChatProvider for OpenAiProvider {
    fn name(&self) -> &str {
        "openai"
    }

    fn model(&self) -> &str {
        &self.settings.model
    }

    fn complete(&mut self, request: &ChatRequest) -> Result<ModelTurn, LlmError> {
        let body = encode_request(&self.settings, request);
        let base = self.settings.base_url.as_deref().unwrap_or(DEFAULT_BASE);
        let url = format!("{}/chat/completions", base.trim_end_matches('/'));
        let mut headers = Vec::new();
        if let Some(key) = &self.key {
            headers.push(("Authorization", format!("Bearer {key}")));
        }
        let resp = post_json(&self.agent, &url, &headers, &body)?;
        Ok(decode_response(resp))
    }
}

pub fn encode_request(settings: &ProviderSettings, request: &ChatRequest) -> Value {
    let mut messages = Vec::new();
    if !request.system.is_empty() {
        messages.push(json!({"role": "system", "content": request.system}));
    }
    for m in &request.messages {
        match m.role {
            Role::User => {
                if m.images.is_empty() {
                    messages.push(json!({"role": "user", "content": m.content}));
                } else {
                    messages.push(json!({"role": "user", "content": user_parts(&m.content, m)}));
                }
            }
            Role::Assistant => {
                let mut msg = json!({"role": "assistant",
                    "content": if m.content.is_empty() { Value::Null } else { json!(m.content) }});
                if !m.tool_calls.is_empty() {
                    msg["tool_calls"] = m
                        .tool_calls
                        .iter()
                        .map(|c| {
                            json!({"id": c.id, "type": "function", "function": {
                                "name": c.name,
                                "arguments": Value::Object(c.arguments.clone()).to_string()}})
                        })
                        .collect();
                }
                messages.push(msg);
            }
            Role::Tool => {
                messages.push(json!({"role": "tool",
                    "tool_call_id": m.tool_call_id, "content": m.content}));
                // tool messages cannot carry images in this format
                if !m.images.is_empty() {
                    messages.push(json!({"role": "user",
                        "content": user_parts("Image returned by the previous tool call.", m)}));
                }
            }
        }
    }
    let mut body = json!({"model": settings.model, "messages": messages});
    if !request.tools.is_empty() {
        body["tools"] = request
            .tools
            .iter()
            .map(|t| {
                json!({"type": "function", "function": {
                    "name": t.name, "description": t.description, "parameters": t.json_schema()}})
            })
            .collect();
    }
    if let Some(t) = settings.temperature {
        body["temperature"] = json!(t);
    }
    if let Some(n) = settings.max_tokens {
        body["max_completion_tokens"] = json!(n);
    }
    if let Some(effort) = &settings.reasoning_effort {
        body["reasoning_effort"] = json!(effort);
    }
    body
}

fn user_parts(text: &str, m: &super::Message) -> Value {
    let mut parts = vec![json!({"type": "text", "text": text})];
    for img in &m.images {
        parts.push(json!({"type": "image_url", "image_url": {
            "url": format!("data:{};base64,{}", img.media_type, img.data_base64)}}));
    }
    Value::Array(parts)
}

pub fn decode_response(resp: Value) -> ModelTurn {
    let Some(choice) = resp.pointer("/choices/0") else {
        return ModelTurn::error("response has no choices", Some(resp));
    };
    let message = &choice["message"];
    let mut tool_calls = Vec::new();
    if let Some(calls) = message["tool_calls"].as_array() {
        for c in calls {
            let id = c["id"].as_str().unwrap_or_default().to_string();
            let name = c["function"]["name"].as_str().unwrap_or_default().to_string();
            let arguments = match &c["function"]["arguments"] {
                Value::String(s) if s.trim().is_empty() => Ok(Map::new()),
                Value::String(s) => match serde_json::from_str::<Value>(s) {
                    Ok(Value::Object(m)) => Ok(m),
                    Ok(_) => Err("tool arguments are not a JSON object".to_string()),
                    Err(e) => Err(format!("tool arguments are not valid JSON: {e}")),
                },
                Value::Object(m) => Ok(m.clone()),
                _ => Err("tool call without arguments".to_string()),
            };
            match arguments {
                Ok(arguments) if !id.is_empty() && !name.is_empty() => {
                    tool_calls.push(ToolCall { id, name, arguments })
                }
                Ok(_) => return ModelTurn::error("tool call without id or name", Some(resp)),
                Err(msg) => return ModelTurn::error(msg, Some(resp)),
            }
        }
    }
    let finish_reason = match choice["finish_reason"].as_str() {
        _ if !tool_calls.is_empty() => FinishReason::ToolUse,
        Some("length") => FinishReason::Length,
        Some("stop") | None => FinishReason::Stop,
        Some(_) => FinishReason::Stop,
    };
    let usage = resp.get("usage").map(|u| Usage {
        input_tokens: u["prompt_tokens"].as_u64().unwrap_or(0),
        output_tokens: u["completion_tokens"].as_u64().unwrap_or(0),
    });
    ModelTurn {
        text: message["content"].as_str().unwrap_or_default().to_string(),
        tool_calls,
        reasoning_trace: message["reasoning_content"].as_str().map(str::to_string),
        finish_reason,
        usage,
        diagnostics: None,
        raw: None,
    }
}
