use serde_json::{json, Value};

use super::http::{agent, post_json};
use super::{
    ChatProvider, ChatRequest, FinishReason, LlmError, Message, ModelTurn, ProviderSettings, Role,
    ToolCall, Usage,
};

const DEFAULT_BASE: &str = "https://api.anthropic.com/v1";
const API_VERSION: &str = "2023-06-01";
const DEFAULT_MAX_TOKENS: u32 = 4096;

/// Messages API adapter with tool use.
pub struct AnthropicProvider {
    settings: ProviderSettings,
    agent: ureq::Agent,
    key: Option<String>,
}

impl AnthropicProvider {
    pub fn new(settings: ProviderSettings) -> Result<Self, LlmError> {
        if settings.model.is_empty() {
            return Err(LlmError::Config("model name is required".into()));
        }
        let key = settings.api_key()?;
        Ok(AnthropicProvider {
            agent: agent(settings.timeout()),
            key,
            settings,
        })
    }
}

impl ChatProvider for AnthropicProvider {
    fn name(&self) -> &str {
        "anthropic"
    }

    fn model(&self) -> &str {
        &self.settings.model
    }

    fn complete(&mut self, request: &ChatRequest) -> Result<ModelTurn, LlmError> {
        let body = encode_request(&self.settings, request);
        let base = self.settings.base_url.as_deref().unwrap_or(DEFAULT_BASE);
        let url = format!("{}/messages", base.trim_end_matches('/'));
        let mut headers = vec![("anthropic-version", API_VERSION.to_string())];
        if let Some(key) = &self.key {
            headers.push(("x-api-key", key.clone()));
        }
        let resp = post_json(&self.agent, &url, &headers, &body)?;
        Ok(decode_response(resp))
    }
}

fn image_blocks(m: &Message) -> impl Iterator<Item = Value> + '_ {
    m.images.iter().map(|img| {
        json!({"type": "image", "source": {
            "type": "base64", "media_type": img.media_type, "data": img.data_base64}})
    })
}

pub fn encode_request(settings: &ProviderSettings, request: &ChatRequest) -> Value {
    let mut messages: Vec<Value> = Vec::new();
    for m in &request.messages {
        let (role, blocks): (&str, Vec<Value>) = match m.role {
            Role::User => {
                let mut b = vec![json!({"type": "text", "text": m.content})];
                b.extend(image_blocks(m));
                ("user", b)
            }
            Role::Assistant => {
                let mut b = Vec::new();
                if !m.content.is_empty() {
                    b.push(json!({"type": "text", "text": m.content}));
                }
                for c in &m.tool_calls {
                    b.push(json!({"type": "tool_use", "id": c.id, "name": c.name,
                        "input": Value::Object(c.arguments.clone())}));
                }
                ("assistant", b)
            }
            Role::Tool => {
                let mut content = vec![json!({"type": "text", "text": m.content})];
                content.extend(image_blocks(m));
                (
                    "user",
                    vec![json!({"type": "tool_result",
                        "tool_use_id": m.tool_call_id, "content": content})],
                )
            }
        };
        // consecutive same-role messages are merged; the API requires alternation
        match messages.last_mut() {
            Some(last) if last["role"] == role => {
                if let Some(arr) = last["content"].as_array_mut() {
                    arr.extend(blocks);
                }
            }
            _ => messages.push(json!({"role": role, "content": blocks})),
        }
    }
    let mut body = json!({
        "model": settings.model,
        "max_tokens": settings.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
        "messages": messages,
    });
    if !request.system.is_empty() {
        body["system"] = json!(request.system);
    }
    if !request.tools.is_empty() {
        body["tools"] = request
            .tools
            .iter()
            .map(|t| json!({"name": t.name, "description": t.description, "input_schema": t.json_schema()}))
            .collect();
    }
    if let Some(t) = settings.temperature {
        body["temperature"] = json!(t);
    }
    body
}

pub fn decode_response(resp: Value) -> ModelTurn {
    let Some(blocks) = resp["content"].as_array() else {
        return ModelTurn::error("response has no content blocks", Some(resp));
    };
    let mut text = Vec::new();
    let mut reasoning = Vec::new();
    let mut tool_calls = Vec::new();
    for b in blocks {
        match b["type"].as_str() {
            Some("text") => text.push(b["text"].as_str().unwrap_or_default().to_string()),
            Some("thinking") => reasoning.push(b["thinking"].as_str().unwrap_or_default().to_string()),
            Some("tool_use") => {
                let (Some(id), Some(name), Some(input)) =
                    (b["id"].as_str(), b["name"].as_str(), b["input"].as_object())
                else {
                    return ModelTurn::error("malformed tool_use block", Some(resp));
                };
                tool_calls.push(ToolCall {
                    id: id.to_string(),
                    name: name.to_string(),
                    arguments: input.clone(),
                });
            }
            _ => {}
        }
    }
    let finish_reason = match resp["stop_reason"].as_str() {
        _ if !tool_calls.is_empty() => FinishReason::ToolUse,
        Some("max_tokens") => FinishReason::Length,
        _ => FinishReason::Stop,
    };
    let usage = resp.get("usage").map(|u| Usage {
        input_tokens: u["input_tokens"].as_u64().unwrap_or(0),
        output_tokens: u["output_tokens"].as_u64().unwrap_or(0),
    });
    ModelTurn {
        text: text.join("\n"),
        tool_calls,
        reasoning_trace: (!reasoning.is_empty()).then(|| reasoning.join("\n")),
        finish_reason,
        usage,
        diagnostics: None,
        raw: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ProviderKind;

    fn settings() -> ProviderSettings {
        ProviderSettings {
            kind: ProviderKind::Anthropic,
            model: "claude-3-5-sonnet".into(),
            base_url: None,
            api_key_env: None,
            temperature: None,
            max_tokens: None,
            reasoning_effort: None,
            timeout_s: None,
            script: None,
        }
    }

    #[test]
    fn tool_results_merge_into_one_user_turn() {
        let turn = ModelTurn {
            tool_calls: vec![
                ToolCall { id: "a".into(), name: "list_files".into(), arguments: Default::default() },
                ToolCall { id: "b".into(), name: "list_files".into(), arguments: Default::default() },
            ],
            finish_reason: FinishReason::ToolUse,
            ..Default::default()
        };
        let req = ChatRequest {
            system: "sys".into(),
            messages: vec![
                Message::user("go"),
                Message::assistant(&turn),
                Message::tool_result("a", "x"),
                Message::tool_result("b", "y"),
            ],
            tools: vec![],
        };
        let body = encode_request(&settings(), &req);
        let msgs = body["messages"].as_array().unwrap();
        assert_eq!(msgs.len(), 3);
        assert_eq!(msgs[2]["content"].as_array().unwrap().len(), 2);
        assert_eq!(msgs[2]["content"][1]["tool_use_id"], "b");
        assert_eq!(body["max_tokens"], 4096);
        assert_eq!(body["system"], "sys");
    }

    #[test]
    fn decodes_blocks() {
        let t = decode_response(json!({"stop_reason": "tool_use", "content": [
            {"type": "thinking", "thinking": "hmm"},
            {"type": "text", "text": "Let me look."},
            {"type": "tool_use", "id": "tu1", "name": "read_file_head", "input": {"path": "data/x.csv"}}],
            "usage": {"input_tokens": 5, "output_tokens": 7}}));
        assert_eq!(t.finish_reason, FinishReason::ToolUse);
        assert_eq!(t.text, "Let me look.");
        assert_eq!(t.reasoning_trace.as_deref(), Some("hmm"));
        assert_eq!(t.tool_calls[0].arguments["path"], "data/x.csv");
    }

    #[test]
    fn malformed_tool_use_is_error() {
        let resp = json!({"content": [{"type": "tool_use", "id": "x", "name": "y", "input": "bad"}]});
        let t = decode_response(resp.clone());
        assert_eq!(t.finish_reason, FinishReason::Error);
        assert_eq!(t.raw, Some(resp));
    }
}
