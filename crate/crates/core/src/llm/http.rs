use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    transport_error, AnthropicProvider, ChatProvider, LlmError, OpenAiProvider, ScriptedProvider,
    DEFAULT_TIMEOUT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Chat-completions wire format (OpenAI and compatible servers).
    Openai,
    Anthropic,
    /// Canned turns from a JSON script file.
    Mock,
    /// Responses recorded in an earlier run's `llm_log`.
    Replay,
}

/// How to reach one model configuration. Secrets are never stored here, only
/// the name of the environment variable holding the key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSettings {
    pub kind: ProviderKind,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    /// Provider-specific effort knob, e.g. `"high"` for reasoning models.
    #[serde(default)]
    pub reasoning_effort: Option<String>,
    #[serde(default)]
    pub timeout_s: Option<u64>,
    /// Script or log file for `mock` / `replay`.
    #[serde(default)]
    pub script: Option<PathBuf>,
}

impl ProviderSettings {
    pub fn mock(script: impl Into<PathBuf>) -> Self {
        ProviderSettings {
            kind: ProviderKind::Mock,
            model: "scripted".into(),
            base_url: None,
            api_key_env: None,
            temperature: None,
            max_tokens: None,
            reasoning_effort: None,
            timeout_s: None,
            script: Some(script.into()),
        }
    }

    pub(crate) fn timeout(&self) -> Duration {
        self.timeout_s.map(Duration::from_secs).unwrap_or(DEFAULT_TIMEOUT)
    }

    pub(crate) fn api_key(&self) -> Result<Option<String>, LlmError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(name) => std::env::var(name)
                .map(Some)
                .map_err(|_| LlmError::Config(format!("environment variable {name} is not set"))),
        }
    }
}

pub fn build_provider(settings: &ProviderSettings) -> Result<Box<dyn ChatProvider>, LlmError> {
    let script = || {
        settings
            .script
            .clone()
            .ok_or_else(|| LlmError::Config("mock/replay provider needs a script path".into()))
    };
    Ok(match settings.kind {
        ProviderKind::Openai => Box::new(OpenAiProvider::new(settings.clone())?),
        ProviderKind::Anthropic => Box::new(AnthropicProvider::new(settings.clone())?),
        ProviderKind::Mock => Box::new(ScriptedProvider::from_script_file(&script()?)?),
        ProviderKind::Replay => Box::new(ScriptedProvider::from_log(&script()?)?),
    })
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

pub(crate) fn post_json(
    agent: &ureq::Agent,
    url: &str,
    headers: &[(&str, String)],
    body: &Value,
) -> Result<Value, LlmError> {
    let mut req = agent.post(url);
    for (k, v) in headers {
        req = req.header(*k, v.as_str());
    }
    let mut resp = req.send_json(body).map_err(|e| LlmError::Transport {
        message: format!("{url}: {e}"),
        retryable: true,
    })?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| LlmError::Transport {
            message: format!("{url}: {e}"),
            retryable: true,
        })?;
    if !(200..300).contains(&status) {
        let snippet: String = text.chars().take(500).collect();
        return Err(transport_error(status, format!("{url}: HTTP {status}: {snippet}")));
    }
    serde_json::from_str(&text).map_err(|e| LlmError::Decode(format!("{url}: {e}")))
}
