//! Chat-completion HTTP backend.
//!
//! POSTs `{model, temperature, max_tokens, messages:[{role, content}]}` to
//! the configured endpoint. The API key comes from the `CURRICOMP_API_KEY`
//! environment variable and is sent as a bearer token.

use serde::{Deserialize, Serialize};

use crate::prompt::PromptBundle;

use super::{Backend, BackendReply, GatewayError, ModelConfig};

/// Environment variable holding the API key for HTTP backends.
pub const API_KEY_ENV: &str = "CURRICOMP_API_KEY";

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    max_tokens: u32,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<super::TokenUsage>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(cfg: &ModelConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_millis(cfg.request_timeout_ms))
            .build()
            .map_err(|e| GatewayError::BackendUnavailable(e.to_string()))?;
        Ok(HttpBackend { client })
    }
}

impl Backend for HttpBackend {
    fn send(
        &self,
        bundle: &PromptBundle,
        cfg: &ModelConfig,
    ) -> Result<BackendReply, GatewayError> {
        let request = ChatRequest {
            model: &cfg.model_name,
            temperature: cfg.temperature,
            max_tokens: cfg.max_output_tokens,
            messages: vec![
                ChatMessage {
                    role: "system",
                    content: &bundle.system_text,
                },
                ChatMessage {
                    role: "user",
                    content: &bundle.user_text,
                },
            ],
        };
        let body = serde_json::to_string(&request)
            .map_err(|e| GatewayError::BackendUnavailable(e.to_string()))?;

        let mut http_request = self
            .client
            .post(&cfg.endpoint_url)
            .header("content-type", "application/json")
            .body(body);
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            http_request = http_request.bearer_auth(key);
        }

        let response = http_request.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout(cfg.request_timeout_ms)
            } else {
                GatewayError::BackendUnavailable(e.to_string())
            }
        })?;

        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(GatewayError::Auth(status.as_u16()));
        }
        if !status.is_success() {
            return Err(GatewayError::BackendUnavailable(format!(
                "HTTP {status} from {}",
                cfg.endpoint_url
            )));
        }
        let text = response
            .text()
            .map_err(|e| GatewayError::BackendUnavailable(e.to_string()))?;
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| GatewayError::BackendUnavailable(format!("bad response body: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .unwrap_or_default();
        Ok(BackendReply {
            text: content,
            token_usage: parsed.usage,
        })
    }

    fn name(&self) -> &'static str {
        "http_chat_completion"
    }
}
