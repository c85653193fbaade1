use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::http::{self, RetryPolicy};
use super::limiter::ConcurrencyLimit;
use super::payload::ImagePayload;
use super::prompts::{PromptRegistry, TemplateId, REASK_INSTRUCTION};
use super::replay::{ReplayKey, ReplayStore};
use super::schema::{parse_as, Structured};
use crate::error::{Error, Result};

/// Format re-asks after the first unparseable answer.
pub const DEFAULT_MAX_REASKS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self { temperature: 0.0, max_tokens: 2048, seed: None }
    }
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub template: TemplateId,
    pub slots: BTreeMap<String, String>,
    pub images: Vec<ImagePayload>,
    pub demos: Vec<String>,
    pub decode: DecodeParams,
    /// Number of format re-asks that preceded this request.
    pub reask: u32,
}

impl ChatRequest {
    pub fn new(template: TemplateId) -> Self {
        Self {
            template,
            slots: BTreeMap::new(),
            images: vec![],
            demos: vec![],
            decode: DecodeParams::default(),
            reask: 0,
        }
    }

    pub fn slot(mut self, name: &str, value: impl Into<String>) -> Self {
        self.slots.insert(name.to_string(), value.into());
        self
    }

    pub fn image(mut self, image: ImagePayload) -> Self {
        self.images.push(image);
        self
    }

    pub fn demos(mut self, demos: Vec<String>) -> Self {
        self.demos = demos;
        self
    }
}

/// A fully rendered prompt, ready for a backend.
#[derive(Debug, Clone)]
pub struct RenderedPrompt {
    pub template: TemplateId,
    pub text: String,
    pub images: Vec<ImagePayload>,
    pub decode: DecodeParams,
}

impl RenderedPrompt {
    /// Canonical request used for replay keys; images enter by digest.
    pub fn canonical(&self) -> Value {
        json!({
            "template": self.template.as_str(),
            "text": self.text,
            "images": self.images.iter().map(|i| i.digest()).collect::<Vec<_>>(),
            "decode": self.decode,
        })
    }

    pub fn replay_key(&self) -> ReplayKey {
        ReplayKey::for_request(self.template.as_str(), &self.canonical())
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String>;
}

/// One canned answer of a [`ScriptedChat`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRule {
    pub template: TemplateId,
    /// Every listed substring must occur in the rendered prompt.
    #[serde(default, deserialize_with = "one_or_many")]
    pub contains: Vec<String>,
    /// Text answer; non-string JSON is returned in compact form.
    pub response: Value,
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

/// Mock backend answering from a rule list; the first matching rule wins.
#[derive(Debug, Clone, Default)]
pub struct ScriptedChat {
    rules: Vec<ChatRule>,
}

impl ScriptedChat {
    pub fn new(rules: Vec<ChatRule>) -> Self {
        Self { rules }
    }

    pub fn rule(mut self, template: TemplateId, contains: &[&str], response: impl Into<Value>) -> Self {
        self.rules.push(ChatRule {
            template,
            contains: contains.iter().map(|s| s.to_string()).collect(),
            response: response.into(),
        });
        self
    }

    /// Appends the rules of `other` after this script's rules.
    pub fn then(mut self, other: ScriptedChat) -> Self {
        self.rules.extend(other.rules);
        self
    }

    pub fn rules(&self) -> &[ChatRule] {
        &self.rules
    }
}

impl ChatBackend for ScriptedChat {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String> {
        let rule = self
            .rules
            .iter()
            .find(|r| r.template == prompt.template && r.contains.iter().all(|c| prompt.text.contains(c.as_str())))
            .ok_or_else(|| Error::Protocol(format!("no scripted response for {}", prompt.template)))?;
        Ok(match &rule.response {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }
}

/// OpenAI-compatible `/chat/completions` client.
pub struct RemoteChat {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    model: String,
    retry: RetryPolicy,
}

impl RemoteChat {
    pub fn new(base_url: &str, api_key: Option<String>, model: &str) -> Result<Self> {
        Ok(Self {
            client: http::client(Duration::from_secs(180))?,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model: model.to_string(),
            retry: RetryPolicy::default(),
        })
    }

    /// Reads `IGE_CHAT_BASE_URL`, `IGE_CHAT_API_KEY` and `IGE_CHAT_MODEL`.
    pub fn from_env() -> Result<Self> {
        let base = std::env::var("IGE_CHAT_BASE_URL").unwrap_or_else(|_| "https://api.openai.com/v1".into());
        let key = std::env::var("IGE_CHAT_API_KEY").ok();
        if key.is_none() {
            return Err(Error::Config("IGE_CHAT_API_KEY is not set".into()));
        }
        let model = std::env::var("IGE_CHAT_MODEL").unwrap_or_else(|_| "gpt-4o-2024-08-06".into());
        Self::new(&base, key, &model)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn body(&self, prompt: &RenderedPrompt) -> Value {
        let mut content = vec![json!({"type": "text", "text": prompt.text})];
        content.extend(
            prompt.images.iter().map(|i| json!({"type": "image_url", "image_url": {"url": i.data_url()}})),
        );
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": prompt.decode.temperature,
            "max_tokens": prompt.decode.max_tokens,
        });
        if let Some(seed) = prompt.decode.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

impl ChatBackend for RemoteChat {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String> {
        let url = format!("{}/chat/completions", self.base_url);
        let body = self.body(prompt);
        let reply = self.retry.run(|| http::post_json(&self.client, &url, self.api_key.as_deref(), &body))?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(String::from)
            .ok_or_else(|| Error::Protocol("chat reply lacks choices[0].message.content".into()))
    }
}

/// Answers only from a replay store; a missing record is a hard error.
pub struct ReplayChat {
    store: Arc<ReplayStore>,
}

impl ReplayChat {
    pub fn new(store: Arc<ReplayStore>) -> Self {
        Self { store }
    }
}

impl ChatBackend for ReplayChat {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String> {
        let v = self.store.require(&prompt.replay_key())?;
        v["text"].as_str().map(String::from).ok_or_else(|| Error::Protocol("chat record lacks `text`".into()))
    }
}

/// Forwards to an inner backend and records every answer.
pub struct RecordingChat {
    inner: Arc<dyn ChatBackend>,
    store: Arc<ReplayStore>,
}

impl RecordingChat {
    pub fn new(inner: Arc<dyn ChatBackend>, store: Arc<ReplayStore>) -> Self {
        Self { inner, store }
    }
}

impl ChatBackend for RecordingChat {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String> {
        let text = self.inner.complete(prompt)?;
        self.store.put(&prompt.replay_key(), &prompt.canonical(), &json!({ "text": text }))?;
        Ok(text)
    }
}

/// Renders templates, routes them to a backend (optionally per template),
/// and parses structured answers with bounded format re-asks.
pub struct ChatClient {
    registry: Arc<PromptRegistry>,
    default: Arc<dyn ChatBackend>,
    overrides: BTreeMap<TemplateId, Arc<dyn ChatBackend>>,
    limit: Arc<ConcurrencyLimit>,
    max_reasks: u32,
}

impl ChatClient {
    pub fn new(registry: Arc<PromptRegistry>, backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            registry,
            default: backend,
            overrides: BTreeMap::new(),
            limit: Arc::new(ConcurrencyLimit::default()),
            max_reasks: DEFAULT_MAX_REASKS,
        }
    }

    pub fn with_override(mut self, template: TemplateId, backend: Arc<dyn ChatBackend>) -> Self {
        self.overrides.insert(template, backend);
        self
    }

    pub fn with_limit(mut self, limit: Arc<ConcurrencyLimit>) -> Self {
        self.limit = limit;
        self
    }

    pub fn with_max_reasks(mut self, n: u32) -> Self {
        self.max_reasks = n;
        self
    }

    pub fn registry(&self) -> &PromptRegistry {
        &self.registry
    }

    pub fn render(&self, req: &ChatRequest) -> Result<RenderedPrompt> {
        let template = self.registry.get(req.template);
        let mut slots = req.slots.clone();
        if template.inputs.contains("demos") && !slots.contains_key("demos") {
            slots.insert("demos".into(), req.demos.join("\n\n"));
        }
        let mut text = template.render(&slots)?;
        if req.reask > 0 {
            text.push_str(&format!("\n\n{REASK_INSTRUCTION} (attempt {})", req.reask + 1));
        }
        Ok(RenderedPrompt { template: req.template, text, images: req.images.clone(), decode: req.decode })
    }

    /// Raw text answer for one request.
    pub fn chat(&self, req: &ChatRequest) -> Result<String> {
        let prompt = self.render(req)?;
        let backend = self.overrides.get(&req.template).unwrap_or(&self.default);
        let _permit = self.limit.acquire();
        backend.complete(&prompt)
    }

    /// Structured answer. Each backend call increments `calls`.
    pub fn ask<T: Structured>(&self, req: &ChatRequest, calls: &mut u32) -> Result<T> {
        let mut attempt = req.clone();
        loop {
            *calls += 1;
            let raw = self.chat(&attempt)?;
            match parse_as::<T>(&raw) {
                Ok(v) => return Ok(v),
                Err(e @ Error::Parse { .. }) if attempt.reask < self.max_reasks => {
                    tracing::debug!(template = %req.template, error = %e, "re-asking for valid JSON");
                    attempt.reask += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
