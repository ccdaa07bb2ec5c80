//! Completion clients: live HTTP, deterministic mock, replay and recording.

use std::collections::HashMap;
use std::io::Read;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::prompts::{PromptMessages, FINDING_TEMPLATE, QUESTION_TEMPLATE};
use crate::pubmed::ratelimit::{Clock, RateLimiter, SystemClock};
use crate::text;

pub const ENDPOINT_ENV: &str = "MEDFLEET_LLM_ENDPOINT";
pub const API_KEY_ENV: &str = "MEDFLEET_LLM_API_KEY";
pub const MODEL_ENV: &str = "MEDFLEET_LLM_MODEL";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("completion service: {0}")]
    Service(String),
    #[error("no recorded completion for prompt {0}")]
    ReplayMiss(String),
    #[error("client misconfigured: {0}")]
    Config(String),
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, messages: &PromptMessages) -> Result<Completion, ClientError>;
}

impl<C: CompletionClient + ?Sized> CompletionClient for Arc<C> {
    fn complete(&self, messages: &PromptMessages) -> Result<Completion, ClientError> {
        (**self).complete(messages)
    }
}

impl<C: CompletionClient + ?Sized> CompletionClient for Box<C> {
    fn complete(&self, messages: &PromptMessages) -> Result<Completion, ClientError> {
        (**self).complete(messages)
    }
}

/// Stable hex key of a prompt pair.
pub fn prompt_key(messages: &PromptMessages) -> String {
    let mut h = Sha256::new();
    h.update(messages.system.as_bytes());
    h.update([0u8]);
    h.update(messages.user.as_bytes());
    hex::encode(h.finalize())
}

fn whitespace_tokens(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

/// Deterministic offline stand-in for the chat service.
///
/// Finding prompts are answered with the first `max_findings` sentences of
/// the abstract, numbered. Question prompts are answered with a templated
/// question, or `None` when the finding has fewer than `min_question_words`
/// words. Usage counts whitespace tokens.
#[derive(Debug, Clone)]
pub struct MockClient {
    pub max_findings: usize,
    pub min_question_words: usize,
}

impl Default for MockClient {
    fn default() -> Self {
        MockClient {
            max_findings: 5,
            min_question_words: 4,
        }
    }
}

impl MockClient {
    fn answer(&self, messages: &PromptMessages) -> String {
        let (f_head, _) = FINDING_TEMPLATE
            .split_once("{abstract}")
            .expect("placeholder");
        if let Some(abstract_text) = messages.user.strip_prefix(f_head) {
            let lines: Vec<String> = text::split_sentences(abstract_text)
                .into_iter()
                .take(self.max_findings)
                .enumerate()
                .map(|(i, s)| format!("{}. {s}", i + 1))
                .collect();
            return format!("Key findings:\n{}", lines.join("\n"));
        }
        let (q_head, q_tail) = QUESTION_TEMPLATE
            .split_once("{findings}")
            .expect("placeholder");
        if let Some(finding) = messages
            .user
            .strip_prefix(q_head)
            .and_then(|r| r.strip_suffix(q_tail))
        {
            let words = finding.split_whitespace().count();
            if words < self.min_question_words {
                return "None".to_string();
            }
            let body = finding.trim_end_matches(['.', '!', '?']);
            let first_word = body.split_whitespace().next().unwrap_or("");
            let plain_word = first_word.chars().skip(1).all(|c| !c.is_uppercase());
            let lowered = match body.chars().next() {
                Some(c) if plain_word => c
                    .to_lowercase()
                    .chain(body.chars().skip(1))
                    .collect::<String>(),
                _ => body.to_string(),
            };
            return format!("What is known about the claim that {lowered}?");
        }
        "None".to_string()
    }
}

impl CompletionClient for MockClient {
    fn complete(&self, messages: &PromptMessages) -> Result<Completion, ClientError> {
        let text = self.answer(messages);
        let usage = Usage {
            prompt_tokens: whitespace_tokens(&messages.system) + whitespace_tokens(&messages.user),
            completion_tokens: whitespace_tokens(&text),
        };
        Ok(Completion { text, usage })
    }
}

/// Closure-backed client for scripted scenarios.
pub struct FnClient<F>(pub F);

impl<F> CompletionClient for FnClient<F>
where
    F: Fn(&PromptMessages) -> Result<Completion, ClientError> + Send + Sync,
{
    fn complete(&self, messages: &PromptMessages) -> Result<Completion, ClientError> {
        (self.0)(messages)
    }
}

/// One stored exchange, line-delimited in replay files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub key: String,
    pub completion: Completion,
}

/// Answers only prompts seen in a recording.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    entries: HashMap<String, Completion>,
}

impl ReplayClient {
    pub fn from_entries(entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        ReplayClient {
            entries: entries.into_iter().map(|e| (e.key, e.completion)).collect(),
        }
    }

    pub fn load<R: Read>(source: R) -> Result<Self, crate::corpus::CorpusError> {
        Ok(Self::from_entries(crate::corpus::read_jsonl::<
            ReplayEntry,
            _,
        >(source)?))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl CompletionClient for ReplayClient {
    fn complete(&self, messages: &PromptMessages) -> Result<Completion, ClientError> {
        let key = prompt_key(messages);
        self.entries
            .get(&key)
            .cloned()
            .ok_or(ClientError::ReplayMiss(key))
    }
}

/// Wraps a client and keeps every exchange for later replay.
pub struct RecordingClient<C> {
    inner: C,
    log: Mutex<Vec<ReplayEntry>>,
}

impl<C: CompletionClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        RecordingClient {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Recorded exchanges sorted by key, one per distinct prompt.
    pub fn entries(&self) -> Vec<ReplayEntry> {
        let mut entries = self.log.lock().unwrap().clone();
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        entries.dedup_by(|a, b| a.key == b.key);
        entries
    }
}

impl<C: CompletionClient> CompletionClient for RecordingClient<C> {
    fn complete(&self, messages: &PromptMessages) -> Result<Completion, ClientError> {
        let completion = self.inner.complete(messages)?;
        self.log.lock().unwrap().push(ReplayEntry {
            key: prompt_key(messages),
            completion: completion.clone(),
        });
        Ok(completion)
    }
}

/// Shares one rate limiter among all callers of the wrapped client.
pub struct RateLimitedClient<C> {
    inner: C,
    limiter: Arc<RateLimiter>,
    clock: Arc<dyn Clock>,
}

impl<C: CompletionClient> RateLimitedClient<C> {
    pub fn new(inner: C, limiter: Arc<RateLimiter>) -> Self {
        RateLimitedClient {
            inner,
            limiter,
            clock: Arc::new(SystemClock::default()),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }
}

impl<C: CompletionClient> CompletionClient for RateLimitedClient<C> {
    fn complete(&self, messages: &PromptMessages) -> Result<Completion, ClientError> {
        self.limiter.acquire(self.clock.as_ref());
        self.inner.complete(messages)
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpCompletionClient {
    endpoint: String,
    api_key: String,
    model: String,
    agent: ureq::Agent,
    max_retries: u32,
    backoff: Duration,
}

impl HttpCompletionClient {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: impl Into<String>,
        model: impl Into<String>,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpCompletionClient {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            model: model.into(),
            agent,
            max_retries: 3,
            backoff: Duration::from_secs(1),
        }
    }

    /// Reads endpoint, key and model from the environment.
    pub fn from_env() -> Result<Self, ClientError> {
        let endpoint = std::env::var(ENDPOINT_ENV)
            .map_err(|_| ClientError::Config(format!("{ENDPOINT_ENV} is not set")))?;
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| ClientError::Config(format!("{API_KEY_ENV} is not set")))?;
        let model = std::env::var(MODEL_ENV).unwrap_or_else(|_| DEFAULT_MODEL.to_string());
        Ok(Self::new(endpoint, key, model))
    }

    fn request_body(&self, messages: &PromptMessages) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": messages.system},
                {"role": "user", "content": messages.user},
            ],
        })
    }

    fn attempt(
        &self,
        body: &serde_json::Value,
    ) -> Result<Result<Completion, ClientError>, ClientError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| ClientError::Service(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            // retryable
            return Err(ClientError::Service(format!("HTTP {status}")));
        }
        if status != 200 {
            return Ok(Err(ClientError::Service(format!("HTTP {status}"))));
        }
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ClientError::Service(e.to_string()))?;
        Ok(parse_chat_response(&value))
    }
}

/// Pulls text and usage out of a chat-completions response body.
pub fn parse_chat_response(value: &serde_json::Value) -> Result<Completion, ClientError> {
    let text = value["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| ClientError::Service("response lacks choices[0].message.content".into()))?;
    Ok(Completion {
        text: text.to_string(),
        usage: Usage {
            prompt_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        },
    })
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, messages: &PromptMessages) -> Result<Completion, ClientError> {
        let body = self.request_body(messages);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(result) => return result,
                Err(e) if attempt >= self.max_retries => return Err(e),
                Err(_) => {
                    std::thread::sleep(self.backoff * 2u32.pow(attempt));
                    attempt += 1;
                }
            }
        }
    }
}
