//! The completion port and its three implementations: a deterministic mock,
//! a scripted replay for tests, and an HTTP client for a live endpoint.

use std::collections::{BTreeSet, VecDeque};
use std::hash::Hasher;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use lexverify_text::tokenize::content_words;

use crate::article::BaseArticle;
use crate::prompts::{block, task_of};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams { temperature: 0.0, max_tokens: 4096, seed: Some(0) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PortError {
    #[error("completion endpoint unreachable: {0}")]
    Transport(String),
    #[error("completion endpoint answered HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("completion response has no text: {0}")]
    Response(String),
    #[error("scripted replay has no response left for call {0}")]
    ScriptExhausted(usize),
}

pub trait CompletionPort: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, PortError>;
}

/// Deterministic stand-in: answers template prompts by rule, anything else
/// with a digest of (prompt, seed).
#[derive(Clone, Copy, Debug, Default)]
pub struct MockPort;

/// What the mock replies to synthesis and repair prompts; it never produces a bundle.
pub const MOCK_SYNTHESIS_REPLY: &str =
    "{\"note\": \"the mock completion port does not write constraint bundles; use a scripted replay or a live endpoint\"}";

/// First sentence of a clause, without its enumerator.
pub fn first_sentence(clause: &str) -> String {
    let marker = regex::Regex::new(r"^\s*(?:\d+\.|[一二三四五六七八九十]+、|\(\w{1,4}\)|（\w{1,4}）)\s*").expect("static regex");
    let body = marker.replace(clause, "");
    let chars: Vec<char> = body.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let ends = match c {
            '。' | '！' | '？' => true,
            '.' | '!' | '?' => chars.get(i + 1).is_none_or(|n| n.is_whitespace()),
            _ => false,
        };
        if ends {
            return chars[..=i].iter().collect::<String>().trim().to_string();
        }
    }
    body.trim().to_string()
}

impl MockPort {
    fn gen_queries(prompt: &str) -> String {
        let article: BaseArticle = block(prompt, "article").and_then(|a| serde_json::from_str(a).ok()).unwrap_or_default();
        let mut out: Vec<String> = Vec::new();
        if !article.title.trim().is_empty() {
            out.push(article.title.trim().to_string());
        }
        out.extend(article.clauses.iter().map(|c| first_sentence(c)).filter(|s| !s.is_empty()));
        serde_json::to_string(&out).expect("strings serialize")
    }

    fn filter_useful(prompt: &str) -> String {
        #[derive(Deserialize)]
        struct Candidate {
            doc_id: String,
            text: String,
        }
        let article: BaseArticle = block(prompt, "article").and_then(|a| serde_json::from_str(a).ok()).unwrap_or_default();
        let base: BTreeSet<String> = content_words(&article.full_text()).into_iter().collect();
        let candidates: Vec<Candidate> =
            block(prompt, "candidates").and_then(|c| serde_json::from_str(c).ok()).unwrap_or_default();
        let keep: Vec<String> = candidates
            .into_iter()
            .filter(|c| content_words(&c.text).iter().any(|w| base.contains(w)))
            .map(|c| c.doc_id)
            .collect();
        serde_json::to_string(&keep).expect("strings serialize")
    }
}

impl CompletionPort for MockPort {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, PortError> {
        Ok(match task_of(prompt) {
            Some(("gen_queries", _)) => Self::gen_queries(prompt),
            Some(("filter_useful", _)) => Self::filter_useful(prompt),
            Some(("synthesize" | "repair", _)) => MOCK_SYNTHESIS_REPLY.to_string(),
            _ => {
                // FNV is fixed by definition, so replies match across builds and platforms.
                let mut h = fnv::FnvHasher::default();
                h.write(prompt.as_bytes());
                h.write(&params.seed.unwrap_or(0).to_le_bytes());
                format!("mock-{:016x}", h.finish())
            }
        })
    }
}

/// Replays fixed responses in order and records every prompt it was given.
#[derive(Debug, Default)]
pub struct ScriptedPort {
    responses: Mutex<VecDeque<String>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedPort {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedPort { responses: Mutex::new(responses.into_iter().map(Into::into).collect()), prompts: Mutex::default() }
    }

    /// Reads `{"responses": [...]}` or a bare array of strings.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Script {
            Wrapped { responses: Vec<String> },
            Bare(Vec<String>),
        }
        Ok(match serde_json::from_str(text)? {
            Script::Wrapped { responses } | Script::Bare(responses) => Self::new(responses),
        })
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("script poisoned").len()
    }
}

impl CompletionPort for ScriptedPort {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&self, prompt: &str, _params: &CompletionParams) -> Result<String, PortError> {
        let mut prompts = self.prompts.lock().expect("prompt log poisoned");
        prompts.push(prompt.to_string());
        let call = prompts.len();
        self.responses.lock().expect("script poisoned").pop_front().ok_or(PortError::ScriptExhausted(call))
    }
}

pub const API_KEY_VAR: &str = "LEXV_LLM_KEY";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth header.
    pub api_key_env: String,
    pub timeout_ms: u64,
}

impl HttpConfig {
    pub fn new(endpoint: &str, model: &str) -> Self {
        HttpConfig { endpoint: endpoint.into(), model: model.into(), api_key_env: API_KEY_VAR.into(), timeout_ms: 120_000 }
    }
}

/// Minimal chat-completion client; see `docs/llm-port.md` for the wire format.
pub struct HttpPort {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpPort {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpPort { config, agent }
    }

    pub fn request_body(&self, prompt: &str, params: &CompletionParams) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        if let Some(seed) = params.seed {
            body["seed"] = seed.into();
        }
        body
    }
}

impl CompletionPort for HttpPort {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, PortError> {
        let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(self.request_body(prompt, params)).map_err(|e| PortError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| PortError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(PortError::Http { status, body: text.chars().take(500).collect() });
        }
        let json: serde_json::Value = serde_json::from_str(&text).map_err(|e| PortError::Response(e.to_string()))?;
        json.pointer("/choices/0/message/content")
            .or_else(|| json.pointer("/choices/0/text"))
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| PortError::Response(text.chars().take(500).collect()))
    }
}

/// Which completion port a frontend should use: `mock`, `live` or `replay:<file>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LlmChoice {
    Mock,
    Live,
    Replay(std::path::PathBuf),
}

impl std::str::FromStr for LlmChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mock" => Ok(LlmChoice::Mock),
            "live" => Ok(LlmChoice::Live),
            _ => match s.strip_prefix("replay:") {
                Some(path) if !path.is_empty() => Ok(LlmChoice::Replay(path.into())),
                _ => Err(format!("unknown LLM port `{s}`; expected mock, live or replay:<file>")),
            },
        }
    }
}

impl LlmChoice {
    /// `live` needs `http`; the others ignore it.
    pub fn build(&self, http: Option<HttpConfig>) -> Result<std::sync::Arc<dyn CompletionPort>, String> {
        Ok(match self {
            LlmChoice::Mock => std::sync::Arc::new(MockPort),
            LlmChoice::Live => {
                let cfg = http.ok_or("the live LLM port needs an endpoint (--llm-endpoint or LEXV_LLM_ENDPOINT)")?;
                std::sync::Arc::new(HttpPort::new(cfg))
            }
            LlmChoice::Replay(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                std::sync::Arc::new(ScriptedPort::from_json(&text).map_err(|e| format!("bad replay script {}: {e}", path.display()))?)
            }
        })
    }
}
