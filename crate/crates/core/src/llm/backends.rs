// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, ChatResponse, FinishReason, GatewayError, Usage};

/// Bearer token for the live backend.
pub const API_KEY_ENV: &str = "AUTOVERIFIX_API_KEY";

/// Backend speaking the common `/chat/completions` wire format.
pub struct LiveBackend {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn new(base_url: &str, api_key: impl Into<String>, timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.into(),
            client,
        })
    }

    /// Reads the credential from [`API_KEY_ENV`].
    pub fn from_env(base_url: &str, timeout: Duration) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GatewayError::MissingCredential(API_KEY_ENV.into()))?;
        Self::new(base_url, key, timeout)
    }

    fn body(request: &ChatRequest) -> Value {
        let mut body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

impl ChatBackend for LiveBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&Self::body(request))
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    GatewayError::Timeout
                } else {
                    GatewayError::Transport(e.to_string())
                }
            })?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| GatewayError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(GatewayError::Auth { status }),
            429 => return Err(GatewayError::RateLimited { attempts: 1 }),
            400..=499 => {
                return Err(GatewayError::Protocol {
                    status,
                    body: text.chars().take(500).collect(),
                })
            }
            _ => return Err(GatewayError::Server { status }),
        }
        let wire: WireResponse =
            serde_json::from_str(&text).map_err(|e| GatewayError::BadResponse(e.to_string()))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::BadResponse("no choices".into()))?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::Length,
            Some("stop") | None => FinishReason::Stop,
            Some(_) => FinishReason::Error,
        };
        let usage = wire
            .usage
            .map(|u| Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(ChatResponse {
            content: choice.message.content.unwrap_or_default(),
            finish_reason,
            usage,
        })
    }
}

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub response: ChatResponse,
}

fn load_transcript(path: &Path) -> Result<HashMap<String, ChatResponse>, GatewayError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashMap::new()),
        Err(e) => return Err(GatewayError::Transcript(format!("{}: {e}", path.display()))),
    };
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: TranscriptEntry = serde_json::from_str(line)
            .map_err(|e| GatewayError::Transcript(format!("{}:{}: {e}", path.display(), i + 1)))?;
        // first recording wins
        map.entry(entry.digest).or_insert(entry.response);
    }
    Ok(map)
}

/// Serves recorded responses keyed by request digest.
pub struct ReplayBackend {
    entries: HashMap<String, ChatResponse>,
}

impl ReplayBackend {
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        if !path.exists() {
            return Err(GatewayError::Transcript(format!("{} does not exist", path.display())));
        }
        Ok(Self {
            entries: load_transcript(path)?,
        })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut map = HashMap::new();
        for e in entries {
            map.entry(e.digest).or_insert(e.response);
        }
        Self { entries: map }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let digest = request.digest();
        self.entries
            .get(&digest)
            .cloned()
            .ok_or(GatewayError::ReplayMiss { digest })
    }
}

/// Proxies another backend and appends every new exchange to a transcript.
///
/// A digest seen before is answered from the transcript, so a recorded
/// session replays exactly.
pub struct RecordingBackend {
    inner: Box<dyn ChatBackend>,
    path: PathBuf,
    state: Mutex<(HashMap<String, ChatResponse>, File)>,
}

impl RecordingBackend {
    pub fn open(inner: Box<dyn ChatBackend>, path: &Path) -> Result<Self, GatewayError> {
        let seen = load_transcript(path)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| GatewayError::Transcript(e.to_string()))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            state: Mutex::new((seen, file)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl ChatBackend for RecordingBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let digest = request.digest();
        if let Some(hit) = self.state.lock().unwrap().0.get(&digest) {
            return Ok(hit.clone());
        }
        let response = self.inner.send(request)?;
        if response.finish_reason == FinishReason::Stop {
            let mut state = self.state.lock().unwrap();
            let (seen, file) = &mut *state;
            // marked seen only once the line is on disk
            #[allow(clippy::map_entry)]
            if !seen.contains_key(&digest) {
                let line = serde_json::to_string(&TranscriptEntry {
                    digest: digest.clone(),
                    response: response.clone(),
                })
                .expect("entry serializes");
                writeln!(file, "{line}").map_err(|e| GatewayError::Transcript(e.to_string()))?;
                file.flush().map_err(|e| GatewayError::Transcript(e.to_string()))?;
                seen.insert(digest, response.clone());
            }
        }
        Ok(response)
    }
}

type ScriptFn = dyn Fn(&ChatRequest, usize) -> Result<ChatResponse, GatewayError> + Send + Sync;

enum Script {
    Queue(VecDeque<Result<ChatResponse, GatewayError>>),
    Func(Box<ScriptFn>),
}

/// Test backend: a fixed queue of outcomes or a function of the request.
pub struct ScriptedBackend {
    script: Mutex<Script>,
    calls: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn sequence(items: impl IntoIterator<Item = Result<ChatResponse, GatewayError>>) -> Self {
        Self {
            script: Mutex::new(Script::Queue(items.into_iter().collect())),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn replies<S: Into<String>>(items: impl IntoIterator<Item = S>) -> Self {
        Self::sequence(items.into_iter().map(|s| Ok(ChatResponse::stop(s))))
    }

    /// `f` receives the request and the zero-based call number.
    pub fn from_fn(
        f: impl Fn(&ChatRequest, usize) -> Result<ChatResponse, GatewayError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            script: Mutex::new(Script::Func(Box::new(f))),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Every request received so far, in order.
    pub fn calls(&self) -> Vec<ChatRequest> {
        self.calls.lock().unwrap().clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let n = {
            let mut calls = self.calls.lock().unwrap();
            calls.push(request.clone());
            calls.len() - 1
        };
        match &mut *self.script.lock().unwrap() {
            Script::Queue(q) => q
                .pop_front()
                .unwrap_or_else(|| Err(GatewayError::Script(format!("script exhausted at call {n}")))),
            Script::Func(f) => f(request, n),
        }
    }
}
