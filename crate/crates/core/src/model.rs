//! Text-generating models behind one interface: HTTP completion endpoints,
//! a UCI engine posing as a model, and scripted replies for tests.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chess::Position;
use crate::engine::{EngineConfig, EngineError, EngineLimits, EngineSession, Evaluator};
use crate::response::RawResponse;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint rejected credentials (HTTP {0})")]
    Auth(u16),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("response does not match the configured schema: {0}")]
    Schema(String),
    #[error("scripted model has no responses left")]
    ScriptExhausted,
    #[error("prompt contains no `FEN:` line")]
    NoFenInPrompt,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
}

impl ModelError {
    /// Engine failures are reported separately from endpoint failures.
    pub fn is_engine(&self) -> bool {
        matches!(self, ModelError::Engine(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop: Vec<String>,
}

impl Default for GenerationParams {
    fn default() -> GenerationParams {
        GenerationParams {
            temperature: 0.0,
            max_tokens: 64,
            stop: vec!["\n".to_owned()],
        }
    }
}

impl GenerationParams {
    pub fn with_temperature(temperature: f64) -> GenerationParams {
        GenerationParams {
            temperature,
            ..GenerationParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::Config(format!(
                "temperature must be a non-negative number, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(ModelError::Config("max_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

fn default_path() -> String {
    "/v1/completions".to_owned()
}
fn default_text_field() -> String {
    "choices.0.text".to_owned()
}
fn default_usage_field() -> Option<String> {
    Some("usage.completion_tokens".to_owned())
}
fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_concurrency() -> usize {
    4
}

/// A remote completion API. Secrets never live here: `auth_env` names the
/// environment variable that holds the bearer token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEndpoint {
    pub base_url: String,
    #[serde(default = "default_path")]
    pub path: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    /// Dotted path to the generated text, e.g. `choices.0.text`.
    #[serde(default = "default_text_field")]
    pub text_field: String,
    #[serde(default = "default_usage_field")]
    pub usage_field: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub prompt_prefix: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub prompt_suffix: String,
}

impl HttpEndpoint {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> HttpEndpoint {
        HttpEndpoint {
            base_url: base_url.into(),
            path: default_path(),
            model: model.into(),
            auth_env: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            max_concurrency: default_concurrency(),
            text_field: default_text_field(),
            usage_field: default_usage_field(),
            prompt_prefix: String::new(),
            prompt_suffix: String::new(),
        }
    }

    pub fn url(&self) -> String {
        format!(
            "{}/{}",
            self.base_url.trim_end_matches('/'),
            self.path.trim_start_matches('/')
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelEndpoint {
    Http(HttpEndpoint),
    Scripted { responses: Vec<String> },
    EngineAsModel { engine: EngineConfig, limits: EngineLimits },
}

impl ModelEndpoint {
    pub fn describe(&self) -> String {
        match self {
            ModelEndpoint::Http(h) => format!("{} @ {}", h.model, h.url()),
            ModelEndpoint::Scripted { responses } => format!("scripted ({} responses)", responses.len()),
            ModelEndpoint::EngineAsModel { engine, limits } => {
                format!("{} as model ({})", engine.label(), limits.go_command())
            }
        }
    }

    /// Scripted queues cannot be split between workers.
    pub fn supports_parallel(&self) -> bool {
        !matches!(self, ModelEndpoint::Scripted { .. })
    }
}

pub trait TextModel {
    /// One completion for `prompt`. The prompt is sent exactly as given.
    fn complete(&mut self, prompt: &str, params: &GenerationParams) -> Result<RawResponse, ModelError>;
}

impl<M: TextModel + ?Sized> TextModel for Box<M> {
    fn complete(&mut self, prompt: &str, params: &GenerationParams) -> Result<RawResponse, ModelError> {
        (**self).complete(prompt, params)
    }
}

impl<M: TextModel + ?Sized> TextModel for &mut M {
    fn complete(&mut self, prompt: &str, params: &GenerationParams) -> Result<RawResponse, ModelError> {
        (**self).complete(prompt, params)
    }
}

/// Replies from a fixed queue, in order.
#[derive(Debug, Clone, Default)]
pub struct ScriptedModel {
    queue: VecDeque<String>,
    prompts: Vec<String>,
}

impl ScriptedModel {
    pub fn new<I, S>(responses: I) -> ScriptedModel
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedModel {
            queue: responses.into_iter().map(Into::into).collect(),
            prompts: Vec::new(),
        }
    }

    /// Every prompt received so far.
    pub fn prompts(&self) -> &[String] {
        &self.prompts
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl TextModel for ScriptedModel {
    fn complete(&mut self, prompt: &str, _: &GenerationParams) -> Result<RawResponse, ModelError> {
        self.prompts.push(prompt.to_owned());
        let text = self.queue.pop_front().ok_or(ModelError::ScriptExhausted)?;
        Ok(RawResponse::text(text))
    }
}

/// Answers with the engine's best move for the position named in the prompt.
pub struct EngineModel<E> {
    evaluator: E,
    limits: EngineLimits,
}

impl<E: Evaluator> EngineModel<E> {
    pub fn new(evaluator: E, limits: EngineLimits) -> EngineModel<E> {
        EngineModel { evaluator, limits }
    }
}

/// The position from the first `FEN:` line of a prompt.
pub fn fen_from_prompt(prompt: &str) -> Option<Position> {
    prompt
        .lines()
        .filter_map(|l| l.trim().strip_prefix("FEN:"))
        .find_map(|rest| Position::from_fen(rest.trim()).ok())
}

impl<E: Evaluator> TextModel for EngineModel<E> {
    fn complete(&mut self, prompt: &str, _: &GenerationParams) -> Result<RawResponse, ModelError> {
        let p = fen_from_prompt(prompt).ok_or(ModelError::NoFenInPrompt)?;
        let m = self.evaluator.best_move(&p, &self.limits)?;
        Ok(RawResponse::text(m.to_uci()))
    }
}

/// Counting semaphore bounding in-flight requests across clones of a client.
#[derive(Debug)]
pub struct RequestLimiter {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl RequestLimiter {
    pub fn new(slots: usize) -> Arc<RequestLimiter> {
        Arc::new(RequestLimiter {
            slots: Mutex::new(slots.max(1)),
            freed: Condvar::new(),
        })
    }

    fn acquire(self: &Arc<Self>) -> Permit {
        let mut free = self.slots.lock().expect("limiter lock");
        while *free == 0 {
            free = self.freed.wait(free).expect("limiter lock");
        }
        *free -= 1;
        Permit(Arc::clone(self))
    }
}

struct Permit(Arc<RequestLimiter>);

impl Drop for Permit {
    fn drop(&mut self) {
        *self.0.slots.lock().expect("limiter lock") += 1;
        self.0.freed.notify_one();
    }
}

/// Blocking client for an HTTP completion endpoint. Clones share the limiter.
#[derive(Clone)]
pub struct HttpModel {
    cfg: HttpEndpoint,
    client: reqwest::blocking::Client,
    limiter: Arc<RequestLimiter>,
}

/// Follows a dotted path such as `choices.0.text` through a JSON value.
pub fn json_path<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(v, |cur, key| match cur {
        Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get(i)),
        Value::Object(map) => map.get(key),
        _ => None,
    })
}

enum Attempt {
    Done(RawResponse),
    Retry(String),
    Fail(ModelError),
}

impl HttpModel {
    pub fn new(cfg: HttpEndpoint) -> Result<HttpModel, ModelError> {
        if !(cfg.timeout_secs > 0.0 && cfg.timeout_secs.is_finite()) {
            return Err(ModelError::Config("timeout must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| ModelError::Config(e.to_string()))?;
        let limiter = RequestLimiter::new(cfg.max_concurrency);
        Ok(HttpModel { cfg, client, limiter })
    }

    pub fn config(&self) -> &HttpEndpoint {
        &self.cfg
    }

    fn request_body(&self, prompt: &str, params: &GenerationParams) -> Value {
        json!({
            "model": self.cfg.model,
            "prompt": format!("{}{}{}", self.cfg.prompt_prefix, prompt, self.cfg.prompt_suffix),
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "stop": params.stop,
        })
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut req = self.client.post(self.cfg.url()).json(body);
        if let Some(var) = &self.cfg.auth_env {
            match std::env::var(var) {
                Ok(token) => req = req.bearer_auth(token),
                Err(_) => warn!("auth variable {var} is not set; sending request without credentials"),
            }
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Attempt::Fail(ModelError::Auth(status.as_u16()));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !status.is_success() {
            return Attempt::Fail(ModelError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let json: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Attempt::Fail(ModelError::Schema(format!("body is not JSON: {e}"))),
        };
        let Some(generated) = json_path(&json, &self.cfg.text_field).and_then(Value::as_str) else {
            return Attempt::Fail(ModelError::Schema(format!(
                "no string at `{}`",
                self.cfg.text_field
            )));
        };
        let usage = self
            .cfg
            .usage_field
            .as_deref()
            .and_then(|p| json_path(&json, p))
            .and_then(Value::as_u64);
        Attempt::Done(RawResponse {
            text: generated.to_owned(),
            token_usage: usage,
            latency: None,
            retries: 0,
        })
    }
}

impl TextModel for HttpModel {
    fn complete(&mut self, prompt: &str, params: &GenerationParams) -> Result<RawResponse, ModelError> {
        params.validate()?;
        let body = self.request_body(prompt, params);
        let _permit = self.limiter.acquire();
        let start = Instant::now();
        let mut retries = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(mut r) => {
                    r.latency = Some(start.elapsed());
                    r.retries = retries;
                    return Ok(r);
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(message) => {
                    if retries >= self.cfg.max_retries {
                        return Err(ModelError::Transport {
                            attempts: retries + 1,
                            message,
                        });
                    }
                    let wait = Duration::from_millis(self.cfg.backoff_ms.saturating_mul(1 << retries.min(16)));
                    debug!("transient failure ({message}); retrying in {wait:?}");
                    thread::sleep(wait);
                    retries += 1;
                }
            }
        }
    }
}

/// Creates model instances for an endpoint. HTTP instances share one
/// request limiter; engine instances each own a session.
pub struct ModelFactory {
    endpoint: ModelEndpoint,
    http: Option<HttpModel>,
}

impl ModelFactory {
    pub fn new(endpoint: ModelEndpoint) -> Result<ModelFactory, ModelError> {
        let http = match &endpoint {
            ModelEndpoint::Http(cfg) => Some(HttpModel::new(cfg.clone())?),
            _ => None,
        };
        Ok(ModelFactory { endpoint, http })
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    pub fn instance(&self) -> Result<Box<dyn TextModel + Send>, ModelError> {
        Ok(match &self.endpoint {
            ModelEndpoint::Http(_) => Box::new(self.http.clone().expect("built in new")),
            ModelEndpoint::Scripted { responses } => Box::new(ScriptedModel::new(responses.clone())),
            ModelEndpoint::EngineAsModel { engine, limits } => {
                Box::new(EngineModel::new(EngineSession::open(engine)?, *limits))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::MateOracle;

    #[test]
    fn scripted_replies_in_order() {
        let mut m = ScriptedModel::new(["f3e2", "d8d1"]);
        let p = GenerationParams::default();
        assert_eq!(m.complete("a", &p).unwrap().text, "f3e2");
        assert_eq!(m.complete("b", &p).unwrap().text, "d8d1");
        assert!(matches!(m.complete("c", &p), Err(ModelError::ScriptExhausted)));
        assert_eq!(m.prompts(), ["a", "b", "c"]);
    }

    #[test]
    fn engine_model_reads_fen_line() {
        let prompt = "You are a chess engine.\n\nFEN: 3r4/6Rp/pk6/1p3B2/5N2/P3pbP1/1P5P/4K3 b - - 3 36\n\nBest move:";
        let mut m = EngineModel::new(MateOracle::default(), EngineLimits::depth(1));
        assert_eq!(m.complete(prompt, &GenerationParams::default()).unwrap().text, "d8d1");
        assert!(matches!(
            m.complete("no position here", &GenerationParams::default()),
            Err(ModelError::NoFenInPrompt)
        ));
    }

    #[test]
    fn json_paths() {
        let v = json!({"choices": [{"text": "e2e4"}], "usage": {"completion_tokens": 3}});
        assert_eq!(json_path(&v, "choices.0.text"), Some(&json!("e2e4")));
        assert_eq!(json_path(&v, "usage.completion_tokens"), Some(&json!(3)));
        assert_eq!(json_path(&v, "choices.1.text"), None);
        assert_eq!(json_path(&v, "missing"), None);
    }

    #[test]
    fn params_validation() {
        assert!(GenerationParams::default().validate().is_ok());
        assert!(GenerationParams::with_temperature(-0.1).validate().is_err());
        assert!(GenerationParams::with_temperature(f64::NAN).validate().is_err());
        let d = GenerationParams::default();
        assert_eq!((d.max_tokens, d.stop.as_slice(), d.temperature), (64, &["\n".to_owned()][..], 0.0));
    }

    #[test]
    fn endpoint_serde() {
        let e = ModelEndpoint::Http(HttpEndpoint::new("http://localhost:8000", "m"));
        let text = serde_json::to_string(&e).unwrap();
        assert!(text.contains("\"kind\":\"http\""));
        let back: ModelEndpoint = serde_json::from_str(&text).unwrap();
        assert_eq!(back, e);
        let minimal: ModelEndpoint =
            serde_json::from_str(r#"{"kind":"http","base_url":"http://x","model":"m"}"#).unwrap();
        assert_eq!(minimal, ModelEndpoint::Http(HttpEndpoint::new("http://x", "m")));
    }
}
