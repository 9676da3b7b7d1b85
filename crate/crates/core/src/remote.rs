//! Blocking HTTP clients for the embedding, paraphrase and completion
//! backends.

use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::oplog::TaskType;
use crate::orchestrator::{
    render_plot_prompt, GeneratedSuggestion, RemoteCompletionConfig, SuggestionProvider, SuggestionTask,
};
use crate::provider::ProviderError;
use crate::stats::SeededRng;
use crate::textmetrics::{EmbeddingProvider, ParaphraseProvider};

pub const API_KEY_ENV: &str = "INKFLUX_API_KEY";
pub const EMBED_ENDPOINT_ENV: &str = "INKFLUX_EMBED_ENDPOINT";
pub const PARAPHRASE_ENDPOINT_ENV: &str = "INKFLUX_PARAPHRASE_ENDPOINT";

const RETRIES: u32 = 2;

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub timeout: Duration,
    pub api_key: Option<String>,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            api_key: None,
        }
    }
}

impl HttpSettings {
    pub fn from_env() -> Self {
        Self {
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            ..Self::default()
        }
    }
}

/// JSON POST with bearer auth; connection errors, timeouts and 5xx
/// responses are retried a couple of times with a short backoff.
struct JsonClient {
    name: String,
    url: String,
    client: Client,
    api_key: Option<String>,
}

impl JsonClient {
    fn new(name: &str, endpoint: &str, path: &str, settings: &HttpSettings) -> Result<Self, ProviderError> {
        let client = Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| ProviderError::new(name, e.to_string()))?;
        Ok(Self {
            name: name.to_string(),
            url: format!("{}/{}", endpoint.trim_end_matches('/'), path),
            client,
            api_key: settings.api_key.clone(),
        })
    }

    fn err(&self, message: impl Into<String>) -> ProviderError {
        ProviderError::new(self.name.clone(), message)
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R, ProviderError> {
        let mut attempt = 0;
        loop {
            let mut req = self.client.post(&self.url).json(body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let retryable = match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp
                        .json::<R>()
                        .map_err(|e| self.err(format!("malformed response from {}: {e}", self.url)));
                }
                Ok(resp) if resp.status().is_server_error() => {
                    format!("{} returned {}", self.url, resp.status())
                }
                Ok(resp) => return Err(self.err(format!("{} returned {}", self.url, resp.status()))),
                Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => format!("{}: {e}", self.url),
                Err(e) => return Err(self.err(format!("{}: {e}", self.url))),
            };
            if attempt >= RETRIES {
                return Err(self.err(retryable));
            }
            attempt += 1;
            thread::sleep(Duration::from_millis(200 * attempt as u64));
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// `POST {endpoint}/embed`. The dimension is fixed up front or learned from
/// the first response.
pub struct RemoteEmbedder {
    http: JsonClient,
    dimension: OnceLock<usize>,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str, dimension: Option<usize>, settings: &HttpSettings) -> Result<Self, ProviderError> {
        let cell = OnceLock::new();
        if let Some(d) = dimension {
            let _ = cell.set(d);
        }
        Ok(Self {
            http: JsonClient::new("remote-embedder", endpoint, "embed", settings)?,
            dimension: cell,
        })
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn name(&self) -> &str {
        "remote-embedder"
    }

    fn dimension(&self) -> usize {
        self.dimension.get().copied().unwrap_or(0)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        self.embed_batch(&[text])?
            .pop()
            .ok_or_else(|| self.http.err("empty embedding response"))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp: EmbedResponse = self.http.post(&EmbedRequest { texts })?;
        if resp.vectors.len() != texts.len() {
            return Err(self
                .http
                .err(format!("expected {} vectors, got {}", texts.len(), resp.vectors.len())));
        }
        if let Some(first) = resp.vectors.first() {
            let _ = self.dimension.set(first.len());
        }
        Ok(resp.vectors)
    }
}

#[derive(Serialize)]
struct ParaphraseRequest<'a> {
    pairs: Vec<[&'a str; 2]>,
}

#[derive(Deserialize)]
struct ParaphraseResponse {
    scores: Vec<f64>,
}

/// `POST {endpoint}/paraphrase`.
pub struct RemoteParaphraser {
    http: JsonClient,
}

impl RemoteParaphraser {
    pub fn new(endpoint: &str, settings: &HttpSettings) -> Result<Self, ProviderError> {
        Ok(Self {
            http: JsonClient::new("remote-paraphraser", endpoint, "paraphrase", settings)?,
        })
    }
}

impl ParaphraseProvider for RemoteParaphraser {
    fn name(&self) -> &str {
        "remote-paraphraser"
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        self.score_batch(&[(a, b)])?
            .pop()
            .ok_or_else(|| self.http.err("empty score response"))
    }

    fn score_batch(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ProviderError> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let body = ParaphraseRequest {
            pairs: pairs.iter().map(|&(a, b)| [a, b]).collect(),
        };
        let resp: ParaphraseResponse = self.http.post(&body)?;
        if resp.scores.len() != pairs.len() {
            return Err(self
                .http
                .err(format!("expected {} scores, got {}", pairs.len(), resp.scores.len())));
        }
        Ok(resp.scores)
    }
}

#[derive(Serialize)]
struct CompleteRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct CompleteResponse {
    text: String,
}

/// `POST {endpoint}/complete`. Plot tasks send the arc prompt, continuation
/// tasks the raw snippet. Latency is the measured round trip.
pub struct RemoteCompletionProvider {
    task_type: TaskType,
    config: RemoteCompletionConfig,
    http: JsonClient,
}

impl RemoteCompletionProvider {
    pub fn new(
        task_type: TaskType,
        config: RemoteCompletionConfig,
        settings: &HttpSettings,
    ) -> Result<Self, ProviderError> {
        let http = JsonClient::new("remote-completion", &config.endpoint, "complete", settings)?;
        Ok(Self {
            task_type,
            config,
            http,
        })
    }

    pub fn from_env(task_type: TaskType, config: RemoteCompletionConfig) -> Result<Self, ProviderError> {
        let settings = HttpSettings {
            timeout: Duration::from_secs_f64(config.timeout_s),
            ..HttpSettings::from_env()
        };
        Self::new(task_type, config, &settings)
    }

    pub fn prompt_for(&self, task: &SuggestionTask) -> Result<String, ProviderError> {
        match task.task_type {
            TaskType::Gpt3Continuation => Ok(task.snippet.text.clone()),
            _ => render_plot_prompt(&task.snippet.text, task.instruction.as_deref().unwrap_or(""))
                .map_err(|e| self.http.err(e.to_string())),
        }
    }
}

impl SuggestionProvider for RemoteCompletionProvider {
    fn name(&self) -> &str {
        "remote-completion"
    }

    fn serves(&self) -> TaskType {
        self.task_type
    }

    fn generate(&self, task: &SuggestionTask, _rng: &mut SeededRng) -> Result<Vec<GeneratedSuggestion>, ProviderError> {
        let prompt = self.prompt_for(task)?;
        let mut out = Vec::with_capacity(task.num_ideas as usize);
        for _ in 0..task.num_ideas {
            let started = Instant::now();
            let resp: CompleteResponse = self.http.post(&CompleteRequest {
                model: &self.config.model,
                prompt: &prompt,
                max_tokens: self.config.max_tokens,
                temperature: self.config.temperature,
            })?;
            out.push(GeneratedSuggestion {
                latency_s: started.elapsed().as_secs_f64(),
                text: resp.text.trim().to_string(),
            });
        }
        Ok(out)
    }
}
