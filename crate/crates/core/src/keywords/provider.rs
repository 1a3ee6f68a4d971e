//! Offline keyword-library providers.
//!
//! The HTTP provider sends sampled logs to an extraction service and keeps
//! the raw response on disk keyed by a hash of the request, so a library can
//! be rebuilt without the service. Nothing here runs on the parse path.

use std::path::{Path, PathBuf};
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::KeywordLibrary;
use crate::error::{Error, Result};

pub const ENDPOINT_ENV: &str = "ECLIPSE_KW_ENDPOINT";
pub const TOKEN_ENV: &str = "ECLIPSE_KW_TOKEN";

pub const PROMPT_VERSION: u32 = 1;
pub const EXTRACTION_PROMPT: &str = "You are given a sample of machine log lines. \
List the words and short expressions (one to four words) that name the event each \
line reports, such as actions, states and outcomes. Skip identifiers, numbers, paths, \
addresses and timestamps. Return one expression per line, most frequent first, with \
no numbering or commentary.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    StaticFile,
    HttpService,
}

pub trait KeywordProvider {
    fn kind(&self) -> ProviderKind;

    /// Produces a validated library of at most `budget` phrases.
    fn fetch(&self, sample_logs: &[String], budget: usize) -> Result<KeywordLibrary>;
}

#[derive(Debug, Clone)]
pub struct StaticFileProvider {
    pub path: PathBuf,
}

impl KeywordProvider for StaticFileProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::StaticFile
    }

    fn fetch(&self, _sample_logs: &[String], budget: usize) -> Result<KeywordLibrary> {
        let mut lib = KeywordLibrary::load_static(&self.path)?;
        lib.truncate(budget);
        Ok(lib)
    }
}

#[derive(Debug, Serialize)]
struct ExtractionRequest<'a> {
    instruction: &'a str,
    prompt_version: u32,
    logs: &'a [String],
    max_phrases: usize,
}

#[derive(Debug, Deserialize)]
struct ExtractionResponse {
    phrases: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct HttpProvider {
    pub endpoint: String,
    pub token: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub attempts: u32,
    pub timeout: Duration,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            token: None,
            cache_dir: None,
            attempts: 3,
            timeout: Duration::from_secs(60),
        }
    }

    /// Reads the endpoint and optional bearer token from the environment.
    pub fn from_env() -> Result<Self> {
        let endpoint = std::env::var(ENDPOINT_ENV)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .ok_or(Error::MissingEnv(ENDPOINT_ENV))?;
        let mut p = Self::new(endpoint);
        p.token = std::env::var(TOKEN_ENV).ok().filter(|s| !s.is_empty());
        Ok(p)
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    fn request_body(&self, sample_logs: &[String], budget: usize) -> Result<String> {
        Ok(serde_json::to_string(&ExtractionRequest {
            instruction: EXTRACTION_PROMPT,
            prompt_version: PROMPT_VERSION,
            logs: sample_logs,
            max_phrases: budget,
        })?)
    }

    fn post(&self, body: String) -> Result<String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let mut last_err = String::new();
        for attempt in 1..=self.attempts.max(1) {
            let mut req = client
                .post(&self.endpoint)
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body.clone());
            if let Some(token) = &self.token {
                req = req.bearer_auth(token);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp.text().map_err(|e| Error::Transport(e.to_string()));
                }
                Ok(resp) if resp.status().is_server_error() => {
                    last_err = format!("service returned {}", resp.status());
                }
                Ok(resp) => {
                    return Err(Error::Transport(format!("service returned {}", resp.status())));
                }
                Err(e) => last_err = e.to_string(),
            }
            debug!("keyword service attempt {attempt} failed: {last_err}");
            if attempt < self.attempts {
                std::thread::sleep(Duration::from_millis(200 * u64::from(attempt)));
            }
        }
        Err(Error::Transport(last_err))
    }

    /// Fetches a library and writes it to `out` in the static-file format.
    pub fn fetch_and_persist(
        &self,
        sample_logs: &[String],
        budget: usize,
        out: &Path,
    ) -> Result<KeywordLibrary> {
        let lib = self.fetch(sample_logs, budget)?;
        lib.save_static(out)?;
        Ok(lib)
    }
}

impl KeywordProvider for HttpProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::HttpService
    }

    fn fetch(&self, sample_logs: &[String], budget: usize) -> Result<KeywordLibrary> {
        let body = self.request_body(sample_logs, budget)?;
        let cache_path = self
            .cache_dir
            .as_ref()
            .map(|d| d.join(format!("{}.txt", cache_key(&self.endpoint, &body))));

        let response = match cache_path.as_ref().filter(|p| p.exists()) {
            Some(p) => {
                debug!("keyword response cache hit {}", p.display());
                std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?
            }
            None => {
                let text = self.post(body)?;
                let lib = parse_response(&text, budget)?;
                if let Some(p) = &cache_path {
                    if let Some(dir) = p.parent() {
                        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    }
                    std::fs::write(p, &text).map_err(|e| Error::io(p, e))?;
                }
                return Ok(lib);
            }
        };
        parse_response(&response, budget)
    }
}

/// Hex SHA-256 over the endpoint and request body.
pub fn cache_key(endpoint: &str, body: &str) -> String {
    let mut h = Sha256::new();
    h.update(endpoint.as_bytes());
    h.update([0u8]);
    h.update(body.as_bytes());
    hex::encode(h.finalize())
}

/// Accepts `{"phrases": [...]}` or a plain newline-separated list.
pub(crate) fn parse_response(text: &str, budget: usize) -> Result<KeywordLibrary> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(Error::KeywordFormat("empty response body".into()));
    }
    let raw: Vec<String> = if trimmed.starts_with('{') {
        let resp: ExtractionResponse = serde_json::from_str(trimmed)
            .map_err(|e| Error::KeywordFormat(format!("bad JSON response: {e}")))?;
        resp.phrases
            .iter()
            .flat_map(|p| p.lines().map(str::to_string).collect::<Vec<_>>())
            .collect()
    } else {
        trimmed.lines().map(str::to_string).collect()
    };
    let mut lib = KeywordLibrary::new();
    for phrase in raw.iter().map(|p| p.trim()).filter(|p| !p.is_empty()) {
        if let Err(e) = lib.add(phrase) {
            warn!("dropping phrase from keyword service: {e}");
        }
    }
    if lib.is_empty() {
        return Err(Error::KeywordFormat("response contains no usable phrases".into()));
    }
    lib.truncate(budget);
    Ok(lib)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_and_json_bodies() {
        let l = parse_response("access denied\nconnection closed", 10).unwrap();
        assert_eq!(l.len(), 2);
        let l = parse_response(r#"{"phrases": ["open", "Close", "open"]}"#, 10).unwrap();
        assert_eq!(l.phrases().collect::<Vec<_>>(), vec!["open", "close"]);
    }

    #[test]
    fn empty_or_broken_bodies_are_format_errors() {
        assert!(matches!(parse_response("", 5), Err(Error::KeywordFormat(_))));
        assert!(matches!(parse_response("  \n ", 5), Err(Error::KeywordFormat(_))));
        assert!(matches!(parse_response("{\"nope\": 1}", 5), Err(Error::KeywordFormat(_))));
    }

    #[test]
    fn budget_clamps_to_first_phrases() {
        let l = parse_response("a\nb\nc\nd\ne", 1).unwrap();
        assert_eq!(l.phrases().collect::<Vec<_>>(), vec!["a"]);
    }

    #[test]
    fn cache_key_depends_on_body() {
        assert_ne!(cache_key("http://x", "a"), cache_key("http://x", "b"));
        assert_eq!(cache_key("http://x", "a").len(), 64);
    }
}
