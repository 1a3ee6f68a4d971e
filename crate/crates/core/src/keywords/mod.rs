//! Keyword library and the dictionary key function.
//!
//! A log's key is every library phrase found in it, scanned left to right
//! with longest match first, lowercased and joined by single spaces. Logs
//! without any phrase share the key [`NO_KEY`].

mod provider;

use std::collections::HashSet;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::preprocess;
use crate::template::WILDCARD;

pub use provider::{
    cache_key, HttpProvider, KeywordProvider, ProviderKind, StaticFileProvider, ENDPOINT_ENV,
    EXTRACTION_PROMPT, PROMPT_VERSION, TOKEN_ENV,
};

/// Key shared by logs that contain no library phrase.
pub const NO_KEY: &str = "<nokey>";
/// Longest phrase, in tokens.
pub const MAX_PHRASE_TOKENS: usize = 4;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordLibrary {
    phrases: HashSet<Vec<String>>,
    /// Insertion order, for stable file output.
    order: Vec<Vec<String>>,
    first_tokens: HashSet<String>,
    max_len: usize,
}

/// Normalizes one phrase: tokenized like a log line, lowercased.
pub fn normalize_phrase(raw: &str) -> std::result::Result<Vec<String>, String> {
    if raw.contains(WILDCARD) {
        return Err(format!("phrase {raw:?} contains the wildcard symbol"));
    }
    let tokens: Vec<String> = preprocess::tokenize(raw.trim())
        .into_iter()
        .map(|t| t.to_lowercase())
        .collect();
    if tokens.is_empty() {
        return Err("empty phrase".into());
    }
    if tokens.len() > MAX_PHRASE_TOKENS {
        return Err(format!(
            "phrase {raw:?} has {} tokens, limit is {MAX_PHRASE_TOKENS}",
            tokens.len()
        ));
    }
    Ok(tokens)
}

impl KeywordLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a phrase. Returns false when it normalizes to one already present.
    pub fn add(&mut self, raw: &str) -> std::result::Result<bool, String> {
        let phrase = normalize_phrase(raw)?;
        if self.phrases.contains(&phrase) {
            return Ok(false);
        }
        self.max_len = self.max_len.max(phrase.len());
        self.first_tokens.insert(phrase[0].clone());
        self.order.push(phrase.clone());
        self.phrases.insert(phrase);
        Ok(true)
    }

    /// Builds a library from phrases, skipping invalid ones with a warning.
    pub fn from_phrases<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lib = Self::new();
        for p in phrases {
            if let Err(e) = lib.add(p.as_ref()) {
                warn!("skipping keyword phrase: {e}");
            }
        }
        lib
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, phrase: &str) -> bool {
        normalize_phrase(phrase).is_ok_and(|p| self.phrases.contains(&p))
    }

    /// Phrases in insertion order, tokens joined by single spaces.
    pub fn phrases(&self) -> impl Iterator<Item = String> + '_ {
        self.order.iter().map(|p| p.join(" "))
    }

    /// Keeps only the first `n` phrases.
    pub fn truncate(&mut self, n: usize) {
        if n >= self.order.len() {
            return;
        }
        let kept: Vec<String> = self.phrases().take(n).collect();
        *self = Self::from_phrases(kept);
    }

    /// The dictionary key for a token sequence.
    pub fn extract_key<S: AsRef<str>>(&self, tokens: &[S]) -> String {
        if self.is_empty() {
            return NO_KEY.to_string();
        }
        let lowered: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
        let mut parts: Vec<&str> = Vec::new();
        let mut i = 0;
        while i < lowered.len() {
            if !self.first_tokens.contains(&lowered[i]) {
                i += 1;
                continue;
            }
            let longest = self.max_len.min(lowered.len() - i);
            let hit = (1..=longest)
                .rev()
                .find(|&len| self.phrases.contains(&lowered[i..i + len]));
            match hit {
                Some(len) => {
                    parts.extend(lowered[i..i + len].iter().map(String::as_str));
                    i += len;
                }
                None => i += 1,
            }
        }
        if parts.is_empty() {
            NO_KEY.to_string()
        } else {
            parts.join(" ")
        }
    }

    /// Reads one phrase per line; blank lines and `#` comments are skipped.
    pub fn load_static(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lib = Self::from_phrases(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        );
        if lib.is_empty() {
            warn!("keyword file {} has no usable phrases", path.display());
        }
        Ok(lib)
    }

    pub fn to_static_string(&self) -> String {
        let mut out = String::new();
        for p in self.phrases() {
            out.push_str(&p);
            out.push('\n');
        }
        out
    }

    pub fn save_static(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_static_string()).map_err(|e| Error::io(path, e))
    }
}
