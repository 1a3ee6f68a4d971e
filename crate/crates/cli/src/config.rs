//! Parse settings merged from defaults, an INI file, then flags.

use std::path::{Path, PathBuf};

use ini::{Ini, ParseOption};
use serde::Serialize;
use tmplex_core::pipeline::{ParseConfig, DEFAULT_K, DEFAULT_TAU, DEFAULT_THETA};
use tmplex_core::preprocess::RuleSet;
use tmplex_core::vecindex::{FeatureSet, DEFAULT_FEATURES};

use crate::Failure;

const KNOWN_KEYS: &[&str] = &[
    "k",
    "tau",
    "theta",
    "punct_features",
    "rules",
    "keywords",
    "format",
    "disable_keywords",
    "disable_index",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Raw,
    LoghubCsv,
}

/// Everything that shapes a parse run.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub k: usize,
    pub tau: f64,
    pub theta: f64,
    pub punct_features: String,
    pub rules: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub format: InputFormat,
    pub disable_keywords: bool,
    pub disable_index: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            tau: DEFAULT_TAU,
            theta: DEFAULT_THETA,
            punct_features: DEFAULT_FEATURES.to_string(),
            rules: None,
            keywords: None,
            format: InputFormat::Raw,
            disable_keywords: false,
            disable_index: false,
        }
    }
}

/// Flag values; `None` leaves the file or default value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub k: Option<usize>,
    pub tau: Option<f64>,
    pub theta: Option<f64>,
    pub punct_features: Option<String>,
    pub rules: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub format: Option<InputFormat>,
    pub disable_keywords: bool,
    pub disable_index: bool,
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, Failure> {
    raw.trim()
        .parse()
        .map_err(|_| Failure::usage(format!("config key {key}: cannot parse {raw:?}")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, Failure> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Failure::usage(format!("config key {key}: expected a boolean, got {raw:?}"))),
    }
}

impl Settings {
    /// Applies `key = value` lines from an INI file. Keys live outside any
    /// section; relative paths resolve against the file's directory.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let opt = ParseOption {
            enabled_quote: false,
            enabled_escape: false,
            ..Default::default()
        };
        let ini = Ini::load_from_str_opt(&text, opt)
            .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
        if let Some(section) = ini.sections().flatten().next() {
            return Err(Failure::usage(format!(
                "config {}: sections are not supported (found [{section}])",
                path.display()
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        for (key, value) in ini.general_section().iter() {
            match key {
                "k" => self.k = parse_value(key, value)?,
                "tau" => self.tau = parse_value(key, value)?,
                "theta" => self.theta = parse_value(key, value)?,
                "punct_features" => self.punct_features = value.to_string(),
                "rules" => self.rules = Some(base.join(value.trim())),
                "keywords" => self.keywords = Some(base.join(value.trim())),
                "format" => {
                    self.format = match value.trim() {
                        "raw" => InputFormat::Raw,
                        "loghub-csv" => InputFormat::LoghubCsv,
                        other => return Err(Failure::usage(format!("config key format: unknown {other:?}"))),
                    }
                }
                "disable_keywords" => self.disable_keywords = parse_bool(key, value)?,
                "disable_index" => self.disable_index = parse_bool(key, value)?,
                _ => {
                    return Err(Failure::usage(format!(
                        "config {}: unknown key {key:?} (known: {})",
                        path.display(),
                        KNOWN_KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, o: Overrides) {
        if let Some(k) = o.k {
            self.k = k;
        }
        if let Some(tau) = o.tau {
            self.tau = tau;
        }
        if let Some(theta) = o.theta {
            self.theta = theta;
        }
        if let Some(f) = o.punct_features {
            self.punct_features = f;
        }
        if o.rules.is_some() {
            self.rules = o.rules;
        }
        if o.keywords.is_some() {
            self.keywords = o.keywords;
        }
        if let Some(f) = o.format {
            self.format = f;
        }
        self.disable_keywords |= o.disable_keywords;
        self.disable_index |= o.disable_index;
    }

    /// Checks values and loads the rule file. Nothing is written before this
    /// succeeds.
    pub fn parse_config(&self) -> Result<ParseConfig, Failure> {
        let features = FeatureSet::new(&self.punct_features).map_err(|e| Failure::usage(e.to_string()))?;
        let rules = match &self.rules {
            Some(p) => {
                if !p.is_file() {
                    return Err(Failure::usage(format!("rules file {} not found", p.display())));
                }
                RuleSet::from_json_file(p).map_err(Failure::data)?
            }
            None => RuleSet::default(),
        };
        let config = ParseConfig {
            k: self.k,
            tau: self.tau,
            theta: self.theta,
            rules,
            features,
            disable_keywords: self.disable_keywords,
            disable_index: self.disable_index,
        };
        config.validate().map_err(|e| Failure::usage(e.to_string()))?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let f = file("k = 10\ntau = 0.3\n# comment\ndisable_index = true\n");
        let mut s = Settings::default();
        s.apply_file(f.path()).unwrap();
        assert_eq!((s.k, s.tau, s.theta), (10, 0.3, DEFAULT_THETA));
        assert!(s.disable_index);
        s.apply_flags(Overrides {
            k: Some(15),
            ..Default::default()
        });
        assert_eq!((s.k, s.tau), (15, 0.3));
    }

    #[test]
    fn feature_string_survives_ini_parsing() {
        let f = file(&format!("punct_features = {DEFAULT_FEATURES}\n"));
        let mut s = Settings::default();
        s.apply_file(f.path()).unwrap();
        assert_eq!(s.punct_features, DEFAULT_FEATURES);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        for text in ["kk = 1\n", "k = many\n", "[parse]\nk = 1\n", "disable_index = maybe\n"] {
            let mut s = Settings::default();
            let err = s.apply_file(file(text).path()).unwrap_err();
            assert_eq!(err.code, 2, "{text}");
        }
    }

    #[test]
    fn invalid_values_fail_validation() {
        let s = Settings {
            tau: 1.5,
            ..Default::default()
        };
        assert_eq!(s.parse_config().unwrap_err().code, 2);
        let s = Settings {
            punct_features: "abc".into(),
            ..Default::default()
        };
        assert_eq!(s.parse_config().unwrap_err().code, 2);
    }
}
