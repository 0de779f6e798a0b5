//! Flat `key = value` configuration with dotted section paths.
//!
//! Blank lines and lines starting with `#` are ignored. Every key that is read
//! is recorded together with the value actually used (explicit or default), so
//! the resolved configuration can be echoed into output headers. Keys that are
//! never read are reported as errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::str::FromStr;
use std::sync::Mutex;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Default)]
pub struct Config {
    raw: BTreeMap<String, String>,
    resolved: Mutex<BTreeMap<String, String>>,
    read: Mutex<BTreeSet<String>>,
}

/// Keys that affect how a run executes but not what it computes; kept out of headers.
pub const EXECUTION_KEYS: &[&str] = &["workers", "output.csv", "output.json", "output.grid"];

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = format!("line {}", lineno + 1);
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(&at, format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_') {
                return Err(ConfigError::new(&at, format!("invalid key `{k}`")));
            }
            if raw.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::new(k, "key given more than once"));
            }
        }
        Ok(Self { raw, ..Default::default() })
    }

    pub fn set_default(&mut self, key: &str, value: impl Display) {
        self.raw.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    fn note(&self, key: &str, value: &str) {
        self.read.lock().expect("config lock").insert(key.to_string());
        self.resolved.lock().expect("config lock").insert(key.to_string(), value.to_string());
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw.contains_key(key)
    }

    pub fn get<T: FromStr + Display>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: Display,
    {
        match self.raw.get(key) {
            Some(v) => {
                let parsed = v.parse::<T>().map_err(|e| ConfigError::new(key, format!("cannot parse `{v}`: {e}")))?;
                self.note(key, v);
                Ok(parsed)
            }
            None => {
                self.note(key, &default.to_string());
                Ok(default)
            }
        }
    }

    pub fn optional(&self, key: &str) -> Option<String> {
        let v = self.raw.get(key).cloned();
        self.read.lock().expect("config lock").insert(key.to_string());
        if let Some(v) = &v {
            self.resolved.lock().expect("config lock").insert(key.to_string(), v.clone());
        }
        v
    }

    /// Comma-separated list.
    pub fn list<T: FromStr + Display + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>, ConfigError>
    where
        T::Err: Display,
    {
        let Some(v) = self.raw.get(key) else {
            let s: Vec<String> = default.iter().map(|d| d.to_string()).collect();
            self.note(key, &s.join(","));
            return Ok(default.to_vec());
        };
        let out = v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| ConfigError::new(key, format!("cannot parse list item `{s}`: {e}"))))
            .collect::<Result<Vec<T>, _>>()?;
        self.note(key, v);
        Ok(out)
    }

    pub fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v: f64 = self.get(key, default)?;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(ConfigError::new(key, format!("must be a positive number, got {v}")))
        }
    }

    pub fn count(&self, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        let v: usize = self.get(key, default)?;
        if v < min {
            return Err(ConfigError::new(key, format!("must be at least {min}, got {v}")));
        }
        Ok(v)
    }

    /// Error on any key that was supplied but never read.
    pub fn reject_unknown(&self) -> Result<(), ConfigError> {
        let read = self.read.lock().expect("config lock");
        match self.raw.keys().find(|k| !read.contains(*k)) {
            Some(k) => Err(ConfigError::new(k, "unknown key for this subcommand")),
            None => Ok(()),
        }
    }

    /// Resolved `key = value` pairs, sorted, without execution-only keys.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.resolved
            .lock().expect("config lock")
            .iter()
            .filter(|(k, _)| !EXECUTION_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}
