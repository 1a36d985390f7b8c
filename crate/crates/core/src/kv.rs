//! `key = value` text blocks used for architecture configs, generator specs
//! and CLI run configs.
//!
//! One pair per line; blank lines and lines starting with `#` are ignored.
//! Lists are comma-separated. Unknown and duplicate keys are errors.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("key `{key}`: cannot parse {value:?}: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown key(s): {0}")]
    Unknown(String),
    #[error("missing key `{0}`")]
    Missing(String),
}

/// Parsed pairs; consumers remove the keys they understand and then call
/// [`KvMap::finish`] to reject leftovers.
#[derive(Debug, Default, Clone)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| KvError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(KvError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(KvError::Duplicate { line: i + 1, key });
            }
        }
        Ok(KvMap { entries })
    }

    pub fn insert(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, KvError>
    where
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e: T::Err| KvError::Value {
                key: key.to_string(),
                value: v,
                reason: e.to_string(),
            }),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, KvError>
    where
        T::Err: Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, KvError>
    where
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|e: T::Err| KvError::Value {
                        key: key.to_string(),
                        value: v.clone(),
                        reason: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    /// Errors if any key was not consumed.
    pub fn finish(self) -> Result<(), KvError> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            Err(KvError::Unknown(
                self.entries.keys().cloned().collect::<Vec<_>>().join(", "),
            ))
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Formats a list for a `key = a,b,c` line.
pub fn join_list<T: Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
