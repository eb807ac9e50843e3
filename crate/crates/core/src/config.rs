//! Flat `key = value` configuration files.
//!
//! One file configures the whole pipeline. Lines are `key = value`; blank
//! lines and lines starting with `#` are ignored. Each stage reads the keys it
//! owns through [`KvConfig`] and [`PipelineConfig::from_kv`] rejects any key no
//! stage claims, so typos surface as errors instead of silently using defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::collab::CollabConfig;
use crate::corpus::{RoundVocabulary, SplitSpec, SyntheticConfig};
use crate::embed::EmbedConfig;
use crate::score::ScoreConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("config key `{key}` given twice")]
    DuplicateKey { key: String },
    #[error("config key `{key}`: cannot parse {value:?} ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config file")]
    Io(#[from] std::io::Error),
}

/// Parsed key/value pairs, tracking which keys have been consumed.
#[derive(Debug, Default, Clone)]
pub struct KvConfig {
    values: BTreeMap<String, String>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            }
            if values
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(ConfigError::DuplicateKey {
                    key: key.to_string(),
                });
            }
        }
        Ok(Self {
            values,
            consumed: Default::default(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let v = self.values.get(key)?;
        self.consumed.borrow_mut().insert(key.to_string());
        Some(v.as_str())
    }

    /// Parse `key` if present.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                reason: e.to_string(),
            }),
        }
    }

    /// Overwrite `*slot` with the parsed value of `key` when the key is set.
    pub fn set<T>(&self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Keys present in the file that no reader has asked for yet.
    pub fn unconsumed(&self) -> Vec<String> {
        let consumed = self.consumed.borrow();
        self.values
            .keys()
            .filter(|k| !consumed.contains(*k))
            .cloned()
            .collect()
    }

    pub fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.values
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect()
    }
}

/// Parse a boolean in the usual spellings.
pub(crate) fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: "expected a boolean".to_string(),
        }),
    }
}

/// Every stage's configuration, as read from one flat file.
#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    /// Master seed for synthesis, splitting and subsampling.
    pub seed: u64,
    pub rounds: RoundVocabulary,
    pub synthetic: SyntheticConfig,
    pub split: SplitSpec,
    pub embed: EmbedConfig,
    pub collab: CollabConfig,
    pub score: ScoreConfig,
}

impl PipelineConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut seed = 0u64;
        kv.set("seed", &mut seed)?;
        let rounds = match kv.raw("rounds") {
            Some(list) => RoundVocabulary::new(
                list.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect(),
            )
            .map_err(|e| ConfigError::Invalid(e.to_string()))?,
            None => RoundVocabulary::default(),
        };
        let mut synthetic = SyntheticConfig::from_kv(kv)?;
        synthetic.seed = seed;
        let mut split = SplitSpec::from_kv(kv)?;
        split.rng_seed = seed;
        let embed = EmbedConfig::from_kv(kv)?;
        let collab = CollabConfig::from_kv(kv)?;
        let score = ScoreConfig::from_kv(kv)?;
        if let Some(key) = kv.unconsumed().into_iter().next() {
            return Err(ConfigError::UnknownKey(key));
        }
        Ok(Self {
            seed,
            rounds,
            synthetic,
            split,
            embed,
            collab,
            score,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_kv(&KvConfig::from_file(path)?)
    }

    /// Replace the master seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.synthetic.seed = seed;
        self.split.rng_seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let kv = KvConfig::parse("# header\n\nw1 = 0.25\n  w2=0.75  \n").unwrap();
        assert_eq!(kv.get::<f64>("w1").unwrap(), Some(0.25));
        assert_eq!(kv.get::<f64>("w2").unwrap(), Some(0.75));
        assert!(kv.unconsumed().is_empty());
    }

    #[test]
    fn rejects_malformed_line() {
        let err = KvConfig::parse("w1 0.5\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
    }

    #[test]
    fn rejects_duplicate_and_unknown_keys() {
        assert!(matches!(
            KvConfig::parse("a=1\na=2").unwrap_err(),
            ConfigError::DuplicateKey { .. }
        ));
        let kv = KvConfig::parse("not_a_key = 3").unwrap();
        assert!(matches!(
            PipelineConfig::from_kv(&kv).unwrap_err(),
            ConfigError::UnknownKey(k) if k == "not_a_key"
        ));
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::from_kv(&KvConfig::parse("").unwrap()).unwrap();
        assert_eq!(cfg.score, ScoreConfig::default());
        assert_eq!(cfg.split.train_fraction, 0.7);
        assert_eq!(cfg.rounds, RoundVocabulary::default());
    }

    #[test]
    fn seed_propagates() {
        let kv = KvConfig::parse("seed = 99").unwrap();
        let cfg = PipelineConfig::from_kv(&kv).unwrap();
        assert_eq!(cfg.synthetic.seed, 99);
        assert_eq!(cfg.split.rng_seed, 99);
        let cfg = cfg.with_seed(5);
        assert_eq!(cfg.synthetic.seed, 5);
        assert_eq!(cfg.split.rng_seed, 5);
    }
}
