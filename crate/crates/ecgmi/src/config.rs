//! Plain `key = value` configuration files: one pair per line, `#`
//! comments, trimmed keys, unquoted scalar values, `true`/`false` flags.
//! The serialized form is sorted and deterministic so an echoed config
//! replays a run bitwise.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    BadLine { line: usize, text: String },
    #[error("key `{key}`: expected {expected}, got `{value}`")]
    BadValue { key: String, expected: &'static str, value: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Config::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            if line.trim().is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::BadLine { line: no + 1, text: raw.to_string() });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::BadLine { line: no + 1, text: raw.to_string() });
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                expected: "a number",
                value: v.clone(),
            }),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                expected: "a non-negative integer",
                value: v.clone(),
            }),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                expected: "a non-negative integer",
                value: v.clone(),
            }),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.values.get(key).map(|s| s.as_str()) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(ConfigError::BadValue {
                key: key.to_string(),
                expected: "true or false",
                value: v.to_string(),
            }),
        }
    }

    /// Sorted `key = value` lines; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_blanks() {
        let cfg = Config::parse(
            "# header comment\n\
             learning_rate = 0.001\n\
             \n\
             epochs=50   # trailing comment\n\
             name = spaced value\n",
        )
        .unwrap();
        assert_eq!(cfg.get("learning_rate"), Some("0.001"));
        assert_eq!(cfg.get("epochs"), Some("50"));
        assert_eq!(cfg.get("name"), Some("spaced value"));
        assert_eq!(cfg.get("missing"), None);
    }

    #[test]
    fn typed_getters_and_defaults() {
        let cfg = Config::parse("a = 2.5\nb = 7\nc = true\nd = false\n").unwrap();
        assert_eq!(cfg.get_f64("a", 0.0).unwrap(), 2.5);
        assert_eq!(cfg.get_usize("b", 0).unwrap(), 7);
        assert!(cfg.get_bool("c", false).unwrap());
        assert!(!cfg.get_bool("d", true).unwrap());
        assert_eq!(cfg.get_f64("zz", 1.5).unwrap(), 1.5);
        assert!(cfg.get_f64("c", 0.0).is_err());
        assert!(cfg.get_bool("a", false).is_err());
    }

    #[test]
    fn bad_lines_rejected_with_location() {
        let err = Config::parse("ok = 1\nnot a pair\n").unwrap_err();
        match err {
            ConfigError::BadLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Config::parse("= missing key\n").is_err());
    }

    #[test]
    fn serialization_round_trips_and_is_sorted() {
        let mut cfg = Config::new();
        cfg.set("zeta", "1");
        cfg.set("alpha", "two words");
        cfg.set("mid", true);
        let text = cfg.serialize();
        assert_eq!(text, "alpha = two words\nmid = true\nzeta = 1\n");
        assert_eq!(Config::parse(&text).unwrap(), cfg);
        // Later values win.
        let dup = Config::parse("k = 1\nk = 2\n").unwrap();
        assert_eq!(dup.get("k"), Some("2"));
    }
}
