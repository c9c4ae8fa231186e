//! `key = value` configuration files. Blank lines and `#` comments are ignored; later
//! overrides (command-line flags) replace file values.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::scalar::{parse_rational, Rational};
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", no + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", no + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", no + 1)));
            }
        }
        Ok(ConfigMap { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    /// Applies overrides on top of this map.
    pub fn merged(mut self, overrides: &ConfigMap) -> Self {
        for (k, v) in &overrides.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.entries.get(key).map(String::as_str).ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        raw.parse().map_err(|e| Error::Config(format!("key `{key}`: cannot parse `{raw}`: {e}")))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        if self.contains(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.contains(key).then(|| self.get(key)).transpose()
    }

    /// Rationals are written `a/b`, as integers, or as finite decimals.
    pub fn rational(&self, key: &str) -> Result<Rational> {
        let raw = self.raw(key)?;
        parse_rational(raw).ok_or_else(|| Error::Config(format!("key `{key}`: `{raw}` is not a rational")))
    }

    pub fn rational_or(&self, key: &str, default: Rational) -> Result<Rational> {
        if self.contains(key) {
            self.rational(key)
        } else {
            Ok(default)
        }
    }

    pub fn rational_opt(&self, key: &str) -> Result<Option<Rational>> {
        self.contains(key).then(|| self.rational(key)).transpose()
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.entries.get(key).map(String::as_str) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(other) => Err(Error::Config(format!("key `{key}`: `{other}` is not a boolean"))),
        }
    }

    /// Canonical `key = value` text, sorted by key.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn parses_comments_and_overrides() {
        let c = ConfigMap::parse("# run\nn = 40\nk=3 # arity\n\neta = 3/10\n").unwrap();
        assert_eq!(c.get::<usize>("n").unwrap(), 40);
        assert_eq!(c.rational("eta").unwrap(), ratio(3, 10));
        let mut o = ConfigMap::default();
        o.set("n", "12");
        let m = c.merged(&o);
        assert_eq!(m.get::<usize>("n").unwrap(), 12);
        assert_eq!(m.to_text(), "eta = 3/10\nk = 3\nn = 12\n");
    }

    #[test]
    fn missing_key_is_named() {
        let c = ConfigMap::parse("n = 4").unwrap();
        let err = c.get::<usize>("trials").unwrap_err().to_string();
        assert!(err.contains("`trials`"), "{err}");
        assert_eq!(c.get_or("trials", 7usize).unwrap(), 7);
        assert_eq!(c.get_opt::<usize>("seed").unwrap(), None);
    }

    #[test]
    fn malformed_lines_and_values() {
        assert!(ConfigMap::parse("n 4").is_err());
        assert!(ConfigMap::parse("n = 1\nn = 2").is_err());
        assert!(ConfigMap::parse(" = 2").is_err());
        let c = ConfigMap::parse("n = four\nflag = maybe").unwrap();
        assert!(c.get::<usize>("n").is_err());
        assert!(c.bool_or("flag", false).is_err());
    }
}
