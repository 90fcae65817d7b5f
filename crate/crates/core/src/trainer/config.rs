//! Run configuration, loaded from TOML with `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::memory::MemoryConfig;
use crate::metrics::MicroMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Patience {
    pub adapt: usize,
    pub pretrain: usize,
}

impl Default for Patience {
    fn default() -> Self {
        Self {
            adapt: 2,
            pretrain: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Seeds of the fraction ablation.
    pub seeds: Vec<u64>,
    pub fraction: f64,
    pub fractions: Vec<f64>,
    /// Cluster ids in training order; empty means ascending id order.
    pub task_order: Vec<u32>,
    pub memory_enabled: bool,
    pub micro_mode: MicroMode,
    pub patience: Patience,
    pub augment: AugmentConfig,
    pub memory: MemoryConfig,
    pub learner: LearnerConfig,
    pub thesaurus: Option<PathBuf>,
    pub paraphrase_url: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_epochs: 50,
            seed: 0,
            seeds: vec![0, 1, 2],
            fraction: 1.0,
            fractions: vec![0.1, 0.2, 0.5, 1.0],
            task_order: Vec::new(),
            memory_enabled: true,
            micro_mode: MicroMode::Pooled,
            patience: Patience::default(),
            augment: AugmentConfig::default(),
            memory: MemoryConfig::default(),
            learner: LearnerConfig::default(),
            thesaurus: None,
            paraphrase_url: None,
        }
    }
}

fn valid_fraction(f: f64) -> bool {
    f > 0.0 && f <= 1.0
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.patience.adapt == 0 || self.patience.pretrain == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !valid_fraction(self.fraction) || !self.fractions.iter().copied().all(valid_fraction) {
            return Err(Error::Config("fractions must lie in (0, 1]".into()));
        }
        self.augment.validate()?;
        self.memory.validate()
    }

    /// Parses TOML text (dotted keys or tables) then applies `key=value`
    /// overrides, where the value is read as a TOML literal and falls back
    /// to a plain string.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| Error::Config(format!("empty key in {assignment:?}")))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{p} is not a table in {assignment:?}")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::AugmentMode;

    #[test]
    fn defaults() {
        let c = RunConfig::from_toml("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.batch_size, 32);
        assert_eq!((c.patience.adapt, c.patience.pretrain), (2, 20));
        assert_eq!(c.augment.factor, 10);
        assert_eq!(c.memory.write_prob, 0.2);
        assert_eq!(c.learner.lr, 4e-4);
    }

    #[test]
    fn dotted_keys_and_overrides() {
        let text = "batch_size = 8\naugment.mode = \"img\"\nmemory.capacity = 100\n";
        let c = RunConfig::from_toml(text, &["memory.write_prob=0.5".into(), "augment.mode=both".into()]).unwrap();
        assert_eq!(c.batch_size, 8);
        assert_eq!(c.augment.mode, AugmentMode::Both);
        assert_eq!(c.memory.capacity, Some(100));
        assert_eq!(c.memory.write_prob, 0.5);
        let again = RunConfig::from_toml(&c.to_toml(), &[]).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml("batch_size = 0", &[]).is_err());
        assert!(RunConfig::from_toml("fraction = 1.5", &[]).is_err());
        assert!(RunConfig::from_toml("bogus = 1", &[]).is_err());
        assert!(RunConfig::from_toml("", &["novalue".into()]).is_err());
    }
}
