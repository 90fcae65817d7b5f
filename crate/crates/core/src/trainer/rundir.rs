//! Run directory layout:
//!
//! ```text
//! <root>/config.snapshot     effective configuration (TOML)
//! <root>/metrics/<name>.json reports and grids
//! <root>/grids/<name>.csv    aligned CSV tables
//! <root>/learner.snapshot    learner state
//! <root>/memory.snapshot     episodic memory (JSON lines)
//! <root>/events.jsonl        append-only event log
//! ```

use std::path::{Path, PathBuf};

use super::{EventLog, RunConfig};
use crate::error::{Error, Result};
use crate::learner::{build_learner, Learner};
use crate::memory::EpisodicMemory;
use crate::persist::write_atomic;

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["metrics", "grids"] {
            let p = root.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.snapshot")
    }

    pub fn learner_path(&self) -> PathBuf {
        self.root.join("learner.snapshot")
    }

    pub fn memory_path(&self) -> PathBuf {
        self.root.join("memory.snapshot")
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join("events.jsonl")
    }

    pub fn metrics_path(&self, name: &str) -> PathBuf {
        self.root.join("metrics").join(format!("{name}.json"))
    }

    pub fn grid_path(&self, name: &str) -> PathBuf {
        self.root.join("grids").join(format!("{name}.csv"))
    }

    pub fn events(&self) -> Result<EventLog> {
        EventLog::append_to(&self.events_path())
    }

    pub fn write_config(&self, config: &RunConfig) -> Result<()> {
        write_atomic(&self.config_path(), config.to_toml().as_bytes())
    }

    pub fn read_config(&self) -> Result<RunConfig> {
        RunConfig::load(Some(&self.config_path()), &[])
    }

    pub fn write_json(&self, name: &str, json: &str) -> Result<()> {
        write_atomic(&self.metrics_path(name), json.as_bytes())
    }

    pub fn write_csv(&self, name: &str, csv: &str) -> Result<()> {
        write_atomic(&self.grid_path(name), csv.as_bytes())
    }

    pub fn save_learner(&self, learner: &dyn Learner) -> Result<()> {
        write_atomic(&self.learner_path(), &learner.snapshot()?)
    }

    /// Builds a learner from `config` and restores the saved state.
    pub fn load_learner(&self, config: &RunConfig) -> Result<Box<dyn Learner>> {
        load_learner_from(&self.learner_path(), config)
    }

    pub fn save_memory(&self, memory: &EpisodicMemory) -> Result<()> {
        memory.snapshot(&self.memory_path())
    }

    pub fn load_memory(&self) -> Result<Option<EpisodicMemory>> {
        let p = self.memory_path();
        if p.exists() {
            EpisodicMemory::restore(&p).map(Some)
        } else {
            Ok(None)
        }
    }
}

pub fn load_learner_from(path: &Path, config: &RunConfig) -> Result<Box<dyn Learner>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut learner = build_learner(&config.learner)?;
    learner.restore(&bytes)?;
    Ok(learner)
}
