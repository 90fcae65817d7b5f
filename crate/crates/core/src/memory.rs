//! Sparse episodic memory with probabilistic writes and fixed-cadence replay.
//!
//! Snapshot format (JSON lines, version 1): the first line is a header
//! object `{"format":"loopcap-memory","version":1,"config":..,
//! "batch_counter":..,"writes":..,"rng":..,"entries":N}` and is followed by
//! exactly `N` lines, one [`MemoryEntry`] each, in store order.

use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persist::write_atomic;
use crate::rng::{seeded, Rng, RngState};

pub const SNAPSHOT_FORMAT: &str = "loopcap-memory";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub feature: Vec<f64>,
    pub caption: Vec<String>,
    pub origin_task: u32,
    /// Batch counter at the time of writing.
    pub write_step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryConfig {
    pub write_prob: f64,
    pub replay_every: u64,
    pub batch_size: usize,
    pub capacity: Option<usize>,
    pub seed: u64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            write_prob: 0.2,
            replay_every: 200,
            batch_size: 32,
            capacity: None,
            seed: 0,
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.write_prob) {
            return Err(Error::Config(format!("memory.write_prob {} outside [0, 1]", self.write_prob)));
        }
        if self.replay_every == 0 {
            return Err(Error::Config("memory.replay_every must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("memory.batch_size must be at least 1".into()));
        }
        if self.capacity == Some(0) {
            return Err(Error::Config("memory.capacity must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EpisodicMemory {
    config: MemoryConfig,
    entries: Vec<MemoryEntry>,
    batch_counter: u64,
    writes: u64,
    rng: Rng,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: MemoryConfig,
    batch_counter: u64,
    writes: u64,
    rng: RngState,
    entries: usize,
}

impl EpisodicMemory {
    pub fn new(config: MemoryConfig) -> Result<Self> {
        config.validate()?;
        let rng = seeded(config.seed);
        Ok(Self {
            config,
            entries: Vec::new(),
            batch_counter: 0,
            writes: 0,
            rng,
        })
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn batch_counter(&self) -> u64 {
        self.batch_counter
    }

    /// Successful writes so far, including ones that replaced a victim.
    pub fn writes(&self) -> u64 {
        self.writes
    }

    /// Stores the sample with probability `write_prob`. In bounded mode a
    /// full store replaces a uniformly chosen victim.
    pub fn maybe_write(&mut self, feature: &[f64], caption: &[String], origin_task: u32) -> bool {
        if self.rng.random::<f64>() >= self.config.write_prob {
            return false;
        }
        let entry = MemoryEntry {
            feature: feature.to_vec(),
            caption: caption.to_vec(),
            origin_task,
            write_step: self.batch_counter,
        };
        match self.config.capacity {
            Some(cap) if self.entries.len() >= cap => {
                let victim = self.rng.random_range(0..self.entries.len());
                self.entries[victim] = entry;
            }
            _ => self.entries.push(entry),
        }
        self.writes += 1;
        true
    }

    /// Advances the batch counter. Every `replay_every` batches a replay
    /// batch of up to `batch_size` distinct entries is drawn.
    pub fn on_new_batch(&mut self) -> Option<Vec<MemoryEntry>> {
        self.batch_counter += 1;
        if !self.batch_counter.is_multiple_of(self.config.replay_every) || self.entries.is_empty() {
            return None;
        }
        let k = self.config.batch_size.min(self.entries.len());
        let picked = index::sample(&mut self.rng, self.entries.len(), k);
        Some(picked.into_iter().map(|i| self.entries[i].clone()).collect())
    }

    pub fn snapshot(&self, path: &Path) -> Result<()> {
        let header = Header {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            config: self.config.clone(),
            batch_counter: self.batch_counter,
            writes: self.writes,
            rng: RngState::capture(&self.rng),
            entries: self.entries.len(),
        };
        let mut buf = serde_json::to_vec(&header).expect("header serializes");
        buf.push(b'\n');
        for e in &self.entries {
            serde_json::to_writer(&mut buf, e).expect("entry serializes");
            buf.push(b'\n');
        }
        write_atomic(path, &buf)
    }

    pub fn restore(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let corrupt = |msg: String| Error::CorruptSnapshot(format!("{}: {msg}", path.display()));
        let first = lines
            .next()
            .ok_or_else(|| corrupt("empty file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: Header = serde_json::from_str(&first).map_err(|e| corrupt(format!("header: {e}")))?;
        if header.format != SNAPSHOT_FORMAT || header.version != SNAPSHOT_VERSION {
            return Err(corrupt(format!("unsupported format {} v{}", header.format, header.version)));
        }
        header.config.validate()?;
        let mut entries = Vec::with_capacity(header.entries);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let entry: MemoryEntry =
                serde_json::from_str(&line).map_err(|e| corrupt(format!("entry line {}: {e}", i + 2)))?;
            entries.push(entry);
        }
        if entries.len() != header.entries {
            return Err(corrupt(format!("expected {} entries, found {}", header.entries, entries.len())));
        }
        if let Some(cap) = header.config.capacity {
            if entries.len() > cap {
                return Err(corrupt(format!("{} entries exceed capacity {cap}", entries.len())));
            }
        }
        let rng = header.rng.rebuild().ok_or_else(|| corrupt("bad rng state".into()))?;
        Ok(Self {
            config: header.config,
            entries,
            batch_counter: header.batch_counter,
            writes: header.writes,
            rng,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Writes for 10,000 samples at the default probability and seed.
    const GOLDEN_WRITES_10K: u64 = 2009;

    fn mem(write_prob: f64, capacity: Option<usize>) -> EpisodicMemory {
        EpisodicMemory::new(MemoryConfig {
            write_prob,
            capacity,
            ..MemoryConfig::default()
        })
        .unwrap()
    }

    fn cap(i: usize) -> Vec<String> {
        vec![format!("c{i}")]
    }

    #[test]
    fn config_bounds() {
        assert!(MemoryConfig { write_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(MemoryConfig { replay_every: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn probability_boundaries() {
        let mut all = mem(1.0, None);
        let mut none = mem(0.0, None);
        for i in 0..500 {
            assert!(all.maybe_write(&[i as f64], &cap(i), 1));
            assert!(!none.maybe_write(&[i as f64], &cap(i), 1));
        }
        assert_eq!((all.len(), none.len()), (500, 0));
    }

    #[test]
    fn default_rate_golden_count() {
        let mut m = mem(0.2, None);
        for i in 0..10_000 {
            m.maybe_write(&[i as f64], &cap(i), 1);
        }
        assert!((1800..=2200).contains(&m.writes()), "{}", m.writes());
        assert_eq!(m.writes(), GOLDEN_WRITES_10K);
    }

    #[test]
    fn bounded_mode_never_exceeds_capacity() {
        let mut m = mem(1.0, Some(16));
        for i in 0..200 {
            m.maybe_write(&[i as f64], &cap(i), 1);
            assert!(m.len() <= 16);
        }
        assert_eq!(m.writes(), 200);
    }

    #[test]
    fn replay_cadence() {
        let mut m = mem(1.0, None);
        for i in 0..10 {
            m.maybe_write(&[i as f64], &cap(i), 1);
        }
        for counter in 1..=1000u64 {
            let replay = m.on_new_batch();
            assert_eq!(replay.is_some(), counter % 200 == 0, "counter {counter}");
            if let Some(batch) = replay {
                assert_eq!(batch.len(), 10);
                let mut caps: Vec<_> = batch.iter().map(|e| e.caption[0].clone()).collect();
                caps.sort();
                caps.dedup();
                assert_eq!(caps.len(), 10, "sampled without replacement");
            }
        }
    }

    #[test]
    fn empty_memory_never_replays() {
        let mut m = mem(0.2, None);
        assert!((0..400).all(|_| m.on_new_batch().is_none()));
        assert_eq!(m.batch_counter(), 400);
    }

    #[test]
    fn replay_is_clamped_and_only_returns_written_entries() {
        let mut m = mem(0.5, None);
        let mut written = Vec::new();
        for i in 0..300 {
            if m.maybe_write(&[i as f64], &cap(i), 2) {
                written.push(cap(i));
            }
            if let Some(b) = m.on_new_batch() {
                assert_eq!(b.len(), 32.min(m.len()));
                assert!(b.iter().all(|e| written.contains(&e.caption)));
            }
        }
    }

    fn drive(m: &mut EpisodicMemory, from: usize, to: usize) -> Vec<Option<Vec<String>>> {
        (from..to)
            .map(|i| {
                m.maybe_write(&[i as f64, 0.5], &cap(i), (i / 100) as u32);
                m.on_new_batch().map(|b| b.into_iter().map(|e| e.caption[0].clone()).collect())
            })
            .collect()
    }

    #[test]
    fn snapshot_mid_run_resumes_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("memory.jsonl");
        let mut a = EpisodicMemory::new(MemoryConfig { replay_every: 7, capacity: Some(40), ..Default::default() }).unwrap();
        drive(&mut a, 0, 250);
        a.snapshot(&path).unwrap();
        let mut b = EpisodicMemory::restore(&path).unwrap();
        assert_eq!(b.entries(), a.entries());
        assert_eq!(b.batch_counter(), a.batch_counter());
        assert_eq!(drive(&mut a, 250, 600), drive(&mut b, 250, 600));

        let path2 = dir.path().join("again.jsonl");
        b.snapshot(&path2).unwrap();
        a.snapshot(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn empty_snapshot_keeps_counter() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut m = mem(0.2, None);
        for _ in 0..37 {
            m.on_new_batch();
        }
        m.snapshot(&path).unwrap();
        let r = EpisodicMemory::restore(&path).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.batch_counter(), 37);
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut m = mem(1.0, None);
        for i in 0..5 {
            m.maybe_write(&[i as f64], &cap(i), 1);
        }
        m.snapshot(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 20]).unwrap();
        assert!(matches!(EpisodicMemory::restore(&path), Err(Error::CorruptSnapshot(_))));
        std::fs::write(&path, b"").unwrap();
        assert!(matches!(EpisodicMemory::restore(&path), Err(Error::CorruptSnapshot(_))));
    }
}
