//! Learner contract and the retrieval reference learner.
//!
//! The retrieval learner memorises `(feature, caption)` pairs in a bounded
//! FIFO store and captions a query with its nearest neighbour. Its bounded
//! capacity makes forgetting a direct function of the training stream.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::augment::ImageBuffer;
use crate::error::{Error, Result};

pub const HIST_BINS: usize = 64;
pub const GRID: usize = 8;
pub const FEATURE_DIM: usize = HIST_BINS + GRID * GRID;

/// Unit-norm image descriptor: luma histogram followed by a pooled luma grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Feature(Vec<f64>);

impl Feature {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance_sq(&self, other: &Feature) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn key(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

/// Integer BT.601 luma in 0..=255.
fn luma(p: [u8; 3]) -> u32 {
    (299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2])) / 1000
}

/// Half-open index range of cell `i` out of `GRID` along an axis of `n`
/// pixels; never empty, so images smaller than the grid still work.
fn cell(i: usize, n: usize) -> (usize, usize) {
    let lo = i * n / GRID;
    (lo, ((i + 1) * n / GRID).max(lo + 1))
}

pub fn extract_feature(img: &ImageBuffer) -> Feature {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let lumas: Vec<u32> = img.as_rgb().pixels().map(|p| luma(p.0)).collect();
    let mut v = vec![0.0; FEATURE_DIM];
    for &l in &lumas {
        v[(l as usize / 4).min(HIST_BINS - 1)] += 1.0;
    }
    let n = lumas.len() as f64;
    v[..HIST_BINS].iter_mut().for_each(|b| *b /= n);
    for gy in 0..GRID {
        let (y0, y1) = cell(gy, h);
        for gx in 0..GRID {
            let (x0, x1) = cell(gx, w);
            let mut sum = 0u64;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += u64::from(lumas[y * w + x]);
                }
            }
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            v[HIST_BINS + gy * GRID + gx] = sum as f64 / count / 255.0;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Feature(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSample {
    pub feature: Feature,
    pub caption: Vec<String>,
}

/// Stage of the two-phase supervised pretraining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PretrainPhase {
    /// Encoder frozen, decoder trained.
    DecoderOnly,
    /// Everything trainable.
    FineTune,
}

pub trait Learner: Send + Sync {
    fn kind(&self) -> &'static str;

    fn feature_dim(&self) -> usize;

    fn observe_batch(&mut self, batch: &[TrainSample]) -> Result<()>;

    fn generate(&self, feature: &Feature) -> Result<Vec<String>>;

    fn snapshot(&self) -> Result<Vec<u8>>;

    fn restore(&mut self, bytes: &[u8]) -> Result<()>;

    fn pretrain_batch(&mut self, _phase: PretrainPhase, batch: &[TrainSample]) -> Result<()> {
        self.observe_batch(batch)
    }

    /// Upper bound on useful fine-tuning epochs over a fixed corpus.
    fn pretrain_epoch_cap(&self) -> Option<usize> {
        None
    }

    fn box_clone(&self) -> Box<dyn Learner>;
}

impl Clone for Box<dyn Learner> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub kind: String,
    pub capacity: usize,
    /// Passed through to gradient-based learners; unused by retrieval.
    pub lr: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            kind: "retrieval".into(),
            capacity: RetrievalLearner::DEFAULT_CAPACITY,
            lr: 4e-4,
        }
    }
}

pub fn build_learner(config: &LearnerConfig) -> Result<Box<dyn Learner>> {
    match config.kind.as_str() {
        "retrieval" => Ok(Box::new(RetrievalLearner::new(config.capacity)?)),
        other => Err(Error::Config(format!("unknown learner kind {other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredEntry {
    seq: u64,
    feature: Feature,
    caption: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RetrievalSnapshot {
    format: String,
    version: u32,
    capacity: usize,
    next_seq: u64,
    entries: Vec<StoredEntry>,
}

const RETRIEVAL_FORMAT: &str = "loopcap-retrieval";

/// Nearest-neighbour captioner over a FIFO store. Observing a feature that
/// is already stored replaces the old caption and moves it to the back.
#[derive(Debug, Clone)]
pub struct RetrievalLearner {
    capacity: usize,
    store: VecDeque<StoredEntry>,
    by_key: HashMap<Vec<u64>, u64>,
    next_seq: u64,
}

impl RetrievalLearner {
    pub const DEFAULT_CAPACITY: usize = 2048;

    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("learner.capacity must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            store: VecDeque::new(),
            by_key: HashMap::new(),
            next_seq: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    /// Stored captions, oldest first.
    pub fn captions(&self) -> impl Iterator<Item = &[String]> {
        self.store.iter().map(|e| e.caption.as_slice())
    }

    fn insert(&mut self, sample: &TrainSample) {
        let key = sample.feature.key();
        if let Some(old) = self.by_key.remove(&key) {
            if let Some(pos) = self.store.iter().position(|e| e.seq == old) {
                self.store.remove(pos);
            }
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.by_key.insert(key, seq);
        self.store.push_back(StoredEntry {
            seq,
            feature: sample.feature.clone(),
            caption: sample.caption.clone(),
        });
        while self.store.len() > self.capacity {
            let gone = self.store.pop_front().expect("non-empty");
            self.by_key.remove(&gone.feature.key());
        }
    }

    fn rebuild_index(&mut self) {
        self.by_key = self.store.iter().map(|e| (e.feature.key(), e.seq)).collect();
    }
}

impl Learner for RetrievalLearner {
    fn kind(&self) -> &'static str {
        "retrieval"
    }

    fn feature_dim(&self) -> usize {
        FEATURE_DIM
    }

    fn observe_batch(&mut self, batch: &[TrainSample]) -> Result<()> {
        if let Some(bad) = batch.iter().find(|s| s.feature.dim() != FEATURE_DIM) {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_DIM,
                actual: bad.feature.dim(),
            });
        }
        batch.iter().for_each(|s| self.insert(s));
        Ok(())
    }

    fn generate(&self, feature: &Feature) -> Result<Vec<String>> {
        if feature.dim() != FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_DIM,
                actual: feature.dim(),
            });
        }
        let mut best: Option<(f64, &StoredEntry)> = None;
        for e in &self.store {
            let d = e.feature.distance_sq(feature);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, e));
            }
        }
        best.map(|(_, e)| e.caption.clone()).ok_or(Error::Untrained)
    }

    fn snapshot(&self) -> Result<Vec<u8>> {
        let snap = RetrievalSnapshot {
            format: RETRIEVAL_FORMAT.into(),
            version: 1,
            capacity: self.capacity,
            next_seq: self.next_seq,
            entries: self.store.iter().cloned().collect(),
        };
        Ok(serde_json::to_vec(&snap).expect("snapshot serializes"))
    }

    fn restore(&mut self, bytes: &[u8]) -> Result<()> {
        let snap: RetrievalSnapshot = serde_json::from_slice(bytes)
            .map_err(|e| Error::CorruptSnapshot(format!("retrieval learner: {e}")))?;
        if snap.format != RETRIEVAL_FORMAT || snap.version != 1 {
            return Err(Error::CorruptSnapshot(format!(
                "unsupported learner snapshot {} v{}",
                snap.format, snap.version
            )));
        }
        if snap.capacity == 0 || snap.entries.len() > snap.capacity {
            return Err(Error::CorruptSnapshot("store exceeds capacity".into()));
        }
        if snap.entries.iter().any(|e| e.feature.dim() != FEATURE_DIM || e.seq >= snap.next_seq) {
            return Err(Error::CorruptSnapshot("inconsistent learner entry".into()));
        }
        self.capacity = snap.capacity;
        self.next_seq = snap.next_seq;
        self.store = snap.entries.into();
        self.rebuild_index();
        Ok(())
    }

    /// A second pass over the same data only re-inserts what is stored.
    fn pretrain_epoch_cap(&self) -> Option<usize> {
        Some(1)
    }

    fn box_clone(&self) -> Box<dyn Learner> {
        Box::new(self.clone())
    }
}
