//! Interactive session state and its persistence.
//!
//! Files under the run directory:
//!
//! ```text
//! uploads/<sha256>   uploaded image bytes
//! feedback.jsonl     append-only queue records: {"op":"queued",..} / {"op":"trained",..}
//! history.jsonl      append-only evaluation snapshots
//! session.json       id counters and simulated-stream position
//! learner.snapshot, memory.snapshot, events.jsonl, config.snapshot
//! ```
//!
//! A restart replays these files, so queued but untrained feedback survives.

use std::collections::{BTreeSet, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use loopcap_core::augment::{ImageBuffer, Sample};
use loopcap_core::corpus::{Corpus, Split};
use loopcap_core::learner::{build_learner, extract_feature, Feature, Learner};
use loopcap_core::metrics::MetricReport;
use loopcap_core::persist::write_atomic;
use loopcap_core::taskgen::ClusterFile;
use loopcap_core::text::metric_tokens;
use loopcap_core::trainer::{evaluate_tasks, Event, ImageSource, RunConfig, RunDir, Task, TaskLog, Trainer};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ServiceError;

type Result<T> = std::result::Result<T, ServiceError>;

/// Feedback micro-tasks get cluster ids from this base upwards.
pub const FEEDBACK_TASK_BASE: u32 = 1_000_000;

pub const DEFAULT_AUTO_FLUSH: usize = 32;

/// Known images that feedback may reference by id.
pub struct Catalog {
    pub corpus: Corpus,
    pub images: Arc<dyn ImageSource>,
}

pub struct SessionOptions {
    pub run_dir: PathBuf,
    /// Queue length that triggers an update; 0 disables auto-flush.
    pub auto_flush: usize,
    /// Overrides the configuration stored in the run directory.
    pub config: Option<RunConfig>,
    pub catalog: Option<Catalog>,
    /// Clusters for the simulated task stream and evaluation.
    pub clusters: Option<ClusterFile>,
}

impl SessionOptions {
    pub fn new(run_dir: impl Into<PathBuf>) -> Self {
        Self {
            run_dir: run_dir.into(),
            auto_flush: DEFAULT_AUTO_FLUSH,
            config: None,
            catalog: None,
            clusters: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImageRef {
    Upload { sha256: String },
    Corpus { image_id: u64 },
}

impl ImageRef {
    fn key(&self) -> u64 {
        match self {
            ImageRef::Upload { sha256 } => {
                let bytes = hex::decode(&sha256[..16]).unwrap_or_default();
                u64::from_be_bytes(bytes.try_into().unwrap_or([0; 8]))
            }
            ImageRef::Corpus { image_id } => *image_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackStatus {
    Queued,
    Trained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackInstance {
    pub feedback_id: u64,
    pub image: ImageRef,
    pub corrected_caption: String,
    pub received_at_ms: u64,
    pub status: FeedbackStatus,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum QueueRecord {
    Queued { feedback: FeedbackInstance },
    Trained { update_id: u64, feedback_ids: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    pub timestamp_ms: u64,
    /// `flush:<update_id>` or `advance:<cluster_id>`.
    pub trigger: String,
    pub report: MetricReport,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Counters {
    next_feedback_id: u64,
    next_update_id: u64,
    task_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptionResponse {
    pub caption: String,
    pub tokens: Vec<String>,
    pub feature_id: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct FeedbackRequest {
    pub feature_id: Option<String>,
    pub image_id: Option<u64>,
    pub corrected_caption: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub feedback_id: u64,
    pub queue_length: usize,
    /// Present when the submission triggered an automatic update.
    pub update: Option<UpdateOutcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub update_id: u64,
    /// Samples per epoch after augmentation, replay excluded.
    pub samples_trained: usize,
    pub replayed: usize,
    pub feedback_ids: Vec<u64>,
    pub history_seq: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvanceOutcome {
    pub cluster_id: u32,
    pub log: TaskLog,
    pub history: HistoryEntry,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionState {
    pub learner_kind: String,
    pub queue_length: usize,
    pub updates_applied: u64,
    pub task_index: usize,
    pub tasks_total: usize,
    pub next_task: Option<u32>,
    pub history_length: usize,
    pub memory_entries: Option<usize>,
    pub batch_counter: u64,
    pub auto_flush: usize,
}

struct CachedImage {
    image: Arc<ImageBuffer>,
    feature: Feature,
}

/// Held while an update runs; a second update attempt sees the session
/// as busy.
pub type UpdatePermit = tokio::sync::OwnedMutexGuard<()>;

pub struct Session {
    dir: RunDir,
    config: RunConfig,
    auto_flush: usize,
    learner: RwLock<Arc<dyn Learner>>,
    cache: RwLock<HashMap<ImageRef, Arc<CachedImage>>>,
    queue: Mutex<Vec<FeedbackInstance>>,
    history: RwLock<Vec<HistoryEntry>>,
    counters: Mutex<Counters>,
    update_token: Arc<tokio::sync::Mutex<()>>,
    trainer: Mutex<Trainer>,
    catalog: Option<Catalog>,
    clusters: Option<ClusterFile>,
    order: Vec<u32>,
    tasks: Mutex<HashMap<u32, Arc<Task>>>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn io_err(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Core(loopcap_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            // A torn final line from a crash mid-append is dropped.
            Err(_) if i + 1 == text.lines().count() => {
                tracing::warn!(path = %path.display(), "ignoring truncated final record");
            }
            Err(e) => {
                return Err(ServiceError::Core(loopcap_core::Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    column: e.column(),
                    message: e.to_string(),
                }))
            }
        }
    }
    Ok(out)
}

fn append_jsonl<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_err(path, e))?;
    let mut line = serde_json::to_vec(value).expect("record serializes");
    line.push(b'\n');
    f.write_all(&line).map_err(|e| io_err(path, e))?;
    f.sync_data().map_err(|e| io_err(path, e))
}

impl Session {
    /// Opens or resumes the session stored in `options.run_dir`.
    pub fn open(options: SessionOptions) -> Result<Arc<Self>> {
        let dir = RunDir::create(&options.run_dir)?;
        let uploads = dir.root().join("uploads");
        std::fs::create_dir_all(&uploads).map_err(|e| io_err(&uploads, e))?;
        let config = match options.config {
            Some(c) => c,
            None if dir.config_path().exists() => dir.read_config()?,
            None => RunConfig::default(),
        };
        config.validate()?;
        dir.write_config(&config)?;

        let learner: Box<dyn Learner> = if dir.learner_path().exists() {
            dir.load_learner(&config)?
        } else {
            build_learner(&config.learner)?
        };
        let mut trainer = Trainer::new(config.clone(), dir.events()?)?;
        if config.memory_enabled {
            if let Some(m) = dir.load_memory()? {
                trainer.set_memory(Some(m));
            }
        }

        let mut queue: Vec<FeedbackInstance> = Vec::new();
        let mut max_feedback = None;
        let mut max_update = None;
        for rec in read_jsonl::<QueueRecord>(&dir.root().join("feedback.jsonl"))? {
            match rec {
                QueueRecord::Queued { feedback } => {
                    max_feedback = max_feedback.max(Some(feedback.feedback_id));
                    queue.push(feedback);
                }
                QueueRecord::Trained { update_id, feedback_ids } => {
                    max_update = max_update.max(Some(update_id));
                    let done: BTreeSet<u64> = feedback_ids.into_iter().collect();
                    queue.retain(|f| !done.contains(&f.feedback_id));
                }
            }
        }
        let history: Vec<HistoryEntry> = read_jsonl(&dir.root().join("history.jsonl"))?;
        let session_path = dir.root().join("session.json");
        let mut counters: Counters = if session_path.exists() {
            let text = std::fs::read_to_string(&session_path).map_err(|e| io_err(&session_path, e))?;
            serde_json::from_str(&text).map_err(|e| {
                ServiceError::Core(loopcap_core::Error::CorruptSnapshot(format!("session.json: {e}")))
            })?
        } else {
            Counters::default()
        };
        counters.next_feedback_id = counters.next_feedback_id.max(max_feedback.map_or(0, |m| m + 1));
        counters.next_update_id = counters.next_update_id.max(max_update.map_or(0, |m| m + 1));

        let order = match &options.clusters {
            Some(c) if !config.task_order.is_empty() => {
                for id in &config.task_order {
                    if !c.clusters.contains_key(id) {
                        return Err(loopcap_core::Error::Config(format!("task_order names unknown cluster {id}")).into());
                    }
                }
                config.task_order.clone()
            }
            Some(c) => c.cluster_ids(),
            None => Vec::new(),
        };
        if options.clusters.is_some() && options.catalog.is_none() {
            return Err(loopcap_core::Error::Config("a cluster stream needs an image catalog".into()).into());
        }
        tracing::info!(
            run_dir = %dir.root().display(),
            queued = queue.len(),
            history = history.len(),
            "session opened"
        );
        Ok(Arc::new(Self {
            dir,
            config,
            auto_flush: options.auto_flush,
            learner: RwLock::new(Arc::from(learner)),
            cache: RwLock::new(HashMap::new()),
            queue: Mutex::new(queue),
            history: RwLock::new(history),
            counters: Mutex::new(counters),
            update_token: Arc::new(tokio::sync::Mutex::new(())),
            trainer: Mutex::new(trainer),
            catalog: options.catalog,
            clusters: options.clusters,
            order,
            tasks: Mutex::new(HashMap::new()),
        }))
    }

    pub fn run_dir(&self) -> &Path {
        self.dir.root()
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Claims the single update slot, or reports the session as busy.
    pub fn begin_update(&self) -> Result<UpdatePermit> {
        self.update_token.clone().try_lock_owned().map_err(|_| ServiceError::Busy)
    }

    fn learner(&self) -> Arc<dyn Learner> {
        self.learner.read().expect("learner lock").clone()
    }

    fn save_counters(&self, c: &Counters) -> Result<()> {
        let path = self.dir.root().join("session.json");
        write_atomic(&path, &serde_json::to_vec_pretty(c).expect("counters serialize"))?;
        Ok(())
    }

    fn upload_path(&self, sha: &str) -> PathBuf {
        self.dir.root().join("uploads").join(sha)
    }

    fn resolve(&self, image: &ImageRef) -> Result<Arc<CachedImage>> {
        if let Some(c) = self.cache.read().expect("cache lock").get(image) {
            return Ok(c.clone());
        }
        let buffer = match image {
            ImageRef::Upload { sha256 } => {
                let path = self.upload_path(sha256);
                if !sha256.chars().all(|c| c.is_ascii_hexdigit()) || sha256.len() != 64 || !path.exists() {
                    return Err(ServiceError::NotFound(format!("feature {sha256}")));
                }
                let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
                ImageBuffer::decode(&bytes).map_err(|e| ServiceError::BadImage(e.to_string()))?
            }
            ImageRef::Corpus { image_id } => {
                let cat = self
                    .catalog
                    .as_ref()
                    .ok_or_else(|| ServiceError::NotFound(format!("image {image_id}")))?;
                let rec = cat
                    .corpus
                    .get(*image_id)
                    .ok_or_else(|| ServiceError::NotFound(format!("image {image_id}")))?;
                cat.images.load(rec)?
            }
        };
        let cached = Arc::new(CachedImage {
            feature: extract_feature(&buffer),
            image: Arc::new(buffer),
        });
        self.cache.write().expect("cache lock").insert(image.clone(), cached.clone());
        Ok(cached)
    }

    /// Captions uploaded image bytes; the image is stored under its hash.
    pub fn caption(&self, bytes: &[u8]) -> Result<CaptionResponse> {
        let image = ImageBuffer::decode(bytes).map_err(|e| ServiceError::BadImage(e.to_string()))?;
        let sha = hex::encode(Sha256::digest(bytes));
        let path = self.upload_path(&sha);
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        let key = ImageRef::Upload { sha256: sha.clone() };
        let cached = Arc::new(CachedImage {
            feature: extract_feature(&image),
            image: Arc::new(image),
        });
        self.cache.write().expect("cache lock").insert(key, cached.clone());
        let tokens = self.learner().generate(&cached.feature).map_err(|e| match e {
            loopcap_core::Error::Untrained => ServiceError::Untrained,
            other => other.into(),
        })?;
        Ok(CaptionResponse {
            caption: tokens.join(" "),
            tokens,
            feature_id: sha,
        })
    }

    /// Queues a correction. Reaching the auto-flush threshold triggers an
    /// update unless one is already running.
    pub fn feedback(&self, req: FeedbackRequest) -> Result<FeedbackResponse> {
        if metric_tokens(&req.corrected_caption).is_empty() {
            return Err(ServiceError::EmptyCaption);
        }
        let image = match (req.feature_id, req.image_id) {
            (Some(sha), _) => ImageRef::Upload {
                sha256: sha.to_ascii_lowercase(),
            },
            (None, Some(image_id)) => ImageRef::Corpus { image_id },
            (None, None) => return Err(ServiceError::NotFound("feature_id or image_id".into())),
        };
        self.resolve(&image)?;
        let (feedback_id, queue_length) = {
            let mut counters = self.counters.lock().expect("counters lock");
            let mut queue = self.queue.lock().expect("queue lock");
            let fb = FeedbackInstance {
                feedback_id: counters.next_feedback_id,
                image,
                corrected_caption: req.corrected_caption.trim().to_string(),
                received_at_ms: now_ms(),
                status: FeedbackStatus::Queued,
            };
            append_jsonl(&self.dir.root().join("feedback.jsonl"), &QueueRecord::Queued { feedback: fb.clone() })?;
            counters.next_feedback_id += 1;
            self.save_counters(&counters)?;
            queue.push(fb);
            (counters.next_feedback_id - 1, queue.len())
        };
        let mut update = None;
        if self.auto_flush > 0 && queue_length >= self.auto_flush {
            match self.flush() {
                Ok(u) => update = Some(u),
                Err(ServiceError::Busy) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(FeedbackResponse {
            feedback_id,
            queue_length: self.queue.lock().expect("queue lock").len(),
            update,
        })
    }

    fn swap_in(&self, learner: Box<dyn Learner>, trainer: &Trainer) -> Result<()> {
        self.dir.save_learner(learner.as_ref())?;
        if let Some(m) = trainer.memory() {
            self.dir.save_memory(m)?;
        }
        *self.learner.write().expect("learner lock") = Arc::from(learner);
        Ok(())
    }

    /// Trains on all queued feedback as one micro-task.
    pub fn flush(&self) -> Result<UpdateOutcome> {
        let _permit = self.begin_update()?;
        let pending: Vec<FeedbackInstance> = self.queue.lock().expect("queue lock").clone();
        if pending.is_empty() {
            return Err(ServiceError::EmptyQueue);
        }
        let update_id = self.counters.lock().expect("counters lock").next_update_id;
        let mut task = Task {
            cluster_id: FEEDBACK_TASK_BASE + update_id as u32,
            train: Vec::new(),
            features: HashMap::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for fb in &pending {
            let cached = self.resolve(&fb.image)?;
            let key = fb.image.key();
            task.features.insert(key, cached.feature.clone());
            task.train.push(Sample::new(
                key,
                fb.feedback_id as u32,
                Split::Train,
                cached.image.clone(),
                metric_tokens(&fb.corrected_caption),
            ));
        }
        let mut learner = self.learner().box_clone();
        let mut trainer = self.trainer.lock().expect("trainer lock");
        let log = trainer.adapt_task(learner.as_mut(), &task)?;
        let epoch = log.epochs.last().expect("at least one epoch");
        let feedback_ids: Vec<u64> = pending.iter().map(|f| f.feedback_id).collect();
        let outcome_counts = (epoch.samples - epoch.replayed, epoch.replayed);
        trainer.events_mut().record(Event::Update {
            update_id,
            feedback_ids: feedback_ids.clone(),
            samples_trained: outcome_counts.0,
            replayed: outcome_counts.1,
        })?;
        trainer.events_mut().flush()?;
        self.swap_in(learner, &trainer)?;
        drop(trainer);

        append_jsonl(
            &self.dir.root().join("feedback.jsonl"),
            &QueueRecord::Trained {
                update_id,
                feedback_ids: feedback_ids.clone(),
            },
        )?;
        {
            let done: BTreeSet<u64> = feedback_ids.iter().copied().collect();
            self.queue.lock().expect("queue lock").retain(|f| !done.contains(&f.feedback_id));
            let mut counters = self.counters.lock().expect("counters lock");
            counters.next_update_id = update_id + 1;
            self.save_counters(&counters)?;
        }
        let history_seq = match self.eval_clusters() {
            Some(ids) if !ids.is_empty() => Some(self.record_history(format!("flush:{update_id}"), &ids)?.seq),
            _ => None,
        };
        tracing::info!(update_id, items = pending.len(), samples = outcome_counts.0, "update applied");
        Ok(UpdateOutcome {
            update_id,
            samples_trained: outcome_counts.0,
            replayed: outcome_counts.1,
            feedback_ids,
            history_seq,
        })
    }

    /// Clusters scored after an update: those adapted so far, or every
    /// stream cluster before the first advance.
    fn eval_clusters(&self) -> Option<Vec<u32>> {
        self.clusters.as_ref()?;
        let idx = self.counters.lock().expect("counters lock").task_index;
        Some(if idx == 0 { self.order.clone() } else { self.order[..idx].to_vec() })
    }

    fn task(&self, cluster_id: u32) -> Result<Arc<Task>> {
        if let Some(t) = self.tasks.lock().expect("tasks lock").get(&cluster_id) {
            return Ok(t.clone());
        }
        let (Some(clusters), Some(cat)) = (&self.clusters, &self.catalog) else {
            return Err(ServiceError::NoTasks);
        };
        let t = Arc::new(Task::from_cluster(&cat.corpus, clusters, cluster_id, cat.images.as_ref())?);
        self.tasks.lock().expect("tasks lock").insert(cluster_id, t.clone());
        Ok(t)
    }

    fn record_history(&self, trigger: String, cluster_ids: &[u32]) -> Result<HistoryEntry> {
        let tasks: Vec<Arc<Task>> = cluster_ids.iter().map(|&id| self.task(id)).collect::<Result<_>>()?;
        let refs: Vec<&Task> = tasks.iter().map(|t| t.as_ref()).collect();
        let report = evaluate_tasks(self.learner().as_ref(), &refs, self.config.micro_mode)?;
        let mut history = self.history.write().expect("history lock");
        let last = history.last().map(|h| (h.seq, h.timestamp_ms));
        let entry = HistoryEntry {
            seq: last.map_or(0, |(s, _)| s + 1),
            timestamp_ms: last.map_or(now_ms(), |(_, t)| now_ms().max(t + 1)),
            trigger,
            report,
        };
        append_jsonl(&self.dir.root().join("history.jsonl"), &entry)?;
        history.push(entry.clone());
        Ok(entry)
    }

    /// Adapts the next cluster of the simulated stream and records the
    /// evaluation over all clusters adapted so far.
    pub fn advance(&self) -> Result<AdvanceOutcome> {
        let _permit = self.begin_update()?;
        let idx = self.counters.lock().expect("counters lock").task_index;
        let Some(&cluster_id) = self.order.get(idx) else {
            return Err(ServiceError::NoTasks);
        };
        let task = self.task(cluster_id)?;
        let mut learner = self.learner().box_clone();
        let mut trainer = self.trainer.lock().expect("trainer lock");
        let log = trainer.adapt_task(learner.as_mut(), &task)?;
        trainer.events_mut().flush()?;
        self.swap_in(learner, &trainer)?;
        drop(trainer);
        {
            let mut counters = self.counters.lock().expect("counters lock");
            counters.task_index = idx + 1;
            self.save_counters(&counters)?;
        }
        let history = self.record_history(format!("advance:{cluster_id}"), &self.order[..=idx])?;
        Ok(AdvanceOutcome {
            cluster_id,
            log,
            history,
        })
    }

    pub fn history(&self) -> Vec<HistoryEntry> {
        self.history.read().expect("history lock").clone()
    }

    pub fn queue(&self) -> Vec<FeedbackInstance> {
        self.queue.lock().expect("queue lock").clone()
    }

    pub fn state(&self) -> SessionState {
        let counters = self.counters.lock().expect("counters lock").clone();
        let (memory_entries, batch_counter) = match self.trainer.try_lock() {
            Ok(t) => (t.memory().map(|m| m.len()), t.batch_counter()),
            Err(_) => (None, 0),
        };
        SessionState {
            learner_kind: self.learner().kind().to_string(),
            queue_length: self.queue.lock().expect("queue lock").len(),
            updates_applied: counters.next_update_id,
            task_index: counters.task_index,
            tasks_total: self.order.len(),
            next_task: self.order.get(counters.task_index).copied(),
            history_length: self.history.read().expect("history lock").len(),
            memory_entries,
            batch_counter,
            auto_flush: self.auto_flush,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torn_final_line_is_dropped_but_inner_damage_is_not() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.jsonl");
        std::fs::write(&p, "{\"a\":1}\n{\"a\":2}\n{\"a\":").unwrap();
        let v: Vec<serde_json::Value> = read_jsonl(&p).unwrap();
        assert_eq!(v.len(), 2);
        std::fs::write(&p, "{\"a\":1}\n{\"a\n{\"a\":3}\n").unwrap();
        assert!(read_jsonl::<serde_json::Value>(&p).is_err());
        assert!(read_jsonl::<serde_json::Value>(&dir.path().join("missing")).unwrap().is_empty());
    }

    #[test]
    fn upload_key_is_the_hash_prefix() {
        let r = ImageRef::Upload {
            sha256: format!("00000000000001ff{}", "0".repeat(48)),
        };
        assert_eq!(r.key(), 0x1ff);
        assert_eq!(ImageRef::Corpus { image_id: 9 }.key(), 9);
    }

    #[test]
    fn stream_without_catalog_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = loopcap_core::synthetic::corpus(&loopcap_core::synthetic::Layout {
            clusters: 1,
            train: 1,
            val: 0,
            test: 1,
            captions_per_image: 1,
            seed: 0,
        })
        .unwrap();
        let mut o = SessionOptions::new(dir.path());
        o.clusters = Some(loopcap_core::synthetic::cluster_file(&corpus));
        assert!(Session::open(o).is_err());
    }
}
