//! Pretraining, sequential task adaptation, evaluation grids and ablations.

mod ablation;
mod config;
mod demo;
mod events;
mod rundir;
mod sequence;
mod stats;
mod task;

use std::sync::Arc;
use std::time::Duration;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::ablation::{ablate_fraction, ablate_memory, FractionAblation, FractionRow, MemoryAblation};
pub use self::config::{Patience, RunConfig};
pub use self::demo::{demo_config, demo_tasks, forgetting_demo, ForgettingOutcome, DEMO_CAPACITY, DEMO_TASK_SIZE};
pub use self::events::{Event, EventLog};
pub use self::rundir::{load_learner_from, RunDir};
pub use self::sequence::{evaluate_tasks, order_tasks, Grid, GridRow, GridStep, SequenceResult};
pub use self::stats::{caption_stats, evaluate_images, retrieval_rate, CaptionStats};
pub use self::task::{EvalImage, ImageDir, ImageSource, SyntheticImages, Task};

use crate::augment::{
    Augmenter, EdaParaphraser, ParaphrasePool, ParaphraseProvider, RemoteParaphraser, Sample, Thesaurus,
};
use crate::error::{Error, Result};
use crate::learner::{extract_feature, Learner, PretrainPhase, TrainSample};
use crate::memory::EpisodicMemory;
use crate::metrics::bleu4;
use crate::rng::derived;

/// Outcome of one early-stopping check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Counts consecutive epochs without a strictly better validation score.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: Option<(usize, f64)>,
    strikes: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience: patience.max(1),
            best: None,
            strikes: 0,
        }
    }

    pub fn record(&mut self, epoch: usize, score: f64) -> StopDecision {
        match self.best {
            Some((_, b)) if score <= b => {
                self.strikes += 1;
                if self.strikes >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, score));
                self.strikes = 0;
                StopDecision::Improved
            }
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }

    pub fn strikes(&self) -> usize {
        self.strikes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub batches: usize,
    /// Samples fed to the learner, augmented copies and replay included.
    pub samples: usize,
    pub replayed: usize,
    pub val_bleu4: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLog {
    pub task: u32,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub best_val_bleu4: Option<f64>,
    /// Validation score after restoring the best snapshot.
    pub final_val_bleu4: Option<f64>,
}

#[derive(Clone, Copy)]
enum Phase {
    Pretrain(PretrainPhase),
    Adapt,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Pretrain(PretrainPhase::DecoderOnly) => "pretrain_decoder",
            Phase::Pretrain(PretrainPhase::FineTune) => "pretrain_finetune",
            Phase::Adapt => "adapt",
        }
    }
}

/// Builds the paraphrase pool from the config: a remote provider when a
/// URL is set (falling back to offline edits), else offline edits only.
pub fn paraphrase_pool(config: &RunConfig) -> Result<ParaphrasePool> {
    let thesaurus = match &config.thesaurus {
        Some(p) => Some(Arc::new(Thesaurus::load(p)?)),
        None => None,
    };
    let offline = EdaParaphraser::new(thesaurus);
    match &config.paraphrase_url {
        Some(url) => {
            let remote: Arc<dyn ParaphraseProvider> =
                Arc::new(RemoteParaphraser::new(url.clone(), Duration::from_secs(10), offline));
            ParaphrasePool::new(vec![remote])
        }
        None => Ok(ParaphrasePool::new(vec![Arc::new(offline)])?),
    }
}

/// Mutable training state shared across the tasks of one run.
pub struct Trainer {
    config: RunConfig,
    augmenter: Augmenter,
    memory: Option<EpisodicMemory>,
    batch_counter: u64,
    events: EventLog,
}

impl Trainer {
    pub fn new(config: RunConfig, events: EventLog) -> Result<Self> {
        config.validate()?;
        let pool = paraphrase_pool(&config)?;
        Self::with_paraphrasers(config, pool, events)
    }

    pub fn with_paraphrasers(config: RunConfig, pool: ParaphrasePool, events: EventLog) -> Result<Self> {
        config.validate()?;
        let augmenter = Augmenter::new(config.augment.clone(), pool)?;
        let memory = if config.memory_enabled {
            Some(EpisodicMemory::new(config.memory.clone())?)
        } else {
            None
        };
        Ok(Self {
            config,
            augmenter,
            memory,
            batch_counter: 0,
            events,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn augmenter(&self) -> &Augmenter {
        &self.augmenter
    }

    pub fn memory(&self) -> Option<&EpisodicMemory> {
        self.memory.as_ref()
    }

    /// Replaces the memory, e.g. with one restored from a snapshot.
    pub fn set_memory(&mut self, memory: Option<EpisodicMemory>) {
        self.memory = memory;
    }

    pub fn batch_counter(&self) -> u64 {
        self.batch_counter
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn events_mut(&mut self) -> &mut EventLog {
        &mut self.events
    }

    fn shuffled(&self, task: &Task, epoch_key: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..task.train.len()).collect();
        order.shuffle(&mut derived(self.config.seed, &[u64::from(task.cluster_id), epoch_key]));
        order
    }

    fn features_for(task: &Task, expanded: &[Sample]) -> Vec<TrainSample> {
        expanded
            .par_iter()
            .map(|s| {
                let feature = match (s.lineage.copy, task.features.get(&s.image_id)) {
                    (0, Some(f)) => f.clone(),
                    _ => extract_feature(&s.image),
                };
                TrainSample {
                    feature,
                    caption: s.caption.clone(),
                }
            })
            .collect()
    }

    fn run_epoch(&mut self, learner: &mut dyn Learner, task: &Task, epoch: usize, phase: Phase) -> Result<EpochLog> {
        let epoch_key = match phase {
            Phase::Adapt => epoch as u64,
            Phase::Pretrain(_) => (1 << 40) | epoch as u64,
        };
        let order = self.shuffled(task, epoch_key);
        let mut log = EpochLog {
            epoch,
            batches: 0,
            samples: 0,
            replayed: 0,
            val_bleu4: None,
        };
        for chunk in order.chunks(self.config.batch_size) {
            let originals: Vec<Sample> = chunk.iter().map(|&i| task.train[i].clone()).collect();
            let mut batch = match phase {
                Phase::Pretrain(_) => Self::features_for(task, &originals),
                Phase::Adapt => {
                    let key = (u64::from(task.cluster_id) << 32) | epoch as u64;
                    let expanded = self.augmenter.expand_batch(&originals, key)?;
                    Self::features_for(task, &expanded)
                }
            };
            let expanded = batch.len();
            let (mut written, mut replayed) = (0, 0);
            if let Phase::Adapt = phase {
                self.batch_counter += 1;
                if let Some(mem) = &mut self.memory {
                    for s in &originals {
                        written += usize::from(mem.maybe_write(
                            task.features[&s.image_id].as_slice(),
                            &s.caption,
                            task.cluster_id,
                        ));
                    }
                    if let Some(replay) = mem.on_new_batch() {
                        replayed = replay.len();
                        batch.extend(replay.into_iter().map(|e| TrainSample {
                            feature: crate::learner::Feature::new(e.feature),
                            caption: e.caption,
                        }));
                    }
                }
            }
            match phase {
                Phase::Pretrain(p) => learner.pretrain_batch(p, &batch)?,
                Phase::Adapt => learner.observe_batch(&batch)?,
            }
            log.batches += 1;
            log.samples += batch.len();
            log.replayed += replayed;
            if let Phase::Adapt = phase {
                self.events.record(Event::Batch {
                    task: task.cluster_id,
                    epoch,
                    counter: self.batch_counter,
                    originals: originals.len(),
                    expanded,
                    replayed,
                    written,
                })?;
            }
        }
        Ok(log)
    }

    fn val_bleu(learner: &dyn Learner, task: &Task) -> Result<f64> {
        bleu4(&evaluate_images(learner, &task.val)?)
    }

    /// Early-stopped training loop shared by adaptation and fine-tuning.
    fn early_stopped(
        &mut self,
        learner: &mut dyn Learner,
        task: &Task,
        phase: Phase,
        patience: usize,
        max_epochs: usize,
        mut log: TaskLog,
    ) -> Result<TaskLog> {
        let mut stopper = EarlyStopper::new(patience);
        let mut best_snapshot: Option<Vec<u8>> = None;
        let first = log.epochs.len() + 1;
        for epoch in first..first + max_epochs {
            let mut ep = self.run_epoch(learner, task, epoch, phase)?;
            if task.val.is_empty() {
                tracing::warn!(task = task.cluster_id, "empty validation split, training a single epoch");
                self.events.record(Event::Epoch {
                    task: task.cluster_id,
                    epoch,
                    phase: phase.name().into(),
                    samples: ep.samples,
                    val_bleu4: None,
                    improved: false,
                })?;
                log.epochs.push(ep);
                break;
            }
            let score = Self::val_bleu(learner, task)?;
            ep.val_bleu4 = Some(score);
            let decision = stopper.record(epoch, score);
            if decision == StopDecision::Improved {
                best_snapshot = Some(learner.snapshot()?);
            }
            self.events.record(Event::Epoch {
                task: task.cluster_id,
                epoch,
                phase: phase.name().into(),
                samples: ep.samples,
                val_bleu4: Some(score),
                improved: decision == StopDecision::Improved,
            })?;
            log.epochs.push(ep);
            if decision == StopDecision::Stop {
                break;
            }
        }
        if let (Some((best_epoch, best)), Some(snap)) = (stopper.best(), best_snapshot) {
            if log.epochs.last().map(|e| e.epoch) != Some(best_epoch) {
                learner.restore(&snap)?;
            }
            log.best_epoch = Some(best_epoch);
            log.best_val_bleu4 = Some(best);
            log.final_val_bleu4 = Some(Self::val_bleu(learner, task)?);
        }
        self.events.record(Event::TaskDone {
            task: task.cluster_id,
            epochs: log.epochs.len(),
            best_epoch: log.best_epoch,
            best_val_bleu4: log.best_val_bleu4,
        })?;
        Ok(log)
    }

    /// Supervised pretraining on a base corpus: one decoder-only pass, then
    /// fine-tuning with early stopping. No augmentation, no memory.
    pub fn pretrain(&mut self, learner: &mut dyn Learner, base: &Task) -> Result<TaskLog> {
        if base.train.is_empty() {
            return Err(Error::InvalidInput("empty pretraining corpus".into()));
        }
        let mut log = TaskLog {
            task: base.cluster_id,
            epochs: Vec::new(),
            best_epoch: None,
            best_val_bleu4: None,
            final_val_bleu4: None,
        };
        let ep = self.run_epoch(learner, base, 0, Phase::Pretrain(PretrainPhase::DecoderOnly))?;
        self.events.record(Event::Epoch {
            task: base.cluster_id,
            epoch: 0,
            phase: Phase::Pretrain(PretrainPhase::DecoderOnly).name().into(),
            samples: ep.samples,
            val_bleu4: None,
            improved: false,
        })?;
        let cap = learner.pretrain_epoch_cap().unwrap_or(self.config.max_epochs).min(self.config.max_epochs);
        let mut tuned = self.early_stopped(
            learner,
            base,
            Phase::Pretrain(PretrainPhase::FineTune),
            self.config.patience.pretrain,
            cap,
            TaskLog { epochs: Vec::new(), ..log.clone() },
        )?;
        log.epochs.push(ep);
        log.epochs.append(&mut tuned.epochs);
        log.best_epoch = tuned.best_epoch;
        log.best_val_bleu4 = tuned.best_val_bleu4;
        log.final_val_bleu4 = tuned.final_val_bleu4;
        Ok(log)
    }

    /// Adapts the learner to one task: augmented batches, memory writes of
    /// the original samples, periodic replay, early stopping on val BLEU-4.
    pub fn adapt_task(&mut self, learner: &mut dyn Learner, task: &Task) -> Result<TaskLog> {
        if task.train.is_empty() {
            return Err(Error::InvalidInput(format!("task {} has no training samples", task.cluster_id)));
        }
        let log = TaskLog {
            task: task.cluster_id,
            epochs: Vec::new(),
            best_epoch: None,
            best_val_bleu4: None,
            final_val_bleu4: None,
        };
        let (patience, max_epochs) = (self.config.patience.adapt, self.config.max_epochs);
        self.early_stopped(learner, task, Phase::Adapt, patience, max_epochs, log)
    }
}
