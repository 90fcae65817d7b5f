//! Two-task forgetting demonstration with the retrieval learner.

use serde::{Deserialize, Serialize};

use super::stats::retrieval_rate;
use super::task::{SyntheticImages, Task};
use super::{EventLog, RunConfig, Trainer};
use crate::error::Result;
use crate::learner::RetrievalLearner;
use crate::synthetic::{corpus, Layout};

pub const DEMO_CAPACITY: usize = 512;
pub const DEMO_TASK_SIZE: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForgettingOutcome {
    /// Task-A exact-caption retrieval rate right after task A.
    pub a_after_a: f64,
    /// Task-A rate after subsequently adapting to task B.
    pub a_after_b: f64,
    pub b_after_b: f64,
    pub replays: usize,
}

/// The two synthetic tasks: 600 single-caption training images each.
pub fn demo_tasks(seed: u64) -> Result<(Task, Task)> {
    let c = corpus(&Layout {
        clusters: 2,
        train: DEMO_TASK_SIZE,
        val: 0,
        test: 0,
        captions_per_image: 1,
        seed,
    })?;
    let images = SyntheticImages::default();
    let of = |id: u64| -> Vec<_> { c.images().iter().filter(|r| r.image_id / 10_000_000 == id).collect() };
    Ok((Task::from_records(1, &of(1), &images)?, Task::from_records(2, &of(2), &images)?))
}

/// Demo configuration: single-sample batches and one pass per task, so
/// the default replay cadence of 200 batches fires within each task.
pub fn demo_config(memory_enabled: bool, seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        batch_size: 1,
        max_epochs: 1,
        seed,
        memory_enabled,
        ..RunConfig::default()
    };
    cfg.memory.seed = seed;
    cfg.learner.capacity = DEMO_CAPACITY;
    cfg
}

pub fn forgetting_demo(memory_enabled: bool, seed: u64) -> Result<ForgettingOutcome> {
    let (a, b) = demo_tasks(seed)?;
    let mut learner = RetrievalLearner::new(DEMO_CAPACITY)?;
    let mut trainer = Trainer::new(demo_config(memory_enabled, seed), EventLog::in_memory())?;
    trainer.adapt_task(&mut learner, &a)?;
    let a_after_a = retrieval_rate(&learner, &a)?;
    trainer.adapt_task(&mut learner, &b)?;
    Ok(ForgettingOutcome {
        a_after_a,
        a_after_b: retrieval_rate(&learner, &a)?,
        b_after_b: retrieval_rate(&learner, &b)?,
        replays: trainer.events().replay_counters().len(),
    })
}
