//! Memory on/off and training-fraction ablations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sequence::SequenceResult;
use super::task::Task;
use super::{EventLog, RunConfig, Trainer};
use crate::error::{Error, Result};
use crate::learner::Learner;
use crate::metrics::{aligned_csv, Scores};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryAblation {
    pub with_memory: SequenceResult,
    pub without_memory: SequenceResult,
}

impl MemoryAblation {
    /// Side-by-side rows: `+` with replay, `-` without.
    pub fn to_csv(&self) -> String {
        let mut rows = vec![[
            "after_task", "eval", "bleu4(+)", "bleu4(-)", "rougeL(+)", "rougeL(-)", "ciderD(+)", "ciderD(-)",
        ]
        .map(String::from)
        .to_vec()];
        let off = self.without_memory.grid.rows();
        for (on, off) in self.with_memory.grid.rows().into_iter().zip(off) {
            let (a, b) = (on.row.scores, off.row.scores);
            rows.push(vec![
                on.after_task.to_string(),
                on.eval,
                format!("{:.6}", a.bleu4),
                format!("{:.6}", b.bleu4),
                format!("{:.6}", a.rouge_l),
                format!("{:.6}", b.rouge_l),
                format!("{:.6}", a.cider_d),
                format!("{:.6}", b.cider_d),
            ]);
        }
        aligned_csv(&rows)
    }
}

fn run(base: &dyn Learner, tasks: &[Task], config: RunConfig) -> Result<SequenceResult> {
    let mut learner = base.box_clone();
    let mut trainer = Trainer::new(config, EventLog::in_memory())?;
    trainer.run_sequence(learner.as_mut(), tasks)
}

/// Runs the task sequence twice from the same starting learner, with and
/// without episodic memory.
pub fn ablate_memory(base: &dyn Learner, tasks: &[Task], config: &RunConfig) -> Result<MemoryAblation> {
    let with = RunConfig {
        memory_enabled: true,
        ..config.clone()
    };
    let without = RunConfig {
        memory_enabled: false,
        ..config.clone()
    };
    Ok(MemoryAblation {
        with_memory: run(base, tasks, with)?,
        without_memory: run(base, tasks, without)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionRow {
    pub fraction: f64,
    /// Cluster id or `all`.
    pub eval: String,
    pub mean: Scores,
    pub per_seed: Vec<Scores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionAblation {
    pub seeds: Vec<u64>,
    pub rows: Vec<FractionRow>,
}

impl FractionAblation {
    pub fn to_csv(&self) -> String {
        let mut rows = vec![["fraction", "eval", "bleu4", "rougeL", "ciderD"].map(String::from).to_vec()];
        for r in &self.rows {
            rows.push(vec![
                r.fraction.to_string(),
                r.eval.clone(),
                format!("{:.6}", r.mean.bleu4),
                format!("{:.6}", r.mean.rouge_l),
                format!("{:.6}", r.mean.cider_d),
            ]);
        }
        aligned_csv(&rows)
    }
}

/// For each fraction and seed, subsamples every task's training images and
/// runs the sequence without memory; reports per-cluster final scores
/// averaged over seeds.
pub fn ablate_fraction(base: &dyn Learner, tasks: &[Task], config: &RunConfig) -> Result<FractionAblation> {
    if config.seeds.is_empty() {
        return Err(Error::Config("fraction ablation needs at least one seed".into()));
    }
    let mut rows = Vec::new();
    for &fraction in &config.fractions {
        let mut per_eval: BTreeMap<String, Vec<Scores>> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();
        for &seed in &config.seeds {
            let subset: Vec<Task> = tasks.iter().map(|t| t.subsample(fraction, seed)).collect::<Result<_>>()?;
            let mut cfg = config.clone();
            cfg.seed = seed;
            cfg.augment.seed = seed;
            cfg.memory_enabled = false;
            cfg.fraction = fraction;
            let result = run(base, &subset, cfg)?;
            let Some(last) = result.grid.steps.last() else { continue };
            let mut add = |key: String, s: Scores| {
                if !per_eval.contains_key(&key) {
                    order.push(key.clone());
                }
                per_eval.entry(key).or_default().push(s);
            };
            for (id, r) in &last.report.clusters {
                add(id.to_string(), r.scores);
            }
            if let Some(all) = &last.report.all {
                add("all".into(), all.scores);
            }
        }
        for key in order {
            let per_seed = per_eval.remove(&key).unwrap_or_default();
            let n = per_seed.len() as f64;
            let mean = Scores {
                bleu4: per_seed.iter().map(|s| s.bleu4).sum::<f64>() / n,
                rouge_l: per_seed.iter().map(|s| s.rouge_l).sum::<f64>() / n,
                cider_d: per_seed.iter().map(|s| s.cider_d).sum::<f64>() / n,
            };
            rows.push(FractionRow {
                fraction,
                eval: key,
                mean,
                per_seed,
            });
        }
    }
    Ok(FractionAblation {
        seeds: config.seeds.clone(),
        rows,
    })
}
