//! Sequential adaptation with the lower-triangular evaluation grid.

use serde::{Deserialize, Serialize};

use super::stats::evaluate_images;
use super::task::Task;
use super::{Event, TaskLog, Trainer};
use crate::error::{Error, Result};
use crate::learner::Learner;
use crate::metrics::{aligned_csv, MetricReport, MicroMode, ReportRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridStep {
    pub after_task: u32,
    pub report: MetricReport,
}

/// One report per adapted task, covering every task seen so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub steps: Vec<GridStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub after_task: u32,
    /// Cluster id, or `all` for the micro-average.
    pub eval: String,
    #[serde(flatten)]
    pub row: ReportRow,
}

impl Grid {
    pub fn rows(&self) -> Vec<GridRow> {
        let mut out = Vec::new();
        for step in &self.steps {
            for (id, r) in &step.report.clusters {
                out.push(GridRow {
                    after_task: step.after_task,
                    eval: id.to_string(),
                    row: r.clone(),
                });
            }
            if let Some(all) = &step.report.all {
                out.push(GridRow {
                    after_task: step.after_task,
                    eval: "all".into(),
                    row: all.clone(),
                });
            }
        }
        out
    }

    /// Score row for cluster `eval` (or `all` when `None`) after a task.
    pub fn cell(&self, after_task: u32, eval: Option<u32>) -> Option<&ReportRow> {
        let step = self.steps.iter().find(|s| s.after_task == after_task)?;
        match eval {
            Some(id) => step.report.clusters.get(&id),
            None => step.report.all.as_ref(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut rows = vec![["after_task", "eval", "items", "bleu4", "rougeL", "ciderD"].map(String::from).to_vec()];
        for r in self.rows() {
            rows.push(vec![
                r.after_task.to_string(),
                r.eval,
                r.row.items.to_string(),
                format!("{:.6}", r.row.scores.bleu4),
                format!("{:.6}", r.row.scores.rouge_l),
                format!("{:.6}", r.row.scores.cider_d),
            ]);
        }
        aligned_csv(&rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub grid: Grid,
    pub logs: Vec<TaskLog>,
    pub replay_counters: Vec<u64>,
}

/// Scores the test split of every given task, plus the micro-average.
pub fn evaluate_tasks(learner: &dyn Learner, tasks: &[&Task], mode: MicroMode) -> Result<MetricReport> {
    let mut per = std::collections::BTreeMap::new();
    for t in tasks {
        per.insert(t.cluster_id, evaluate_images(learner, &t.test)?);
    }
    MetricReport::build(&per, mode)
}

/// Reorders tasks by cluster id; an empty order keeps ascending ids.
pub fn order_tasks(mut tasks: Vec<Task>, order: &[u32]) -> Result<Vec<Task>> {
    if order.is_empty() {
        tasks.sort_by_key(|t| t.cluster_id);
        return Ok(tasks);
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let pos = tasks
            .iter()
            .position(|t| t.cluster_id == *id)
            .ok_or_else(|| Error::Config(format!("task_order names unknown or repeated cluster {id}")))?;
        out.push(tasks.swap_remove(pos));
    }
    Ok(out)
}

impl Trainer {
    /// Adapts each task once, in order, evaluating all seen tasks after
    /// each one.
    pub fn run_sequence(&mut self, learner: &mut dyn Learner, tasks: &[Task]) -> Result<SequenceResult> {
        let mut grid = Grid::default();
        let mut logs = Vec::with_capacity(tasks.len());
        for (i, task) in tasks.iter().enumerate() {
            logs.push(self.adapt_task(learner, task)?);
            let seen: Vec<&Task> = tasks[..=i].iter().collect();
            let report = evaluate_tasks(learner, &seen, self.config.micro_mode)?;
            self.events.record(Event::Eval {
                after_task: task.cluster_id,
                clusters: report.clusters.keys().copied().collect(),
                all_bleu4: report.all.as_ref().map(|r| r.scores.bleu4),
            })?;
            tracing::info!(task = task.cluster_id, all = ?report.all.as_ref().map(|r| r.scores), "task adapted");
            grid.steps.push(GridStep {
                after_task: task.cluster_id,
                report,
            });
        }
        self.events.flush()?;
        Ok(SequenceResult {
            grid,
            logs,
            replay_counters: self.events.replay_counters(),
        })
    }
}
