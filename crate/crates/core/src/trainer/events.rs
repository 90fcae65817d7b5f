//! Append-only run event log (JSON lines).

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Batch {
        task: u32,
        epoch: usize,
        counter: u64,
        originals: usize,
        expanded: usize,
        replayed: usize,
        written: usize,
    },
    Epoch {
        task: u32,
        epoch: usize,
        phase: String,
        samples: usize,
        val_bleu4: Option<f64>,
        improved: bool,
    },
    TaskDone {
        task: u32,
        epochs: usize,
        best_epoch: Option<usize>,
        best_val_bleu4: Option<f64>,
    },
    Eval {
        after_task: u32,
        clusters: Vec<u32>,
        all_bleu4: Option<f64>,
    },
    /// An incremental update built from queued feedback.
    Update {
        update_id: u64,
        feedback_ids: Vec<u64>,
        samples_trained: usize,
        replayed: usize,
    },
}

#[derive(Debug, Default)]
pub struct EventLog {
    events: Vec<Event>,
    file: Option<BufWriter<File>>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Appends to `path`, creating it when missing.
    pub fn append_to(path: &Path) -> Result<Self> {
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            events: Vec::new(),
            file: Some(BufWriter::new(f)),
        })
    }

    pub fn record(&mut self, event: Event) -> Result<()> {
        if let Some(f) = &mut self.file {
            serde_json::to_writer(&mut *f, &event).expect("event serializes");
            f.write_all(b"\n").map_err(|e| Error::io(Path::new("events.jsonl"), e))?;
        }
        self.events.push(event);
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some(f) = &mut self.file {
            f.flush().map_err(|e| Error::io(Path::new("events.jsonl"), e))?;
        }
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Batch counters at which a replay batch was mixed in.
    pub fn replay_counters(&self) -> Vec<u64> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Batch { counter, replayed, .. } if *replayed > 0 => Some(*counter),
                _ => None,
            })
            .collect()
    }
}

impl Drop for EventLog {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}
