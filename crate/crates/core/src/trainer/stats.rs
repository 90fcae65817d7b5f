//! Generated-caption statistics and retrieval rates.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::task::{EvalImage, Task};
use crate::error::{Error, Result};
use crate::learner::Learner;
use crate::metrics::EvalPair;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptionStats {
    pub word_types: usize,
    pub mean_length: f64,
    pub median_length: f64,
}

/// Median of an even count is the mean of the two middle lengths.
pub fn caption_stats(captions: &[Vec<String>]) -> Result<CaptionStats> {
    if captions.is_empty() {
        return Err(Error::InvalidInput("no captions".into()));
    }
    let types: BTreeSet<&str> = captions.iter().flatten().map(String::as_str).collect();
    let mut lens: Vec<usize> = captions.iter().map(Vec::len).collect();
    lens.sort_unstable();
    let n = lens.len();
    let median = if n % 2 == 1 {
        lens[n / 2] as f64
    } else {
        (lens[n / 2 - 1] + lens[n / 2]) as f64 / 2.0
    };
    Ok(CaptionStats {
        word_types: types.len(),
        mean_length: lens.iter().sum::<usize>() as f64 / n as f64,
        median_length: median,
    })
}

/// Captions every image and pairs the result with its references.
pub fn evaluate_images(learner: &dyn Learner, images: &[EvalImage]) -> Result<Vec<EvalPair>> {
    images
        .par_iter()
        .map(|e| EvalPair::new(e.image_id, learner.generate(&e.feature)?, e.references.clone()))
        .collect()
}

/// Fraction of the task's training samples whose caption the learner
/// reproduces exactly from the sample's image.
pub fn retrieval_rate(learner: &dyn Learner, task: &Task) -> Result<f64> {
    if task.train.is_empty() {
        return Err(Error::InvalidInput(format!("task {} has no training samples", task.cluster_id)));
    }
    let hits: Vec<bool> = task
        .train
        .par_iter()
        .map(|s| Ok(learner.generate(&task.features[&s.image_id])? == s.caption))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}
