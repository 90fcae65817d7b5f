//! Training-time data augmentation.
//!
//! A batch is expanded by `factor`: every sample is kept and followed by
//! `factor - 1` augmented copies. Image copies get a freshly sampled
//! [`ImagePlan`]; caption copies come from the paraphrase pool. Each copy
//! carries its lineage so results can be traced back to the source sample.

mod image;
mod paraphrase;
mod text;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::image::{
    augment_image, ImageBuffer, ImageOpProbs, ImagePlan, BLUR_SIGMA_RANGE, CLAHE_CLIP_LIMIT,
    CLAHE_TILES, GRID_MAX_JITTER, GRID_NODES, MAX_ROTATION_DEG, OPTICAL_K_MAX,
};
pub use self::paraphrase::{EdaParaphraser, ParaphrasePool, ParaphraseProvider, RemoteParaphraser};
pub use self::text::{
    augment_text, delete_token, edit_distance, insert_duplicate, is_stopword, replace_token,
    swap_tokens, TextEdit, Thesaurus, MIN_TOKENS_AFTER_DELETE,
};

use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::rng::derived;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    No,
    Img,
    Txt,
    Both,
}

impl AugmentMode {
    pub const ALL: [AugmentMode; 4] = [Self::No, Self::Img, Self::Txt, Self::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::No => "no",
            Self::Img => "img",
            Self::Txt => "txt",
            Self::Both => "both",
        }
    }

    fn images(self) -> bool {
        matches!(self, Self::Img | Self::Both)
    }

    fn captions(self) -> bool {
        matches!(self, Self::Txt | Self::Both)
    }
}

impl std::fmt::Display for AugmentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AugmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown augmentation mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub mode: AugmentMode,
    /// Total samples per original, the original included.
    pub factor: u32,
    pub image: ImageOpProbs,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            mode: AugmentMode::No,
            factor: 10,
            image: ImageOpProbs::default(),
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.factor == 0 {
            return Err(Error::Config("augmentation factor must be at least 1".into()));
        }
        self.image.validate()
    }
}

/// Where an augmented sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lineage {
    pub origin: u64,
    /// 0 for the original, 1.. for augmented copies.
    pub copy: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image_id: u64,
    /// Index of the caption within the source image's captions.
    pub variant: u32,
    pub split: Split,
    pub image: Arc<ImageBuffer>,
    pub caption: Vec<String>,
    pub lineage: Lineage,
}

impl Sample {
    pub fn new(image_id: u64, variant: u32, split: Split, image: Arc<ImageBuffer>, caption: Vec<String>) -> Self {
        Self {
            image_id,
            variant,
            split,
            image,
            caption,
            lineage: Lineage {
                origin: image_id,
                copy: 0,
            },
        }
    }
}

/// Number of augmented copies produced per split.
#[derive(Debug, Default)]
pub struct AugmentCounters {
    train: AtomicU64,
    val: AtomicU64,
    test: AtomicU64,
}

impl AugmentCounters {
    fn slot(&self, split: Split) -> &AtomicU64 {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn add(&self, split: Split, n: u64) {
        self.slot(split).fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self, split: Split) -> u64 {
        self.slot(split).load(Ordering::Relaxed)
    }

    /// Copies made from validation or test samples. Should stay zero.
    pub fn eval(&self) -> u64 {
        self.get(Split::Val) + self.get(Split::Test)
    }
}

pub struct Augmenter {
    config: AugmentConfig,
    paraphrasers: ParaphrasePool,
    counters: AugmentCounters,
}

impl Augmenter {
    pub fn new(config: AugmentConfig, paraphrasers: ParaphrasePool) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            paraphrasers,
            counters: AugmentCounters::default(),
        })
    }

    pub fn config(&self) -> &AugmentConfig {
        &self.config
    }

    pub fn counters(&self) -> &AugmentCounters {
        &self.counters
    }

    /// Output size for a batch of `n` samples.
    pub fn expanded_len(&self, n: usize) -> usize {
        match self.config.mode {
            AugmentMode::No => n,
            _ => n * self.config.factor as usize,
        }
    }

    /// Expands a batch. Originals keep their position, each followed by its
    /// copies; randomness is keyed on (seed, epoch, image, variant, copy) so
    /// results do not depend on thread scheduling.
    pub fn expand_batch(&self, batch: &[Sample], epoch: u64) -> Result<Vec<Sample>> {
        if self.config.mode == AugmentMode::No || self.config.factor == 1 {
            return Ok(batch.to_vec());
        }
        let groups: Vec<Vec<Sample>> = batch
            .par_iter()
            .map(|s| self.expand_one(s, epoch))
            .collect::<Result<_>>()?;
        Ok(groups.into_iter().flatten().collect())
    }

    fn expand_one(&self, sample: &Sample, epoch: u64) -> Result<Vec<Sample>> {
        let copies = self.config.factor - 1;
        let key = |copy: u32| derived(self.config.seed, &[epoch, sample.image_id, u64::from(sample.variant), u64::from(copy)]);
        let paraphrases = if self.config.mode.captions() && !sample.caption.is_empty() {
            self.paraphrasers.generate(&sample.caption, copies as usize, &mut key(0))?
        } else {
            Vec::new()
        };
        let mut out = Vec::with_capacity(copies as usize + 1);
        out.push(sample.clone());
        for copy in 1..=copies {
            let mut s = sample.clone();
            s.lineage = Lineage {
                origin: sample.lineage.origin,
                copy,
            };
            if self.config.mode.images() {
                s.image = Arc::new(augment_image(&sample.image, &self.config.image, &mut key(copy)));
            }
            if !paraphrases.is_empty() {
                s.caption = paraphrases[(copy as usize - 1) % paraphrases.len()].clone();
            }
            out.push(s);
        }
        self.counters.add(sample.split, u64::from(copies));
        Ok(out)
    }
}
