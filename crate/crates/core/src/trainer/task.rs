//! Tasks: per-cluster training samples and evaluation images.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;

use crate::augment::{ImageBuffer, Sample};
use crate::corpus::{Corpus, ImageRecord, Split};
use crate::error::{Error, Result};
use crate::learner::{extract_feature, Feature};
use crate::rng::derived;
use crate::taskgen::ClusterFile;
use crate::text::metric_tokens;

pub trait ImageSource: Send + Sync {
    fn load(&self, record: &ImageRecord) -> Result<ImageBuffer>;
}

/// Images on disk under `root/<file_name>` or `root/<split>/<file_name>`.
#[derive(Debug, Clone)]
pub struct ImageDir {
    pub root: PathBuf,
}

impl ImageSource for ImageDir {
    fn load(&self, record: &ImageRecord) -> Result<ImageBuffer> {
        let direct = self.root.join(&record.file_name);
        if direct.exists() {
            return ImageBuffer::open(&direct);
        }
        ImageBuffer::open(&self.root.join(record.split.as_str()).join(&record.file_name))
    }
}

/// Renders images from their first caption; see [`crate::synthetic`].
#[derive(Debug, Clone, Copy)]
pub struct SyntheticImages {
    pub size: u32,
}

impl Default for SyntheticImages {
    fn default() -> Self {
        Self {
            size: crate::synthetic::IMAGE_SIZE,
        }
    }
}

impl ImageSource for SyntheticImages {
    fn load(&self, record: &ImageRecord) -> Result<ImageBuffer> {
        let tokens = record.captions.first().map(|c| metric_tokens(&c.text)).unwrap_or_default();
        Ok(crate::synthetic::render(record.image_id, &tokens, self.size))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalImage {
    pub image_id: u64,
    pub feature: Feature,
    pub references: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Task {
    pub cluster_id: u32,
    /// One sample per (image, caption).
    pub train: Vec<Sample>,
    pub features: HashMap<u64, Feature>,
    pub val: Vec<EvalImage>,
    pub test: Vec<EvalImage>,
}

impl Task {
    /// Builds a task from image records; each record's split decides where
    /// it goes. Images are decoded in parallel.
    pub fn from_records(cluster_id: u32, records: &[&ImageRecord], images: &dyn ImageSource) -> Result<Self> {
        let loaded: Vec<(Arc<ImageBuffer>, Feature)> = records
            .par_iter()
            .map(|r| {
                let img = images.load(r)?;
                let f = extract_feature(&img);
                Ok((Arc::new(img), f))
            })
            .collect::<Result<_>>()?;
        let mut task = Task {
            cluster_id,
            train: Vec::new(),
            features: HashMap::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for (r, (img, feature)) in records.iter().zip(loaded) {
            let refs: Vec<Vec<String>> = r
                .captions
                .iter()
                .map(|c| metric_tokens(&c.text))
                .filter(|t| !t.is_empty())
                .collect();
            match r.split {
                Split::Train => {
                    for (v, caption) in refs.into_iter().enumerate() {
                        task.train.push(Sample::new(r.image_id, v as u32, Split::Train, img.clone(), caption));
                    }
                    task.features.insert(r.image_id, feature);
                }
                split if !refs.is_empty() => {
                    let e = EvalImage {
                        image_id: r.image_id,
                        feature,
                        references: refs,
                    };
                    if split == Split::Val {
                        task.val.push(e);
                    } else {
                        task.test.push(e);
                    }
                }
                _ => {}
            }
        }
        Ok(task)
    }

    pub fn from_cluster(corpus: &Corpus, clusters: &ClusterFile, cluster_id: u32, images: &dyn ImageSource) -> Result<Self> {
        if !clusters.clusters.contains_key(&cluster_id) {
            return Err(Error::InvalidInput(format!("unknown cluster {cluster_id}")));
        }
        let mut records = Vec::new();
        for split in Split::ALL {
            for id in clusters.ids(cluster_id, split) {
                let r = corpus
                    .get(*id)
                    .ok_or_else(|| Error::Integrity(format!("cluster {cluster_id} lists unknown image {id}")))?;
                records.push(r);
            }
        }
        Self::from_records(cluster_id, &records, images)
    }

    /// Wraps a whole corpus (e.g. the pretraining base) as task 0.
    pub fn from_corpus(corpus: &Corpus, images: &dyn ImageSource) -> Result<Self> {
        let records: Vec<&ImageRecord> = corpus.images().iter().collect();
        Self::from_records(0, &records, images)
    }

    /// Distinct training images in first-appearance order.
    pub fn train_images(&self) -> Vec<u64> {
        let mut seen = BTreeSet::new();
        self.train.iter().map(|s| s.image_id).filter(|id| seen.insert(*id)).collect()
    }

    /// Keeps `floor(fraction * images)` training images chosen uniformly.
    pub fn subsample(&self, fraction: f64, seed: u64) -> Result<Task> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!("fraction {fraction} outside (0, 1]")));
        }
        let ids = self.train_images();
        let keep = (fraction * ids.len() as f64).floor() as usize;
        if keep == 0 {
            return Err(Error::InvalidInput(format!(
                "fraction {fraction} leaves no training images in task {}",
                self.cluster_id
            )));
        }
        if keep == ids.len() {
            return Ok(self.clone());
        }
        let mut rng = derived(seed, &[u64::from(self.cluster_id), 0xf4ac]);
        let chosen: BTreeSet<u64> = index::sample(&mut rng, ids.len(), keep).into_iter().map(|i| ids[i]).collect();
        let mut out = self.clone();
        out.train.retain(|s| chosen.contains(&s.image_id));
        out.features.retain(|id, _| chosen.contains(id));
        Ok(out)
    }
}
