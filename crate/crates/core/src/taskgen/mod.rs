//! Task clustering: noun-phrase keywords, embedding averages, k-means and
//! smaller-cluster-first image assignment.

mod assign;
mod chunk;
mod embedding;
mod kmeans;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::info;

pub use assign::{assign_images, ClusterSpec, KeywordMatcher, TaskAssignment};
pub use chunk::{
    chunk_tokens, extract_noun_phrases, np_frequency_table, select_keywords, KeywordCandidate,
    NounPhrase, PosLexicon, PosTag,
};
pub use embedding::EmbeddingTable;
pub use kmeans::{kmeans, wcss, KMeansResult, MAX_ITERATIONS};

use crate::corpus::{compute_stats, Corpus, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    pub min_freq: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 5,
            min_freq: 15,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub phrase: String,
    pub frequency: usize,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub keywords: Vec<Keyword>,
    /// Frequent phrases with no in-vocabulary word.
    pub dropped_keywords: Vec<KeywordCandidate>,
    pub specs: Vec<ClusterSpec>,
    pub assignment: TaskAssignment,
    pub kmeans: KMeansResult,
}

/// Runs the full clustering pipeline over `corpus` (all splits jointly).
pub fn build_clusters(
    corpus: &Corpus,
    lexicon: &PosLexicon,
    embeddings: &EmbeddingTable,
    config: &ClusterConfig,
) -> Result<ClusterOutcome> {
    let table = np_frequency_table(corpus, lexicon);
    let candidates = select_keywords(&table, config.min_freq);
    let mut keywords = Vec::new();
    let mut dropped = Vec::new();
    for cand in candidates {
        match embeddings.embed_keyword(&cand.surface) {
            Some(embedding) => keywords.push(Keyword {
                phrase: cand.surface,
                frequency: cand.frequency,
                embedding,
            }),
            None => dropped.push(cand),
        }
    }
    info!(
        phrases = table.len(),
        keywords = keywords.len(),
        dropped = dropped.len(),
        "selected keywords"
    );
    if keywords.len() < config.k {
        return Err(Error::InvalidInput(format!(
            "only {} embeddable keywords for k={}",
            keywords.len(),
            config.k
        )));
    }
    let vectors: Vec<Vec<f64>> = keywords.iter().map(|k| k.embedding.clone()).collect();
    let km = kmeans(&vectors, config.k, config.seed)?;
    let specs: Vec<ClusterSpec> = (0..config.k)
        .map(|label| ClusterSpec {
            cluster_id: label as u32 + 1,
            keywords: keywords
                .iter()
                .zip(&km.labels)
                .filter(|(_, &l)| l == label)
                .map(|(k, _)| k.phrase.clone())
                .collect(),
            centroid: km.centroids[label].clone(),
        })
        .collect();
    let assignment = assign_images(corpus, &specs)?;
    Ok(ClusterOutcome {
        keywords,
        dropped_keywords: dropped,
        specs,
        assignment,
        kmeans: km,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub keywords: Vec<String>,
    pub image_ids: BTreeMap<Split, Vec<u64>>,
}

/// On-disk cluster description: cluster id to keywords and per-split image
/// ids, plus the images no keyword matched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFile {
    pub config: ClusterConfig,
    pub clusters: BTreeMap<u32, ClusterEntry>,
    pub unassigned: BTreeMap<Split, Vec<u64>>,
}

fn by_split(corpus: &Corpus, ids: impl Iterator<Item = u64>) -> BTreeMap<Split, Vec<u64>> {
    let mut out: BTreeMap<Split, Vec<u64>> = Split::ALL.iter().map(|s| (*s, Vec::new())).collect();
    for id in ids {
        if let Some(img) = corpus.get(id) {
            out.get_mut(&img.split).unwrap().push(id);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterStatsRow {
    /// Cluster id, or `None` for the pooled row.
    pub cluster: Option<u32>,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub all: usize,
    pub word_types: usize,
}

impl ClusterFile {
    pub fn from_outcome(outcome: &ClusterOutcome, corpus: &Corpus, config: ClusterConfig) -> Self {
        let clusters = outcome
            .specs
            .iter()
            .map(|s| {
                (
                    s.cluster_id,
                    ClusterEntry {
                        keywords: s.keywords.clone(),
                        image_ids: by_split(corpus, outcome.assignment.images_of(s.cluster_id)),
                    },
                )
            })
            .collect();
        Self {
            config,
            clusters,
            unassigned: by_split(corpus, outcome.assignment.unassigned.iter().copied()),
        }
    }

    pub fn cluster_ids(&self) -> Vec<u32> {
        self.clusters.keys().copied().collect()
    }

    pub fn ids(&self, cluster_id: u32, split: Split) -> &[u64] {
        self.clusters
            .get(&cluster_id)
            .and_then(|c| c.image_ids.get(&split))
            .map_or(&[], Vec::as_slice)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("cluster file serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ClusterFile = serde_json::from_str(&text).map_err(|e| Error::json(path, &e))?;
        let mut seen = BTreeSet::new();
        for entry in file.clusters.values() {
            for id in entry.image_ids.values().flatten() {
                if !seen.insert(*id) {
                    return Err(Error::Integrity(format!(
                        "image {id} appears in more than one cluster"
                    )));
                }
            }
        }
        Ok(file)
    }

    /// Per-cluster split counts and word types, followed by a pooled row.
    pub fn stats_rows(&self, corpus: &Corpus) -> Vec<ClusterStatsRow> {
        let row = |cluster: Option<u32>, ids: Vec<u64>| {
            let images = ids.iter().filter_map(|id| corpus.get(*id).cloned()).collect();
            let sub = Corpus::new(images).expect("subset of a valid corpus");
            let stats = compute_stats(&sub);
            let count = |s| stats.per_split.get(&s).copied().unwrap_or(0);
            ClusterStatsRow {
                cluster,
                train: count(Split::Train),
                val: count(Split::Val),
                test: count(Split::Test),
                all: stats.total,
                word_types: stats.word_types,
            }
        };
        let mut rows: Vec<ClusterStatsRow> = self
            .clusters
            .iter()
            .map(|(id, e)| row(Some(*id), e.image_ids.values().flatten().copied().collect()))
            .collect();
        rows.push(row(
            None,
            self.clusters
                .values()
                .flat_map(|e| e.image_ids.values().flatten().copied())
                .collect(),
        ));
        rows
    }
}
