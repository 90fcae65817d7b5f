//! Keyword-driven image-to-cluster assignment.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub cluster_id: u32,
    pub keywords: Vec<String>,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAssignment {
    pub assignments: BTreeMap<u64, u32>,
    pub unassigned: BTreeSet<u64>,
}

impl TaskAssignment {
    pub fn images_of(&self, cluster_id: u32) -> impl Iterator<Item = u64> + '_ {
        self.assignments
            .iter()
            .filter(move |(_, &c)| c == cluster_id)
            .map(|(&id, _)| id)
    }

    pub fn cluster_sizes(&self) -> BTreeMap<u32, usize> {
        let mut sizes = BTreeMap::new();
        for &c in self.assignments.values() {
            *sizes.entry(c).or_insert(0) += 1;
        }
        sizes
    }
}

/// Longest-match keyword scanner over word-token sequences. Matching whole
/// tokens gives word boundaries for free ("art" never fires inside "cart").
#[derive(Debug, Clone, Default)]
pub struct KeywordMatcher {
    by_first: HashMap<String, Vec<(Vec<String>, u32)>>,
}

impl KeywordMatcher {
    pub fn new(specs: &[ClusterSpec]) -> Result<Self> {
        let mut owner: HashMap<&str, u32> = HashMap::new();
        let mut by_first: HashMap<String, Vec<(Vec<String>, u32)>> = HashMap::new();
        for spec in specs {
            for kw in &spec.keywords {
                if let Some(prev) = owner.insert(kw, spec.cluster_id) {
                    if prev != spec.cluster_id {
                        return Err(Error::InvalidInput(format!(
                            "keyword {kw:?} belongs to clusters {prev} and {}",
                            spec.cluster_id
                        )));
                    }
                    continue;
                }
                let tokens: Vec<String> = kw.split_whitespace().map(str::to_string).collect();
                if let Some(first) = tokens.first() {
                    by_first
                        .entry(first.clone())
                        .or_default()
                        .push((tokens, spec.cluster_id));
                }
            }
        }
        for entries in by_first.values_mut() {
            entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        }
        Ok(Self { by_first })
    }

    /// Clusters whose keywords occur in `tokens`.
    pub fn matches(&self, tokens: &[String], out: &mut BTreeSet<u32>) {
        let mut i = 0;
        while i < tokens.len() {
            let hit = self.by_first.get(&tokens[i]).and_then(|cands| {
                cands
                    .iter()
                    .find(|(kw, _)| tokens[i..].starts_with(kw))
                    .map(|(kw, c)| (kw.len(), *c))
            });
            match hit {
                Some((len, cluster)) => {
                    out.insert(cluster);
                    i += len;
                }
                None => i += 1,
            }
        }
    }
}

/// Assigns images in ascending id order. An image matching several clusters
/// goes to the one with the fewest images so far (lower id on ties).
pub fn assign_images(corpus: &Corpus, specs: &[ClusterSpec]) -> Result<TaskAssignment> {
    let matcher = KeywordMatcher::new(specs)?;
    let mut sizes: BTreeMap<u32, usize> = specs.iter().map(|s| (s.cluster_id, 0)).collect();
    let mut out = TaskAssignment::default();
    let mut order: Vec<&crate::corpus::ImageRecord> = corpus.images().iter().collect();
    order.sort_by_key(|i| i.image_id);
    let mut hits = BTreeSet::new();
    for img in order {
        hits.clear();
        for cap in &img.captions {
            matcher.matches(&cap.tokens, &mut hits);
        }
        let chosen = hits.iter().copied().min_by_key(|c| (sizes[c], *c));
        match chosen {
            Some(c) => {
                *sizes.get_mut(&c).unwrap() += 1;
                out.assignments.insert(img.image_id, c);
            }
            None => {
                out.unassigned.insert(img.image_id);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CaptionRecord, ImageRecord, Split};

    fn spec(id: u32, kws: &[&str]) -> ClusterSpec {
        ClusterSpec {
            cluster_id: id,
            keywords: kws.iter().map(|s| s.to_string()).collect(),
            centroid: vec![],
        }
    }

    fn img(id: u64, caps: &[&str]) -> ImageRecord {
        ImageRecord {
            image_id: id,
            file_name: String::new(),
            captions: caps.iter().map(|c| CaptionRecord::new(*c)).collect(),
            split: Split::Train,
        }
    }

    #[test]
    fn single_candidate_and_unassigned() {
        let corpus = Corpus::new(vec![img(1, &["a red cup"]), img(2, &["nothing here"])]).unwrap();
        let a = assign_images(&corpus, &[spec(1, &["dog"]), spec(2, &["cup"])]).unwrap();
        assert_eq!(a.assignments[&1], 2);
        assert!(a.unassigned.contains(&2));
    }

    #[test]
    fn multi_match_goes_to_smaller_cluster() {
        let mut images: Vec<ImageRecord> = (0..10).map(|i| img(i, &["a dog"])).collect();
        images.extend((10..15).map(|i| img(i, &["a cup"])));
        images.push(img(100, &["a dog next to a cup"]));
        let corpus = Corpus::new(images).unwrap();
        let a = assign_images(&corpus, &[spec(1, &["dog"]), spec(2, &["cup"])]).unwrap();
        assert_eq!(a.assignments[&100], 2);
        assert_eq!(a.cluster_sizes()[&2], 6);
    }

    #[test]
    fn ties_go_to_lower_cluster_id() {
        let corpus = Corpus::new(vec![img(1, &["dog and cup"])]).unwrap();
        let a = assign_images(&corpus, &[spec(2, &["dog"]), spec(1, &["cup"])]).unwrap();
        assert_eq!(a.assignments[&1], 1);
    }

    #[test]
    fn matching_respects_word_boundaries_and_prefers_longest() {
        let corpus = Corpus::new(vec![img(1, &["a shopping cart"]), img(2, &["a hot dog stand"])]).unwrap();
        let specs = [spec(1, &["art"]), spec(2, &["hot dog"]), spec(3, &["dog"])];
        let a = assign_images(&corpus, &specs).unwrap();
        assert!(a.unassigned.contains(&1));
        assert_eq!(a.assignments[&2], 2);
    }

    #[test]
    fn overlapping_keyword_sets_are_rejected() {
        let corpus = Corpus::new(vec![img(1, &["x"])]).unwrap();
        assert!(assign_images(&corpus, &[spec(1, &["dog"]), spec(2, &["dog"])]).is_err());
    }
}
