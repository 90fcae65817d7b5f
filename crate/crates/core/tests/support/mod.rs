//! Constructed corpora shared by the core integration tests and the CLI
//! acceptance suite.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use loopcap_core::corpus::{CaptionRecord, Corpus, ImageRecord, Split, DEFAULT_QUALITY_MARKER};
use loopcap_core::corpus::apply_quality_filter;
use loopcap_core::taskgen::{build_clusters, kmeans, ClusterConfig, ClusterFile, EmbeddingTable, PosLexicon};
use rand::{Rng, SeedableRng};

pub const MARKER: &str = DEFAULT_QUALITY_MARKER;

/// What the quality filter must do with one fixture image.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Excluded,
    Kept(Vec<String>),
}

fn record(id: u64, captions: Vec<String>, split: Split) -> ImageRecord {
    ImageRecord {
        image_id: id,
        file_name: format!("img_{id}.jpg"),
        captions: captions.into_iter().map(CaptionRecord::new).collect(),
        split,
    }
}

/// Twenty images, ids 1..=20, with `(id - 1) % 6` marker captions spread
/// over varying positions. Ids 19 and 20 sit in the test split, which the
/// filter leaves alone.
pub fn quality_fixture() -> (Corpus, Vec<(u64, Outcome)>) {
    let mut images = Vec::new();
    let mut expected = Vec::new();
    for id in 1..=20u64 {
        let markers = ((id - 1) % 6) as usize;
        let split = match id {
            19 | 20 => Split::Test,
            _ if id % 2 == 0 => Split::Val,
            _ => Split::Train,
        };
        // Marker slots rotate with the id so that positions vary.
        let slots: BTreeSet<usize> = (0..markers).map(|k| (k * 2 + id as usize) % 5).collect();
        let captions: Vec<String> = (0..5)
            .map(|pos| {
                if slots.contains(&pos) {
                    MARKER.to_string()
                } else {
                    format!("caption {pos} of image {id}")
                }
            })
            .collect();
        let survivors: Vec<String> = captions.iter().filter(|c| *c != MARKER).cloned().collect();
        let outcome = if split == Split::Test {
            Outcome::Kept(captions.clone())
        } else if markers >= 3 {
            Outcome::Excluded
        } else {
            Outcome::Kept(survivors.iter().cycle().take(5).cloned().collect())
        };
        images.push(record(id, captions, split));
        expected.push((id, outcome));
    }
    (Corpus::new(images).unwrap(), expected)
}

/// Planted keyword groups: five groups of nonce nouns, each group embedded
/// around its own axis.
pub const GROUPS: [[&str; 3]; 5] = [
    ["kela", "kelo", "kelu"],
    ["mora", "moro", "moru"],
    ["tava", "tavo", "tavu"],
    ["zina", "zino", "zinu"],
    ["puxa", "puxo", "puxu"],
];
/// Occurs exactly at the frequency threshold; belongs to group 0.
pub const AT_THRESHOLD: &str = "kelx";
/// Occurs one below the threshold; embedded next to group 1.
pub const BELOW_THRESHOLD: &str = "morx";
pub const PLANTED_MIN_FREQ: usize = 15;
pub const PLANTED_DIM: usize = 8;

/// Single-keyword captions per keyword of each group.
const PER_KEYWORD: [usize; 5] = [30, 28, 26, 24, 22];

/// A 500-image corpus with one caption per image (so 500 captions).
///
/// Ids run in blocks: single-keyword images, 15 `kelx`, 14 `morx`, ten
/// captions pairing groups 0 and 4, ten pairing groups 2 and 3, then
/// keyword-free fillers.
pub fn planted_corpus() -> Corpus {
    let mut captions: Vec<String> = Vec::new();
    for (g, words) in GROUPS.iter().enumerate() {
        for w in words {
            captions.extend((0..PER_KEYWORD[g]).map(|_| format!("a {w}")));
        }
    }
    captions.extend((0..PLANTED_MIN_FREQ).map(|_| format!("a {AT_THRESHOLD}")));
    captions.extend((0..PLANTED_MIN_FREQ - 1).map(|_| format!("a {BELOW_THRESHOLD}")));
    captions.extend((0..10).map(|_| "a kela and a puxa".to_string()));
    captions.extend((0..10).map(|_| "a tava and a zina".to_string()));
    while captions.len() < 500 {
        captions.push("there is".to_string());
    }
    let images = captions
        .into_iter()
        .enumerate()
        .map(|(i, c)| record(i as u64 + 1, vec![c], Split::Train))
        .collect();
    Corpus::new(images).unwrap()
}

pub fn planted_group(word: &str) -> Option<usize> {
    if word == AT_THRESHOLD {
        return Some(0);
    }
    GROUPS.iter().position(|g| g.contains(&word))
}

pub fn planted_embeddings() -> EmbeddingTable {
    let mut vectors = HashMap::new();
    let mut put = |word: &str, group: usize, j: usize| {
        let mut v = vec![0.0f32; PLANTED_DIM];
        v[group] = 10.0;
        // Small within-group spread.
        v[5 + j % 3] = 0.1 * (j as f32 + 1.0);
        vectors.insert(word.to_string(), v);
    };
    for (g, words) in GROUPS.iter().enumerate() {
        for (j, w) in words.iter().enumerate() {
            put(w, g, j);
        }
    }
    put(AT_THRESHOLD, 0, 3);
    put(BELOW_THRESHOLD, 1, 3);
    EmbeddingTable::from_vectors(PLANTED_DIM, vectors).unwrap()
}

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Quality filter outcomes on [`quality_fixture`], plus idempotence.
pub fn check_quality_filter() -> Check {
    let (corpus, expected) = quality_fixture();
    let (filtered, excluded) = apply_quality_filter(&corpus, MARKER);
    let mut want_excluded = Vec::new();
    for (id, outcome) in &expected {
        match outcome {
            Outcome::Excluded => {
                want_excluded.push(*id);
                ensure(filtered.get(*id).is_none(), || format!("image {id} should be excluded"))?;
            }
            Outcome::Kept(caps) => {
                let got: Vec<&str> = filtered
                    .get(*id)
                    .ok_or_else(|| format!("image {id} missing"))?
                    .captions
                    .iter()
                    .map(|c| c.text.as_str())
                    .collect();
                ensure(got == *caps, || format!("image {id}: got {got:?}, want {caps:?}"))?;
            }
        }
    }
    ensure(excluded == want_excluded, || format!("excluded {excluded:?}, want {want_excluded:?}"))?;
    let (again, none) = apply_quality_filter(&filtered, MARKER);
    ensure(again == filtered && none.is_empty(), || "filter is not idempotent".into())?;
    Ok(format!("{} kept, {} excluded", filtered.len(), excluded.len()))
}

/// Keyword selection, partition recovery, disjointness, smaller-cluster
/// tie handling and rerun determinism on [`planted_corpus`].
pub fn check_planted_clustering() -> Check {
    let corpus = planted_corpus();
    ensure(corpus.images().iter().map(|i| i.captions.len()).sum::<usize>() == 500, || "need 500 captions".into())?;
    let lexicon = PosLexicon::shipped();
    let embeddings = planted_embeddings();
    let config = ClusterConfig {
        k: 5,
        min_freq: PLANTED_MIN_FREQ,
        seed: 11,
    };
    let outcome = build_clusters(&corpus, &lexicon, &embeddings, &config).map_err(|e| e.to_string())?;

    let selected: BTreeSet<&str> = outcome.keywords.iter().map(|k| k.phrase.as_str()).collect();
    let mut want: BTreeSet<&str> = GROUPS.iter().flatten().copied().collect();
    want.insert(AT_THRESHOLD);
    ensure(selected == want, || format!("selected keywords {selected:?}, want {want:?}"))?;

    // Each cluster must hold exactly one planted group.
    let mut cluster_of_group: BTreeMap<usize, u32> = BTreeMap::new();
    for spec in &outcome.specs {
        let groups: BTreeSet<usize> = spec.keywords.iter().filter_map(|k| planted_group(k)).collect();
        ensure(groups.len() == 1, || format!("cluster {} mixes groups {groups:?}", spec.cluster_id))?;
        let g = *groups.iter().next().unwrap();
        let size = GROUPS[g].len() + usize::from(g == 0);
        ensure(spec.keywords.len() == size, || format!("cluster {} has {:?}", spec.cluster_id, spec.keywords))?;
        ensure(cluster_of_group.insert(g, spec.cluster_id).is_none(), || format!("group {g} split"))?;
    }

    // Independent replay of the assignment rule in ascending id order.
    let keyword_cluster: HashMap<&str, u32> = outcome
        .specs
        .iter()
        .flat_map(|s| s.keywords.iter().map(move |k| (k.as_str(), s.cluster_id)))
        .collect();
    let mut sizes: BTreeMap<u32, usize> = outcome.specs.iter().map(|s| (s.cluster_id, 0)).collect();
    let mut multi = 0;
    for img in corpus.images() {
        let hits: BTreeSet<u32> = img.captions[0]
            .text
            .split_whitespace()
            .filter_map(|w| keyword_cluster.get(w).copied())
            .collect();
        let want = hits.iter().copied().min_by_key(|c| (sizes[c], *c));
        let got = outcome.assignment.assignments.get(&img.image_id).copied();
        ensure(want == got, || format!("image {}: assigned {got:?}, want {want:?}", img.image_id))?;
        if let Some(c) = want {
            *sizes.get_mut(&c).unwrap() += 1;
        }
        multi += usize::from(hits.len() > 1);
    }
    ensure(multi == 20, || format!("{multi} multi-cluster images"))?;
    // Group 4 is far smaller than group 0, so every pairing lands there.
    let puxa = cluster_of_group[&4];
    for img in corpus.images().iter().filter(|i| i.captions[0].text == "a kela and a puxa") {
        ensure(outcome.assignment.assignments[&img.image_id] == puxa, || "pairing missed the smaller cluster".into())?;
    }

    let file = ClusterFile::from_outcome(&outcome, &corpus, config);
    let mut seen = BTreeSet::new();
    for entry in file.clusters.values() {
        for id in entry.image_ids.values().flatten() {
            ensure(seen.insert(*id), || format!("image {id} in two clusters"))?;
        }
    }
    for _ in 0..3 {
        let again = build_clusters(&corpus, &lexicon, &embeddings, &config).map_err(|e| e.to_string())?;
        ensure(ClusterFile::from_outcome(&again, &corpus, config) == file, || "rerun differs".into())?;
    }
    Ok(format!("{} keywords, sizes {:?}", selected.len(), outcome.assignment.cluster_sizes()))
}

/// Checks that the WCSS history never increases for one instance.
pub fn wcss_non_increasing(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<(), String> {
    let r = kmeans(vectors, k, seed).map_err(|e| e.to_string())?;
    for w in r.wcss_history.windows(2) {
        // Recomputing the same sum in a different label order can move
        // the last bits, so equality is judged at 1e-12 relative.
        let slack = 1e-12 * w[0].abs().max(1.0);
        ensure(w[1] <= w[0] + slack, || format!("WCSS rose {} -> {} (n={}, k={k})", w[0], w[1], vectors.len()))?;
    }
    Ok(())
}

/// Seeded fuzz: `instances` random problems with d <= 10 and n <= 200.
pub fn check_wcss_fuzz(instances: usize, seed: u64) -> Check {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut iterations = 0;
    for _ in 0..instances {
        let d = rng.random_range(1..=10);
        let n = rng.random_range(2..=200);
        let k = rng.random_range(1..=n.min(8));
        // Mixture of a few blobs with occasional exact duplicates.
        let centres: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 && rng.random_bool(0.05) {
                vectors.push(vectors[rng.random_range(0..i)].clone());
                continue;
            }
            let c = &centres[rng.random_range(0..k)];
            vectors.push(c.iter().map(|x| x + rng.random_range(-1.5..1.5)).collect());
        }
        let s = rng.random();
        wcss_non_increasing(&vectors, k, s)?;
        iterations += kmeans(&vectors, k, s).map_err(|e| e.to_string())?.iterations;
    }
    Ok(format!("{instances} instances, {iterations} Lloyd iterations"))
}
