//! Procedural corpora and images for demos and tests.
//!
//! Captions follow `a <color> <noun> on the <place>`; each cluster owns a
//! disjoint noun set. Images are rendered from the caption (tint from the
//! color, stripe period from the noun) plus per-image noise, so visually
//! similar images have overlapping captions.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::augment::ImageBuffer;
use crate::corpus::{CaptionRecord, Corpus, ImageRecord, Split};
use crate::error::Result;
use crate::rng::derived;
use crate::taskgen::{ClusterConfig, ClusterEntry, ClusterFile};

pub const COLORS: [(&str, [u8; 3]); 6] = [
    ("red", [200, 40, 40]),
    ("green", [40, 170, 60]),
    ("blue", [40, 70, 200]),
    ("yellow", [220, 210, 50]),
    ("white", [235, 235, 235]),
    ("black", [25, 25, 25]),
];

pub const PLACES: [&str; 5] = ["table", "floor", "counter", "shelf", "bed"];

/// Noun groups, one per synthetic cluster.
pub const NOUN_GROUPS: [[&str; 4]; 5] = [
    ["cup", "mug", "glass", "bowl"],
    ["can", "bottle", "jar", "carton"],
    ["remote", "phone", "laptop", "keyboard"],
    ["shirt", "shoe", "hat", "sock"],
    ["book", "letter", "card", "envelope"],
];

pub const IMAGE_SIZE: u32 = 16;

fn word_hash(word: &str) -> u64 {
    word.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

/// Renders an image for a caption. Identical inputs give identical pixels.
pub fn render(image_id: u64, caption: &[String], size: u32) -> ImageBuffer {
    let tint = caption
        .iter()
        .find_map(|w| COLORS.iter().find(|(c, _)| c == w).map(|(_, rgb)| *rgb))
        .unwrap_or([128, 128, 128]);
    let noun = caption
        .iter()
        .find(|w| NOUN_GROUPS.iter().flatten().any(|n| n == w))
        .map(|w| word_hash(w))
        .unwrap_or(0);
    let period = 2 + (noun % 6) as u32;
    let mut rng = derived(image_id, &[0x1a6e]);
    let noise: Vec<i16> = (0..size * size).map(|_| rng.random_range(-24..=24)).collect();
    ImageBuffer::from_fn(size, size, |x, y| {
        let stripe: i16 = if ((x + y * (noun as u32 % 2)) / period).is_multiple_of(2) { 30 } else { -30 };
        let n = noise[(y * size + x) as usize];
        let ch = |c: u8| (i16::from(c) + stripe + n).clamp(0, 255) as u8;
        [ch(tint[0]), ch(tint[1]), ch(tint[2])]
    })
    .expect("non-empty synthetic image")
}

/// Images-per-split layout for [`corpus`].
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub clusters: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub captions_per_image: usize,
    pub seed: u64,
}

/// Image id of the `index`-th image of `cluster` (1-based) in `split`.
pub fn image_id(cluster: u32, split: Split, index: usize) -> u64 {
    let s = match split {
        Split::Train => 0,
        Split::Val => 1,
        Split::Test => 2,
    };
    u64::from(cluster) * 10_000_000 + s * 1_000_000 + index as u64
}

pub fn caption(cluster: u32, rng: &mut crate::rng::Rng) -> String {
    let nouns = &NOUN_GROUPS[(cluster as usize - 1) % NOUN_GROUPS.len()];
    format!(
        "a {} {} on the {}",
        COLORS[rng.random_range(0..COLORS.len())].0,
        nouns[rng.random_range(0..nouns.len())],
        PLACES[rng.random_range(0..PLACES.len())]
    )
}

/// Builds a corpus whose cluster `c` (1-based) uses noun group `c`.
pub fn corpus(layout: &Layout) -> Result<Corpus> {
    let mut images = Vec::new();
    for c in 1..=layout.clusters as u32 {
        for (split, n) in [(Split::Train, layout.train), (Split::Val, layout.val), (Split::Test, layout.test)] {
            for i in 0..n {
                let id = image_id(c, split, i);
                let mut rng = derived(layout.seed, &[id]);
                let captions = (0..layout.captions_per_image)
                    .map(|_| CaptionRecord::new(caption(c, &mut rng)))
                    .collect();
                images.push(ImageRecord {
                    image_id: id,
                    file_name: format!("synthetic_{id}.png"),
                    captions,
                    split,
                });
            }
        }
    }
    Corpus::new(images)
}

/// Cluster file grouping a [`corpus`] output by its generating cluster.
pub fn cluster_file(corpus: &Corpus) -> ClusterFile {
    let mut clusters: BTreeMap<u32, ClusterEntry> = BTreeMap::new();
    for img in corpus.images() {
        let c = (img.image_id / 10_000_000) as u32;
        let entry = clusters.entry(c).or_insert_with(|| ClusterEntry {
            keywords: NOUN_GROUPS[(c as usize - 1) % NOUN_GROUPS.len()].iter().map(|s| s.to_string()).collect(),
            image_ids: Split::ALL.iter().map(|s| (*s, Vec::new())).collect(),
        });
        entry.image_ids.get_mut(&img.split).expect("all splits present").push(img.image_id);
    }
    ClusterFile {
        config: ClusterConfig::default(),
        clusters,
        unassigned: Split::ALL.iter().map(|s| (*s, Vec::new())).collect(),
    }
}
