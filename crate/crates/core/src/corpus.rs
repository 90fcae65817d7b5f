//! Caption corpora: COCO-style ingestion, quality filtering, split remapping
//! and statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::word_tokens;

/// The VizWiz boilerplate caption for images too degraded to describe.
pub const DEFAULT_QUALITY_MARKER: &str = "Quality issues are too severe to recognize visual content";

/// Number of captions every retained image carries after filtering.
pub const CAPTIONS_PER_IMAGE: usize = 5;

/// Images with at least this many marker captions are excluded.
pub const EXCLUSION_THRESHOLD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!("unknown split tag {other:?}"))),
        }
    }
}

/// One caption and its lowercased word tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionRecord {
    pub text: String,
    pub tokens: Vec<String>,
}

impl CaptionRecord {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = word_tokens(&text);
        Self { text, tokens }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub image_id: u64,
    pub file_name: String,
    pub captions: Vec<CaptionRecord>,
    pub split: Split,
}

/// An immutable collection of images with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    images: Vec<ImageRecord>,
    index: HashMap<u64, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.images == other.images
    }
}

impl Eq for Corpus {}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationFile {
    images: Vec<ImageEntry>,
    #[serde(default)]
    annotations: Vec<AnnotationEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageEntry {
    id: u64,
    file_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationEntry {
    image_id: u64,
    caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and caption-less images.
    pub fn new(images: Vec<ImageRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(images.len());
        for (pos, img) in images.iter().enumerate() {
            if img.captions.is_empty() {
                return Err(Error::Integrity(format!(
                    "image {} has no captions",
                    img.image_id
                )));
            }
            if index.insert(img.image_id, pos).is_some() {
                return Err(Error::Integrity(format!(
                    "duplicate image id {}",
                    img.image_id
                )));
            }
        }
        Ok(Self { images, index })
    }

    /// Concatenates corpora, e.g. to scan all splits jointly.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a Corpus>) -> Result<Self> {
        Corpus::new(
            parts
                .into_iter()
                .flat_map(|c| c.images.iter().cloned())
                .collect(),
        )
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn get(&self, image_id: u64) -> Option<&ImageRecord> {
        self.index.get(&image_id).map(|&i| &self.images[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.images.iter().map(|i| i.image_id)
    }

    pub fn split(&self, split: Split) -> Corpus {
        let images = self
            .images
            .iter()
            .filter(|i| i.split == split)
            .cloned()
            .collect();
        Corpus::new(images).expect("subset of a valid corpus")
    }

    pub fn with_split(&self, split: Split) -> Corpus {
        let images = self
            .images
            .iter()
            .cloned()
            .map(|mut i| {
                i.split = split;
                i
            })
            .collect();
        Corpus::new(images).expect("relabelled valid corpus")
    }

    /// Parses COCO-caption JSON. Images listing a `split` field keep it;
    /// all others take `split`.
    pub fn from_json_str(json: &str, split: Split, source: &Path) -> Result<Self> {
        let file: AnnotationFile =
            serde_json::from_str(json).map_err(|e| Error::json(source, &e))?;
        let mut captions: HashMap<u64, Vec<CaptionRecord>> = HashMap::new();
        let known: BTreeSet<u64> = file.images.iter().map(|i| i.id).collect();
        for ann in file.annotations {
            if !known.contains(&ann.image_id) {
                return Err(Error::Integrity(format!(
                    "annotation references unknown image id {}",
                    ann.image_id
                )));
            }
            captions
                .entry(ann.image_id)
                .or_default()
                .push(CaptionRecord::new(ann.caption));
        }
        let images = file
            .images
            .into_iter()
            .map(|entry| ImageRecord {
                image_id: entry.id,
                captions: captions.remove(&entry.id).unwrap_or_default(),
                file_name: entry.file_name,
                split: entry.split.unwrap_or(split),
            })
            .collect();
        Corpus::new(images)
    }

    pub fn to_json_string(&self) -> String {
        let mut next_id = 0u64;
        let file = AnnotationFile {
            images: self
                .images
                .iter()
                .map(|i| ImageEntry {
                    id: i.image_id,
                    file_name: i.file_name.clone(),
                    split: Some(i.split),
                })
                .collect(),
            annotations: self
                .images
                .iter()
                .flat_map(|i| i.captions.iter().map(move |c| (i.image_id, c)))
                .map(|(image_id, c)| {
                    next_id += 1;
                    AnnotationEntry {
                        image_id,
                        caption: c.text.clone(),
                        id: Some(next_id),
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("corpus serializes")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a COCO-caption annotation file.
pub fn load_corpus(annotations_path: &Path, split: Split) -> Result<Corpus> {
    let json =
        std::fs::read_to_string(annotations_path).map_err(|e| Error::io(annotations_path, e))?;
    Corpus::from_json_str(&json, split, annotations_path)
}

/// Turns the original validation corpus into the test split and holds out a
/// seeded fraction of the training images as the new validation split.
pub fn remap_splits(
    train: &Corpus,
    val: &Corpus,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus, Corpus)> {
    if train.is_empty() {
        return Err(Error::InvalidInput("training corpus is empty".into()));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::Config(format!(
            "holdout fraction must lie in (0, 1), got {holdout_fraction}"
        )));
    }
    if let Some(id) = val.ids().find(|id| train.get(*id).is_some()) {
        return Err(Error::Integrity(format!(
            "image id {id} appears in both train and validation corpora"
        )));
    }

    let n_holdout = (holdout_fraction * train.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut crate::rng::seeded(seed));
    let held: BTreeSet<usize> = order[..n_holdout].iter().copied().collect();

    let (mut new_train, mut new_val) = (Vec::new(), Vec::new());
    for (pos, img) in train.images().iter().enumerate() {
        let mut img = img.clone();
        if held.contains(&pos) {
            img.split = Split::Val;
            new_val.push(img);
        } else {
            img.split = Split::Train;
            new_train.push(img);
        }
    }
    Ok((
        Corpus::new(new_train)?,
        Corpus::new(new_val)?,
        val.with_split(Split::Test),
    ))
}

fn is_marker(caption: &CaptionRecord, marker: &str) -> bool {
    caption.text.trim() == marker.trim()
}

/// Applies the quality-marker rules to train and validation images; test
/// images pass through untouched.
///
/// Images with three or more marker captions are excluded. Images with one or
/// two lose those captions and are topped back up to five by cycling through
/// the surviving captions in their original order.
pub fn apply_quality_filter(corpus: &Corpus, marker: &str) -> (Corpus, Vec<u64>) {
    let mut kept = Vec::with_capacity(corpus.len());
    let mut excluded = Vec::new();
    for img in corpus.images() {
        if img.split == Split::Test {
            kept.push(img.clone());
            continue;
        }
        let markers = img.captions.iter().filter(|c| is_marker(c, marker)).count();
        if markers == 0 {
            kept.push(img.clone());
            continue;
        }
        let survivors: Vec<CaptionRecord> = img
            .captions
            .iter()
            .filter(|c| !is_marker(c, marker))
            .cloned()
            .collect();
        if markers >= EXCLUSION_THRESHOLD || survivors.is_empty() {
            excluded.push(img.image_id);
            continue;
        }
        let target = CAPTIONS_PER_IMAGE.max(survivors.len());
        let captions = survivors.iter().cycle().take(target).cloned().collect();
        kept.push(ImageRecord {
            captions,
            ..img.clone()
        });
    }
    let filtered = Corpus::new(kept).expect("filtering preserves id uniqueness");
    (filtered, excluded)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_split: BTreeMap<Split, usize>,
    pub total: usize,
    /// Distinct lowercased word tokens across all captions.
    pub word_types: usize,
}

pub fn compute_stats(corpus: &Corpus) -> CorpusStats {
    let mut per_split = BTreeMap::new();
    let mut types = BTreeSet::new();
    for img in corpus.images() {
        *per_split.entry(img.split).or_insert(0) += 1;
        for c in &img.captions {
            types.extend(c.tokens.iter().map(String::as_str));
        }
    }
    CorpusStats {
        per_split,
        total: corpus.len(),
        word_types: types.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(id: u64, captions: &[&str], split: Split) -> ImageRecord {
        ImageRecord {
            image_id: id,
            file_name: format!("img_{id}.jpg"),
            captions: captions.iter().map(|c| CaptionRecord::new(*c)).collect(),
            split,
        }
    }

    fn texts(img: &ImageRecord) -> Vec<&str> {
        img.captions.iter().map(|c| c.text.as_str()).collect()
    }

    const M: &str = DEFAULT_QUALITY_MARKER;

    #[test]
    fn loads_two_images_with_five_captions() {
        let json = r#"{
          "images": [{"id": 1, "file_name": "a.jpg"}, {"id": 2, "file_name": "b.jpg"}],
          "annotations": [
            {"image_id": 1, "caption": "a1"}, {"image_id": 1, "caption": "a2"},
            {"image_id": 1, "caption": "a3"}, {"image_id": 1, "caption": "a4"},
            {"image_id": 1, "caption": "a5"}, {"image_id": 2, "caption": "b1"},
            {"image_id": 2, "caption": "b2"}, {"image_id": 2, "caption": "b3"},
            {"image_id": 2, "caption": "b4"}, {"image_id": 2, "caption": "b5"}
          ]}"#;
        let c = Corpus::from_json_str(json, Split::Train, Path::new("x.json")).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.images().iter().all(|i| i.captions.len() == 5));
        assert_eq!(c.get(2).unwrap().captions[0].tokens, vec!["b1"]);
    }

    #[test]
    fn dangling_annotation_is_an_integrity_error() {
        let json = r#"{"images": [{"id": 1, "file_name": "a.jpg"}],
            "annotations": [{"image_id": 1, "caption": "x"}, {"image_id": 99, "caption": "y"}]}"#;
        let err = Corpus::from_json_str(json, Split::Train, Path::new("x.json")).unwrap_err();
        match err {
            Error::Integrity(msg) => assert!(msg.contains("99"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        let json = "{\n  \"images\": [\n    {\"id\": 1,, }\n  ]\n}";
        match Corpus::from_json_str(json, Split::Train, Path::new("bad.json")).unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn caption_less_image_is_rejected() {
        let json = r#"{"images": [{"id": 1, "file_name": "a.jpg"}], "annotations": []}"#;
        assert!(matches!(
            Corpus::from_json_str(json, Split::Train, Path::new("x.json")),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn json_round_trip_preserves_corpus() {
        let c = Corpus::new(vec![
            image(3, &["a red car", "b"], Split::Train),
            image(1, &["x"], Split::Test),
        ])
        .unwrap();
        let again =
            Corpus::from_json_str(&c.to_json_string(), Split::Val, Path::new("m")).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn remap_moves_val_to_test_and_holds_out_train() {
        let train = Corpus::new(
            (0..100)
                .map(|i| image(i, &["c"], Split::Train))
                .collect(),
        )
        .unwrap();
        let val = Corpus::new(
            (1000..1040)
                .map(|i| image(i, &["c"], Split::Train))
                .collect(),
        )
        .unwrap();
        let (t, v, te) = remap_splits(&train, &val, 0.2, 11).unwrap();
        assert_eq!((t.len(), v.len(), te.len()), (80, 20, 40));
        assert_eq!(te.ids().collect::<Vec<_>>(), (1000..1040).collect::<Vec<_>>());
        assert!(te.images().iter().all(|i| i.split == Split::Test));
        assert!(v.images().iter().all(|i| i.split == Split::Val));
        let mut all: Vec<u64> = t.ids().chain(v.ids()).collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());

        let (t2, v2, _) = remap_splits(&train, &val, 0.2, 11).unwrap();
        assert_eq!((&t, &v), (&t2, &v2));
        let (_, v3, _) = remap_splits(&train, &val, 0.2, 12).unwrap();
        assert_ne!(v3.ids().collect::<Vec<_>>(), v2.ids().collect::<Vec<_>>());
    }

    #[test]
    fn remap_rejects_empty_train_and_bad_fraction() {
        let empty = Corpus::default();
        let one = Corpus::new(vec![image(1, &["c"], Split::Train)]).unwrap();
        assert!(remap_splits(&empty, &one, 0.2, 0).is_err());
        assert!(remap_splits(&one, &empty, 0.0, 0).is_err());
        assert!(remap_splits(&one, &empty, 1.0, 0).is_err());
    }

    #[test]
    fn quality_filter_rules() {
        let c = Corpus::new(vec![
            image(1, &[M, M, M, "a", "b"], Split::Train),
            image(2, &[M, "a", "b", "c", "d"], Split::Train),
            image(3, &["a", "b", "c", "d", "e"], Split::Train),
            image(4, &["a", M, "b", M, "c"], Split::Val),
            image(5, &[M, M, M, M, M], Split::Train),
            image(6, &[M, M, M, M, M], Split::Test),
        ])
        .unwrap();
        let (f, excluded) = apply_quality_filter(&c, M);
        assert_eq!(excluded, vec![1, 5]);
        assert_eq!(texts(f.get(2).unwrap()), vec!["a", "b", "c", "d", "a"]);
        assert_eq!(texts(f.get(3).unwrap()), vec!["a", "b", "c", "d", "e"]);
        assert_eq!(texts(f.get(4).unwrap()), vec!["a", "b", "c", "a", "b"]);
        assert_eq!(f.get(6).unwrap().captions.len(), 5);

        let (again, none) = apply_quality_filter(&f, M);
        assert_eq!(again, f);
        assert!(none.is_empty());
    }

    #[test]
    fn marker_matching_trims_whitespace() {
        let padded = format!("  {M}\n");
        let c = Corpus::new(vec![image(
            1,
            &[&padded, "a", "b", "c", "d"],
            Split::Train,
        )])
        .unwrap();
        let (f, _) = apply_quality_filter(&c, M);
        assert_eq!(texts(f.get(1).unwrap()), vec!["a", "b", "c", "d", "a"]);
    }

    #[test]
    fn stats_count_word_types() {
        let c = Corpus::new(vec![
            image(1, &["a cat"], Split::Train),
            image(2, &["A dog"], Split::Val),
        ])
        .unwrap();
        let s = compute_stats(&c);
        assert_eq!(s.word_types, 3);
        assert_eq!(s.total, 2);
        assert_eq!(s.per_split[&Split::Train], 1);
        assert_eq!(s.per_split.values().sum::<usize>(), s.total);
    }
}
