//! Lexicon-driven noun-phrase chunking.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CaptionRecord, Corpus};
use crate::error::{Error, Result};

const SHIPPED_LEXICON: &str = include_str!("../../data/lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PosTag {
    Det,
    Adj,
    Noun,
    Verb,
    Other,
}

impl FromStr for PosTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DET" => Ok(PosTag::Det),
            "ADJ" => Ok(PosTag::Adj),
            "NOUN" => Ok(PosTag::Noun),
            "VERB" => Ok(PosTag::Verb),
            "OTHER" => Ok(PosTag::Other),
            other => Err(Error::InvalidInput(format!("unknown POS tag {other:?}"))),
        }
    }
}

/// Word to coarse tag table. Words not listed are tagged as nouns.
#[derive(Debug, Clone, Default)]
pub struct PosLexicon {
    tags: HashMap<String, PosTag>,
}

impl PosLexicon {
    /// Parses `word<TAB>TAG` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut tags = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: source.to_path_buf(),
                line: lineno + 1,
                column: 1,
                message,
            };
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected word<TAB>TAG".into()))?;
            let tag = tag.parse().map_err(|e: Error| parse_err(e.to_string()))?;
            tags.insert(word.trim().to_lowercase(), tag);
        }
        Ok(Self { tags })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// The lexicon bundled with the crate.
    pub fn shipped() -> Self {
        Self::parse(SHIPPED_LEXICON, Path::new("lexicon.tsv")).expect("bundled lexicon parses")
    }

    pub fn tag(&self, word: &str) -> PosTag {
        self.tags.get(word).copied().unwrap_or(PosTag::Noun)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NounPhrase {
    pub tokens: Vec<String>,
    pub surface: String,
}

impl NounPhrase {
    fn new(tokens: &[String]) -> Self {
        Self {
            tokens: tokens.to_vec(),
            surface: tokens.join(" "),
        }
    }
}

/// Emits every maximal `(ADJ|NOUN)* NOUN` run of the token sequence.
pub fn chunk_tokens(tokens: &[String], lexicon: &PosLexicon) -> Vec<NounPhrase> {
    let tags: Vec<PosTag> = tokens.iter().map(|t| lexicon.tag(t)).collect();
    let mut phrases = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if !matches!(tags[i], PosTag::Adj | PosTag::Noun) {
            i += 1;
            continue;
        }
        let start = i;
        while i < tokens.len() && matches!(tags[i], PosTag::Adj | PosTag::Noun) {
            i += 1;
        }
        // Trailing adjectives cannot end a phrase.
        if let Some(last_noun) = (start..i).rev().find(|&j| tags[j] == PosTag::Noun) {
            phrases.push(NounPhrase::new(&tokens[start..=last_noun]));
        }
    }
    phrases
}

pub fn extract_noun_phrases(caption: &CaptionRecord, lexicon: &PosLexicon) -> Vec<NounPhrase> {
    chunk_tokens(&caption.tokens, lexicon)
}

/// Counts noun-phrase occurrences over every caption of the corpus.
pub fn np_frequency_table(corpus: &Corpus, lexicon: &PosLexicon) -> BTreeMap<String, usize> {
    corpus
        .images()
        .par_iter()
        .map(|img| {
            let mut local: BTreeMap<String, usize> = BTreeMap::new();
            for cap in &img.captions {
                for np in extract_noun_phrases(cap, lexicon) {
                    *local.entry(np.surface).or_insert(0) += 1;
                }
            }
            local
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordCandidate {
    pub surface: String,
    pub frequency: usize,
}

/// Keeps surfaces with at least `min_freq` occurrences, sorted by
/// descending frequency then surface.
pub fn select_keywords(table: &BTreeMap<String, usize>, min_freq: usize) -> Vec<KeywordCandidate> {
    let mut out: Vec<KeywordCandidate> = table
        .iter()
        .filter(|(_, &f)| f >= min_freq)
        .map(|(s, &f)| KeywordCandidate {
            surface: s.clone(),
            frequency: f,
        })
        .collect();
    out.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.surface.cmp(&b.surface)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str, lex: &PosLexicon) -> Vec<String> {
        extract_noun_phrases(&CaptionRecord::new(text), lex)
            .into_iter()
            .map(|np| np.surface)
            .collect()
    }

    #[test]
    fn shipped_lexicon_chunks_reference_caption() {
        let lex = PosLexicon::shipped();
        assert!(lex.len() > 500);
        assert_eq!(
            surfaces("a gift card on a wooden countertop", &lex),
            vec!["gift card", "wooden countertop"]
        );
    }

    #[test]
    fn empty_caption_has_no_phrases() {
        assert!(surfaces("", &PosLexicon::shipped()).is_empty());
    }

    #[test]
    fn trailing_adjectives_and_lone_adjectives_are_dropped() {
        let lex = PosLexicon::parse("big\tADJ\nred\tADJ\nthe\tDET\nis\tVERB\n", Path::new("t")).unwrap();
        assert_eq!(surfaces("the big red car is red", &lex), vec!["big red car"]);
        assert_eq!(surfaces("car red truck", &lex), vec!["car red truck"]);
        assert!(surfaces("big red", &lex).is_empty());
        assert_eq!(surfaces("dog", &lex), vec!["dog"]);
    }

    #[test]
    fn lexicon_parse_errors_carry_line_numbers() {
        match PosLexicon::parse("# c\nok\tNOUN\nbad line\n", Path::new("lex")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(PosLexicon::parse("x\tFOO\n", Path::new("lex")).is_err());
    }

    #[test]
    fn keyword_threshold_is_inclusive() {
        let table: BTreeMap<String, usize> = [("cat", 20), ("hot dog", 15), ("sky", 3), ("bowl", 14)]
            .into_iter()
            .map(|(s, f)| (s.to_string(), f))
            .collect();
        let kept: Vec<String> = select_keywords(&table, 15).into_iter().map(|k| k.surface).collect();
        assert_eq!(kept, vec!["cat", "hot dog"]);
    }

    #[test]
    fn keyword_order_breaks_ties_by_surface() {
        let table: BTreeMap<String, usize> = [("b", 5), ("a", 5), ("c", 9)]
            .into_iter()
            .map(|(s, f)| (s.to_string(), f))
            .collect();
        let kept: Vec<String> = select_keywords(&table, 1).into_iter().map(|k| k.surface).collect();
        assert_eq!(kept, vec!["c", "a", "b"]);
    }
}
