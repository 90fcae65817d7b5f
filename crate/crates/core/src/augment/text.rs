//! Token-level caption edits: synonym replacement, swap, deletion and
//! duplicate insertion. Each edit is at most two token substitutions away
//! from its input.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Deletion never shortens a caption below this many tokens.
pub const MIN_TOKENS_AFTER_DELETE: usize = 3;

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "in", "on", "at", "to", "for", "with", "by",
    "from", "is", "are", "was", "be", "it", "its", "this", "that", "these", "those", "there",
    "some", "as", "into", "onto", "over", "under", "up", "down", "out", "off", "has", "have",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Single-word synonym lists.
#[derive(Debug, Clone, Default)]
pub struct Thesaurus {
    entries: HashMap<String, Vec<String>>,
}

impl Thesaurus {
    pub fn from_pairs<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, Vec<V>)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut entries = HashMap::new();
        for (k, vs) in pairs {
            let k: String = k.into();
            let vs: Vec<String> = vs
                .into_iter()
                .map(Into::into)
                .filter(|v: &String| *v != k && !v.is_empty() && !v.contains(char::is_whitespace))
                .collect();
            if !vs.is_empty() {
                entries.insert(k, vs);
            }
        }
        Self { entries }
    }

    /// Parses `word<TAB>syn1,syn2,...` lines; `#` starts a comment line.
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, syns) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: source.to_path_buf(),
                line: i + 1,
                column: 1,
                message: "expected word<TAB>synonyms".into(),
            })?;
            let syns: Vec<String> = syns
                .split(',')
                .map(|s| s.trim().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect();
            pairs.push((word.trim().to_lowercase(), syns));
        }
        Ok(Self::from_pairs(pairs))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn synonyms(&self, word: &str) -> &[String] {
        self.entries.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextEdit {
    Synonym,
    Swap,
    Delete,
    Insert,
}

pub fn swap_tokens(tokens: &[String], i: usize, j: usize) -> Vec<String> {
    let mut out = tokens.to_vec();
    out.swap(i, j);
    out
}

/// Removes token `i` unless that would leave fewer than
/// [`MIN_TOKENS_AFTER_DELETE`] tokens.
pub fn delete_token(tokens: &[String], i: usize) -> Vec<String> {
    let mut out = tokens.to_vec();
    if out.len() > MIN_TOKENS_AFTER_DELETE {
        out.remove(i);
    }
    out
}

/// Inserts a copy of `tokens[src]` before position `pos`.
pub fn insert_duplicate(tokens: &[String], src: usize, pos: usize) -> Vec<String> {
    let mut out = tokens.to_vec();
    out.insert(pos, tokens[src].clone());
    out
}

pub fn replace_token(tokens: &[String], i: usize, with: &str) -> Vec<String> {
    let mut out = tokens.to_vec();
    out[i] = with.to_string();
    out
}

/// Applies one randomly chosen edit. Synonym replacement is only offered
/// when a thesaurus is present.
pub fn augment_text(tokens: &[String], thesaurus: Option<&Thesaurus>, rng: &mut Rng) -> Vec<String> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let mut edits = vec![TextEdit::Swap, TextEdit::Delete, TextEdit::Insert];
    if thesaurus.is_some() {
        edits.push(TextEdit::Synonym);
    }
    let n = tokens.len();
    match *edits.choose(rng).expect("non-empty") {
        TextEdit::Swap if n >= 2 => {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            swap_tokens(tokens, i, j)
        }
        TextEdit::Delete if n > MIN_TOKENS_AFTER_DELETE => delete_token(tokens, rng.random_range(0..n)),
        TextEdit::Insert => {
            let src = rng.random_range(0..n);
            insert_duplicate(tokens, src, rng.random_range(0..=n))
        }
        TextEdit::Synonym => {
            let th = thesaurus.expect("offered only with a thesaurus");
            let eligible: Vec<usize> = (0..n)
                .filter(|&i| !is_stopword(&tokens[i]) && !th.synonyms(&tokens[i]).is_empty())
                .collect();
            match eligible.choose(rng) {
                Some(&i) => {
                    let syn = th.synonyms(&tokens[i]).choose(rng).expect("non-empty");
                    replace_token(tokens, i, syn)
                }
                None => tokens.to_vec(),
            }
        }
        _ => tokens.to_vec(),
    }
}

/// Token-level Levenshtein distance.
pub fn edit_distance(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}
