//! Fixed-vocabulary WordPiece tokenization.
//!
//! Words are matched greedily against the vocabulary, longest prefix first,
//! with non-initial pieces carrying the `##` continuation prefix. A word that
//! cannot be fully covered becomes a single `[UNK]`. The vocabulary never
//! grows, so incremental training never changes the output space.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const CONTINUATION_PREFIX: &str = "##";
pub const UNK_TOKEN: &str = "[UNK]";
pub const PAD_TOKEN: &str = "[PAD]";

/// Words longer than this many characters map straight to `[UNK]`.
pub const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Clone)]
pub struct SubwordVocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    unk_id: u32,
    pad_id: Option<u32>,
}

impl SubwordVocab {
    /// Builds a vocabulary where each token's id is its position.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut ids = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "empty vocabulary entry at line {}",
                    id + 1
                )));
            }
            if ids.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate vocabulary token {tok:?}"
                )));
            }
        }
        let unk_id = *ids
            .get(UNK_TOKEN)
            .ok_or_else(|| Error::InvalidInput(format!("vocabulary lacks {UNK_TOKEN}")))?;
        let pad_id = ids.get(PAD_TOKEN).copied();
        Ok(Self {
            tokens,
            ids,
            unk_id,
            pad_id,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn pad_id(&self) -> Option<u32> {
        self.pad_id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Tokenizes lowercased, punctuation-split words into subword ids.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        pre_tokenize(text)
            .iter()
            .flat_map(|w| self.word_pieces(w))
            .collect()
    }

    /// Tokenizes to token strings, mainly for inspection.
    pub fn tokenize_to_strings(&self, text: &str) -> Vec<&str> {
        self.tokenize(text)
            .into_iter()
            .map(|id| self.tokens[id as usize].as_str())
            .collect()
    }

    /// Joins subword pieces back into words, dropping continuation markers.
    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        let mut words: Vec<String> = Vec::new();
        for &id in ids {
            let Some(tok) = self.token(id) else { continue };
            match tok.strip_prefix(CONTINUATION_PREFIX) {
                Some(rest) if !words.is_empty() => words.last_mut().unwrap().push_str(rest),
                _ => words.push(tok.to_string()),
            }
        }
        words
    }

    fn word_pieces(&self, word: &str) -> Vec<u32> {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > MAX_WORD_CHARS {
            return vec![self.unk_id];
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        let mut candidate = String::with_capacity(word.len() + 2);
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while end > start {
                candidate.clear();
                if start > 0 {
                    candidate.push_str(CONTINUATION_PREFIX);
                }
                candidate.extend(&chars[start..end]);
                if let Some(&id) = self.ids.get(candidate.as_str()) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => {
                    pieces.push(id);
                    start = end;
                }
                None => return vec![self.unk_id],
            }
        }
        pieces
    }
}

/// Reads a vocabulary file: one token per line, line number is the id.
pub fn load_vocab(path: &Path) -> Result<SubwordVocab> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SubwordVocab::from_tokens(text.lines().map(|l| l.trim_end_matches('\r')))
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || crate::text::is_unicode_punct(c)
}

/// Lowercases, splits on whitespace and isolates punctuation characters.
pub fn pre_tokenize(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    for raw in text.split_whitespace() {
        let mut current = String::new();
        for c in raw.chars().flat_map(char::to_lowercase) {
            if is_punct(c) {
                if !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
                words.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}
