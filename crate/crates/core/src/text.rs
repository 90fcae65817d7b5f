//! Word-level tokenization shared by corpus statistics, keyword extraction
//! and metric scoring.

/// Lowercases `text` and splits it on runs of non-alphanumeric characters.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Scoring tokenization: lowercase, punctuation stripped, whitespace split.
///
/// Punctuation is removed rather than treated as a separator, so "person's"
/// scores as the single token "persons".
pub fn metric_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| !c.is_ascii_punctuation() && !is_unicode_punct(*c))
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

pub(crate) fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{00A1}' | '\u{00BF}' | '\u{00AB}' | '\u{00BB}'
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_tokens_split_on_non_alphanumeric_runs() {
        assert_eq!(
            word_tokens("A person's KNEE -- on a bed!"),
            vec!["a", "person", "s", "knee", "on", "a", "bed"]
        );
        assert!(word_tokens("").is_empty());
        assert!(word_tokens(" ...!? ").is_empty());
    }

    #[test]
    fn metric_tokens_strip_punctuation() {
        assert_eq!(
            metric_tokens("A person's knee, on a bed."),
            vec!["a", "persons", "knee", "on", "a", "bed"]
        );
        assert_eq!(metric_tokens("— ..."), Vec::<String>::new());
    }
}
