//! Caption paraphrase providers.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::text::{augment_text, Thesaurus};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub trait ParaphraseProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Returns up to `n` distinct paraphrases, none equal to the input.
    fn generate(&self, caption: &[String], n: usize, rng: &mut Rng) -> Result<Vec<Vec<String>>>;
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("paraphrase count must be at least 1".into()));
    }
    Ok(())
}

/// Offline provider built from random token edits.
#[derive(Debug, Clone, Default)]
pub struct EdaParaphraser {
    thesaurus: Option<Arc<Thesaurus>>,
}

impl EdaParaphraser {
    /// Attempts per requested paraphrase before giving up.
    pub const ATTEMPTS_PER_OUTPUT: usize = 20;

    pub fn new(thesaurus: Option<Arc<Thesaurus>>) -> Self {
        Self { thesaurus }
    }
}

impl ParaphraseProvider for EdaParaphraser {
    fn name(&self) -> &str {
        "eda"
    }

    fn generate(&self, caption: &[String], n: usize, rng: &mut Rng) -> Result<Vec<Vec<String>>> {
        check_n(n)?;
        let mut out: Vec<Vec<String>> = Vec::with_capacity(n);
        for _ in 0..n * Self::ATTEMPTS_PER_OUTPUT {
            if out.len() == n {
                break;
            }
            let cand = augment_text(caption, self.thesaurus.as_deref(), rng);
            if cand != caption && !out.contains(&cand) {
                out.push(cand);
            }
        }
        Ok(out)
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    text: &'a str,
    n: usize,
}

#[derive(Deserialize)]
struct RemoteResponse {
    paraphrases: Vec<String>,
}

/// Posts `{"text", "n"}` to an HTTP endpoint answering
/// `{"paraphrases": [...]}`. Any failure falls back to the offline provider.
pub struct RemoteParaphraser {
    url: String,
    agent: ureq::Agent,
    fallback: EdaParaphraser,
}

impl RemoteParaphraser {
    pub fn new(url: impl Into<String>, timeout: Duration, fallback: EdaParaphraser) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: url.into(),
            agent,
            fallback,
        }
    }

    fn fetch(&self, caption: &[String], n: usize) -> std::result::Result<Vec<Vec<String>>, ureq::Error> {
        let text = caption.join(" ");
        let resp: RemoteResponse = self
            .agent
            .post(&self.url)
            .send_json(RemoteRequest { text: &text, n })?
            .body_mut()
            .read_json()?;
        let mut out: Vec<Vec<String>> = Vec::new();
        for p in resp.paraphrases {
            let toks = crate::text::word_tokens(&p);
            if !toks.is_empty() && toks != caption && !out.contains(&toks) {
                out.push(toks);
            }
        }
        out.truncate(n);
        Ok(out)
    }
}

impl ParaphraseProvider for RemoteParaphraser {
    fn name(&self) -> &str {
        "remote"
    }

    fn generate(&self, caption: &[String], n: usize, rng: &mut Rng) -> Result<Vec<Vec<String>>> {
        check_n(n)?;
        match self.fetch(caption, n) {
            Ok(out) => Ok(out),
            Err(e) => {
                tracing::warn!(url = %self.url, error = %e, "paraphrase endpoint failed, using offline edits");
                self.fallback.generate(caption, n, rng)
            }
        }
    }
}

/// Splits a request round-robin across providers and interleaves results.
#[derive(Clone)]
pub struct ParaphrasePool {
    providers: Vec<Arc<dyn ParaphraseProvider>>,
}

impl ParaphrasePool {
    pub fn new(providers: Vec<Arc<dyn ParaphraseProvider>>) -> Result<Self> {
        if providers.is_empty() {
            return Err(Error::Config("paraphrase pool needs at least one provider".into()));
        }
        Ok(Self { providers })
    }

    pub fn offline(thesaurus: Option<Arc<Thesaurus>>) -> Self {
        Self {
            providers: vec![Arc::new(EdaParaphraser::new(thesaurus))],
        }
    }

    pub fn providers(&self) -> impl Iterator<Item = &str> {
        self.providers.iter().map(|p| p.name())
    }

    pub fn generate(&self, caption: &[String], n: usize, rng: &mut Rng) -> Result<Vec<Vec<String>>> {
        check_n(n)?;
        let k = self.providers.len();
        let mut per_provider = Vec::with_capacity(k);
        for (i, p) in self.providers.iter().enumerate() {
            let quota = (n + k - 1 - i) / k;
            per_provider.push(if quota == 0 {
                Vec::new()
            } else {
                p.generate(caption, quota, rng)?
            });
        }
        let mut out: Vec<Vec<String>> = Vec::with_capacity(n);
        let longest = per_provider.iter().map(Vec::len).max().unwrap_or(0);
        for round in 0..longest {
            for list in &per_provider {
                if let Some(c) = list.get(round) {
                    if !out.contains(c) {
                        out.push(c.clone());
                    }
                }
            }
        }
        out.truncate(n);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    struct Fixed(&'static str, Vec<&'static str>);

    impl ParaphraseProvider for Fixed {
        fn name(&self) -> &str {
            self.0
        }
        fn generate(&self, _: &[String], n: usize, _: &mut Rng) -> Result<Vec<Vec<String>>> {
            Ok(self.1.iter().take(n).map(|s| toks(s)).collect())
        }
    }

    #[test]
    fn zero_count_is_config_error() {
        let mut rng = crate::rng::seeded(0);
        let err = EdaParaphraser::default().generate(&toks("a b c d"), 0, &mut rng);
        assert!(matches!(err, Err(Error::Config(_))));
        let pool = ParaphrasePool::offline(None);
        assert!(matches!(pool.generate(&toks("a b"), 0, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn eda_outputs_are_distinct_and_differ_from_input() {
        let cap = toks("a blue mug on a kitchen counter");
        let out = EdaParaphraser::default()
            .generate(&cap, 9, &mut crate::rng::seeded(5))
            .unwrap();
        assert_eq!(out.len(), 9);
        for (i, o) in out.iter().enumerate() {
            assert_ne!(o, &cap);
            assert!(!out[..i].contains(o));
        }
    }

    #[test]
    fn pool_round_robins() {
        let pool = ParaphrasePool::new(vec![
            Arc::new(Fixed("x", vec!["x1", "x2", "x3"])),
            Arc::new(Fixed("y", vec!["y1", "y2", "y3"])),
        ])
        .unwrap();
        let out = pool.generate(&toks("orig"), 3, &mut crate::rng::seeded(0)).unwrap();
        assert_eq!(out, vec![toks("x1"), toks("y1"), toks("x2")]);
    }

    #[test]
    fn unreachable_remote_falls_back() {
        let remote = RemoteParaphraser::new(
            "http://127.0.0.1:9/paraphrase",
            Duration::from_millis(200),
            EdaParaphraser::default(),
        );
        let cap = toks("a white cup of coffee");
        let out = remote.generate(&cap, 3, &mut crate::rng::seeded(1)).unwrap();
        assert_eq!(out.len(), 3);
    }
}
