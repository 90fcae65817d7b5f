//! Corpus-level caption metrics: BLEU-4, ROUGE-L and CIDEr-D.
//!
//! All metrics take pre-tokenized captions; [`crate::text::metric_tokens`]
//! is the tokenizer used everywhere in the harness (lowercase, punctuation
//! stripped, whitespace split).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROUGE_BETA: f64 = 1.2;
pub const CIDER_SIGMA: f64 = 6.0;
pub const MAX_N: usize = 4;

/// Metrics reported as not computed.
pub const ABSENT_METRICS: [&str; 2] = ["METEOR", "SPICE"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub image_id: u64,
    pub hypothesis: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl EvalPair {
    pub fn new(image_id: u64, hypothesis: Vec<String>, references: Vec<Vec<String>>) -> Result<Self> {
        if references.is_empty() {
            return Err(Error::InvalidInput(format!("image {image_id}: no references")));
        }
        if references.iter().any(Vec::is_empty) {
            return Err(Error::InvalidInput(format!("image {image_id}: empty reference")));
        }
        Ok(Self {
            image_id,
            hypothesis,
            references,
        })
    }

    /// Tokenizes raw caption strings with the metric tokenizer.
    pub fn from_text(image_id: u64, hypothesis: &str, references: &[&str]) -> Result<Self> {
        Self::new(
            image_id,
            crate::text::metric_tokens(hypothesis),
            references.iter().map(|r| crate::text::metric_tokens(r)).collect(),
        )
    }
}

fn nonempty(pairs: &[EvalPair]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no evaluation pairs".into()));
    }
    Ok(())
}

type Counts<'a> = HashMap<&'a [String], usize>;

fn ngram_counts(tokens: &[String], n: usize) -> Counts<'_> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *m.entry(g).or_insert(0) += 1;
        }
    }
    m
}

#[derive(Default, Clone, Copy)]
struct BleuStats {
    matched: [u64; MAX_N],
    total: [u64; MAX_N],
    hyp_len: u64,
    ref_len: u64,
}

impl BleuStats {
    fn merge(mut self, o: Self) -> Self {
        for n in 0..MAX_N {
            self.matched[n] += o.matched[n];
            self.total[n] += o.total[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
        self
    }
}

fn bleu_stats(p: &EvalPair) -> BleuStats {
    let c = p.hypothesis.len();
    let closest = p
        .references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .expect("at least one reference");
    let mut s = BleuStats {
        hyp_len: c as u64,
        ref_len: closest as u64,
        ..BleuStats::default()
    };
    for n in 1..=MAX_N {
        let hyp = ngram_counts(&p.hypothesis, n);
        let refs: Vec<Counts> = p.references.iter().map(|r| ngram_counts(r, n)).collect();
        for (g, &h) in &hyp {
            let max_ref = refs.iter().filter_map(|r| r.get(g)).copied().max().unwrap_or(0);
            s.matched[n - 1] += h.min(max_ref) as u64;
        }
        s.total[n - 1] += c.saturating_sub(n - 1) as u64;
    }
    s
}

/// Corpus BLEU-4 with per-reference clipping, closest-reference brevity
/// penalty and no smoothing.
pub fn bleu4(pairs: &[EvalPair]) -> Result<f64> {
    nonempty(pairs)?;
    let s = pairs
        .par_iter()
        .map(bleu_stats)
        .collect::<Vec<_>>()
        .into_iter()
        .fold(BleuStats::default(), BleuStats::merge);
    if s.matched.contains(&0) {
        return Ok(0.0);
    }
    let log_p: f64 = (0..MAX_N)
        .map(|n| (s.matched[n] as f64 / s.total[n] as f64).ln())
        .sum::<f64>()
        / MAX_N as f64;
    let bp = if s.hyp_len < s.ref_len {
        (1.0 - s.ref_len as f64 / s.hyp_len as f64).exp()
    } else {
        1.0
    };
    Ok(bp * log_p.exp())
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn rouge_pair(p: &EvalPair) -> f64 {
    let b2 = ROUGE_BETA * ROUGE_BETA;
    p.references
        .iter()
        .map(|r| {
            let l = lcs_len(&p.hypothesis, r) as f64;
            if l == 0.0 {
                return 0.0;
            }
            let prec = l / p.hypothesis.len() as f64;
            let rec = l / r.len() as f64;
            (1.0 + b2) * prec * rec / (rec + b2 * prec)
        })
        .fold(0.0, f64::max)
}

/// Mean over pairs of the best F_lcs (beta 1.2) against any reference.
pub fn rouge_l(pairs: &[EvalPair]) -> Result<f64> {
    nonempty(pairs)?;
    let scores: Vec<f64> = pairs.par_iter().map(rouge_pair).collect();
    Ok(scores.iter().sum::<f64>() / pairs.len() as f64)
}

struct TfIdf {
    weights: HashMap<Vec<String>, f64>,
    norm: f64,
    len: usize,
}

/// CIDEr-D over the pair set; document frequencies come from the
/// references, counting each n-gram once per pair.
pub fn cider_d(pairs: &[EvalPair]) -> Result<f64> {
    nonempty(pairs)?;
    let mut df: [HashMap<&[String], usize>; MAX_N] = Default::default();
    for p in pairs {
        for n in 1..=MAX_N {
            let mut seen: std::collections::HashSet<&[String]> = Default::default();
            for r in &p.references {
                if r.len() >= n {
                    seen.extend(r.windows(n));
                }
            }
            for g in seen {
                *df[n - 1].entry(g).or_insert(0) += 1;
            }
        }
    }
    let log_n = (pairs.len() as f64).ln();
    let vectorize = |tokens: &[String]| -> Vec<TfIdf> {
        (1..=MAX_N)
            .map(|n| {
                let weights: HashMap<Vec<String>, f64> = ngram_counts(tokens, n)
                    .into_iter()
                    .map(|(g, tf)| {
                        let d = df[n - 1].get(g).copied().unwrap_or(0).max(1) as f64;
                        (g.to_vec(), tf as f64 * (log_n - d.ln()))
                    })
                    .collect();
                let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
                TfIdf {
                    weights,
                    norm,
                    len: tokens.len(),
                }
            })
            .collect()
    };
    let per_pair: Vec<f64> = pairs
        .par_iter()
        .map(|p| {
            let hyp = vectorize(&p.hypothesis);
            let mut total = 0.0;
            for r in &p.references {
                let rv = vectorize(r);
                for (h, rr) in hyp.iter().zip(&rv) {
                    let mut dot = 0.0;
                    for (g, wh) in &h.weights {
                        if let Some(wr) = rr.weights.get(g) {
                            dot += wh.min(*wr) * wr;
                        }
                    }
                    let mut v = if h.norm != 0.0 && rr.norm != 0.0 {
                        dot / (h.norm * rr.norm)
                    } else {
                        0.0
                    };
                    let delta = h.len as f64 - rr.len as f64;
                    v *= (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
                    total += v;
                }
            }
            total / p.references.len() as f64 / MAX_N as f64 * 10.0
        })
        .collect();
    Ok(per_pair.iter().sum::<f64>() / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub bleu4: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    #[serde(rename = "ciderD")]
    pub cider_d: f64,
}

impl Scores {
    pub fn compute(pairs: &[EvalPair]) -> Result<Self> {
        Ok(Self {
            bleu4: bleu4(pairs)?,
            rouge_l: rouge_l(pairs)?,
            cider_d: cider_d(pairs)?,
        })
    }

    pub fn in_range(&self) -> bool {
        (0.0..=1.0 + 1e-12).contains(&self.bleu4)
            && (0.0..=1.0 + 1e-12).contains(&self.rouge_l)
            && (0.0..=10.0 + 1e-9).contains(&self.cider_d)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MicroMode {
    /// Pool all pairs and score once.
    #[default]
    Pooled,
    /// Item-weighted mean of per-cluster scores.
    Weighted,
}

pub fn micro_average(sets: &[&[EvalPair]], mode: MicroMode) -> Result<Scores> {
    let sets: Vec<&[EvalPair]> = sets.iter().copied().filter(|s| !s.is_empty()).collect();
    if sets.is_empty() {
        return Err(Error::InvalidInput("no scored clusters".into()));
    }
    match mode {
        MicroMode::Pooled => {
            let pooled: Vec<EvalPair> = sets.iter().flat_map(|s| s.iter().cloned()).collect();
            Scores::compute(&pooled)
        }
        MicroMode::Weighted => {
            let n: usize = sets.iter().map(|s| s.len()).sum();
            let mut acc = Scores {
                bleu4: 0.0,
                rouge_l: 0.0,
                cider_d: 0.0,
            };
            for s in sets {
                let sc = Scores::compute(s)?;
                let w = s.len() as f64 / n as f64;
                acc.bleu4 += w * sc.bleu4;
                acc.rouge_l += w * sc.rouge_l;
                acc.cider_d += w * sc.cider_d;
            }
            Ok(acc)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub items: usize,
    #[serde(flatten)]
    pub scores: Scores,
    /// Single-pair corpora have all-zero IDF, so CIDEr-D is meaningless.
    pub cider_degenerate: bool,
}

impl ReportRow {
    fn new(pairs: &[EvalPair], scores: Scores) -> Self {
        Self {
            items: pairs.len(),
            scores,
            cider_degenerate: pairs.len() < 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub clusters: BTreeMap<u32, ReportRow>,
    pub all: Option<ReportRow>,
    pub micro_mode: MicroMode,
    pub not_computed: Vec<String>,
}

impl MetricReport {
    /// Scores every non-empty cluster plus the micro-average row.
    pub fn build(per_cluster: &BTreeMap<u32, Vec<EvalPair>>, mode: MicroMode) -> Result<Self> {
        let mut clusters = BTreeMap::new();
        for (&id, pairs) in per_cluster {
            if !pairs.is_empty() {
                clusters.insert(id, ReportRow::new(pairs, Scores::compute(pairs)?));
            }
        }
        let sets: Vec<&[EvalPair]> = per_cluster.values().map(Vec::as_slice).collect();
        let all = if clusters.is_empty() {
            None
        } else {
            let n: usize = sets.iter().map(|s| s.len()).sum();
            let scores = micro_average(&sets, mode)?;
            Some(ReportRow {
                items: n,
                scores,
                cider_degenerate: n < 2,
            })
        };
        Ok(Self {
            clusters,
            all,
            micro_mode: mode,
            not_computed: ABSENT_METRICS.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned CSV: one row per cluster then `all`.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<[String; 5]> = vec![[
            "cluster".into(),
            "items".into(),
            "bleu4".into(),
            "rougeL".into(),
            "ciderD".into(),
        ]];
        let fmt = |name: String, r: &ReportRow| {
            [
                name,
                r.items.to_string(),
                format!("{:.4}", r.scores.bleu4),
                format!("{:.4}", r.scores.rouge_l),
                format!("{:.4}", r.scores.cider_d),
            ]
        };
        for (id, r) in &self.clusters {
            rows.push(fmt(id.to_string(), r));
        }
        if let Some(r) = &self.all {
            rows.push(fmt("all".into(), r));
        }
        aligned_csv(&rows)
    }

    pub fn write(&self, json: &Path, csv: Option<&Path>) -> Result<()> {
        crate::persist::write_atomic(json, self.to_json().as_bytes())?;
        if let Some(csv) = csv {
            crate::persist::write_atomic(csv, self.to_csv().as_bytes())?;
        }
        Ok(())
    }
}

/// Comma-separated rows padded so columns line up.
pub fn aligned_csv<R: AsRef<[String]>>(rows: &[R]) -> String {
    let cols = rows.iter().map(|r| r.as_ref().len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.as_ref().get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let r = r.as_ref();
        for (c, cell) in r.iter().enumerate() {
            if c + 1 == r.len() {
                out.push_str(cell);
            } else {
                let _ = write!(out, "{cell:<w$}, ", w = widths[c]);
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Deserialize)]
struct HypRecord {
    image_id: u64,
    caption: String,
}

/// Reads generated captions in the `[{"image_id", "caption"}]` results
/// format.
pub fn load_hypotheses(path: &Path) -> Result<BTreeMap<u64, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let recs: Vec<HypRecord> = serde_json::from_str(&text).map_err(|e| Error::json(path, &e))?;
    let mut out = BTreeMap::new();
    for r in recs {
        if out.insert(r.image_id, r.caption).is_some() {
            return Err(Error::Integrity(format!(
                "{}: duplicate hypothesis for image {}",
                path.display(),
                r.image_id
            )));
        }
    }
    Ok(out)
}

pub fn write_hypotheses(path: &Path, hyps: &BTreeMap<u64, String>) -> Result<()> {
    let recs: Vec<serde_json::Value> = hyps
        .iter()
        .map(|(id, c)| serde_json::json!({ "image_id": id, "caption": c }))
        .collect();
    crate::persist::write_atomic(path, serde_json::to_string_pretty(&recs).expect("json").as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(h: &str, refs: &[&str]) -> EvalPair {
        EvalPair::from_text(0, h, refs).unwrap()
    }

    #[test]
    fn pair_validation() {
        assert!(EvalPair::new(1, vec![], vec![]).is_err());
        assert!(EvalPair::new(1, vec![], vec![vec![]]).is_err());
        assert!(EvalPair::new(1, vec![], vec![vec!["a".into()]]).is_ok());
        assert!(bleu4(&[]).is_err());
    }

    #[test]
    fn perfect_and_disjoint() {
        let perfect = vec![p("a red cup on the table", &["a red cup on the table", "a cup"])];
        assert!((bleu4(&perfect).unwrap() - 1.0).abs() < 1e-12);
        assert!((rouge_l(&perfect).unwrap() - 1.0).abs() < 1e-12);
        let disjoint = vec![p("x y z w", &["a b c d"])];
        assert_eq!(bleu4(&disjoint).unwrap(), 0.0);
        assert_eq!(rouge_l(&disjoint).unwrap(), 0.0);
    }

    #[test]
    fn empty_hypothesis_contributes_nothing() {
        let pairs = vec![p("", &["a b c d"]), p("a b c d e", &["a b c d e"])];
        assert!(bleu4(&pairs).unwrap() < 1.0);
        assert!((rouge_l(&pairs).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cider_singleton_and_two_disjoint() {
        let single = vec![p("a red cup on a table", &["a red cup on a table"])];
        assert_eq!(cider_d(&single).unwrap(), 0.0);
        let two = vec![
            p("a red cup on the table", &["a red cup on the table"]),
            p("two blue shoes under some chair", &["two blue shoes under some chair"]),
        ];
        assert!((cider_d(&two).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn report_shape_and_csv_alignment() {
        let mut m = BTreeMap::new();
        m.insert(1, vec![p("a red cup", &["a red cup"]), p("a dog", &["a cat"])]);
        m.insert(2, vec![p("a blue box", &["a blue box on a shelf"])]);
        m.insert(3, vec![]);
        let r = MetricReport::build(&m, MicroMode::Pooled).unwrap();
        assert_eq!(r.clusters.len(), 2);
        assert!(r.clusters[&2].cider_degenerate);
        assert_eq!(r.all.as_ref().unwrap().items, 3);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("all"));
        let commas: Vec<Vec<usize>> = lines
            .iter()
            .map(|l| l.match_indices(',').map(|(i, _)| i).collect())
            .collect();
        assert!(commas.windows(2).all(|w| w[0] == w[1]));
        assert!(r.to_json().contains("\"not_computed\""));
    }
}
