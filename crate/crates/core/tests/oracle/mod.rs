//! Brute-force reference implementations of the caption metrics, written
//! independently of the library: n-grams are space-joined strings counted
//! by linear search, and every formula is spelled out term by term.
#![allow(dead_code)]

pub type Pair = (Vec<String>, Vec<Vec<String>>);

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(|w| w.to_string()).collect()
}

pub fn pair(hyp: &str, refs: &[&str]) -> Pair {
    (toks(hyp), refs.iter().map(|r| toks(r)).collect())
}

fn grams(words: &[String], n: usize) -> Vec<String> {
    if words.len() < n {
        return vec![];
    }
    (0..=words.len() - n).map(|i| words[i..i + n].join(" ")).collect()
}

fn count(list: &[String], g: &str) -> usize {
    list.iter().filter(|x| x.as_str() == g).count()
}

fn distinct(list: &[String]) -> Vec<String> {
    let mut out: Vec<String> = vec![];
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

pub fn bleu4(pairs: &[Pair]) -> f64 {
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let mut c = 0usize;
    let mut r = 0usize;
    for (hyp, refs) in pairs {
        c += hyp.len();
        let mut best = refs[0].len();
        for rf in refs {
            let d_new = (rf.len() as i64 - hyp.len() as i64).abs();
            let d_old = (best as i64 - hyp.len() as i64).abs();
            if d_new < d_old || (d_new == d_old && rf.len() < best) {
                best = rf.len();
            }
        }
        r += best;
        for n in 1..=4 {
            let hg = grams(hyp, n);
            total[n - 1] += hg.len();
            for g in distinct(&hg) {
                let max_ref = refs.iter().map(|rf| count(&grams(rf, n), &g)).max().unwrap_or(0);
                matched[n - 1] += count(&hg, &g).min(max_ref);
            }
        }
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        if matched[n] == 0 {
            return 0.0;
        }
        log_sum += (matched[n] as f64 / total[n] as f64).ln();
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * (log_sum / 4.0).exp()
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

pub fn rouge_l(pairs: &[Pair]) -> f64 {
    let beta: f64 = 1.2;
    let mut sum = 0.0;
    for (hyp, refs) in pairs {
        let mut best: f64 = 0.0;
        for rf in refs {
            let l = lcs(hyp, rf) as f64;
            if l == 0.0 {
                continue;
            }
            let p = l / hyp.len() as f64;
            let rc = l / rf.len() as f64;
            let f = (1.0 + beta * beta) * p * rc / (rc + beta * beta * p);
            best = best.max(f);
        }
        sum += best;
    }
    sum / pairs.len() as f64
}

/// CIDEr-D: tf-idf over n-grams with df counted once per pair's reference
/// set, clipped dot product, Gaussian length penalty (sigma 6), x10.
pub fn cider_d(pairs: &[Pair]) -> f64 {
    let big_n = pairs.len() as f64;
    let mut total = 0.0;
    for (hyp, refs) in pairs {
        let mut per_ref_sum = 0.0;
        for rf in refs {
            let mut s = 0.0;
            for n in 1..=4 {
                let weight = |g: &str, list: &[String]| -> f64 {
                    let df = pairs
                        .iter()
                        .filter(|(_, rs)| rs.iter().any(|x| grams(x, n).iter().any(|y| y == g)))
                        .count();
                    count(list, g) as f64 * (big_n.ln() - (df.max(1) as f64).ln())
                };
                let hg = grams(hyp, n);
                let rg = grams(rf, n);
                let hyp_norm: f64 = distinct(&hg).iter().map(|g| weight(g, &hg).powi(2)).sum::<f64>().sqrt();
                let ref_norm: f64 = distinct(&rg).iter().map(|g| weight(g, &rg).powi(2)).sum::<f64>().sqrt();
                let mut dot = 0.0;
                for g in distinct(&hg) {
                    let wh = weight(&g, &hg);
                    let wr = weight(&g, &rg);
                    dot += wh.min(wr) * wr;
                }
                let mut v = if hyp_norm != 0.0 && ref_norm != 0.0 {
                    dot / (hyp_norm * ref_norm)
                } else {
                    0.0
                };
                let delta = hyp.len() as f64 - rf.len() as f64;
                v *= (-(delta * delta) / (2.0 * 36.0)).exp();
                s += v;
            }
            per_ref_sum += s;
        }
        total += per_ref_sum / refs.len() as f64 / 4.0 * 10.0;
    }
    total / big_n
}

pub fn bleu_fixture() -> Vec<Pair> {
    vec![
        pair(
            "a white cup sitting on a wooden table",
            &["a white cup on a wooden table", "white coffee cup sitting on a table", "a mug on a table"],
        ),
        pair("a can of soda", &["a can of soda on a counter", "red soda can", "a can of coke in a hand"]),
        pair(
            "a person holding a box of cereal in the kitchen",
            &["a hand holding a box of cereal", "a box of cereal held in a kitchen"],
        ),
    ]
}

pub fn cider_fixture() -> Vec<Pair> {
    vec![
        pair("a white cup on a table", &["a white cup on a wooden table", "a mug on a table", "white cup"]),
        pair("a can of soda on a counter", &["a can of soda on a counter", "red soda can"]),
        pair("a box of cereal", &["a hand holding a box of cereal", "cereal box on a shelf"]),
        pair("a remote control on a couch", &["a black remote control", "a tv remote on a sofa cushion"]),
        pair("a bottle of water", &["a plastic bottle of water on a desk", "water bottle", "a bottle"]),
    ]
}

pub fn cluster_a() -> Vec<Pair> {
    bleu_fixture()
}

pub fn cluster_b() -> Vec<Pair> {
    vec![
        pair("a laptop screen showing an error", &["a laptop screen with an error message", "computer screen"]),
        pair("a bag of chips", &["a bag of potato chips", "chips bag on a table"]),
        pair("a pair of shoes", &["a pair of black shoes on the floor", "shoes"]),
    ]
}
