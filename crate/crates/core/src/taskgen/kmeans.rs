//! Seeded k-means: k-means++ initialisation followed by Lloyd iterations.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after seeding and after every Lloyd
    /// iteration.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansResult {
    pub fn wcss(&self) -> f64 {
        *self.wcss_history.last().expect("history is never empty")
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn wcss(vectors: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    vectors
        .iter()
        .zip(labels)
        .map(|(v, &l)| sq_dist(v, &centroids[l]))
        .sum()
}

fn seed_plus_plus(vectors: &[Vec<f64>], k: usize, rng: &mut crate::rng::Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut centroids = vec![vectors[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if *d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            chosen.unwrap_or_else(|| nearest.iter().rposition(|d| *d > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        let c = vectors[pick].clone();
        for (d, v) in nearest.iter_mut().zip(vectors) {
            *d = d.min(sq_dist(v, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Nearest-centroid labels. A point keeps its current label on ties, and
/// otherwise goes to the lowest-indexed nearest centroid.
fn assign(vectors: &[Vec<f64>], centroids: &[Vec<f64>], current: Option<&[usize]>) -> Vec<usize> {
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut best = current.map_or(0, |c| c[i]);
            let mut best_d = sq_dist(v, &centroids[best]);
            for (j, c) in centroids.iter().enumerate() {
                let d = sq_dist(v, c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Recomputes centroids as label means. Empty clusters take over the point
/// farthest from its centroid (among clusters that can spare one).
fn update(vectors: &[Vec<f64>], labels: &mut [usize], k: usize) -> Vec<Vec<f64>> {
    let dim = vectors[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (v, &l) in vectors.iter().zip(labels.iter()) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(v) {
            *s += x;
        }
    }
    let mut centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| {
            if c == 0 {
                s
            } else {
                s.into_iter().map(|x| x / c as f64).collect()
            }
        })
        .collect();
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let donor = (0..vectors.len())
            .filter(|&i| counts[labels[i]] > 1)
            .fold(None::<(usize, f64)>, |best, i| {
                let d = sq_dist(&vectors[i], &centroids[labels[i]]);
                match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                }
            })
            .map(|(i, _)| i)
            .expect("an empty cluster implies another holds several points");
        counts[labels[donor]] -= 1;
        labels[donor] = empty;
        counts[empty] = 1;
        centroids[empty] = vectors[donor].clone();
    }
    centroids
}

pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if vectors.len() < k {
        return Err(Error::InvalidInput(format!(
            "k-means needs at least k={k} vectors, got {}",
            vectors.len()
        )));
    }
    let dim = vectors[0].len();
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite vector component".into()));
        }
    }

    let mut rng = crate::rng::seeded(seed);
    let mut centroids = seed_plus_plus(vectors, k, &mut rng);
    let mut labels = assign(vectors, &centroids, None);
    let mut history = vec![wcss(vectors, &labels, &centroids)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        centroids = update(vectors, &mut labels, k);
        let next = assign(vectors, &centroids, Some(&labels));
        history.push(wcss(vectors, &next, &centroids));
        let stable = next == labels;
        labels = next;
        if stable {
            converged = true;
            break;
        }
    }
    Ok(KMeansResult {
        labels,
        centroids,
        wcss_history: history,
        iterations,
        converged,
    })
}
