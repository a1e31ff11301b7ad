//! Lloyd's k-means with k-means++ seeding and multi-restart selection.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::cluster::{
    sq_distance, validate_input, ClusterAssignment, ClusteringStrategy, OptionParser,
};
use crate::error::Result;
use crate::seed;

/// k-means configuration; `cluster` chooses the best of `n_init` seeded
/// restarts by final within-cluster sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeans {
    fn default() -> Self {
        KMeans { n_init: 10, max_iter: 100, tol: 1e-9 }
    }
}

impl KMeans {
    pub fn from_options(opts: &BTreeMap<String, String>) -> Result<Self> {
        let mut p = OptionParser::new(opts);
        let me = KMeans {
            n_init: p.parse("n_init", 10)?,
            max_iter: p.parse("max_iter", 100)?,
            tol: p.parse("tol", 1e-9)?,
        };
        p.finish()?;
        Ok(me)
    }
}

/// Result of the reusable core: final labels plus the objective trace.
#[derive(Debug, Clone)]
pub(crate) struct KMeansFit {
    pub labels: Vec<usize>,
    pub objective_trace: Vec<f64>,
}

impl KMeansFit {
    pub fn wcss(&self) -> f64 {
        *self.objective_trace.last().expect("at least one iteration runs")
    }
}

/// k-means++ seeding: the first centroid is uniform, each further centroid
/// is sampled with probability proportional to the squared distance to the
/// nearest centroid chosen so far.
fn seed_centroids(data: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (n, d) = data.dim();
    let mut centroids = Array2::<f64>::zeros((k, d));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&data.row(first));
    let mut best_sq: Vec<f64> = (0..n)
        .map(|i| sq_distance(data.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = best_sq.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in best_sq.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // All points coincide with chosen centroids; any index works.
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&data.row(pick));
        for i in 0..n {
            let sq = sq_distance(data.row(i), centroids.row(c));
            if sq < best_sq[i] {
                best_sq[i] = sq;
            }
        }
    }
    centroids
}

fn assign_labels(data: &Array2<f64>, centroids: &Array2<f64>, labels: &mut [usize]) {
    for (i, mut_label) in labels.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        let mut best_k = 0;
        for (c, centroid) in centroids.rows().into_iter().enumerate() {
            let sq = sq_distance(data.row(i), centroid);
            if sq < best {
                best = sq;
                best_k = c;
            }
        }
        *mut_label = best_k;
    }
}

/// One seeded Lloyd run.
fn lloyd(data: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng, max_iter: usize, tol: f64) -> KMeansFit {
    let (n, d) = data.dim();
    let mut centroids = seed_centroids(data, k, rng);
    let mut labels = vec![0usize; n];
    let mut prev_labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut counts = vec![0usize; k];
    for _ in 0..max_iter.max(1) {
        assign_labels(data, &centroids, &mut labels);

        // Refill empty clusters with the point farthest from its centroid
        // (among clusters that can spare a member); the point becomes the
        // empty cluster's centroid at the update below.
        counts.fill(0);
        for &l in labels.iter() {
            counts[l] += 1;
        }
        for empty in 0..k {
            while counts[empty] == 0 {
                let mut far_i = usize::MAX;
                let mut far_sq = -1.0;
                for i in 0..n {
                    if counts[labels[i]] > 1 {
                        let sq = sq_distance(data.row(i), centroids.row(labels[i]));
                        if sq > far_sq {
                            far_sq = sq;
                            far_i = i;
                        }
                    }
                }
                let i = far_i;
                counts[labels[i]] -= 1;
                labels[i] = empty;
                counts[empty] += 1;
            }
        }

        // Centroid update.
        centroids.fill(0.0);
        for i in 0..n {
            for j in 0..d {
                centroids[(labels[i], j)] += data[(i, j)];
            }
        }
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            for j in 0..d {
                centroids[(c, j)] *= inv;
            }
        }

        let wcss: f64 = (0..n)
            .map(|i| sq_distance(data.row(i), centroids.row(labels[i])))
            .sum();
        let converged_objective = trace
            .last()
            .is_some_and(|&prev: &f64| (prev - wcss).abs() <= tol * prev.max(1.0));
        trace.push(wcss);
        if labels == prev_labels || converged_objective {
            break;
        }
        prev_labels.copy_from_slice(&labels);
    }
    KMeansFit { labels, objective_trace: trace }
}

/// Core used by the strategy and by algorithms that initialize from k-means.
pub(crate) fn kmeans_fit(
    data: &Array2<f64>,
    k: usize,
    run_seed: u64,
    n_init: usize,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansFit> {
    validate_input(data, k)?;
    let mut best: Option<KMeansFit> = None;
    for restart in 0..n_init.max(1) as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(run_seed, &[seed::tag("restart"), restart]));
        let fit = lloyd(data, k, &mut rng, max_iter, tol);
        if best.as_ref().is_none_or(|b| fit.wcss() < b.wcss()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart runs"))
}

impl ClusteringStrategy for KMeans {
    fn id(&self) -> &'static str {
        "kmeans"
    }

    fn label(&self) -> &'static str {
        "K-Means"
    }

    fn cluster(&self, data: &Array2<f64>, k: usize, run_seed: u64) -> Result<ClusterAssignment> {
        let fit = kmeans_fit(data, k, run_seed, self.n_init, self.max_iter, self.tol)?;
        ClusterAssignment::new(fit.labels, k, fit.objective_trace, run_seed)
    }
}
