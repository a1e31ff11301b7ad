//! K-medoids via alternating assignment and in-cluster medoid updates.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::cluster::{
    pairwise_distances, validate_input, ClusterAssignment, ClusteringStrategy, OptionParser,
};
use crate::error::Result;
use crate::seed;

/// K-medoids configuration. Representatives are always data points, and the
/// objective is the sum of Euclidean distances to the assigned medoid, which
/// makes the method robust to outliers relative to k-means.
#[derive(Debug, Clone, PartialEq)]
pub struct KMedoids {
    pub n_init: usize,
    pub max_iter: usize,
}

impl Default for KMedoids {
    fn default() -> Self {
        KMedoids { n_init: 10, max_iter: 100 }
    }
}

impl KMedoids {
    pub fn from_options(opts: &BTreeMap<String, String>) -> Result<Self> {
        let mut p = OptionParser::new(opts);
        let me = KMedoids {
            n_init: p.parse("n_init", 10)?,
            max_iter: p.parse("max_iter", 100)?,
        };
        p.finish()?;
        Ok(me)
    }
}

/// Weighted seeding on the distance matrix: first medoid uniform, later
/// medoids sampled proportionally to squared distance to the nearest one.
fn seed_medoids(dist: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = dist.nrows();
    let mut medoids = Vec::with_capacity(k);
    medoids.push(rng.random_range(0..n));
    let mut best_sq: Vec<f64> = (0..n).map(|i| dist[(i, medoids[0])].powi(2)).collect();
    while medoids.len() < k {
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
            rng.random_range(0..n)
        };
        medoids.push(pick);
        for i in 0..n {
            let sq = dist[(i, pick)].powi(2);
            if sq < best_sq[i] {
                best_sq[i] = sq;
            }
        }
    }
    medoids
}

fn assign(dist: &Array2<f64>, medoids: &[usize], labels: &mut [usize]) -> f64 {
    let mut cost = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        let mut best_c = 0;
        for (c, &m) in medoids.iter().enumerate() {
            let d = dist[(i, m)];
            if d < best {
                best = d;
                best_c = c;
            }
        }
        *label = best_c;
        cost += best;
    }
    cost
}

fn single_run(
    dist: &Array2<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
    max_iter: usize,
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = dist.nrows();
    let mut medoids = seed_medoids(dist, k, rng);
    let mut labels = vec![0usize; n];
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        let cost = assign(dist, &medoids, &mut labels);
        trace.push(cost);
        // Update step: each cluster's medoid becomes the member minimizing
        // the total distance to the rest of the cluster. Empty clusters keep
        // their medoid, which re-enters assignment next round.
        let mut next = medoids.clone();
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let mut best_cost = f64::INFINITY;
            let mut best_m = medoids[c];
            for &cand in &members {
                let total: f64 = members.iter().map(|&i| dist[(i, cand)]).sum();
                if total < best_cost {
                    best_cost = total;
                    best_m = cand;
                }
            }
            next[c] = best_m;
        }
        if next == medoids {
            break;
        }
        medoids = next;
    }
    let final_cost = assign(dist, &medoids, &mut labels);
    if trace.last().is_none_or(|&last| last != final_cost) {
        trace.push(final_cost);
    }
    (labels, medoids, trace)
}

impl ClusteringStrategy for KMedoids {
    fn id(&self) -> &'static str {
        "kmedoids"
    }

    fn label(&self) -> &'static str {
        "K-Medoids"
    }

    fn cluster(&self, data: &Array2<f64>, k: usize, run_seed: u64) -> Result<ClusterAssignment> {
        validate_input(data, k)?;
        let dist = pairwise_distances(data);
        let mut best: Option<(Vec<usize>, Vec<f64>)> = None;
        for restart in 0..self.n_init.max(1) as u64 {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed::derive(run_seed, &[seed::tag("restart"), restart]));
            let (labels, _, trace) = single_run(&dist, k, &mut rng, self.max_iter);
            let cost = *trace.last().expect("trace is non-empty");
            if best
                .as_ref()
                .is_none_or(|(_, t)| cost < *t.last().expect("trace is non-empty"))
            {
                best = Some((labels, trace));
            }
        }
        let (labels, trace) = best.expect("at least one restart runs");
        ClusterAssignment::new(labels, k, trace, run_seed)
    }
}
