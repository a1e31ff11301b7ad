//! Agglomerative clustering with Ward linkage.

use ndarray::Array2;
use std::collections::BTreeMap;

use crate::cluster::{
    sq_distance, validate_input, ClusterAssignment, ClusteringStrategy, OptionParser,
};
use crate::error::{Error, Result};

/// Bottom-up merging under Ward's criterion: at every step the pair of
/// clusters whose merge increases the total within-cluster sum of squares
/// the least is joined, until `k` clusters remain. Deterministic: ties on
/// the merge cost are broken toward the smallest pair of cluster indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Agglomerative {}

impl Agglomerative {
    pub fn from_options(opts: &BTreeMap<String, String>) -> Result<Self> {
        OptionParser::new(opts).finish()?;
        Ok(Agglomerative {})
    }
}

/// Ward merge on weighted points: row `i` of `points` is a cluster seed of
/// mass `sizes[i]`. Returns per-row cluster labels, relabeled so cluster 0
/// contains row 0, the next new cluster in row order is 1, and so on, plus
/// the sequence of merge heights (twice the WCSS increase per merge).
///
/// Shared with density-reducing methods that pre-aggregate points into
/// weighted summaries and then merge the summaries.
pub(crate) fn ward_merge(
    points: &Array2<f64>,
    sizes: &[f64],
    k: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = points.nrows();
    if sizes.len() != n {
        return Err(Error::invalid(format!(
            "got {} sizes for {} points",
            sizes.len(),
            n
        )));
    }
    if sizes.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid("cluster sizes must be positive and finite"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "k must lie in 1..={n} for {n} points, got {k}"
        )));
    }

    // Pairwise Ward dissimilarities, scaled as 2 * merge cost so that two
    // unit-mass points start at their squared Euclidean distance. The
    // Lance-Williams recurrence below preserves the scaling.
    let mut dist = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = 2.0 * sizes[i] * sizes[j] / (sizes[i] + sizes[j])
                * sq_distance(points.row(i), points.row(j));
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }

    let mut active: Vec<bool> = vec![true; n];
    let mut mass: Vec<f64> = sizes.to_vec();
    // Row-level cluster membership, tracked as the representative (smallest
    // active) index of each row's cluster.
    let mut rep: Vec<usize> = (0..n).collect();
    let mut heights = Vec::with_capacity(n - k);

    for _ in 0..(n - k) {
        let mut best = f64::INFINITY;
        let mut best_pair = (usize::MAX, usize::MAX);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                if dist[(i, j)] < best {
                    best = dist[(i, j)];
                    best_pair = (i, j);
                }
            }
        }
        let (a, b) = best_pair;
        heights.push(best);
        // Merge b into a (the smaller index survives) and update the a-row
        // via the Lance-Williams recurrence for Ward's method.
        let (na, nb) = (mass[a], mass[b]);
        for c in 0..n {
            if !active[c] || c == a || c == b {
                continue;
            }
            let nc = mass[c];
            let merged = ((na + nc) * dist[(a, c)] + (nb + nc) * dist[(b, c)]
                - nc * dist[(a, b)])
                / (na + nb + nc);
            dist[(a, c)] = merged;
            dist[(c, a)] = merged;
        }
        mass[a] = na + nb;
        active[b] = false;
        for r in rep.iter_mut() {
            if *r == b {
                *r = a;
            }
        }
    }

    // Compact representatives to 0..k in order of first appearance.
    let mut order: Vec<usize> = Vec::with_capacity(k);
    let mut labels = vec![0usize; n];
    for i in 0..n {
        let r = rep[i];
        let label = match order.iter().position(|&o| o == r) {
            Some(pos) => pos,
            None => {
                order.push(r);
                order.len() - 1
            }
        };
        labels[i] = label;
    }
    Ok((labels, heights))
}

impl ClusteringStrategy for Agglomerative {
    fn id(&self) -> &'static str {
        "agglomerative"
    }

    fn label(&self) -> &'static str {
        "AC"
    }

    fn cluster(&self, data: &Array2<f64>, k: usize, run_seed: u64) -> Result<ClusterAssignment> {
        validate_input(data, k)?;
        let sizes = vec![1.0; data.nrows()];
        let (labels, heights) = ward_merge(data, &sizes, k)?;
        ClusterAssignment::new(labels, k, heights, run_seed)
    }
}
