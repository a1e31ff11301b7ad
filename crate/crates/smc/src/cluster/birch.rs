//! Birch: CF-tree condensation followed by Ward merging of subclusters.

use ndarray::Array2;
use std::collections::BTreeMap;

use crate::cluster::agglomerative::ward_merge;
use crate::cluster::{validate_input, ClusterAssignment, ClusteringStrategy, OptionParser};
use crate::error::{Error, Result};

/// Birch condenses the data into leaf subclusters of a height-balanced
/// clustering-feature tree, merges the subcluster centroids with Ward
/// linkage down to `k` clusters, and labels each point by its nearest
/// subcluster. Memory and merge cost scale with the number of subclusters
/// rather than the number of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Birch {
    /// A point is absorbed into a subcluster only if the merged subcluster's
    /// RMS radius stays at or below the effective threshold. With `relative`
    /// set this value is a fraction of the data's RMS spread around the grand
    /// centroid, so the tree granularity adapts to the feature scale;
    /// otherwise it is an absolute radius.
    pub threshold: f64,
    /// Interpret `threshold` relative to the data spread (the default).
    pub relative: bool,
    /// Maximum entries per tree node before it splits.
    pub branching: usize,
}

impl Default for Birch {
    fn default() -> Self {
        Birch { threshold: 0.25, relative: true, branching: 50 }
    }
}

impl Birch {
    pub fn from_options(opts: &BTreeMap<String, String>) -> Result<Self> {
        let mut p = OptionParser::new(opts);
        let me = Birch {
            threshold: p.parse("threshold", 0.25)?,
            relative: p.parse("relative", true)?,
            branching: p.parse("branching", 50)?,
        };
        p.finish()?;
        me.validate()?;
        Ok(me)
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return Err(Error::invalid("threshold must be a finite non-negative value"));
        }
        if self.branching < 2 {
            return Err(Error::invalid("branching factor must be at least 2"));
        }
        Ok(())
    }
}

/// Clustering feature: point count, per-dimension linear sum, and total
/// squared sum. Closed under merging, and sufficient for centroids and RMS
/// radii without revisiting the points.
#[derive(Debug, Clone)]
struct Feature {
    n: f64,
    ls: Vec<f64>,
    ss: f64,
}

impl Feature {
    fn from_point(x: &[f64]) -> Self {
        Feature {
            n: 1.0,
            ls: x.to_vec(),
            ss: x.iter().map(|v| v * v).sum(),
        }
    }

    fn merge(&self, other: &Feature) -> Feature {
        Feature {
            n: self.n + other.n,
            ls: self.ls.iter().zip(&other.ls).map(|(a, b)| a + b).collect(),
            ss: self.ss + other.ss,
        }
    }

    fn centroid(&self) -> Vec<f64> {
        self.ls.iter().map(|v| v / self.n).collect()
    }

    /// RMS distance of member points from the centroid.
    fn radius(&self) -> f64 {
        let centroid_sq: f64 = self.ls.iter().map(|v| (v / self.n).powi(2)).sum();
        (self.ss / self.n - centroid_sq).max(0.0).sqrt()
    }

    fn centroid_sq_dist(&self, other: &Feature) -> f64 {
        self.ls
            .iter()
            .zip(&other.ls)
            .map(|(a, b)| {
                let diff = a / self.n - b / other.n;
                diff * diff
            })
            .sum()
    }
}

enum Node {
    Leaf { entries: Vec<Feature> },
    Internal { children: Vec<Node> },
}

impl Node {
    // Summaries are recomputed on demand; trees here are shallow and nodes
    // narrow, so this stays cheap and avoids carrying stale caches through
    // splits.
    fn summary(&self) -> Feature {
        match self {
            Node::Leaf { entries } => {
                let mut acc = entries[0].clone();
                for e in &entries[1..] {
                    acc = acc.merge(e);
                }
                acc
            }
            Node::Internal { children } => {
                let mut acc = children[0].summary();
                for c in &children[1..] {
                    acc = acc.merge(&c.summary());
                }
                acc
            }
        }
    }
}

/// Splits features into two groups seeded by the farthest pair of centroids.
/// Returns the entry indices of each group; ties go to the first seed.
fn farthest_pair_partition(features: &[Feature]) -> (Vec<usize>, Vec<usize>) {
    let m = features.len();
    let (mut sa, mut sb, mut far) = (0, 1, -1.0);
    for i in 0..m {
        for j in (i + 1)..m {
            let d = features[i].centroid_sq_dist(&features[j]);
            if d > far {
                far = d;
                sa = i;
                sb = j;
            }
        }
    }
    let mut group_a = Vec::new();
    let mut group_b = Vec::new();
    for i in 0..m {
        let da = features[i].centroid_sq_dist(&features[sa]);
        let db = features[i].centroid_sq_dist(&features[sb]);
        if da <= db {
            group_a.push(i);
        } else {
            group_b.push(i);
        }
    }
    (group_a, group_b)
}

/// Inserts a point; `Some(sibling)` reports that the node split and the
/// caller must adopt the new sibling.
fn insert(node: &mut Node, x: &[f64], threshold: f64, branching: usize) -> Option<Node> {
    let point = Feature::from_point(x);
    match node {
        Node::Leaf { entries } => {
            let nearest = (0..entries.len())
                .min_by(|&a, &b| {
                    let da = entries[a].centroid_sq_dist(&point);
                    let db = entries[b].centroid_sq_dist(&point);
                    da.partial_cmp(&db).expect("distances are finite")
                })
                .expect("leaves are never empty");
            let merged = entries[nearest].merge(&point);
            if merged.radius() <= threshold {
                entries[nearest] = merged;
                return None;
            }
            entries.push(point);
            if entries.len() <= branching {
                return None;
            }
            let (ia, ib) = farthest_pair_partition(entries);
            // Move each entry into exactly one group.
            let old = std::mem::take(entries);
            let mut slots: Vec<Option<Feature>> = old.into_iter().map(Some).collect();
            *entries = ia.iter().map(|&i| slots[i].take().unwrap()).collect();
            let sibling = ib.iter().map(|&i| slots[i].take().unwrap()).collect();
            Some(Node::Leaf { entries: sibling })
        }
        Node::Internal { children } => {
            let nearest = (0..children.len())
                .min_by(|&a, &b| {
                    let da = children[a].summary().centroid_sq_dist(&point);
                    let db = children[b].summary().centroid_sq_dist(&point);
                    da.partial_cmp(&db).expect("distances are finite")
                })
                .expect("internal nodes are never empty");
            if let Some(sibling) = insert(&mut children[nearest], x, threshold, branching) {
                children.insert(nearest + 1, sibling);
                if children.len() > branching {
                    let summaries: Vec<Feature> = children.iter().map(|c| c.summary()).collect();
                    let (ia, ib) = farthest_pair_partition(&summaries);
                    let old = std::mem::take(children);
                    let mut slots: Vec<Option<Node>> = old.into_iter().map(Some).collect();
                    *children = ia.iter().map(|&i| slots[i].take().unwrap()).collect();
                    let sibling_children: Vec<Node> =
                        ib.iter().map(|&i| slots[i].take().unwrap()).collect();
                    return Some(Node::Internal { children: sibling_children });
                }
            }
            None
        }
    }
}

/// Builds the tree and returns the leaf subcluster features in
/// left-to-right tree order.
fn condense(data: &Array2<f64>, threshold: f64, branching: usize) -> Vec<Feature> {
    let mut root = Node::Leaf { entries: vec![Feature::from_point(data.row(0).as_slice().unwrap())] };
    for i in 1..data.nrows() {
        let x = data.row(i);
        let x = x.as_slice().unwrap();
        if let Some(sibling) = insert(&mut root, x, threshold, branching) {
            root = Node::Internal { children: vec![root, sibling] };
        }
    }
    let mut leaves = Vec::new();
    collect_leaves(&root, &mut leaves);
    leaves
}

/// RMS distance of the rows from their mean; the scale reference for
/// relative thresholds.
fn rms_spread(data: &Array2<f64>) -> f64 {
    let (n, d) = data.dim();
    let mut mean = vec![0.0f64; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += data[(i, j)];
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let total: f64 = (0..n)
        .map(|i| (0..d).map(|j| (data[(i, j)] - mean[j]).powi(2)).sum::<f64>())
        .sum();
    (total / n as f64).sqrt()
}

fn collect_leaves(node: &Node, out: &mut Vec<Feature>) {
    match node {
        Node::Leaf { entries } => out.extend(entries.iter().cloned()),
        Node::Internal { children } => {
            for c in children {
                collect_leaves(c, out);
            }
        }
    }
}

impl ClusteringStrategy for Birch {
    fn id(&self) -> &'static str {
        "birch"
    }

    fn label(&self) -> &'static str {
        "Birch"
    }

    fn cluster(&self, data: &Array2<f64>, k: usize, run_seed: u64) -> Result<ClusterAssignment> {
        validate_input(data, k)?;
        self.validate()?;
        let mut threshold =
            if self.relative { self.threshold * rms_spread(data) } else { self.threshold };
        let mut subclusters = condense(data, threshold, self.branching);
        // A threshold coarse enough to absorb whole natural groups can leave
        // fewer leaves than clusters were requested. The tree granularity is
        // a heuristic, not part of the contract, so refine it until at least
        // `k` leaves survive; only duplicate-heavy data (fewer than `k`
        // distinct rows) can exhaust the refinement.
        let mut refinements = 0;
        while subclusters.len() < k && refinements < 60 && threshold > 0.0 {
            threshold /= 2.0;
            subclusters = condense(data, threshold, self.branching);
            refinements += 1;
        }
        if subclusters.len() < k {
            return Err(Error::TooFewSubclusters {
                subclusters: subclusters.len(),
                requested: k,
            });
        }
        let d = data.ncols();
        let mut centroids = Array2::<f64>::zeros((subclusters.len(), d));
        let mut sizes = Vec::with_capacity(subclusters.len());
        for (s, f) in subclusters.iter().enumerate() {
            let c = f.centroid();
            for j in 0..d {
                centroids[(s, j)] = c[j];
            }
            sizes.push(f.n);
        }
        let (sub_labels, _) = ward_merge(&centroids, &sizes, k)?;

        let labels: Vec<usize> = (0..data.nrows())
            .map(|i| {
                let row = data.row(i);
                let nearest = (0..subclusters.len())
                    .min_by(|&a, &b| {
                        let da = crate::cluster::sq_distance(row, centroids.row(a));
                        let db = crate::cluster::sq_distance(row, centroids.row(b));
                        da.partial_cmp(&db).expect("distances are finite")
                    })
                    .expect("at least one subcluster exists");
                sub_labels[nearest]
            })
            .collect();

        // Point assignment can relabel in a different first-occurrence
        // order than the subclusters; compact again so labels stay dense.
        let mut order: Vec<usize> = Vec::with_capacity(k);
        let compact: Vec<usize> = labels
            .iter()
            .map(|&l| match order.iter().position(|&o| o == l) {
                Some(pos) => pos,
                None => {
                    order.push(l);
                    order.len() - 1
                }
            })
            .collect();
        if order.len() < k {
            return Err(Error::TooFewSubclusters { subclusters: order.len(), requested: k });
        }
        ClusterAssignment::new(compact, k, Vec::new(), run_seed)
    }
}
