//! External clustering quality metrics.
//!
//! All four metrics are computed from a [`ContingencyTable`]: exact integer
//! pair counts are derived from the table once, and each metric value is a
//! single closed-form expression over those integers. Keeping the float
//! arithmetic down to one canonical expression per metric makes the values
//! reproducible bit-for-bit across runs and platforms.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cross-tabulation of a ground-truth partition against a predicted one.
///
/// Rows index true classes, columns index predicted clusters, both compacted
/// to consecutive indices in ascending order of the original label values.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    /// counts[(c, k)] = number of samples with true class c and cluster k.
    pub counts: Array2<u64>,
    /// Row sums: samples per true class.
    pub class_totals: Vec<u64>,
    /// Column sums: samples per predicted cluster.
    pub cluster_totals: Vec<u64>,
    /// Total number of samples.
    pub n: u64,
}

/// Sample-pair counts derived from a contingency table.
///
/// Over all n(n-1)/2 unordered sample pairs: `tp` pairs share both class and
/// cluster, `fn_` share class only, `fp` share cluster only, `tn` share
/// neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn choose2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let index = |v: usize| distinct.binary_search(&v).expect("label present");
    (labels.iter().map(|&v| index(v)).collect(), distinct.len())
}

impl ContingencyTable {
    /// Tabulates two labelings of the same samples.
    ///
    /// Label values may be arbitrary; they are compacted in ascending order.
    /// Fails when the slices differ in length, are empty, or hold fewer than
    /// two samples (pair counts would be vacuous).
    pub fn from_labels(y_true: &[usize], y_pred: &[usize]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::invalid(format!(
                "label slices differ in length: {} vs {}",
                y_true.len(),
                y_pred.len()
            )));
        }
        if y_true.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 samples to compare partitions, got {}",
                y_true.len()
            )));
        }
        let (true_ids, n_classes) = compact(y_true);
        let (pred_ids, n_clusters) = compact(y_pred);
        let mut counts = Array2::<u64>::zeros((n_classes, n_clusters));
        for (&c, &k) in true_ids.iter().zip(&pred_ids) {
            counts[(c, k)] += 1;
        }
        let class_totals: Vec<u64> = counts.rows().into_iter().map(|r| r.sum()).collect();
        let cluster_totals: Vec<u64> = counts.columns().into_iter().map(|c| c.sum()).collect();
        Ok(ContingencyTable {
            counts,
            class_totals,
            cluster_totals,
            n: y_true.len() as u64,
        })
    }

    /// Derives the four sample-pair counts from binomial sums over the table.
    pub fn pair_counts(&self) -> PairCounts {
        let tp: u64 = self.counts.iter().map(|&c| choose2(c)).sum();
        let same_class: u64 = self.class_totals.iter().map(|&a| choose2(a)).sum();
        let same_cluster: u64 = self.cluster_totals.iter().map(|&b| choose2(b)).sum();
        let total = choose2(self.n);
        let fn_ = same_class - tp;
        let fp = same_cluster - tp;
        let tn = total - tp - fn_ - fp;
        PairCounts { tp, fp, fn_, tn }
    }

    /// Clustering accuracy under the best one-to-one cluster-to-class map.
    ///
    /// The map is an injective assignment between clusters and classes chosen
    /// to maximize the number of matched samples (solved exactly with the
    /// Hungarian algorithm); clusters left unmatched contribute nothing.
    pub fn accuracy(&self) -> f64 {
        let matched = max_assignment_agreement(&self.counts);
        matched as f64 / self.n as f64
    }

    /// Fowlkes–Mallows index: tp / sqrt((tp+fp)(tp+fn)), 0 when tp = 0.
    pub fn fowlkes_mallows(&self) -> f64 {
        let p = self.pair_counts();
        if p.tp == 0 {
            return 0.0;
        }
        let denom = (p.tp + p.fp) as u128 * (p.tp + p.fn_) as u128;
        p.tp as f64 / (denom as f64).sqrt()
    }

    /// Rand index: fraction of sample pairs on which the partitions agree.
    pub fn rand_index(&self) -> f64 {
        let p = self.pair_counts();
        (p.tp + p.tn) as f64 / p.total() as f64
    }

    /// Adjusted Rand index (chance-corrected), as an exact integer ratio.
    ///
    /// With st = tp+fn, sp = tp+fp and P = n(n-1)/2 the index equals
    /// 2(tp·P − st·sp) / (P(st+sp) − 2·st·sp); both numerator and denominator
    /// are evaluated in integer arithmetic and divided once. A vanishing
    /// denominator only occurs when both partitions are identical (all
    /// samples in one cluster, or all in singletons), where the index is 1.
    pub fn adjusted_rand(&self) -> f64 {
        let p = self.pair_counts();
        let total = p.total() as i128;
        let st = (p.tp + p.fn_) as i128;
        let sp = (p.tp + p.fp) as i128;
        let num = 2 * (p.tp as i128 * total - st * sp);
        let den = total * (st + sp) - 2 * st * sp;
        if den == 0 {
            return 1.0;
        }
        num as f64 / den as f64
    }
}

/// Maximum total agreement over injective cluster-to-class assignments.
///
/// Pads the table to a square matrix (absent pairings count 0) and solves the
/// assignment problem exactly in O(m^3).
fn max_assignment_agreement(counts: &Array2<u64>) -> u64 {
    let (rows, cols) = counts.dim();
    let m = rows.max(cols);
    // Minimization form on negated counts; the classic potentials-based
    // shortest-augmenting-path scheme, 1-indexed with column 0 as sentinel.
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            -(counts[(i, j)] as i64)
        } else {
            0
        }
    };
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; m + 1];
    let mut v = vec![0i64; m + 1];
    let mut matched_row = vec![0usize; m + 1]; // matched_row[j] = row assigned to column j
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut agreement = 0u64;
    for j in 1..=m {
        let i = matched_row[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            agreement += counts[(i - 1, j - 1)];
        }
    }
    agreement
}

/// One evaluated metric; `Display` rounds to three decimals, the stored value
/// keeps full precision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    pub value: f64,
}

impl std::fmt::Display for MetricValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = {:.3}", self.name, self.value)
    }
}

/// The four metrics evaluated on one pair of labelings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricSet {
    pub acc: f64,
    pub fm: f64,
    pub rand: f64,
    pub ari: f64,
}

impl MetricSet {
    pub fn values(&self) -> Vec<MetricValue> {
        vec![
            MetricValue { name: "acc".into(), value: self.acc },
            MetricValue { name: "fm".into(), value: self.fm },
            MetricValue { name: "rand".into(), value: self.rand },
            MetricValue { name: "ari".into(), value: self.ari },
        ]
    }
}

/// Evaluates all four metrics for a predicted labeling against ground truth.
pub fn evaluate(y_true: &[usize], y_pred: &[usize]) -> Result<MetricSet> {
    let table = ContingencyTable::from_labels(y_true, y_pred)?;
    Ok(MetricSet {
        acc: table.accuracy(),
        fm: table.fowlkes_mallows(),
        rand: table.rand_index(),
        ari: table.adjusted_rand(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(y_true: &[usize], y_pred: &[usize]) -> ContingencyTable {
        ContingencyTable::from_labels(y_true, y_pred).unwrap()
    }

    #[test]
    fn contingency_counts_and_pairs() {
        let t = table(&[0, 0, 1, 1], &[0, 1, 0, 1]);
        assert_eq!(t.counts, ndarray::array![[1, 1], [1, 1]]);
        let p = t.pair_counts();
        assert_eq!(p, PairCounts { tp: 0, fp: 2, fn_: 2, tn: 2 });
        assert_eq!(p.total(), 6);
    }

    #[test]
    fn identical_partitions_score_one_everywhere() {
        let y = [0, 0, 1, 1, 2, 2];
        let m = evaluate(&y, &y).unwrap();
        assert_eq!(m.acc, 1.0);
        assert_eq!(m.fm, 1.0);
        assert_eq!(m.rand, 1.0);
        assert_eq!(m.ari, 1.0);
    }

    #[test]
    fn relabeling_is_free() {
        let y_true = [0, 0, 1, 1, 2, 2];
        let y_pred = [2, 2, 0, 0, 1, 1];
        let m = evaluate(&y_true, &y_pred).unwrap();
        assert_eq!(m.acc, 1.0);
        assert_eq!(m.ari, 1.0);
    }

    #[test]
    fn accuracy_hand_case() {
        // Best bijection matches 5 of 6 samples.
        let m = evaluate(&[0, 0, 1, 1, 2, 2], &[0, 0, 1, 2, 2, 2]).unwrap();
        assert_eq!(m.acc, 5.0 / 6.0);
    }

    #[test]
    fn accuracy_more_clusters_than_classes() {
        // Two classes, four singleton-ish clusters: only two clusters can be
        // matched, the rest contribute zero.
        let m = evaluate(&[0, 0, 0, 1], &[0, 1, 2, 3]).unwrap();
        assert_eq!(m.acc, 2.0 / 4.0);
    }

    #[test]
    fn fowlkes_mallows_hand_case() {
        let m = evaluate(&[0, 0, 0, 1, 1], &[0, 0, 1, 1, 1]).unwrap();
        assert_eq!(m.fm, 0.5);
    }

    #[test]
    fn fowlkes_mallows_zero_when_no_true_positive_pairs() {
        let m = evaluate(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(m.fm, 0.0);
    }

    #[test]
    fn rand_and_adjusted_rand_hand_case() {
        let m = evaluate(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(m.rand, 1.0 / 3.0);
        assert_eq!(m.ari, -0.5);
    }

    #[test]
    fn adjusted_rand_degenerate_single_cluster() {
        let m = evaluate(&[0, 0, 0], &[1, 1, 1]).unwrap();
        assert_eq!(m.ari, 1.0);
        assert_eq!(m.acc, 1.0);
    }

    #[test]
    fn adjusted_rand_degenerate_all_singletons() {
        let m = evaluate(&[0, 1, 2, 3], &[3, 2, 1, 0]).unwrap();
        assert_eq!(m.ari, 1.0);
    }

    #[test]
    fn length_mismatch_and_tiny_inputs_are_rejected() {
        assert!(ContingencyTable::from_labels(&[0, 1], &[0]).is_err());
        assert!(ContingencyTable::from_labels(&[0], &[0]).is_err());
        assert!(ContingencyTable::from_labels(&[], &[]).is_err());
    }

    #[test]
    fn display_rounds_to_three_decimals() {
        let v = MetricValue { name: "acc".into(), value: 2.0 / 3.0 };
        assert_eq!(v.to_string(), "acc = 0.667");
        assert_eq!(v.value, 2.0 / 3.0);
    }

    /// Brute-force maximum agreement over all injective maps from the smaller
    /// label side into the larger, used to pin the Hungarian solver.
    fn brute_force_agreement(counts: &Array2<u64>) -> u64 {
        fn recurse(counts: &Array2<u64>, row: usize, used: &mut Vec<bool>, transposed: bool) -> u64 {
            let rows = counts.nrows();
            if row == rows {
                return 0;
            }
            let mut best = 0;
            for col in 0..counts.ncols() {
                if !used[col] {
                    used[col] = true;
                    let cell = if transposed { counts[(row, col)] } else { counts[(row, col)] };
                    best = best.max(cell + recurse(counts, row + 1, used, transposed));
                    used[col] = false;
                }
            }
            best
        }
        // Enumerate injections from the smaller side to keep the recursion
        // total; agreement is symmetric under transposition.
        if counts.nrows() <= counts.ncols() {
            let mut used = vec![false; counts.ncols()];
            recurse(counts, 0, &mut used, false)
        } else {
            let t = counts.t().to_owned();
            let mut used = vec![false; t.ncols()];
            recurse(&t, 0, &mut used, true)
        }
    }

    #[test]
    fn hungarian_matches_brute_force_on_random_tables() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(07_2020);
        for _ in 0..300 {
            let rows = rng.random_range(1..=6);
            let cols = rng.random_range(1..=6);
            let counts = Array2::from_shape_fn((rows, cols), |_| rng.random_range(0..20u64));
            assert_eq!(
                max_assignment_agreement(&counts),
                brute_force_agreement(&counts),
                "assignment mismatch on table {counts:?}"
            );
        }
    }

    #[test]
    fn accuracy_dominates_largest_cell() {
        // Any single (class, cluster) cell can always be matched, so the
        // optimum is at least the largest cell.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..40);
            let y_true: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let y_pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
            let t = table(&y_true, &y_pred);
            let largest = *t.counts.iter().max().unwrap();
            assert!(t.accuracy() >= largest as f64 / n as f64 - 1e-15);
        }
    }
}
