//! Robust multi-view k-means: consensus clustering across feature views.

use ndarray::Array2;
use std::collections::BTreeMap;

use crate::cluster::kmeans::kmeans_fit;
use crate::cluster::{ClusterAssignment, OptionParser};
use crate::error::{Error, Result};
use crate::seed;

const RESIDUAL_EPS: f64 = 1e-10;

/// Robust multi-view k-means. All views observe the same `n` samples with
/// their own feature dimensions; the algorithm minimizes
///
/// ```text
///   sum_v  alpha_v^gamma * sum_i || x_i^(v) - f_{c(i)}^(v) ||_2
/// ```
///
/// over a shared assignment `c`, per-view prototypes `F^(v)`, and view
/// weights `alpha` on the probability simplex. The per-sample 2-norm (not
/// its square) makes the fit robust to outlying samples, and the learned
/// `alpha` concentrates on views whose residuals are small.
#[derive(Debug, Clone, PartialEq)]
pub struct Rmkmc {
    /// Exponent on the view weights; must exceed 1 (at 1 the weights
    /// collapse onto a single view).
    pub gamma: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Standardize each view's dimensions to zero mean and unit variance
    /// before fitting, so differently scaled views are commensurable.
    pub standardize: bool,
    /// Restarts of the k-means initialization.
    pub n_init: usize,
}

impl Default for Rmkmc {
    fn default() -> Self {
        Rmkmc { gamma: 2.0, max_iter: 100, tol: 1e-9, standardize: true, n_init: 10 }
    }
}

/// Fit result: the consensus assignment, the final view weights, and each
/// view's final summed residual.
#[derive(Debug, Clone, PartialEq)]
pub struct RmkmcOutcome {
    pub assignment: ClusterAssignment,
    pub alpha: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl Rmkmc {
    pub fn from_options(opts: &BTreeMap<String, String>) -> Result<Self> {
        let mut p = OptionParser::new(opts);
        let me = Rmkmc {
            gamma: p.parse("gamma", 2.0)?,
            max_iter: p.parse("max_iter", 100)?,
            tol: p.parse("tol", 1e-9)?,
            standardize: p.parse("standardize", true)?,
            n_init: p.parse("n_init", 10)?,
        };
        p.finish()?;
        Ok(me)
    }

    fn validate(&self, views: &[Array2<f64>], k: usize) -> Result<usize> {
        if views.is_empty() {
            return Err(Error::invalid("at least one view is required"));
        }
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!(
                "gamma must be a finite value greater than 1, got {}",
                self.gamma
            )));
        }
        let n = views[0].nrows();
        for (v, view) in views.iter().enumerate() {
            if view.nrows() != n {
                return Err(Error::invalid(format!(
                    "view {v} has {} rows but view 0 has {n}",
                    view.nrows()
                )));
            }
            if view.ncols() == 0 {
                return Err(Error::invalid(format!("view {v} has no feature columns")));
            }
            if view.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("view {v} contains a non-finite value")));
            }
        }
        if n == 0 {
            return Err(Error::invalid("views have no samples"));
        }
        if k == 0 || k > n {
            return Err(Error::invalid(format!(
                "k must lie in 1..={n} for {n} samples, got {k}"
            )));
        }
        Ok(n)
    }

    /// Runs the alternating minimization and returns the consensus
    /// assignment with the per-iteration objective as its trace.
    pub fn fit(&self, views: &[Array2<f64>], k: usize, run_seed: u64) -> Result<RmkmcOutcome> {
        let n = self.validate(views, k)?;
        let m = views.len();

        let views: Vec<Array2<f64>> = if self.standardize {
            views.iter().map(standardize_columns).collect()
        } else {
            views.to_vec()
        };

        // Initial assignment: k-means on the concatenated views.
        let total_d: usize = views.iter().map(|v| v.ncols()).sum();
        let mut concat = Array2::<f64>::zeros((n, total_d));
        let mut col = 0;
        for view in &views {
            for j in 0..view.ncols() {
                for i in 0..n {
                    concat[(i, col)] = view[(i, j)];
                }
                col += 1;
            }
        }
        let init_seed = seed::derive(run_seed, &[seed::tag("consensus-init")]);
        let mut labels = kmeans_fit(&concat, k, init_seed, self.n_init, 100, 1e-9)?.labels;
        drop(concat);

        let mut alpha = vec![1.0 / m as f64; m];
        // Per-view, per-sample residual 2-norms under the current prototypes.
        let mut residuals = vec![vec![0.0f64; n]; m];
        let mut prototypes: Vec<Array2<f64>> =
            views.iter().map(|v| Array2::<f64>::zeros((k, v.ncols()))).collect();
        let mut trace: Vec<f64> = Vec::new();

        // First prototype fit uses unweighted means (all residual weights
        // equal), which is the majorization step at equal initial residuals.
        for v in 0..m {
            update_prototypes(&views[v], &labels, &vec![1.0; n], &mut prototypes[v]);
        }
        repair_empty_clusters(&views, &labels, &mut prototypes);
        for v in 0..m {
            compute_residuals(&views[v], &prototypes[v], &labels, &mut residuals[v]);
        }

        for _ in 0..self.max_iter.max(1) {
            // Prototype step: per view, residual-reweighted means (IRLS
            // majorization of the per-sample 2-norm).
            for v in 0..m {
                let weights: Vec<f64> =
                    residuals[v].iter().map(|&r| 1.0 / (2.0 * r.max(RESIDUAL_EPS))).collect();
                update_prototypes(&views[v], &labels, &weights, &mut prototypes[v]);
            }
            repair_empty_clusters(&views, &labels, &mut prototypes);

            // Assignment step: each sample takes the weighted-nearest
            // prototype, distances combined across views by alpha^gamma.
            let weight_pow: Vec<f64> = alpha.iter().map(|a| a.powf(self.gamma)).collect();
            for i in 0..n {
                let mut best = f64::INFINITY;
                let mut best_k = 0;
                for c in 0..k {
                    let mut total = 0.0;
                    for v in 0..m {
                        total += weight_pow[v] * point_to_prototype(&views[v], i, &prototypes[v], c);
                    }
                    if total < best {
                        best = total;
                        best_k = c;
                    }
                }
                labels[i] = best_k;
            }

            // Residuals under the new assignment, then the alpha step:
            // alpha_v ∝ H_v^{1/(1-gamma)} is the exact simplex minimizer of
            // sum_v alpha_v^gamma H_v.
            let mut view_totals = vec![0.0f64; m];
            for v in 0..m {
                compute_residuals(&views[v], &prototypes[v], &labels, &mut residuals[v]);
                view_totals[v] = residuals[v].iter().sum::<f64>().max(RESIDUAL_EPS);
            }
            let exponent = 1.0 / (1.0 - self.gamma);
            let mut denom = 0.0;
            for v in 0..m {
                alpha[v] = view_totals[v].powf(exponent);
                denom += alpha[v];
            }
            for a in alpha.iter_mut() {
                *a /= denom;
            }

            let objective: f64 = (0..m)
                .map(|v| alpha[v].powf(self.gamma) * view_totals[v])
                .sum();
            let converged = trace
                .last()
                .is_some_and(|&prev: &f64| (prev - objective).abs() <= self.tol * prev.max(1.0));
            trace.push(objective);
            if converged {
                break;
            }
        }

        let view_totals: Vec<f64> = residuals.iter().map(|r| r.iter().sum()).collect();
        let assignment = ClusterAssignment::new(labels, k, trace, run_seed)?;
        Ok(RmkmcOutcome { assignment, alpha, residuals: view_totals })
    }
}

/// Zero-mean unit-variance per column; constant columns become zeros.
fn standardize_columns(view: &Array2<f64>) -> Array2<f64> {
    let (n, d) = view.dim();
    let mut out = view.clone();
    for j in 0..d {
        let mean = (0..n).map(|i| view[(i, j)]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (view[(i, j)] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd > 0.0 {
            for i in 0..n {
                out[(i, j)] = (view[(i, j)] - mean) / sd;
            }
        } else {
            for i in 0..n {
                out[(i, j)] = 0.0;
            }
        }
    }
    out
}

/// Weighted per-cluster means; clusters with zero total weight keep their
/// previous prototype (the caller repairs truly empty clusters).
fn update_prototypes(
    view: &Array2<f64>,
    labels: &[usize],
    weights: &[f64],
    prototypes: &mut Array2<f64>,
) {
    let (n, d) = view.dim();
    let k = prototypes.nrows();
    let mut weight_sum = vec![0.0f64; k];
    let mut sums = Array2::<f64>::zeros((k, d));
    for i in 0..n {
        let w = weights[i];
        weight_sum[labels[i]] += w;
        for j in 0..d {
            sums[(labels[i], j)] += w * view[(i, j)];
        }
    }
    for c in 0..k {
        if weight_sum[c] > 0.0 {
            for j in 0..d {
                prototypes[(c, j)] = sums[(c, j)] / weight_sum[c];
            }
        }
    }
}

/// Points an empty cluster's prototypes (in every view) at the sample with
/// the largest combined residual. Unassigned prototypes carry no objective
/// mass, so the move never increases the objective.
fn repair_empty_clusters(views: &[Array2<f64>], labels: &[usize], prototypes: &mut [Array2<f64>]) {
    let k = prototypes[0].nrows();
    let n = labels.len();
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut worst_i = 0;
        let mut worst = -1.0;
        for i in 0..n {
            let total: f64 = views
                .iter()
                .zip(prototypes.iter())
                .map(|(view, proto)| point_to_prototype(view, i, proto, labels[i]))
                .sum();
            if total > worst {
                worst = total;
                worst_i = i;
            }
        }
        for (view, proto) in views.iter().zip(prototypes.iter_mut()) {
            for j in 0..view.ncols() {
                proto[(c, j)] = view[(worst_i, j)];
            }
        }
    }
}

/// Euclidean distance from sample `i` to prototype `c`.
fn point_to_prototype(view: &Array2<f64>, i: usize, prototypes: &Array2<f64>, c: usize) -> f64 {
    let d = view.ncols();
    (0..d)
        .map(|j| (view[(i, j)] - prototypes[(c, j)]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn compute_residuals(
    view: &Array2<f64>,
    prototypes: &Array2<f64>,
    labels: &[usize],
    out: &mut [f64],
) {
    for (i, &l) in labels.iter().enumerate() {
        out[i] = point_to_prototype(view, i, prototypes, l);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(rng: &mut ChaCha8Rng, n_per: usize, centers: &[[f64; 2]], spread: f64) -> Array2<f64> {
        let n = n_per * centers.len();
        let mut data = Array2::<f64>::zeros((n, 2));
        for (c, center) in centers.iter().enumerate() {
            for i in 0..n_per {
                let row = c * n_per + i;
                data[(row, 0)] = center[0] + rng.random_range(-spread..spread);
                data[(row, 1)] = center[1] + rng.random_range(-spread..spread);
            }
        }
        data
    }

    #[test]
    fn single_view_weight_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let view = blobs(&mut rng, 15, &[[0.0, 0.0], [8.0, 0.0]], 0.5);
        let out = Rmkmc::default().fit(&[view], 2, 0).unwrap();
        assert_eq!(out.alpha, vec![1.0]);
    }

    #[test]
    fn duplicated_views_share_weight_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let view = blobs(&mut rng, 15, &[[0.0, 0.0], [8.0, 0.0]], 0.5);
        let copies = vec![view.clone(), view.clone(), view.clone()];
        let out = Rmkmc::default().fit(&copies, 2, 7).unwrap();
        for &a in &out.alpha {
            assert!((a - 1.0 / 3.0).abs() < 1e-6, "alpha {:?}", out.alpha);
        }
        // Identical copies add no information: consensus equals single-view.
        let single = Rmkmc::default().fit(&[view], 2, 7).unwrap();
        assert_eq!(out.assignment.labels, single.assignment.labels);
    }

    #[test]
    fn alpha_stays_on_the_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = blobs(&mut rng, 10, &[[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]], 0.8);
        let b = Array2::from_shape_fn((30, 4), |_| rng.random_range(-1.0..1.0));
        let out = Rmkmc::default().fit(&[a, b], 3, 4).unwrap();
        let sum: f64 = out.alpha.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(out.alpha.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn objective_trace_is_monotone_nonincreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let n = rng.random_range(12..40);
            let a = Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
            let b = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0));
            let out = Rmkmc::default().fit(&[a, b], 3, trial).unwrap();
            for w in out.assignment.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "objective rose: {:?}", w);
            }
        }
    }

    #[test]
    fn informative_view_outweighs_noise() {
        let mut wins = 0;
        for trial in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
            let signal = blobs(&mut rng, 12, &[[0.0, 0.0], [10.0, 0.0]], 0.3);
            let noise = Array2::from_shape_fn((24, 2), |_| rng.random_range(-3.0..3.0));
            let out = Rmkmc::default().fit(&[signal, noise], 2, trial).unwrap();
            if out.alpha[0] > out.alpha[1] {
                wins += 1;
            }
        }
        assert!(wins >= 8, "informative view won only {wins}/10 trials");
    }

    #[test]
    fn consensus_recovers_blobs_visible_in_both_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = blobs(&mut rng, 10, &[[0.0, 0.0], [6.0, 0.0], [3.0, 6.0]], 0.4);
        let b = blobs(&mut rng, 10, &[[0.0, 0.0], [0.0, 7.0], [7.0, 3.0]], 0.4);
        let out = Rmkmc::default().fit(&[a, b], 3, 2).unwrap();
        for c in 0..3 {
            let block = &out.assignment.labels[c * 10..(c + 1) * 10];
            assert!(block.iter().all(|&l| l == block[0]), "block {c} fragmented");
        }
        assert_ne!(out.assignment.labels[0], out.assignment.labels[10]);
        assert_ne!(out.assignment.labels[10], out.assignment.labels[20]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = Array2::<f64>::zeros((4, 2));
        let b = Array2::<f64>::zeros((5, 2));
        assert!(Rmkmc::default().fit(&[a.clone(), b], 2, 0).is_err());
        assert!(Rmkmc::default().fit(&[], 2, 0).is_err());
        assert!(Rmkmc { gamma: 1.0, ..Rmkmc::default() }.fit(&[a.clone()], 2, 0).is_err());
        assert!(Rmkmc::default().fit(&[a], 5, 0).is_err());
    }

    #[test]
    fn reruns_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let a = Array2::from_shape_fn((25, 3), |_| rng.random_range(-1.0..1.0));
        let b = Array2::from_shape_fn((25, 2), |_| rng.random_range(-1.0..1.0));
        let x = Rmkmc::default().fit(&[a.clone(), b.clone()], 3, 5).unwrap();
        let y = Rmkmc::default().fit(&[a, b], 3, 5).unwrap();
        assert_eq!(x, y);
        let bits_x: Vec<u64> = x.alpha.iter().map(|v| v.to_bits()).collect();
        let bits_y: Vec<u64> = y.alpha.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_x, bits_y);
    }
}
