//! Gaussian mixture model fitted by expectation-maximization.

use ndarray::{Array1, Array2};
use std::collections::BTreeMap;

use crate::cluster::kmeans::kmeans_fit;
use crate::cluster::{validate_input, ClusterAssignment, ClusteringStrategy, OptionParser};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_lower};
use crate::seed;

/// Full-covariance Gaussian mixture. Components are seeded from a k-means
/// partition, then refined by EM; points take the component with the largest
/// posterior responsibility. The objective trace records the mean negative
/// log-likelihood at each E step.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub max_iter: usize,
    pub tol: f64,
    /// Ridge added to every covariance diagonal, keeping components
    /// invertible when a cluster collapses onto a subspace.
    pub cov_reg: f64,
}

impl Default for Gmm {
    fn default() -> Self {
        Gmm { max_iter: 200, tol: 1e-7, cov_reg: 1e-6 }
    }
}

impl Gmm {
    pub fn from_options(opts: &BTreeMap<String, String>) -> Result<Self> {
        let mut p = OptionParser::new(opts);
        let me = Gmm {
            max_iter: p.parse("max_iter", 200)?,
            tol: p.parse("tol", 1e-7)?,
            cov_reg: p.parse("cov_reg", 1e-6)?,
        };
        p.finish()?;
        Ok(me)
    }
}

struct Component {
    weight: f64,
    mean: Array1<f64>,
    /// Lower Cholesky factor of the covariance.
    chol: Array2<f64>,
    log_det: f64,
}

impl Component {
    fn from_moments(weight: f64, mean: Array1<f64>, cov: &Array2<f64>) -> Result<Self> {
        let chol = cholesky(cov).map_err(|_| {
            Error::Numerical("mixture covariance is not positive definite".into())
        })?;
        let log_det = 2.0 * (0..chol.nrows()).map(|i| chol[(i, i)].ln()).sum::<f64>();
        Ok(Component { weight, mean, chol, log_det })
    }

    fn log_density(&self, x: ndarray::ArrayView1<'_, f64>) -> f64 {
        let d = self.mean.len();
        let diff = Array1::from_iter(x.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        let z = solve_lower(&self.chol, &diff);
        let mahalanobis = z.iter().map(|v| v * v).sum::<f64>();
        -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + self.log_det + mahalanobis)
    }
}

fn weighted_moments(
    data: &Array2<f64>,
    resp: &Array2<f64>,
    comp: usize,
    cov_reg: f64,
) -> (f64, Array1<f64>, Array2<f64>) {
    let (n, d) = data.dim();
    let nk: f64 = (0..n).map(|i| resp[(i, comp)]).sum();
    let mut mean = Array1::<f64>::zeros(d);
    for i in 0..n {
        let r = resp[(i, comp)];
        for j in 0..d {
            mean[j] += r * data[(i, j)];
        }
    }
    mean.mapv_inplace(|v| v / nk);
    let mut cov = Array2::<f64>::zeros((d, d));
    for i in 0..n {
        let r = resp[(i, comp)];
        if r == 0.0 {
            continue;
        }
        for a in 0..d {
            let da = data[(i, a)] - mean[a];
            for b in a..d {
                cov[(a, b)] += r * da * (data[(i, b)] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / nk;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
        cov[(a, a)] += cov_reg;
    }
    (nk / n as f64, mean, cov)
}

impl ClusteringStrategy for Gmm {
    fn id(&self) -> &'static str {
        "gmm"
    }

    fn label(&self) -> &'static str {
        "GMM"
    }

    fn cluster(&self, data: &Array2<f64>, k: usize, run_seed: u64) -> Result<ClusterAssignment> {
        validate_input(data, k)?;
        if self.cov_reg <= 0.0 {
            return Err(Error::invalid("cov_reg must be positive"));
        }
        let (n, _) = data.dim();

        // Hard k-means responsibilities seed the first M step.
        let init = kmeans_fit(data, k, seed::derive(run_seed, &[seed::tag("gmm-init")]), 4, 50, 1e-9)?;
        let mut resp = Array2::<f64>::zeros((n, k));
        for (i, &l) in init.labels.iter().enumerate() {
            resp[(i, l)] = 1.0;
        }
        // Guard against an (impossible after refill) empty column by mixing
        // in a tiny uniform floor, then renormalizing rows.
        for i in 0..n {
            let mut row_sum = 0.0;
            for c in 0..k {
                resp[(i, c)] += 1e-6;
                row_sum += resp[(i, c)];
            }
            for c in 0..k {
                resp[(i, c)] /= row_sum;
            }
        }

        let mut components: Vec<Component> = Vec::with_capacity(k);
        let mut trace = Vec::new();
        let mut log_resp_buf = vec![0.0f64; k];
        for _ in 0..self.max_iter.max(1) {
            // M step from current responsibilities.
            components.clear();
            for c in 0..k {
                let (w, mean, cov) = weighted_moments(data, &resp, c, self.cov_reg);
                components.push(Component::from_moments(w, mean, &cov)?);
            }

            // E step: responsibilities and the mean negative log-likelihood.
            let mut nll = 0.0;
            for i in 0..n {
                let mut max_term = f64::NEG_INFINITY;
                for (c, comp) in components.iter().enumerate() {
                    let term = comp.weight.ln() + comp.log_density(data.row(i));
                    log_resp_buf[c] = term;
                    if term > max_term {
                        max_term = term;
                    }
                }
                let sum_exp: f64 = log_resp_buf.iter().map(|t| (t - max_term).exp()).sum();
                let log_norm = max_term + sum_exp.ln();
                nll -= log_norm;
                for c in 0..k {
                    resp[(i, c)] = (log_resp_buf[c] - log_norm).exp();
                }
            }
            nll /= n as f64;
            let converged = trace
                .last()
                .is_some_and(|&prev: &f64| (prev - nll).abs() <= self.tol * prev.abs().max(1.0));
            trace.push(nll);
            if converged {
                break;
            }
        }

        let labels: Vec<usize> = (0..n)
            .map(|i| {
                let mut best = f64::NEG_INFINITY;
                let mut best_c = 0;
                for c in 0..k {
                    if resp[(i, c)] > best {
                        best = resp[(i, c)];
                        best_c = c;
                    }
                }
                best_c
            })
            .collect();
        ClusterAssignment::new(labels, k, trace, run_seed)
    }
}
