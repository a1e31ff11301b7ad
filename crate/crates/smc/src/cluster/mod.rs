//! Clustering algorithms.
//!
//! The six single-view algorithms all implement [`ClusteringStrategy`] and
//! live in a [`StrategyRegistry`] keyed by name, so callers (CLI flags,
//! experiment configs) select them at runtime without knowing concrete
//! types. The multi-view consensus algorithm ([`rmkmc::Rmkmc`]) consumes
//! several views at once and therefore has its own entry point rather than a
//! registry slot.
//!
//! Every algorithm is deterministic given (input, seed): reruns produce
//! bit-identical assignments.

pub mod agglomerative;
pub mod birch;
pub mod gmm;
pub mod kmeans;
pub mod kmedoids;
pub mod rmkmc;
pub mod spectral;

use ndarray::Array2;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub use agglomerative::Agglomerative;
pub use birch::Birch;
pub use gmm::Gmm;
pub use kmeans::KMeans;
pub use kmedoids::KMedoids;
pub use rmkmc::{Rmkmc, RmkmcOutcome};
pub use spectral::{Affinity, Spectral};

/// The result of one clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Per-sample cluster index in [0, k).
    pub labels: Vec<usize>,
    /// Number of clusters that were requested.
    pub k: usize,
    /// Objective value per iteration for iterative algorithms (within-cluster
    /// sum of squares, negative log-likelihood, or weighted residual);
    /// empty for non-iterative algorithms.
    pub objective_trace: Vec<f64>,
    /// Seed the run was invoked with.
    pub seed: u64,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize, objective_trace: Vec<f64>, seed: u64) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!(
                "cluster label {bad} out of range for k = {k}"
            )));
        }
        Ok(ClusterAssignment { labels, k, objective_trace, seed })
    }

    /// Final objective value, when the algorithm reports one.
    pub fn objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }
}

/// A single-view clustering algorithm selectable by name.
pub trait ClusteringStrategy: Send + Sync {
    /// Canonical lowercase identifier used for registry lookup.
    fn id(&self) -> &'static str;

    /// Column label used in reports.
    fn label(&self) -> &'static str;

    /// Partitions the rows of `data` into `k` clusters.
    fn cluster(&self, data: &Array2<f64>, k: usize, seed: u64) -> Result<ClusterAssignment>;
}

/// Named collection of clustering strategies.
pub struct StrategyRegistry {
    entries: Vec<Box<dyn ClusteringStrategy>>,
}

/// Canonical report order of the six standard algorithms.
pub const STANDARD_ALGORITHMS: [&str; 6] =
    ["gmm", "kmeans", "kmedoids", "agglomerative", "birch", "spectral"];

fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| *c != '-' && *c != '_' && !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase()
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry { entries: Vec::new() }
    }

    /// The six standard algorithms with default options, in report order.
    pub fn standard() -> Self {
        let mut reg = Self::empty();
        for id in STANDARD_ALGORITHMS {
            reg.register(build_strategy(id, &BTreeMap::new()).expect("defaults are valid"))
                .expect("standard ids are distinct");
        }
        reg
    }

    /// Registers a strategy; its id (and label) must not collide with an
    /// existing entry.
    pub fn register(&mut self, strategy: Box<dyn ClusteringStrategy>) -> Result<()> {
        let id = normalize_name(strategy.id());
        let label = normalize_name(strategy.label());
        for existing in &self.entries {
            let eid = normalize_name(existing.id());
            let elabel = normalize_name(existing.label());
            if eid == id || elabel == label {
                return Err(Error::invalid(format!(
                    "a strategy named {} is already registered",
                    strategy.id()
                )));
            }
        }
        self.entries.push(strategy);
        Ok(())
    }

    /// Looks a strategy up by id or report label; names are matched
    /// case-insensitively ignoring '-', '_' and whitespace, so "K-Means",
    /// "kmeans" and "k_means" are the same algorithm.
    pub fn get(&self, name: &str) -> Option<&dyn ClusteringStrategy> {
        let wanted = normalize_name(name);
        self.entries
            .iter()
            .find(|s| normalize_name(s.id()) == wanted || normalize_name(s.label()) == wanted)
            .map(|s| s.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn ClusteringStrategy> {
        self.entries.iter().map(|s| s.as_ref())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.id()).collect()
    }
}

/// Builds one strategy by id with string-typed options (as parsed from CLI
/// `--opt key=value` flags or config tables). Unknown ids and unknown option
/// keys are rejected with the list of valid choices.
pub fn build_strategy(
    id: &str,
    opts: &BTreeMap<String, String>,
) -> Result<Box<dyn ClusteringStrategy>> {
    match normalize_name(id).as_str() {
        "gmm" => Ok(Box::new(Gmm::from_options(opts)?)),
        "kmeans" => Ok(Box::new(KMeans::from_options(opts)?)),
        "kmedoids" => Ok(Box::new(KMedoids::from_options(opts)?)),
        "agglomerative" | "ac" => Ok(Box::new(Agglomerative::from_options(opts)?)),
        "birch" => Ok(Box::new(Birch::from_options(opts)?)),
        "spectral" | "sc" => Ok(Box::new(Spectral::from_options(opts)?)),
        other => Err(Error::invalid(format!(
            "unknown clustering algorithm '{other}'; expected one of {STANDARD_ALGORITHMS:?}"
        ))),
    }
}

pub(crate) struct OptionParser<'a> {
    opts: &'a BTreeMap<String, String>,
    known: Vec<&'static str>,
}

impl<'a> OptionParser<'a> {
    pub(crate) fn new(opts: &'a BTreeMap<String, String>) -> Self {
        OptionParser { opts, known: Vec::new() }
    }

    pub(crate) fn parse<T: std::str::FromStr>(&mut self, key: &'static str, default: T) -> Result<T> {
        self.known.push(key);
        match self.opts.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse::<T>().map_err(|_| {
                Error::invalid(format!("option {key}={raw} is not a valid value"))
            }),
        }
    }

    pub(crate) fn parse_str(&mut self, key: &'static str, default: &str) -> String {
        self.known.push(key);
        self.opts.get(key).cloned().unwrap_or_else(|| default.to_string())
    }

    /// Must be called last: rejects options that no `parse` call consumed.
    pub(crate) fn finish(self) -> Result<()> {
        for key in self.opts.keys() {
            if !self.known.contains(&key.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown option '{key}'; valid options: {:?}",
                    self.known
                )));
            }
        }
        Ok(())
    }
}

/// Common input validation for single-view algorithms.
pub(crate) fn validate_input(data: &Array2<f64>, k: usize) -> Result<()> {
    let (n, d) = data.dim();
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!("cannot cluster an empty {n}x{d} matrix")));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "k must lie in 1..={n} for {n} samples, got {k}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("data contains a non-finite value"));
    }
    Ok(())
}

#[inline]
pub(crate) fn sq_distance(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense matrix of pairwise Euclidean distances.
pub(crate) fn pairwise_distances(data: &Array2<f64>) -> Array2<f64> {
    let n = data.nrows();
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = sq_distance(data.row(i), data.row(j)).sqrt();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_standard_holds_six_in_report_order() {
        let reg = StrategyRegistry::standard();
        assert_eq!(reg.len(), 6);
        let labels: Vec<&str> = reg.iter().map(|s| s.label()).collect();
        assert_eq!(labels, vec!["GMM", "K-Means", "K-Medoids", "AC", "Birch", "SC"]);
    }

    #[test]
    fn registry_lookup_tolerates_aliases() {
        let reg = StrategyRegistry::standard();
        assert_eq!(reg.get("K-Means").unwrap().id(), "kmeans");
        assert_eq!(reg.get("k_means").unwrap().id(), "kmeans");
        assert_eq!(reg.get("AC").unwrap().id(), "agglomerative");
        assert_eq!(reg.get("sc").unwrap().id(), "spectral");
        assert_eq!(reg.get("SPECTRAL").unwrap().id(), "spectral");
        assert!(reg.get("dbscan").is_none());
    }

    #[test]
    fn registry_rejects_duplicate_registration() {
        let mut reg = StrategyRegistry::standard();
        let dup = build_strategy("kmeans", &BTreeMap::new()).unwrap();
        assert!(reg.register(dup).is_err());
    }

    #[test]
    fn build_strategy_rejects_unknown_names_and_options() {
        assert!(build_strategy("mystery", &BTreeMap::new()).is_err());
        let mut opts = BTreeMap::new();
        opts.insert("warp_factor".to_string(), "9".to_string());
        assert!(build_strategy("kmeans", &opts).is_err());
    }

    #[test]
    fn assignment_validates_label_range() {
        assert!(ClusterAssignment::new(vec![0, 1, 2], 3, vec![], 0).is_ok());
        assert!(ClusterAssignment::new(vec![0, 3], 3, vec![], 0).is_err());
    }

    #[test]
    fn validate_input_catches_bad_shapes() {
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(validate_input(&empty, 1).is_err());
        let data = Array2::<f64>::zeros((3, 2));
        assert!(validate_input(&data, 0).is_err());
        assert!(validate_input(&data, 4).is_err());
        assert!(validate_input(&data, 3).is_ok());
        let mut nan = data.clone();
        nan[(0, 0)] = f64::NAN;
        assert!(validate_input(&nan, 2).is_err());
    }
}
