//! End-to-end experiment orchestration: dataset preparation, per-fold
//! supervised or unsupervised reduction, clustering of the held-out rows,
//! evaluation, and report assembly.

use ndarray::Array2;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Mutex;

use crate::cluster::{Rmkmc, StrategyRegistry};
use crate::error::{Error, Result};
use crate::imaging::{extract_roi, list_image_files, median_filter, normalize_linear, read_image, GrayImage, RoiSpec};
use crate::io;
use crate::metrics::{evaluate, MetricSet};
use crate::pipeline::config::{DataConfig, ExperimentConfig, PreprocessConfig, ReductionMethod};
use crate::pipeline::report::{AlgorithmColumn, EvalReport, FoldRecord, ReportCell};
use crate::pipeline::split::{stratified_folds, Fold};
use crate::pipeline::synth::{corpus_sample_ids, generate_synthetic_corpus};
use crate::reduce::{lda_fit, pca_fit};
use crate::seed;
use crate::views::{build_dataset, MultiViewDataset};

/// Records which dataset rows a pipeline stage materializes, so tests can
/// assert that model fitting never touches held-out rows.
#[derive(Debug, Default)]
pub struct AccessLog {
    rows: Mutex<BTreeSet<usize>>,
}

impl AccessLog {
    pub fn record(&self, row: usize) {
        self.rows.lock().expect("access log lock").insert(row);
    }

    /// Sorted snapshot of every recorded row index.
    pub fn snapshot(&self) -> Vec<usize> {
        self.rows.lock().expect("access log lock").iter().copied().collect()
    }
}

/// Copies the requested rows of a view matrix into a dense submatrix,
/// recording each row index in `log` when one is given.
fn gather_rows(view: &Array2<f64>, indices: &[usize], log: Option<&AccessLog>) -> Array2<f64> {
    let mut out = Array2::zeros((indices.len(), view.ncols()));
    for (r, &i) in indices.iter().enumerate() {
        if let Some(log) = log {
            log.record(i);
        }
        out.row_mut(r).assign(&view.row(i));
    }
    out
}

/// Order-sensitive fingerprint of a matrix's shape and exact bit patterns
/// (64-bit FNV-1a). Equal hashes across runs certify bit-identical
/// intermediates.
pub fn hash_matrix(m: &Array2<f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    mix(m.nrows() as u64);
    mix(m.ncols() as u64);
    for v in m.iter() {
        mix(v.to_bits());
    }
    drop(mix);
    h
}

/// Median denoising, linear intensity normalization, then
/// region-of-interest extraction.
pub fn preprocess_image(img: &GrayImage, config: &PreprocessConfig) -> Result<GrayImage> {
    let filtered =
        if config.median_radius > 0 { median_filter(img, config.median_radius) } else { img.clone() };
    let normalized = normalize_linear(&filtered);
    extract_roi(&normalized, &RoiSpec::Auto { threshold: config.roi_threshold })
}

/// Loads or generates the corpus named by the config, preprocesses every
/// image, and assembles the multi-view feature dataset. Relative paths in
/// the config resolve against `base`.
pub fn prepare_dataset(config: &ExperimentConfig, base: &Path) -> Result<MultiViewDataset> {
    let view_config = config.views.to_view_config();
    match &config.data {
        DataConfig::Synthetic { spec } => {
            // Mix the master seed into the corpus seed so different master
            // seeds draw genuinely different corpora.
            let mut spec = spec.clone();
            spec.seed = seed::derive(config.master_seed, &[seed::tag("corpus"), spec.seed]);
            let (images, labels) = generate_synthetic_corpus(&spec)?;
            let ids = corpus_sample_ids(&spec);
            let rois = images
                .iter()
                .map(|img| preprocess_image(img, &config.preprocess))
                .collect::<Result<Vec<_>>>()?;
            build_dataset(&rois, Some(&labels), &ids, &view_config)
        }
        DataConfig::Images { image_dir, labels_file } => {
            let paths = list_image_files(&io::resolve_path(base, image_dir))?;
            let ids: Vec<String> = paths
                .iter()
                .map(|p| p.file_stem().unwrap_or_default().to_string_lossy().into_owned())
                .collect();
            let rois = paths
                .iter()
                .map(|p| preprocess_image(&read_image(p)?, &config.preprocess))
                .collect::<Result<Vec<_>>>()?;
            let (label_ids, labels) = io::read_labels_csv(&io::resolve_path(base, labels_file))?;
            let labels = io::align_labels(&ids, &label_ids, &labels)?;
            build_dataset(&rois, Some(&labels), &ids, &view_config)
        }
        DataConfig::Views { views_dir } => io::load_dataset(&io::resolve_path(base, views_dir)),
    }
}

struct FoldOutcome {
    /// Per-view, per-algorithm metrics in registry order.
    single: Vec<Vec<MetricSet>>,
    consensus: Option<MetricSet>,
    alpha: Option<Vec<f64>>,
    record: FoldRecord,
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    config: &ExperimentConfig,
    method: ReductionMethod,
    dataset: &MultiViewDataset,
    labels: &[usize],
    registry: &StrategyRegistry,
    rmkmc: Option<&Rmkmc>,
    fold_index: usize,
    fold: &Fold,
) -> Result<FoldOutcome> {
    let fit_log = AccessLog::default();
    let train_labels: Vec<usize> = fold.train.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<usize> = fold.test.iter().map(|&i| labels[i]).collect();
    let transductive_fit = method == ReductionMethod::Pca && config.reduction.transductive_fit;
    let cluster_rows: Vec<usize> = if config.clustering.transductive {
        fold.train.iter().chain(&fold.test).copied().collect()
    } else {
        fold.test.clone()
    };
    // When clustering transductively the held-out rows sit at the tail.
    let eval_offset = cluster_rows.len() - fold.test.len();

    // Fit each view's reduction on the labeled split (or, for the optional
    // transductive unsupervised variant, on all rows) and project the rows
    // to be clustered. Fit-phase reads are logged; the projection of the
    // clustering rows is apply-phase and is not.
    let reduced: Vec<Array2<f64>> = dataset
        .views
        .par_iter()
        .map(|view| {
            let model = match method {
                ReductionMethod::Lda => lda_fit(
                    &gather_rows(&view.data, &fold.train, Some(&fit_log)),
                    &train_labels,
                    config.reduction.k,
                    config.reduction.ridge,
                )?,
                ReductionMethod::Pca => {
                    let fit_rows: Vec<usize> = if transductive_fit {
                        fold.train.iter().chain(&fold.test).copied().collect()
                    } else {
                        fold.train.clone()
                    };
                    pca_fit(&gather_rows(&view.data, &fit_rows, Some(&fit_log)), config.reduction.k)?
                }
            };
            model.transform(&gather_rows(&view.data, &cluster_rows, None))
        })
        .collect::<Result<Vec<_>>>()?;

    let k = config.clustering.k;
    let single: Vec<Vec<MetricSet>> = reduced
        .par_iter()
        .enumerate()
        .map(|(v, w)| {
            registry
                .iter()
                .map(|strategy| {
                    let run_seed = seed::derive(
                        config.master_seed,
                        &[
                            seed::tag("cluster"),
                            fold_index as u64,
                            v as u64,
                            seed::tag(strategy.id()),
                        ],
                    );
                    let assignment = strategy.cluster(w, k, run_seed)?;
                    evaluate(&test_labels, &assignment.labels[eval_offset..])
                })
                .collect::<Result<Vec<MetricSet>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let (consensus, alpha) = match rmkmc {
        Some(r) => {
            let run_seed =
                seed::derive(config.master_seed, &[seed::tag("rmkmc"), fold_index as u64]);
            let outcome = r.fit(&reduced, k, run_seed)?;
            (
                Some(evaluate(&test_labels, &outcome.assignment.labels[eval_offset..])?),
                Some(outcome.alpha),
            )
        }
        None => (None, None),
    };

    let record = FoldRecord {
        fold: fold_index,
        train: fold.train.clone(),
        test: fold.test.clone(),
        fit_reads: fit_log.snapshot(),
        reduced_view_hashes: reduced.iter().map(hash_matrix).collect(),
    };
    Ok(FoldOutcome { single, consensus, alpha, record })
}

/// Runs the cross-validated experiment on an already-prepared dataset with
/// the given reduction method, sharing each fold's reduced views between
/// the single-view algorithms and the multi-view consensus.
pub fn run_on_dataset(
    config: &ExperimentConfig,
    method: ReductionMethod,
    dataset: &MultiViewDataset,
) -> Result<EvalReport> {
    config.validate()?;
    let labels = dataset
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("cross-validated experiments require labeled data"))?;
    let n_classes = dataset.n_classes().unwrap_or(0);
    if method == ReductionMethod::Lda && config.reduction.k + 1 > n_classes {
        return Err(Error::invalid(format!(
            "discriminant reduction to {} dimensions needs at least {} classes, dataset has {n_classes}",
            config.reduction.k,
            config.reduction.k + 1
        )));
    }
    let registry = config.build_registry()?;
    let rmkmc = if config.clustering.rmkmc { Some(config.build_rmkmc()?) } else { None };
    let split_seed = seed::derive(config.master_seed, &[seed::tag("split")]);
    let plan = stratified_folds(labels, config.split.fold_count, split_seed)?;

    let mut outcomes = Vec::with_capacity(plan.folds.len());
    for (f, fold) in plan.folds.iter().enumerate() {
        let outcome =
            run_fold(config, method, dataset, labels, &registry, rmkmc.as_ref(), f, fold)
                .map_err(|e| e.in_fold(f))?;
        outcomes.push(outcome);
    }

    let view_names: Vec<String> = dataset.views.iter().map(|v| v.name.clone()).collect();
    let algorithms: Vec<AlgorithmColumn> = registry
        .iter()
        .map(|s| AlgorithmColumn { id: s.id().to_string(), label: s.label().to_string() })
        .collect();
    let mut cells = Vec::with_capacity(view_names.len() * algorithms.len());
    for (v, view) in view_names.iter().enumerate() {
        for (a, algo) in algorithms.iter().enumerate() {
            let sets: Vec<MetricSet> = outcomes.iter().map(|o| o.single[v][a]).collect();
            cells.push(ReportCell::from_sets(view, &algo.id, &sets));
        }
    }
    let consensus = rmkmc.as_ref().map(|_| {
        let sets: Vec<MetricSet> =
            outcomes.iter().map(|o| o.consensus.expect("consensus enabled")).collect();
        ReportCell::from_sets("multi-view", "rmkmc", &sets)
    });
    let alpha = rmkmc.as_ref().map(|_| {
        outcomes.iter().map(|o| o.alpha.clone().expect("consensus enabled")).collect()
    });
    let folds = outcomes.into_iter().map(|o| o.record).collect();

    EvalReport::assemble(
        method.to_string(),
        config.split.fold_count,
        config.master_seed,
        view_names,
        algorithms,
        cells,
        consensus,
        alpha,
        folds,
        config.echo(),
    )
}

fn run_with(config: &ExperimentConfig, base: &Path, method: ReductionMethod) -> Result<EvalReport> {
    config.validate()?;
    let dataset = prepare_dataset(config, base)?;
    run_on_dataset(config, method, &dataset)
}

/// Full semi-supervised experiment: per fold and view, a discriminant
/// projection is fitted on the labeled split and the held-out rows are
/// projected, clustered by every configured algorithm, and scored against
/// the held-out truth; the multi-view consensus runs on the same projected
/// views.
pub fn run_smc(config: &ExperimentConfig, base: &Path) -> Result<EvalReport> {
    run_with(config, base, ReductionMethod::Lda)
}

/// Unsupervised baseline: the identical flow with a principal-component
/// projection fitted without labels replacing the discriminant step.
pub fn run_ucp(config: &ExperimentConfig, base: &Path) -> Result<EvalReport> {
    run_with(config, base, ReductionMethod::Pca)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::SplitConfig;
    use crate::pipeline::synth::SynthSpec;

    fn tiny_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.data = DataConfig::Synthetic {
            spec: SynthSpec { n_per_class: 6, image_size: 12, margin: 4, ..SynthSpec::default() },
        };
        config.split = SplitConfig { fold_count: 2, labeled_fraction: 0.5 };
        config
    }

    #[test]
    fn report_grid_covers_every_view_algorithm_and_fold() {
        let config = tiny_config();
        let dataset = prepare_dataset(&config, Path::new(".")).unwrap();
        let report = run_on_dataset(&config, ReductionMethod::Lda, &dataset).unwrap();
        assert_eq!(report.reduction, "lda");
        assert_eq!(report.view_names.len(), 7);
        assert_eq!(report.algorithms.len(), 6);
        assert_eq!(report.cells.len(), 42);
        assert!(report.cells.iter().all(|c| c.acc.raw.len() == 2));
        let consensus = report.consensus.as_ref().unwrap();
        assert_eq!(consensus.acc.raw.len(), 2);
        let alpha = report.alpha.as_ref().unwrap();
        assert_eq!(alpha.len(), 2);
        assert!(alpha.iter().all(|row| row.len() == 7));
        assert!(report.folds.iter().all(|f| f.reduced_view_hashes.len() == 7));
        report.validate().unwrap();
    }

    #[test]
    fn fitting_reads_exactly_the_training_rows() {
        let config = tiny_config();
        let dataset = prepare_dataset(&config, Path::new(".")).unwrap();
        let report = run_on_dataset(&config, ReductionMethod::Lda, &dataset).unwrap();
        for fold in &report.folds {
            let mut train = fold.train.clone();
            train.sort_unstable();
            assert_eq!(fold.fit_reads, train);
            assert!(fold.test.iter().all(|t| !fold.fit_reads.contains(t)));
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let config = tiny_config();
        let a = run_smc(&config, Path::new(".")).unwrap();
        let b = run_smc(&config, Path::new(".")).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        for (fa, fb) in a.folds.iter().zip(&b.folds) {
            assert_eq!(fa.reduced_view_hashes, fb.reduced_view_hashes);
        }
    }

    #[test]
    fn unsupervised_baseline_shares_the_schema() {
        let mut config = tiny_config();
        let dataset = prepare_dataset(&config, Path::new(".")).unwrap();
        let ucp = run_on_dataset(&config, ReductionMethod::Pca, &dataset).unwrap();
        assert_eq!(ucp.reduction, "pca");
        assert_eq!(ucp.cells.len(), 42);
        for fold in &ucp.folds {
            assert!(fold.test.iter().all(|t| !fold.fit_reads.contains(t)));
        }
        // The optional transductive unsupervised fit honestly reports its
        // held-out reads.
        config.reduction.method = crate::pipeline::config::ReductionMethod::Pca;
        config.reduction.transductive_fit = true;
        let trans = run_on_dataset(&config, ReductionMethod::Pca, &dataset).unwrap();
        for fold in &trans.folds {
            assert!(fold.test.iter().all(|t| fold.fit_reads.contains(t)));
        }
    }

    #[test]
    fn discriminant_dimension_is_bounded_by_class_count() {
        let mut config = tiny_config();
        config.reduction.k = 3; // three classes allow at most two dimensions
        let dataset = prepare_dataset(&config, Path::new(".")).unwrap();
        let err = run_on_dataset(&config, ReductionMethod::Lda, &dataset).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err}");
    }

    #[test]
    fn transductive_clustering_still_scores_held_out_rows() {
        let mut config = tiny_config();
        config.clustering.transductive = true;
        let report = run_smc(&config, Path::new(".")).unwrap();
        report.validate().unwrap();
        assert!(report.cells.iter().all(|c| c.acc.raw.len() == 2));
    }

    #[test]
    fn master_seed_changes_the_corpus_and_the_results() {
        let config = tiny_config();
        let mut other = tiny_config();
        other.master_seed = 43;
        let a = prepare_dataset(&config, Path::new(".")).unwrap();
        let b = prepare_dataset(&other, Path::new(".")).unwrap();
        assert_ne!(
            hash_matrix(&a.views[0].data),
            hash_matrix(&b.views[0].data),
            "different master seeds must draw different corpora"
        );
    }
}
