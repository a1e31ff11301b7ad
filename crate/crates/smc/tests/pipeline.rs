//! End-to-end experiment tests on synthetic corpora: recovery of separable
//! class structure, chance-level behavior when the classes are identical,
//! feature ordering against the generating parameters, and the arithmetic
//! consistency of the emitted report.

use std::path::Path;

use smc::pipeline::{
    prepare_dataset, run_smc, ClassParams, DataConfig, ExperimentConfig, ReportCell, SynthSpec,
};
use smc::views::MultiViewDataset;
use smc::Error;

/// Corpus whose classes differ strongly in texture after per-image
/// normalization: the noise amplitude falls while the spatial correlation
/// rises, so fine-grained and smooth textures sit at opposite ends and the
/// middle class is between them on both axes.
fn separable_spec(signal: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        n_per_class: 30,
        image_size: 16,
        margin: 4,
        classes: vec![
            ClassParams { noise_std: 0.25, smooth: 0.0, gradient: 0.02, brightness: 0.55 },
            ClassParams { noise_std: 0.10, smooth: 0.5, gradient: 0.02, brightness: 0.55 },
            ClassParams { noise_std: 0.02, smooth: 1.0, gradient: 0.02, brightness: 0.55 },
        ],
        signal,
        seed,
    }
}

fn config_for(spec: SynthSpec, master_seed: u64) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.master_seed = master_seed;
    config.data = DataConfig::Synthetic { spec };
    // With hundreds of feature columns and a two-digit sample count the
    // within-class scatter is rank-deficient; a strong ridge keeps the
    // discriminant directions from chasing its null space.
    config.reduction.ridge = 3.0;
    config
}

/// Classifies every sample by its nearest class centroid over the
/// standardized, concatenated views, excluding the sample from its own
/// class centroid. The exclusion matters: with far more columns than
/// samples an in-sample centroid partly memorizes each member, which
/// inflates the score well above chance even on structureless data.
fn leave_one_out_centroid_accuracy(dataset: &MultiViewDataset) -> f64 {
    let labels = dataset.labels.as_ref().expect("synthetic corpora are labeled");
    let n = labels.len();
    let k = labels.iter().max().unwrap() + 1;

    // Standardize each column over all samples, then concatenate the views.
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for view in &dataset.views {
        for col in view.data.columns() {
            let mean = col.mean().unwrap();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            let z = col
                .iter()
                .map(|v| if std > 0.0 { (v - mean) / std } else { 0.0 })
                .collect();
            columns.push(z);
        }
    }

    let mut counts = vec![0usize; k];
    let mut centroids = vec![vec![0.0f64; columns.len()]; k];
    for i in 0..n {
        counts[labels[i]] += 1;
        for (j, col) in columns.iter().enumerate() {
            centroids[labels[i]][j] += col[i];
        }
    }
    for (c, centroid) in centroids.iter_mut().enumerate() {
        for v in centroid.iter_mut() {
            *v /= counts[c] as f64;
        }
    }

    let mut hits = 0usize;
    for i in 0..n {
        let own = labels[i];
        let distance = |c: usize| -> f64 {
            columns
                .iter()
                .enumerate()
                .map(|(j, col)| {
                    let mut cj = centroids[c][j];
                    if c == own {
                        cj = (cj * counts[c] as f64 - col[i]) / (counts[c] - 1) as f64;
                    }
                    (col[i] - cj).powi(2)
                })
                .sum()
        };
        let best = (0..k)
            .min_by(|&a, &b| distance(a).partial_cmp(&distance(b)).unwrap())
            .unwrap();
        if best == labels[i] {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

#[test]
fn separable_corpus_is_recovered_end_to_end() {
    let config = config_for(separable_spec(1.0, 7), 7);
    let dataset = prepare_dataset(&config, Path::new(".")).unwrap();

    let oracle = leave_one_out_centroid_accuracy(&dataset);
    assert!(oracle >= 0.95, "centroid oracle only reaches {oracle:.3}");

    let report = run_smc(&config, Path::new(".")).unwrap();
    let consensus = report.consensus.as_ref().expect("consensus clustering is on by default");
    assert!(
        consensus.acc.mean >= 0.95,
        "consensus accuracy {:.3} on a corpus the centroid oracle solves at {oracle:.3}",
        consensus.acc.mean
    );
}

#[test]
fn featureless_corpus_scores_at_chance() {
    // Signal 0 collapses every class onto the first one's parameters, so no
    // classifier has anything to use. The leave-one-out oracle should sit
    // near 1/3 for three classes; the band allows its sampling noise.
    let mut total = 0.0;
    for seed in 7..=9 {
        let config = config_for(separable_spec(0.0, seed), seed);
        let dataset = prepare_dataset(&config, Path::new(".")).unwrap();
        total += leave_one_out_centroid_accuracy(&dataset);
    }
    let mean = total / 3.0;
    assert!(
        (0.20..0.47).contains(&mean),
        "oracle accuracy {mean:.3} on structureless data is far from chance"
    );
}

#[test]
fn class_parameters_order_the_texture_views() {
    // The default corpus raises the noise amplitude class by class, which
    // shows up directly in the first two texture views: local contrast
    // rises with the noise and homogeneity falls.
    let mut config = ExperimentConfig::default();
    config.master_seed = 7;
    config.data = DataConfig::Synthetic { spec: SynthSpec { seed: 7, ..SynthSpec::default() } };
    let dataset = prepare_dataset(&config, Path::new(".")).unwrap();
    let labels = dataset.labels.as_ref().unwrap();
    let k = dataset.n_classes().unwrap();

    let class_means = |view: usize| -> Vec<f64> {
        let mut sums = vec![0.0f64; k];
        let mut counts = vec![0usize; k];
        for (i, row) in dataset.views[view].data.outer_iter().enumerate() {
            sums[labels[i]] += row.mean().unwrap();
            counts[labels[i]] += 1;
        }
        (0..k).map(|c| sums[c] / counts[c] as f64).collect()
    };

    assert_eq!(dataset.views[0].name, "contrast");
    assert_eq!(dataset.views[1].name, "homogeneity");
    let contrast = class_means(0);
    let homogeneity = class_means(1);
    assert!(
        contrast.windows(2).all(|w| w[0] < w[1]),
        "contrast means {contrast:?} do not rise with the noise ladder"
    );
    assert!(
        homogeneity.windows(2).all(|w| w[0] > w[1]),
        "homogeneity means {homogeneity:?} do not fall with the noise ladder"
    );
}

#[test]
fn report_statistics_recompute_from_fold_values() {
    let spec = SynthSpec { n_per_class: 10, image_size: 16, margin: 4, seed: 7, ..SynthSpec::default() };
    let mut config = config_for(spec, 7);
    config.reduction.ridge = 1e-6;
    let report = run_smc(&config, Path::new(".")).unwrap();

    fn summaries(cell: &ReportCell) -> [&smc::pipeline::MetricSummary; 4] {
        [&cell.acc, &cell.fm, &cell.rand, &cell.rand_unadjusted]
    }
    let check_cell = |cell: &ReportCell, what: &str| {
        for summary in summaries(cell) {
            assert_eq!(summary.raw.len(), report.fold_count, "{what}");
            let mean = summary.raw.iter().sum::<f64>() / summary.raw.len() as f64;
            let var = summary.raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / summary.raw.len() as f64;
            assert!((summary.mean - mean).abs() <= 1e-12, "{what}: stored mean drifts");
            assert!((summary.std - var.sqrt()).abs() <= 1e-12, "{what}: stored std drifts");
        }
    };

    for cell in &report.cells {
        check_cell(cell, &format!("cell {}/{}", cell.view, cell.algorithm));
    }
    check_cell(report.consensus.as_ref().unwrap(), "consensus");
    for cell in report.view_averages.iter().chain(&report.algorithm_averages) {
        check_cell(cell, &format!("average {}/{}", cell.view, cell.algorithm));
    }
    check_cell(&report.overall_average, "overall average");
    check_cell(report.overall_average_with_consensus.as_ref().unwrap(), "overall with consensus");

    // Average cells must hold fold-wise means of their constituents, so a
    // reader can trace any aggregate back to individual fold outcomes.
    let n_algos = report.algorithms.len();
    for (v, view_cell) in report.view_averages.iter().enumerate() {
        for f in 0..report.fold_count {
            let expect = (0..n_algos)
                .map(|a| report.cells[v * n_algos + a].acc.raw[f])
                .sum::<f64>()
                / n_algos as f64;
            assert!((view_cell.acc.raw[f] - expect).abs() <= 1e-12);
        }
    }
    for (a, algo_cell) in report.algorithm_averages.iter().enumerate() {
        for f in 0..report.fold_count {
            let expect = (0..report.view_names.len())
                .map(|v| report.cells[v * n_algos + a].acc.raw[f])
                .sum::<f64>()
                / report.view_names.len() as f64;
            assert!((algo_cell.acc.raw[f] - expect).abs() <= 1e-12);
        }
    }
    for f in 0..report.fold_count {
        let expect = report.cells.iter().map(|c| c.acc.raw[f]).sum::<f64>()
            / report.cells.len() as f64;
        assert!((report.overall_average.acc.raw[f] - expect).abs() <= 1e-12);
    }
}

#[test]
fn full_labeling_is_rejected_before_any_work() {
    let mut config = config_for(separable_spec(1.0, 7), 7);
    config.split.labeled_fraction = 1.0;
    let err = run_smc(&config, Path::new(".")).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)), "{err}");
    assert!(err.to_string().contains("labeled_fraction"), "{err}");
}
