//! Experiment orchestration: configuration, cross-validation, the
//! semi-supervised multi-view flow and its unsupervised baseline, synthetic
//! corpus generation, and report emission.

pub mod config;
pub mod report;
pub mod run;
pub mod split;
pub mod synth;

pub use config::{
    ClusteringConfig, DataConfig, ExperimentConfig, OutputConfig, PreprocessConfig,
    ReductionConfig, ReductionMethod, SplitConfig, ViewsConfig,
};
pub use report::{
    emit_comparison, emit_report, AlgorithmColumn, EvalReport, FoldRecord, MetricSummary,
    ReportCell, ReportMetric,
};
pub use run::{
    hash_matrix, prepare_dataset, preprocess_image, run_on_dataset, run_smc, run_ucp, AccessLog,
};
pub use split::{stratified_folds, Fold, SplitPlan};
pub use synth::{corpus_sample_ids, generate_synthetic_corpus, ClassParams, SynthSpec};
