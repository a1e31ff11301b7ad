//! Experiment configuration: TOML schema, defaults, and validation.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::cluster::{build_strategy, Rmkmc, StrategyRegistry, STANDARD_ALGORITHMS};
use crate::error::{Error, Result};
use crate::pipeline::synth::SynthSpec;
use crate::reduce::DEFAULT_RIDGE;
use crate::views::ViewConfig;

/// Where the samples come from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataConfig {
    /// Generated phantom corpus, fully determined by the experiment seed.
    Synthetic {
        #[serde(default)]
        spec: SynthSpec,
    },
    /// A directory of image files plus a `sample_id,label` CSV.
    Images { image_dir: String, labels_file: String },
    /// A dataset directory previously written by the `extract` stage.
    Views { views_dir: String },
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Synthetic { spec: SynthSpec::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Median filter radius in pixels (0 disables filtering).
    pub median_radius: usize,
    /// Foreground threshold for automatic region-of-interest detection.
    pub roi_threshold: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { median_radius: 1, roi_threshold: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ViewsConfig {
    pub window: usize,
    pub stride: usize,
    pub levels: usize,
}

impl Default for ViewsConfig {
    fn default() -> Self {
        ViewsConfig { window: 7, stride: 1, levels: 16 }
    }
}

impl ViewsConfig {
    pub fn to_view_config(&self) -> ViewConfig {
        ViewConfig {
            window: self.window,
            stride: self.stride,
            levels: self.levels,
            ..ViewConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMethod {
    /// Supervised: discriminant directions fitted on the labeled split.
    Lda,
    /// Unsupervised: principal components fitted on the training split.
    Pca,
}

impl std::fmt::Display for ReductionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReductionMethod::Lda => write!(f, "lda"),
            ReductionMethod::Pca => write!(f, "pca"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionConfig {
    pub method: ReductionMethod,
    /// Output dimension per view.
    pub k: usize,
    /// Within-class scatter ridge (supervised method only).
    pub ridge: f64,
    /// Fit the unsupervised reduction on train and test rows together.
    /// Only valid with `method = "pca"`; the supervised fit must never see
    /// the held-out rows.
    pub transductive_fit: bool,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            method: ReductionMethod::Lda,
            k: 2,
            ridge: DEFAULT_RIDGE,
            transductive_fit: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Number of clusters requested from every algorithm.
    pub k: usize,
    /// Single-view algorithm ids, in report column order.
    pub algorithms: Vec<String>,
    /// Per-algorithm option tables, keyed by algorithm id.
    pub options: BTreeMap<String, BTreeMap<String, toml::Value>>,
    /// Run the multi-view consensus algorithm on all reduced views.
    pub rmkmc: bool,
    pub rmkmc_options: BTreeMap<String, toml::Value>,
    /// Cluster the transformed train and test rows together (evaluation
    /// still scores only the held-out rows).
    pub transductive: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            k: 3,
            algorithms: STANDARD_ALGORITHMS.iter().map(|s| s.to_string()).collect(),
            options: BTreeMap::new(),
            rmkmc: true,
            rmkmc_options: BTreeMap::new(),
            transductive: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub fold_count: usize,
    /// Labeled fraction per fold; must equal `1 - 1/fold_count`.
    pub labeled_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { fold_count: 5, labeled_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".to_string() }
    }
}

/// The complete description of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub preprocess: PreprocessConfig,
    pub views: ViewsConfig,
    pub reduction: ReductionConfig,
    pub clustering: ClusteringConfig,
    pub split: SplitConfig,
    pub output: OutputConfig,
    pub master_seed: u64,
    /// Original file text when loaded from disk; echoed into reports.
    #[serde(skip)]
    pub raw_text: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataConfig::default(),
            preprocess: PreprocessConfig::default(),
            views: ViewsConfig::default(),
            reduction: ReductionConfig::default(),
            clustering: ClusteringConfig::default(),
            split: SplitConfig::default(),
            output: OutputConfig::default(),
            master_seed: 42,
            raw_text: None,
        }
    }
}

fn value_to_string(key: &str, value: &toml::Value) -> Result<String> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(format!("{f:?}")),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(Error::Config(format!(
            "option '{key}' must be a scalar, got {other}"
        ))),
    }
}

fn table_to_strings(table: &BTreeMap<String, toml::Value>) -> Result<BTreeMap<String, String>> {
    table
        .iter()
        .map(|(k, v)| value_to_string(k, v).map(|s| (k.clone(), s)))
        .collect()
}

impl ExperimentConfig {
    /// Parses and validates a TOML config file, keeping the verbatim text
    /// for report echoes.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.raw_text = Some(text);
        config.validate()?;
        Ok(config)
    }

    /// The configuration as written (or, for programmatic configs, as
    /// re-serialized); embedded verbatim in every report.
    pub fn echo(&self) -> String {
        match &self.raw_text {
            Some(text) => text.clone(),
            None => toml::to_string_pretty(self).unwrap_or_else(|e| format!("<unserializable: {e}>")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.views.to_view_config().validate()?;
        if !(self.preprocess.roi_threshold > 0.0 && self.preprocess.roi_threshold < 1.0) {
            return Err(Error::Config(format!(
                "preprocess.roi_threshold must lie in (0, 1), got {}",
                self.preprocess.roi_threshold
            )));
        }
        if self.reduction.k == 0 {
            return Err(Error::Config("reduction.k must be at least 1".into()));
        }
        if !(self.reduction.ridge >= 0.0) || !self.reduction.ridge.is_finite() {
            return Err(Error::Config("reduction.ridge must be finite and non-negative".into()));
        }
        if self.reduction.transductive_fit && self.reduction.method == ReductionMethod::Lda {
            return Err(Error::Config(
                "reduction.transductive_fit requires method = \"pca\"; the supervised fit must not see held-out rows"
                    .into(),
            ));
        }
        if self.clustering.k < 2 {
            return Err(Error::Config(format!(
                "clustering.k must be at least 2, got {}",
                self.clustering.k
            )));
        }
        if self.clustering.algorithms.is_empty() {
            return Err(Error::Config("clustering.algorithms must not be empty".into()));
        }
        self.build_registry()?;
        self.build_rmkmc()?;
        if self.split.fold_count < 2 {
            return Err(Error::Config(format!(
                "split.fold_count must be at least 2, got {}",
                self.split.fold_count
            )));
        }
        let lf = self.split.labeled_fraction;
        if !(lf > 0.0 && lf < 1.0) {
            return Err(Error::invalid(format!(
                "split.labeled_fraction must lie strictly between 0 and 1, got {lf}"
            )));
        }
        let implied = 1.0 - 1.0 / self.split.fold_count as f64;
        if (lf - implied).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "split.labeled_fraction {lf} is inconsistent with fold_count {} (cross-validation implies {implied})",
                self.split.fold_count
            )));
        }
        if let DataConfig::Synthetic { spec } = &self.data {
            spec.validate()?;
        }
        Ok(())
    }

    /// Builds the configured single-view algorithms, in order.
    pub fn build_registry(&self) -> Result<StrategyRegistry> {
        let mut registry = StrategyRegistry::empty();
        for id in &self.clustering.algorithms {
            let opts = match self.clustering.options.get(id) {
                Some(table) => table_to_strings(table)?,
                None => BTreeMap::new(),
            };
            registry.register(build_strategy(id, &opts)?)?;
        }
        Ok(registry)
    }

    pub fn build_rmkmc(&self) -> Result<Rmkmc> {
        Rmkmc::from_options(&table_to_strings(&self.clustering.rmkmc_options)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_preserves_config() {
        let config = ExperimentConfig::default();
        let text = toml::to_string_pretty(&config).unwrap();
        let parsed: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn file_text_is_echoed_verbatim() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("config.toml");
        let text = "master_seed = 7\n\n[clustering]\nk = 4\n";
        std::fs::write(&path, text).unwrap();
        let config = ExperimentConfig::load(&path).unwrap();
        assert_eq!(config.echo(), text);
        assert_eq!(config.master_seed, 7);
        assert_eq!(config.clustering.k, 4);
        // Unset sections keep defaults.
        assert_eq!(config.split.fold_count, 5);
    }

    #[test]
    fn labeled_fraction_one_is_rejected() {
        let mut config = ExperimentConfig::default();
        config.split.labeled_fraction = 1.0;
        let err = config.validate().unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn inconsistent_fraction_is_rejected() {
        let mut config = ExperimentConfig::default();
        config.split.fold_count = 4;
        assert!(config.validate().is_err());
        config.split.labeled_fraction = 0.75;
        config.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("unknown_key = 1\n");
        assert!(err.is_err());
        let err = toml::from_str::<ExperimentConfig>("[clustering]\nlinkage = \"ward\"\n");
        assert!(err.is_err());
    }

    #[test]
    fn algorithm_options_flow_through() {
        let text = r#"
[clustering]
algorithms = ["kmeans", "birch"]

[clustering.options.kmeans]
n_init = 4

[clustering.options.birch]
threshold = 0.25
"#;
        let config: ExperimentConfig = toml::from_str(text).unwrap();
        let registry = config.build_registry().unwrap();
        assert_eq!(registry.ids(), vec!["kmeans", "birch"]);
    }

    #[test]
    fn bad_algorithm_option_fails_validation() {
        let text = r#"
[clustering.options.kmeans]
bogus = 1
"#;
        let config: ExperimentConfig = toml::from_str(text).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn transductive_fit_requires_pca() {
        let mut config = ExperimentConfig::default();
        config.reduction.transductive_fit = true;
        assert!(config.validate().is_err());
        config.reduction.method = ReductionMethod::Pca;
        config.validate().unwrap();
    }
}
