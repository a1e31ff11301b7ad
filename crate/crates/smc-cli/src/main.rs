//! `smc` — benchmark harness for multi-view texture clustering.
//!
//! Subcommands mirror the pipeline stages (`preprocess` → `extract` →
//! `reduce` → `cluster` → `evaluate`), with corpus generation (`synth`),
//! two end-to-end experiment drivers (`run-smc` for the semi-supervised
//! flow, `run-ucp` for the unsupervised baseline), and table/chart
//! re-emission from a saved report (`report`).
//!
//! Every command exits 0 on success. Failures print a single-line JSON
//! object `{"error": {"kind": ..., "message": ...}}` to stderr and exit
//! nonzero (2 for command-line usage errors, 1 otherwise).

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use smc::cluster::{build_strategy, Rmkmc};
use smc::error::{Error, Result};
use smc::imaging::{
    extract_roi, list_image_files, median_filter, normalize_linear, read_image, write_pgm,
    write_png, GrayImage, RoiSpec,
};
use smc::io::{
    align_labels, load_dataset, read_labels_csv, read_matrix_csv, resolve_path,
    save_dataset_with_echo, write_labels_csv,
};
use smc::metrics::evaluate;
use smc::pipeline::{
    corpus_sample_ids, emit_comparison, emit_report, generate_synthetic_corpus, run_smc, run_ucp,
    DataConfig, EvalReport, ExperimentConfig, ReductionMethod, SynthSpec, ViewsConfig,
};
use smc::reduce::{lda_fit, pca_fit, save_model_with_echo, DEFAULT_RIDGE};
use smc::views::{build_dataset, FeatureView, MultiViewDataset};

#[derive(Parser)]
#[command(
    name = "smc",
    version,
    about = "Multi-view texture clustering benchmark: preprocessing, feature views, \
             reduction, clustering, evaluation, and reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise, normalize, and crop a directory of images to their regions
    /// of interest
    Preprocess(PreprocessArgs),
    /// Compute the seven texture views of a preprocessed image directory
    Extract(ExtractArgs),
    /// Fit per-view projections and write reduced matrices plus model files
    Reduce(ReduceArgs),
    /// Cluster feature matrices with a named algorithm
    Cluster(ClusterArgs),
    /// Score a predicted labeling against ground truth
    Evaluate(EvaluateArgs),
    /// Generate a synthetic phantom corpus with class-dependent textures
    Synth(SynthArgs),
    /// Run the semi-supervised experiment: supervised per-view reduction,
    /// then single- and multi-view clustering under cross-validation
    RunSmc(RunArgs),
    /// Run the unsupervised baseline: principal-component reduction with
    /// the same clustering and report layout
    RunUcp(RunArgs),
    /// Re-emit tables and charts from a saved report, optionally comparing
    /// two runs
    Report(ReportArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// Directory of input images (PNG or PGM)
    #[arg(long)]
    input: PathBuf,
    /// Directory for the preprocessed outputs (PGM)
    #[arg(long)]
    output: PathBuf,
    /// Median filter radius in pixels; 0 disables filtering
    #[arg(long, default_value_t = 1)]
    median_radius: usize,
    /// Region of interest: "auto:<threshold>" or "rect:x,y,w,h"
    #[arg(long, value_parser = parse_roi, default_value = "auto:0.1")]
    roi: RoiSpec,
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory of preprocessed images
    #[arg(long)]
    input: PathBuf,
    /// Optional labels CSV (sample_id,label) keyed by image file stem
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output dataset directory (one CSV per view plus a manifest)
    #[arg(long)]
    output: PathBuf,
    /// Sliding window side length in pixels
    #[arg(long, default_value_t = 7)]
    window: usize,
    /// Window step in pixels
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Gray levels for co-occurrence quantization
    #[arg(long, default_value_t = 16)]
    levels: usize,
}

#[derive(Args)]
struct ReduceArgs {
    /// Dataset directory written by `extract`
    #[arg(long)]
    views: PathBuf,
    /// Labels CSV; defaults to the labels stored in the dataset directory
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output directory for reduced matrices and model files
    #[arg(long)]
    output: PathBuf,
    /// Projection type: "lda" (supervised) or "pca" (unsupervised)
    #[arg(long, default_value = "lda", value_parser = ["lda", "pca"])]
    method: String,
    /// Output dimensions per view
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Within-class scatter ridge (supervised method only)
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    ridge: f64,
}

#[derive(Args)]
struct ClusterArgs {
    /// Feature matrix CSV; repeat the flag to pass several views to rmkmc
    #[arg(long, required = true)]
    matrix: Vec<PathBuf>,
    /// Algorithm id: gmm, kmeans, kmedoids, agglomerative, birch, spectral,
    /// or rmkmc (multi-view)
    #[arg(long)]
    algorithm: String,
    /// Number of clusters
    #[arg(long)]
    k: usize,
    /// Seed for this run
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Algorithm option as key=value; repeatable
    #[arg(long = "option", value_parser = parse_key_val)]
    option: Vec<(String, String)>,
    /// Output directory for labels.csv and diagnostics.json
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ground-truth labels CSV
    #[arg(long)]
    truth: PathBuf,
    /// Predicted labels CSV; rows are matched to truth by sample_id
    #[arg(long)]
    predicted: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Experiment config whose [data] section is synthetic; defaults apply
    /// when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for images, labels.csv, and spec.toml
    #[arg(long)]
    output: PathBuf,
    /// Override the number of images per class
    #[arg(long)]
    n_per_class: Option<usize>,
    /// Override the patch side length in pixels
    #[arg(long)]
    image_size: Option<usize>,
    /// Override the background margin around the patch
    #[arg(long)]
    margin: Option<usize>,
    /// Override the corpus seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the class-separation strength (0 = identical classes)
    #[arg(long)]
    signal: Option<f64>,
    /// Write 8-bit PNG instead of 16-bit PGM
    #[arg(long)]
    png: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured output directory
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the configured master seed
    #[arg(long)]
    master_seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json written by run-smc or run-ucp
    #[arg(long)]
    input: PathBuf,
    /// A second report.json to compare against (e.g. the other reduction)
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Output directory for the tables and charts
    #[arg(long)]
    output: PathBuf,
}

fn parse_roi(s: &str) -> std::result::Result<RoiSpec, String> {
    if let Some(rest) = s.strip_prefix("auto") {
        let threshold = match rest.strip_prefix(':') {
            Some(t) => t.parse::<f64>().map_err(|_| format!("'{t}' is not a number"))?,
            None if rest.is_empty() => 0.1,
            _ => return Err(format!("expected auto:<threshold>, got '{s}'")),
        };
        return Ok(RoiSpec::Auto { threshold });
    }
    if let Some(rest) = s.strip_prefix("rect:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 4 {
            return Err(format!("expected rect:x,y,w,h, got '{s}'"));
        }
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format!("rect coordinates must be non-negative integers, got '{s}'"))?;
        return Ok(RoiSpec::Rect { x: nums[0], y: nums[1], width: nums[2], height: nums[3] });
    }
    Err(format!("expected auto:<threshold> or rect:x,y,w,h, got '{s}'"))
}

fn parse_key_val(s: &str) -> std::result::Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(format!("expected key=value, got '{s}'")),
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("sample")
        .to_string()
}

fn cmd_preprocess(args: &PreprocessArgs) -> Result<()> {
    std::fs::create_dir_all(&args.output)?;
    let paths = list_image_files(&args.input)?;
    for path in &paths {
        let img = read_image(path)?;
        let filtered = if args.median_radius > 0 {
            median_filter(&img, args.median_radius)
        } else {
            img
        };
        let roi = extract_roi(&normalize_linear(&filtered), &args.roi)?;
        write_pgm(&roi, &args.output.join(format!("{}.pgm", file_stem(path))))?;
    }
    println!("preprocessed {} images into {}", paths.len(), args.output.display());
    Ok(())
}

fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let paths = list_image_files(&args.input)?;
    let ids: Vec<String> = paths.iter().map(|p| file_stem(p)).collect();
    let rois: Vec<GrayImage> = paths
        .iter()
        .map(|p| read_image(p))
        .collect::<Result<_>>()?;
    let labels = match &args.labels {
        Some(file) => {
            let (label_ids, labels) = read_labels_csv(file)?;
            Some(align_labels(&ids, &label_ids, &labels)?)
        }
        None => None,
    };
    let settings = ViewsConfig { window: args.window, stride: args.stride, levels: args.levels };
    let dataset = build_dataset(&rois, labels.as_deref(), &ids, &settings.to_view_config())?;
    let echo = toml::to_string_pretty(&settings).map_err(|e| Error::Config(e.to_string()))?;
    save_dataset_with_echo(&args.output, &dataset, Some(&echo))?;
    println!(
        "extracted {} views x {} samples into {}",
        dataset.views.len(),
        dataset.n_samples(),
        args.output.display()
    );
    Ok(())
}

fn cmd_reduce(args: &ReduceArgs) -> Result<()> {
    let dataset = load_dataset(&args.views)?;
    let labels = match (&args.labels, &dataset.labels) {
        (Some(file), _) => {
            let (label_ids, labels) = read_labels_csv(file)?;
            Some(align_labels(&dataset.sample_ids, &label_ids, &labels)?)
        }
        (None, Some(labels)) => Some(labels.clone()),
        (None, None) => None,
    };
    if args.method == "lda" && labels.is_none() {
        return Err(Error::invalid(
            "the supervised method needs labels: pass --labels or include labels.csv in the views directory",
        ));
    }
    std::fs::create_dir_all(&args.output)?;
    let echo = format!("method = \"{}\"\nk = {}\nridge = {:?}\n", args.method, args.k, args.ridge);
    let mut reduced_views = Vec::with_capacity(dataset.views.len());
    for view in &dataset.views {
        let model = match args.method.as_str() {
            "lda" => lda_fit(&view.data, labels.as_ref().expect("checked above"), args.k, args.ridge)?,
            _ => pca_fit(&view.data, args.k)?,
        };
        save_model_with_echo(
            &model,
            &args.output.join(format!("model_{}.json", view.name)),
            Some(&echo),
        )?;
        reduced_views.push(FeatureView { name: view.name.clone(), data: model.transform(&view.data)? });
    }
    let reduced = MultiViewDataset {
        views: reduced_views,
        labels,
        sample_ids: dataset.sample_ids.clone(),
        roi_size: dataset.roi_size,
    };
    save_dataset_with_echo(&args.output, &reduced, Some(&echo))?;
    println!(
        "reduced {} views to {} dimensions each in {}",
        reduced.views.len(),
        args.k,
        args.output.display()
    );
    Ok(())
}

fn cmd_cluster(args: &ClusterArgs) -> Result<()> {
    let mut ids: Option<Vec<String>> = None;
    let mut views: Vec<Array2<f64>> = Vec::with_capacity(args.matrix.len());
    for path in &args.matrix {
        let (matrix_ids, matrix) = read_matrix_csv(path)?;
        match &ids {
            None => ids = Some(matrix_ids),
            Some(first) => {
                if *first != matrix_ids {
                    return Err(Error::invalid(format!(
                        "{} lists different sample ids than the first matrix",
                        path.display()
                    )));
                }
            }
        }
        views.push(matrix);
    }
    let ids = ids.expect("clap requires at least one matrix");
    let options: BTreeMap<String, String> = args.option.iter().cloned().collect();
    let (assignment, alpha) = if args.algorithm == "rmkmc" {
        let outcome = Rmkmc::from_options(&options)?.fit(&views, args.k, args.seed)?;
        (outcome.assignment, Some(outcome.alpha))
    } else {
        if views.len() != 1 {
            return Err(Error::invalid(format!(
                "algorithm '{}' clusters one matrix, got {}; only rmkmc accepts several",
                args.algorithm,
                views.len()
            )));
        }
        let strategy = build_strategy(&args.algorithm, &options)?;
        (strategy.cluster(&views[0], args.k, args.seed)?, None)
    };
    std::fs::create_dir_all(&args.output)?;
    write_labels_csv(&args.output.join("labels.csv"), &ids, &assignment.labels)?;
    let diagnostics = serde_json::json!({
        "algorithm": args.algorithm,
        "k": args.k,
        "seed": args.seed,
        "objective": assignment.objective(),
        "objective_trace": assignment.objective_trace,
        "alpha": alpha,
    });
    std::fs::write(
        args.output.join("diagnostics.json"),
        serde_json::to_string_pretty(&diagnostics)? + "\n",
    )?;
    println!(
        "clustered {} samples into {} groups; wrote {}",
        ids.len(),
        args.k,
        args.output.display()
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let (truth_ids, truth) = read_labels_csv(&args.truth)?;
    let (predicted_ids, predicted) = read_labels_csv(&args.predicted)?;
    let aligned = align_labels(&truth_ids, &predicted_ids, &predicted)?;
    let metrics = evaluate(&truth, &aligned)?;
    // Reported values round to three decimals; full precision stays internal.
    let round3 = |v: f64| (v * 1000.0).round() / 1000.0;
    let json = serde_json::json!({
        "acc": round3(metrics.acc),
        "fm": round3(metrics.fm),
        "rand": round3(metrics.rand),
        "ari": round3(metrics.ari),
    });
    println!("{json}");
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => match ExperimentConfig::load(path)?.data {
            DataConfig::Synthetic { spec } => spec,
            _ => {
                return Err(Error::Config(
                    "the config's data source is not \"synthetic\"".into(),
                ))
            }
        },
        None => SynthSpec::default(),
    };
    if let Some(n) = args.n_per_class {
        spec.n_per_class = n;
    }
    if let Some(size) = args.image_size {
        spec.image_size = size;
    }
    if let Some(margin) = args.margin {
        spec.margin = margin;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(signal) = args.signal {
        spec.signal = signal;
    }
    spec.validate()?;
    let (images, labels) = generate_synthetic_corpus(&spec)?;
    let ids = corpus_sample_ids(&spec);
    std::fs::create_dir_all(&args.output)?;
    for (image, id) in images.iter().zip(&ids) {
        if args.png {
            write_png(image, &args.output.join(format!("{id}.png")))?;
        } else {
            write_pgm(image, &args.output.join(format!("{id}.pgm")))?;
        }
    }
    write_labels_csv(&args.output.join("labels.csv"), &ids, &labels)?;
    let spec_text = toml::to_string_pretty(&spec).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(args.output.join("spec.toml"), spec_text)?;
    println!(
        "generated {} images across {} classes into {}",
        ids.len(),
        spec.classes.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs, method: ReductionMethod) -> Result<()> {
    let (mut config, base) = match &args.config {
        Some(path) => {
            let base = match path.parent() {
                Some(parent) if !parent.as_os_str().is_empty() => parent.to_path_buf(),
                _ => PathBuf::from("."),
            };
            (ExperimentConfig::load(path)?, base)
        }
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    let mut overridden = false;
    if let Some(seed) = args.master_seed {
        config.master_seed = seed;
        overridden = true;
    }
    if let Some(output) = &args.output {
        config.output.dir = output.display().to_string();
        overridden = true;
    }
    if overridden {
        // The report echoes the effective configuration, not the stale file.
        config.raw_text = None;
    }
    let report = match method {
        ReductionMethod::Lda => run_smc(&config, &base)?,
        ReductionMethod::Pca => run_ucp(&config, &base)?,
    };
    let out_dir = match &args.output {
        Some(dir) => dir.clone(),
        None => resolve_path(&base, &config.output.dir),
    };
    for file in emit_report(&report, &out_dir)? {
        println!("{}", file.display());
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let report = EvalReport::from_json_file(&args.input)?;
    let mut files = emit_report(&report, &args.output)?;
    if let Some(other) = &args.compare {
        let second = EvalReport::from_json_file(other)?;
        files.extend(emit_comparison(&report, &second, &args.output)?);
    }
    for file in &files {
        println!("{}", file.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Reduce(args) => cmd_reduce(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Synth(args) => cmd_synth(args),
        Command::RunSmc(args) => cmd_run(args, ReductionMethod::Lda),
        Command::RunUcp(args) => cmd_run(args, ReductionMethod::Pca),
        Command::Report(args) => cmd_report(args),
    }
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                e.exit()
            }
            _ => {
                eprintln!("{}", error_json("usage", &e.to_string()));
                std::process::exit(2);
            }
        },
    };
    if let Err(err) = dispatch(cli) {
        eprintln!("{}", error_json(err.kind(), &err.to_string()));
        std::process::exit(1);
    }
}
