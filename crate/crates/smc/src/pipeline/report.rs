//! Result aggregation and emission: the per-(view, algorithm) metric grid,
//! its fold-wise average cells, and CSV/JSON/SVG output.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::MetricSet;

/// Mean and population standard deviation over the per-fold raw values.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    /// One value per fold, in fold order. Average cells follow the same
    /// convention: their fold-f value is a mean over constituent cells.
    pub raw: Vec<f64>,
}

impl MetricSummary {
    pub fn from_raw(raw: Vec<f64>) -> Self {
        let n = raw.len() as f64;
        let mean = if raw.is_empty() { f64::NAN } else { raw.iter().sum::<f64>() / n };
        let var = if raw.is_empty() {
            f64::NAN
        } else {
            raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        };
        MetricSummary { mean, std: var.sqrt(), raw }
    }
}

/// One algorithm column of the results grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct AlgorithmColumn {
    /// Registry id, e.g. "kmeans".
    pub id: String,
    /// Display label used as the CSV column header, e.g. "K-Means".
    pub label: String,
}

/// One cell of the results grid: every metric's fold values for a
/// (view, algorithm) pair. Average cells use the reserved key "average";
/// the consensus cell uses view "multi-view".
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportCell {
    pub view: String,
    pub algorithm: String,
    /// Clustering accuracy under the optimal cluster-to-class matching.
    pub acc: MetricSummary,
    /// Fowlkes–Mallows pairwise score.
    pub fm: MetricSummary,
    /// Chance-adjusted pairwise agreement; the headline "Rand" column.
    pub rand: MetricSummary,
    /// Unadjusted pairwise agreement fraction, kept for reference.
    pub rand_unadjusted: MetricSummary,
}

impl ReportCell {
    /// Builds a cell from per-fold metric sets.
    pub fn from_sets(view: &str, algorithm: &str, sets: &[MetricSet]) -> Self {
        ReportCell {
            view: view.to_string(),
            algorithm: algorithm.to_string(),
            acc: MetricSummary::from_raw(sets.iter().map(|s| s.acc).collect()),
            fm: MetricSummary::from_raw(sets.iter().map(|s| s.fm).collect()),
            rand: MetricSummary::from_raw(sets.iter().map(|s| s.ari).collect()),
            rand_unadjusted: MetricSummary::from_raw(sets.iter().map(|s| s.rand).collect()),
        }
    }

    /// Builds an average cell: its fold-f raw value is the mean of the
    /// parts' fold-f values, so the summary keeps one value per fold and its
    /// std remains a spread across folds, comparable to ordinary cells.
    /// Equal-weight parts make the mean of means equal the pooled mean.
    ///
    /// Panics if the parts disagree on the number of folds.
    pub fn averaged(view: &str, algorithm: &str, parts: &[&ReportCell]) -> Self {
        let gather = |pick: fn(&ReportCell) -> &MetricSummary| {
            let folds = parts.first().map_or(0, |c| pick(c).raw.len());
            let raw = (0..folds)
                .map(|f| {
                    parts.iter().map(|c| pick(c).raw[f]).sum::<f64>() / parts.len() as f64
                })
                .collect();
            MetricSummary::from_raw(raw)
        };
        ReportCell {
            view: view.to_string(),
            algorithm: algorithm.to_string(),
            acc: gather(|c| &c.acc),
            fm: gather(|c| &c.fm),
            rand: gather(|c| &c.rand),
            rand_unadjusted: gather(|c| &c.rand_unadjusted),
        }
    }

    fn check(&self, fold_count: usize) -> Result<()> {
        let entries: [(&str, &MetricSummary, f64, f64); 4] = [
            ("acc", &self.acc, 0.0, 1.0),
            ("fm", &self.fm, 0.0, 1.0),
            ("rand", &self.rand, -1.0, 1.0),
            ("rand_unadjusted", &self.rand_unadjusted, 0.0, 1.0),
        ];
        for (name, summary, lo, hi) in entries {
            if summary.raw.len() != fold_count {
                return Err(Error::invalid(format!(
                    "cell ({}, {}) metric {name} has {} values, expected {fold_count}",
                    self.view,
                    self.algorithm,
                    summary.raw.len()
                )));
            }
            if !(summary.std >= 0.0) {
                return Err(Error::invalid(format!(
                    "cell ({}, {}) metric {name} has negative or NaN std",
                    self.view, self.algorithm
                )));
            }
            if !(summary.mean >= lo && summary.mean <= hi) {
                return Err(Error::invalid(format!(
                    "cell ({}, {}) metric {name} mean {} outside [{lo}, {hi}]",
                    self.view, self.algorithm, summary.mean
                )));
            }
        }
        Ok(())
    }
}

/// Per-fold bookkeeping: the split itself and instrumentation of which
/// dataset rows the model-fitting stage materialized.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FoldRecord {
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Sorted row indices read while fitting the per-view reductions. With
    /// the default inductive setup this must not intersect `test`.
    pub fit_reads: Vec<usize>,
    /// Fingerprint of each reduced view matrix, one per view. The
    /// single-view algorithms and the multi-view consensus run consume
    /// exactly these matrices.
    pub reduced_view_hashes: Vec<u64>,
}

/// Complete results of one cross-validated experiment.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    /// Reduction method that produced the clustered representations
    /// ("lda" or "pca").
    pub reduction: String,
    pub fold_count: usize,
    pub master_seed: u64,
    /// Row order of the grid.
    pub view_names: Vec<String>,
    /// Column order of the grid.
    pub algorithms: Vec<AlgorithmColumn>,
    /// View-major grid: `cells[v * algorithms.len() + a]`.
    pub cells: Vec<ReportCell>,
    /// Multi-view consensus results (view "multi-view"), when enabled.
    pub consensus: Option<ReportCell>,
    /// Per-view averages over all algorithms (the "Average" column); fold-f
    /// raw value = mean of the row's fold-f values.
    pub view_averages: Vec<ReportCell>,
    /// Per-algorithm averages over all views (the "Average" row).
    pub algorithm_averages: Vec<ReportCell>,
    /// Grand average of every single-view cell.
    pub overall_average: ReportCell,
    /// Grand average of every single-view cell plus the consensus cell, for
    /// readers who want the consensus folded into the grand mean.
    pub overall_average_with_consensus: Option<ReportCell>,
    /// Per-fold view weights chosen by the consensus algorithm.
    pub alpha: Option<Vec<Vec<f64>>>,
    pub folds: Vec<FoldRecord>,
    /// The experiment configuration exactly as provided.
    pub config_echo: String,
}

impl EvalReport {
    /// Assembles a report from the raw grid, computing the fold-wise
    /// average cells.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        reduction: String,
        fold_count: usize,
        master_seed: u64,
        view_names: Vec<String>,
        algorithms: Vec<AlgorithmColumn>,
        cells: Vec<ReportCell>,
        consensus: Option<ReportCell>,
        alpha: Option<Vec<Vec<f64>>>,
        folds: Vec<FoldRecord>,
        config_echo: String,
    ) -> Result<Self> {
        let n_views = view_names.len();
        let n_algos = algorithms.len();
        if cells.len() != n_views * n_algos {
            return Err(Error::invalid(format!(
                "{} cells for a {n_views}x{n_algos} grid",
                cells.len()
            )));
        }
        let row = |v: usize| &cells[v * n_algos..(v + 1) * n_algos];
        let view_averages: Vec<ReportCell> = (0..n_views)
            .map(|v| {
                let parts: Vec<&ReportCell> = row(v).iter().collect();
                ReportCell::averaged(&view_names[v], "average", &parts)
            })
            .collect();
        let algorithm_averages: Vec<ReportCell> = (0..n_algos)
            .map(|a| {
                let parts: Vec<&ReportCell> =
                    (0..n_views).map(|v| &cells[v * n_algos + a]).collect();
                ReportCell::averaged("average", &algorithms[a].id, &parts)
            })
            .collect();
        let all: Vec<&ReportCell> = cells.iter().collect();
        let overall_average = ReportCell::averaged("average", "average", &all);
        let overall_average_with_consensus = consensus.as_ref().map(|c| {
            let mut parts = all.clone();
            parts.push(c);
            ReportCell::averaged("average", "average_with_rmkmc", &parts)
        });
        let report = EvalReport {
            reduction,
            fold_count,
            master_seed,
            view_names,
            algorithms,
            cells,
            consensus,
            view_averages,
            algorithm_averages,
            overall_average,
            overall_average_with_consensus,
            alpha,
            folds,
            config_echo,
        };
        report.validate()?;
        Ok(report)
    }

    /// Checks the structural invariants of the grid.
    pub fn validate(&self) -> Result<()> {
        let n_views = self.view_names.len();
        let n_algos = self.algorithms.len();
        if n_views == 0 || n_algos == 0 {
            return Err(Error::invalid("report needs at least one view and one algorithm"));
        }
        if self.fold_count == 0 {
            return Err(Error::invalid("report needs at least one fold"));
        }
        if self.cells.len() != n_views * n_algos {
            return Err(Error::invalid(format!(
                "{} cells for a {n_views}x{n_algos} grid",
                self.cells.len()
            )));
        }
        for v in 0..n_views {
            for a in 0..n_algos {
                let cell = &self.cells[v * n_algos + a];
                if cell.view != self.view_names[v] || cell.algorithm != self.algorithms[a].id {
                    return Err(Error::invalid(format!(
                        "cell at grid position ({v}, {a}) is keyed ({}, {})",
                        cell.view, cell.algorithm
                    )));
                }
                cell.check(self.fold_count)?;
            }
        }
        if let Some(c) = &self.consensus {
            if c.view != "multi-view" {
                return Err(Error::invalid("consensus cell must use view \"multi-view\""));
            }
            c.check(self.fold_count)?;
        }
        if let Some(alpha) = &self.alpha {
            if alpha.len() != self.fold_count
                || alpha.iter().any(|row| row.len() != n_views)
            {
                return Err(Error::invalid(
                    "view-weight table must hold one row per fold and one column per view",
                ));
            }
        }
        if self.folds.len() != self.fold_count {
            return Err(Error::invalid(format!(
                "{} fold records for fold_count {}",
                self.folds.len(),
                self.fold_count
            )));
        }
        if self.view_averages.len() != n_views || self.algorithm_averages.len() != n_algos {
            return Err(Error::invalid("average vectors must match the grid axes"));
        }
        for avg in self.view_averages.iter().chain(&self.algorithm_averages) {
            avg.check(self.fold_count)?;
        }
        self.overall_average.check(self.fold_count)?;
        if let Some(avg) = &self.overall_average_with_consensus {
            avg.check(self.fold_count)?;
        }
        Ok(())
    }

    /// Looks up a grid cell by view and algorithm id.
    pub fn cell(&self, view: &str, algorithm: &str) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.view == view && c.algorithm == algorithm)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let report: EvalReport = serde_json::from_str(&text)?;
        report.validate()?;
        Ok(report)
    }
}

/// Metric selector for table and chart emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMetric {
    Acc,
    Fm,
    Rand,
}

impl ReportMetric {
    pub fn of<'a>(&self, cell: &'a ReportCell) -> &'a MetricSummary {
        match self {
            ReportMetric::Acc => &cell.acc,
            ReportMetric::Fm => &cell.fm,
            ReportMetric::Rand => &cell.rand,
        }
    }

    /// Table cell text: accuracy as a percentage with one decimal, the
    /// pairwise scores with two decimals.
    pub fn format(&self, summary: &MetricSummary) -> String {
        match self {
            ReportMetric::Acc => {
                format!("{:.1}±{:.1}", 100.0 * summary.mean, 100.0 * summary.std)
            }
            _ => format!("{:.2}±{:.2}", summary.mean, summary.std),
        }
    }

    pub fn file_stem(&self) -> &'static str {
        match self {
            ReportMetric::Acc => "acc",
            ReportMetric::Fm => "fm",
            ReportMetric::Rand => "rand",
        }
    }
}

fn capitalize(name: &str) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Writes one metric's grid as CSV: views as rows, algorithms as columns,
/// an Average row and column, and a final column holding the multi-view
/// consensus in the Average row.
fn write_metric_csv(report: &EvalReport, metric: ReportMetric, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n_algos = report.algorithms.len();
    let mut header = vec![String::new()];
    header.extend(report.algorithms.iter().map(|a| a.label.clone()));
    header.push("Average".to_string());
    header.push("RMKMC".to_string());
    w.write_record(&header)?;
    for (v, view) in report.view_names.iter().enumerate() {
        let mut record = vec![capitalize(view)];
        for a in 0..n_algos {
            record.push(metric.format(metric.of(&report.cells[v * n_algos + a])));
        }
        record.push(metric.format(metric.of(&report.view_averages[v])));
        record.push(String::new());
        w.write_record(&record)?;
    }
    let mut record = vec!["Average".to_string()];
    for avg in &report.algorithm_averages {
        record.push(metric.format(metric.of(avg)));
    }
    record.push(metric.format(metric.of(&report.overall_average)));
    record.push(match &report.consensus {
        Some(c) => metric.format(metric.of(c)),
        None => String::new(),
    });
    w.write_record(&record)?;
    w.flush()?;
    Ok(())
}

/// One bar series of a grouped chart: one value per group.
struct ChartSeries {
    name: String,
    values: Vec<f64>,
}

const CHART_PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#b07aa1", "#e15759", "#76b7b2"];

fn svg_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a grouped bar chart as a standalone SVG document.
fn grouped_bar_chart(
    title: &str,
    y_label: &str,
    y_max: f64,
    groups: &[String],
    series: &[ChartSeries],
) -> String {
    let n_groups = groups.len().max(1);
    let n_series = series.len().max(1);
    let bar_w = 24.0;
    let intra = 4.0;
    let group_gap = 26.0;
    let group_w = n_series as f64 * bar_w + (n_series - 1) as f64 * intra + group_gap;
    let (left, right, top, bottom) = (64.0, 24.0, 56.0, 60.0);
    let plot_w = (n_groups as f64 * group_w).max(240.0);
    let plot_h = 280.0;
    let width = left + plot_w + right;
    let height = top + plot_h + bottom;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="Helvetica, Arial, sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="{width:.0}" height="{height:.0}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15" font-weight="bold">{}</text>"#,
        width / 2.0,
        svg_escape(title)
    );
    // Horizontal gridlines and y-axis tick labels.
    for i in 0..=5 {
        let value = y_max * i as f64 / 5.0;
        let y = top + plot_h - plot_h * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="1"/>"#,
            left + plot_w,
            if i == 0 { "#333333" } else { "#dddddd" }
        );
        let tick = if y_max > 10.0 { format!("{value:.0}") } else { format!("{value:.1}") };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{tick}</text>"#,
            left - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 18 {:.1})">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        svg_escape(y_label)
    );
    // Legend row under the title.
    let mut lx = left;
    for (i, sr) in series.iter().enumerate() {
        let color = CHART_PALETTE[i % CHART_PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="36" width="12" height="12" fill="{color}"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="46" font-size="12">{}</text>"#,
            lx + 16.0,
            svg_escape(&sr.name)
        );
        lx += 16.0 + 7.2 * sr.name.len() as f64 + 18.0;
    }
    // Bars with hover tooltips, then group labels.
    for (g, group) in groups.iter().enumerate() {
        let gx = left + g as f64 * group_w + group_gap / 2.0;
        for (i, sr) in series.iter().enumerate() {
            let value = sr.values.get(g).copied().unwrap_or(f64::NAN);
            if !value.is_finite() {
                continue;
            }
            let h = (value.clamp(0.0, y_max) / y_max) * plot_h;
            let x = gx + i as f64 * (bar_w + intra);
            let y = top + plot_h - h;
            let color = CHART_PALETTE[i % CHART_PALETTE.len()];
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{bar_w:.1}" height="{h:.1}" fill="{color}"><title>{}: {} = {value:.2}</title></rect>"#,
                svg_escape(&sr.name),
                svg_escape(group)
            );
        }
        let label_x = gx + (group_w - group_gap) / 2.0;
        let label_y = top + plot_h + 16.0;
        let _ = writeln!(
            s,
            r#"<text x="{label_x:.1}" y="{label_y:.1}" text-anchor="end" font-size="11" transform="rotate(-30 {label_x:.1} {label_y:.1})">{}</text>"#,
            svg_escape(group)
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

/// Bar values (scaled to percent for accuracy) for the per-algorithm chart:
/// the Average-row mean of each algorithm, plus the consensus when present.
fn algorithm_chart_values(report: &EvalReport, metric: ReportMetric) -> Vec<f64> {
    let scale = if metric == ReportMetric::Acc { 100.0 } else { 1.0 };
    let mut values: Vec<f64> = report
        .algorithm_averages
        .iter()
        .map(|c| scale * metric.of(c).mean)
        .collect();
    if let Some(c) = &report.consensus {
        values.push(scale * metric.of(c).mean);
    }
    values
}

fn algorithm_chart_groups(report: &EvalReport) -> Vec<String> {
    let mut groups: Vec<String> = report.algorithms.iter().map(|a| a.label.clone()).collect();
    if report.consensus.is_some() {
        groups.push("RMKMC".to_string());
    }
    groups
}

fn view_chart_values(report: &EvalReport, metric: ReportMetric) -> Vec<f64> {
    let scale = if metric == ReportMetric::Acc { 100.0 } else { 1.0 };
    report.view_averages.iter().map(|c| scale * metric.of(c).mean).collect()
}

/// Writes the full report bundle into `dir`: a JSON dump with all raw fold
/// values, one CSV grid per metric, and accuracy bar charts per algorithm
/// and per view. Returns the written paths.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    report.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let json_path = dir.join("report.json");
    std::fs::write(&json_path, report.to_json()? + "\n")?;
    written.push(json_path);

    for metric in [ReportMetric::Acc, ReportMetric::Fm, ReportMetric::Rand] {
        let path = dir.join(format!("report_{}.csv", metric.file_stem()));
        write_metric_csv(report, metric, &path)?;
        written.push(path);
    }

    let series_name = report.reduction.to_uppercase();
    let algo_chart = grouped_bar_chart(
        "Mean accuracy by algorithm",
        "Accuracy (%)",
        100.0,
        &algorithm_chart_groups(report),
        &[ChartSeries {
            name: series_name.clone(),
            values: algorithm_chart_values(report, ReportMetric::Acc),
        }],
    );
    let path = dir.join("chart_algorithms_acc.svg");
    std::fs::write(&path, algo_chart)?;
    written.push(path);

    let view_chart = grouped_bar_chart(
        "Mean accuracy by view",
        "Accuracy (%)",
        100.0,
        &report.view_names.iter().map(|v| capitalize(v)).collect::<Vec<_>>(),
        &[ChartSeries { name: series_name, values: view_chart_values(report, ReportMetric::Acc) }],
    );
    let path = dir.join("chart_views_acc.svg");
    std::fs::write(&path, view_chart)?;
    written.push(path);

    Ok(written)
}

/// Writes grouped bar charts comparing two runs (typically the supervised
/// and unsupervised reductions) per algorithm and per view. Both reports
/// must share the same grid axes. Returns the written paths.
pub fn emit_comparison(a: &EvalReport, b: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    a.validate()?;
    b.validate()?;
    if a.view_names != b.view_names
        || a.algorithms != b.algorithms
        || a.consensus.is_some() != b.consensus.is_some()
    {
        return Err(Error::invalid(
            "cannot compare reports with different views, algorithms, or consensus settings",
        ));
    }
    std::fs::create_dir_all(dir)?;
    let mut name_a = a.reduction.to_uppercase();
    let mut name_b = b.reduction.to_uppercase();
    if name_a == name_b {
        name_a.push_str(" (1)");
        name_b.push_str(" (2)");
    }
    let mut written = Vec::new();

    let algo_chart = grouped_bar_chart(
        "Mean accuracy by algorithm",
        "Accuracy (%)",
        100.0,
        &algorithm_chart_groups(a),
        &[
            ChartSeries {
                name: name_a.clone(),
                values: algorithm_chart_values(a, ReportMetric::Acc),
            },
            ChartSeries {
                name: name_b.clone(),
                values: algorithm_chart_values(b, ReportMetric::Acc),
            },
        ],
    );
    let path = dir.join("compare_algorithms_acc.svg");
    std::fs::write(&path, algo_chart)?;
    written.push(path);

    let view_chart = grouped_bar_chart(
        "Mean accuracy by view",
        "Accuracy (%)",
        100.0,
        &a.view_names.iter().map(|v| capitalize(v)).collect::<Vec<_>>(),
        &[
            ChartSeries { name: name_a, values: view_chart_values(a, ReportMetric::Acc) },
            ChartSeries { name: name_b, values: view_chart_values(b, ReportMetric::Acc) },
        ],
    );
    let path = dir.join("compare_views_acc.svg");
    std::fs::write(&path, view_chart)?;
    written.push(path);

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary_of(values: &[f64]) -> MetricSummary {
        MetricSummary::from_raw(values.to_vec())
    }

    fn toy_cell(view: &str, algorithm: &str, base: f64, folds: usize) -> ReportCell {
        let raw: Vec<f64> = (0..folds).map(|f| base + 0.01 * f as f64).collect();
        ReportCell {
            view: view.to_string(),
            algorithm: algorithm.to_string(),
            acc: summary_of(&raw),
            fm: summary_of(&raw),
            rand: summary_of(&raw),
            rand_unadjusted: summary_of(&raw),
        }
    }

    fn toy_report(folds: usize, with_consensus: bool) -> EvalReport {
        let view_names = vec!["contrast".to_string(), "energy".to_string()];
        let algorithms = vec![
            AlgorithmColumn { id: "gmm".into(), label: "GMM".into() },
            AlgorithmColumn { id: "kmeans".into(), label: "K-Means".into() },
        ];
        let mut cells = Vec::new();
        for (v, view) in view_names.iter().enumerate() {
            for (a, algo) in algorithms.iter().enumerate() {
                cells.push(toy_cell(view, &algo.id, 0.5 + 0.05 * (v * 2 + a) as f64, folds));
            }
        }
        let consensus = with_consensus.then(|| toy_cell("multi-view", "rmkmc", 0.8, folds));
        let alpha = with_consensus.then(|| vec![vec![0.5, 0.5]; folds]);
        let folds_rec: Vec<FoldRecord> = (0..folds)
            .map(|f| FoldRecord {
                fold: f,
                train: vec![0, 1, 2],
                test: vec![3],
                fit_reads: vec![0, 1, 2],
                reduced_view_hashes: vec![1, 2],
            })
            .collect();
        EvalReport::assemble(
            "lda".to_string(),
            folds,
            42,
            view_names,
            algorithms,
            cells,
            consensus,
            alpha,
            folds_rec,
            "master_seed = 42\n".to_string(),
        )
        .unwrap()
    }

    #[test]
    fn summary_uses_population_statistics() {
        let s = summary_of(&[1.0, 2.0, 3.0, 4.0]);
        assert!((s.mean - 2.5).abs() < 1e-15);
        assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_fold_summary_has_zero_std() {
        let report = toy_report(1, true);
        let everywhere = report
            .cells
            .iter()
            .chain(&report.view_averages)
            .chain(&report.algorithm_averages)
            .chain(std::iter::once(&report.overall_average))
            .chain(report.overall_average_with_consensus.as_ref())
            .chain(report.consensus.as_ref());
        for cell in everywhere {
            assert_eq!(cell.acc.std.max(cell.fm.std).max(cell.rand.std), 0.0);
        }
    }

    #[test]
    fn cell_text_formats_match_table_conventions() {
        let acc = MetricSummary { mean: 0.7404, std: 0.0893, raw: vec![0.7404] };
        assert_eq!(ReportMetric::Acc.format(&acc), "74.0±8.9");
        let fm = MetricSummary { mean: 0.5912, std: 0.1077, raw: vec![0.5912] };
        assert_eq!(ReportMetric::Fm.format(&fm), "0.59±0.11");
        assert_eq!(ReportMetric::Rand.format(&fm), "0.59±0.11");
    }

    #[test]
    fn average_cells_keep_one_value_per_fold() {
        let report = toy_report(3, true);
        assert_eq!(report.view_averages[0].acc.raw.len(), 3);
        assert_eq!(report.algorithm_averages[1].acc.raw.len(), 3);
        assert_eq!(report.overall_average.acc.raw.len(), 3);
        let with = report.overall_average_with_consensus.as_ref().unwrap();
        assert_eq!(with.acc.raw.len(), 3);
        // Recompute the fold-wise means independently.
        let fold_mean = |f: usize| {
            report.cells.iter().map(|c| c.acc.raw[f]).sum::<f64>() / report.cells.len() as f64
        };
        for f in 0..3 {
            assert!((fold_mean(f) - report.overall_average.acc.raw[f]).abs() < 1e-12);
            let consensus = report.consensus.as_ref().unwrap();
            let with_f = (report.cells.iter().map(|c| c.acc.raw[f]).sum::<f64>()
                + consensus.acc.raw[f])
                / (report.cells.len() + 1) as f64;
            assert!((with_f - with.acc.raw[f]).abs() < 1e-12);
        }
        // With equal weights the mean of fold means equals the pooled mean.
        let pooled = report
            .cells
            .iter()
            .flat_map(|c| c.acc.raw.iter())
            .sum::<f64>()
            / (report.cells.len() * 3) as f64;
        assert!((pooled - report.overall_average.acc.mean).abs() < 1e-12);
        // The std is the spread of the fold means around their mean.
        let m = report.overall_average.acc.mean;
        let var = (0..3).map(|f| (fold_mean(f) - m) * (fold_mean(f) - m)).sum::<f64>() / 3.0;
        assert!((var.sqrt() - report.overall_average.acc.std).abs() < 1e-12);
    }

    #[test]
    fn csv_grid_has_average_row_column_and_trailing_consensus() {
        let dir = tempfile::TempDir::new().unwrap();
        let report = toy_report(3, true);
        let files = emit_report(&report, dir.path()).unwrap();
        assert!(files.iter().any(|p| p.ends_with("report_acc.csv")));
        let text = std::fs::read_to_string(dir.path().join("report_acc.csv")).unwrap();
        let rows: Vec<Vec<String>> = text
            .lines()
            .map(|l| l.split(',').map(|s| s.to_string()).collect())
            .collect();
        assert_eq!(rows[0], vec!["", "GMM", "K-Means", "Average", "RMKMC"]);
        assert_eq!(rows.len(), 1 + 2 + 1);
        assert_eq!(rows[1][0], "Contrast");
        assert_eq!(rows[2][0], "Energy");
        assert_eq!(rows[3][0], "Average");
        // Consensus appears only in the Average row.
        assert_eq!(rows[1][4], "");
        assert_eq!(rows[2][4], "");
        assert!(!rows[3][4].is_empty());
    }

    #[test]
    fn csv_cells_reparse_to_their_means() {
        let dir = tempfile::TempDir::new().unwrap();
        let report = toy_report(3, true);
        emit_report(&report, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("report_acc.csv")).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        let first = row[1].split('±').next().unwrap().parse::<f64>().unwrap();
        let expected = 100.0 * report.cells[0].acc.mean;
        assert!((first - expected).abs() <= 0.05 + 1e-12);
    }

    #[test]
    fn report_json_roundtrips() {
        let dir = tempfile::TempDir::new().unwrap();
        let report = toy_report(2, true);
        emit_report(&report, dir.path()).unwrap();
        let loaded = EvalReport::from_json_file(&dir.path().join("report.json")).unwrap();
        assert_eq!(loaded, report);
    }

    #[test]
    fn comparison_charts_cover_both_series() {
        let dir = tempfile::TempDir::new().unwrap();
        let a = toy_report(2, true);
        let mut b = toy_report(2, true);
        b.reduction = "pca".to_string();
        let files = emit_comparison(&a, &b, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let svg = std::fs::read_to_string(&files[0]).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("LDA") && svg.contains("PCA"));
        assert!(svg.contains("RMKMC"));
    }

    #[test]
    fn mismatched_reports_cannot_be_compared() {
        let dir = tempfile::TempDir::new().unwrap();
        let a = toy_report(2, true);
        let b = toy_report(2, false);
        assert!(emit_comparison(&a, &b, dir.path()).is_err());
    }

    #[test]
    fn malformed_grids_are_rejected() {
        let report = toy_report(2, true);
        let mut bad = report.clone();
        bad.cells.pop();
        assert!(bad.validate().is_err());
        let mut bad = report.clone();
        bad.cells[0].acc.raw.pop();
        assert!(bad.validate().is_err());
        let mut bad = report;
        bad.cells.swap(0, 1);
        assert!(bad.validate().is_err());
    }
}
