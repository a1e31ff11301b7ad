//! Sliding-window texture features.
//!
//! A grayscale region of interest is scanned with a square window; each
//! window yields four gray-level co-occurrence features (contrast,
//! homogeneity, energy, correlation) on the quantized pixels and three moment
//! features (sigma, skew, kurtosis) on the raw pixels. Collecting one feature
//! kind across all window positions produces one *view* of the image, so
//! every image contributes seven feature vectors of equal length.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Names of the seven views in report order.
pub const VIEW_NAMES: [&str; 7] = [
    "contrast",
    "homogeneity",
    "energy",
    "correlation",
    "sigma",
    "skew",
    "kurtosis",
];

/// Default co-occurrence offsets: horizontal, vertical and both diagonals,
/// expressed as (row delta, column delta).
pub const DEFAULT_OFFSETS: [(i32, i32); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

/// Per-pixel quantization of a grayscale image into discrete levels.
#[derive(Debug, Clone)]
pub struct QuantizedImage {
    width: usize,
    height: usize,
    levels: usize,
    bins: Vec<u16>,
}

impl QuantizedImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn bin(&self, x: usize, y: usize) -> usize {
        self.bins[y * self.width + x] as usize
    }
}

/// Maps [0, 1] intensities to bins via floor(v * levels), clamped to the top
/// bin so that v = 1.0 lands in levels - 1.
pub fn quantize(img: &GrayImage, levels: usize) -> Result<QuantizedImage> {
    if !(2..=4096).contains(&levels) {
        return Err(Error::invalid(format!(
            "quantization levels must lie in [2, 4096], got {levels}"
        )));
    }
    let bins = img
        .pixels()
        .iter()
        .map(|&v| (((v * levels as f64).floor() as usize).min(levels - 1)) as u16)
        .collect();
    Ok(QuantizedImage {
        width: img.width(),
        height: img.height(),
        levels,
        bins,
    })
}

/// Number of (rows, cols) window positions for a sliding window.
///
/// Returns (0, 0) when the image is smaller than the window in either
/// dimension.
pub fn window_grid(width: usize, height: usize, size: usize, stride: usize) -> (usize, usize) {
    if size == 0 || stride == 0 || width < size || height < size {
        return (0, 0);
    }
    ((height - size) / stride + 1, (width - size) / stride + 1)
}

/// A normalized, symmetric gray-level co-occurrence matrix.
#[derive(Debug, Clone)]
pub struct Glcm {
    levels: usize,
    p: Array2<f64>,
}

impl Glcm {
    /// Wraps an explicit probability matrix; entries must be nonnegative and
    /// sum to 1 within 1e-9.
    pub fn from_probabilities(p: Array2<f64>) -> Result<Self> {
        if p.nrows() != p.ncols() || p.nrows() == 0 {
            return Err(Error::invalid("co-occurrence matrix must be square and nonempty"));
        }
        if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid("co-occurrence entries must be nonnegative"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "co-occurrence entries sum to {sum}, expected 1"
            )));
        }
        Ok(Glcm { levels: p.nrows(), p })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn probabilities(&self) -> &Array2<f64> {
        &self.p
    }
}

/// Co-occurrence matrix of a full quantized image under the given offsets.
///
/// Every in-bounds ordered pixel pair (p, p + offset) is counted in both
/// orders (symmetrization) and counts are normalized to probabilities.
/// Fails with `EmptyGlcm` when no offset yields a single in-bounds pair.
pub fn glcm(q: &QuantizedImage, offsets: &[(i32, i32)]) -> Result<Glcm> {
    glcm_window(q, 0, 0, q.width(), q.height(), offsets)
}

/// Co-occurrence matrix restricted to the window with top-left corner
/// (x0, y0); both pixels of a pair must fall inside the window.
pub fn glcm_window(
    q: &QuantizedImage,
    x0: usize,
    y0: usize,
    width: usize,
    height: usize,
    offsets: &[(i32, i32)],
) -> Result<Glcm> {
    debug_assert!(x0 + width <= q.width() && y0 + height <= q.height());
    let levels = q.levels();
    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for (dy, dx) in offsets.iter().copied() {
        for y in 0..height as i64 {
            let ny = y + dy as i64;
            if ny < 0 || ny >= height as i64 {
                continue;
            }
            for x in 0..width as i64 {
                let nx = x + dx as i64;
                if nx < 0 || nx >= width as i64 {
                    continue;
                }
                let a = q.bin(x0 + x as usize, y0 + y as usize);
                let b = q.bin(x0 + nx as usize, y0 + ny as usize);
                counts[a * levels + b] += 1;
                counts[b * levels + a] += 1;
                total += 2;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyGlcm);
    }
    let denom = total as f64;
    let p = Array2::from_shape_fn((levels, levels), |(i, j)| counts[i * levels + j] as f64 / denom);
    Ok(Glcm { levels, p })
}

/// The four co-occurrence features of one GLCM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlcmFeatures {
    pub contrast: f64,
    pub homogeneity: f64,
    pub energy: f64,
    pub correlation: f64,
}

/// Contrast, homogeneity, energy and correlation of a co-occurrence matrix.
///
/// Correlation uses the marginal means and standard deviations and is defined
/// as 0 when either marginal is degenerate (zero standard deviation).
pub fn glcm_features(g: &Glcm) -> GlcmFeatures {
    let levels = g.levels;
    let p = &g.p;
    let mut px = vec![0.0f64; levels];
    let mut py = vec![0.0f64; levels];
    for i in 0..levels {
        for j in 0..levels {
            px[i] += p[(i, j)];
            py[j] += p[(i, j)];
        }
    }
    let mean = |m: &[f64]| -> f64 { m.iter().enumerate().map(|(i, &v)| i as f64 * v).sum() };
    let mu_x = mean(&px);
    let mu_y = mean(&py);
    let var = |m: &[f64], mu: f64| -> f64 {
        m.iter()
            .enumerate()
            .map(|(i, &v)| (i as f64 - mu) * (i as f64 - mu) * v)
            .sum()
    };
    let sigma_x = var(&px, mu_x).sqrt();
    let sigma_y = var(&py, mu_y).sqrt();

    let mut contrast = 0.0;
    let mut homogeneity = 0.0;
    let mut energy = 0.0;
    let mut covariance = 0.0;
    for i in 0..levels {
        for j in 0..levels {
            let v = p[(i, j)];
            let d = i as f64 - j as f64;
            contrast += d * d * v;
            homogeneity += v / (1.0 + d.abs());
            energy += v * v;
            covariance += (i as f64 - mu_x) * (j as f64 - mu_y) * v;
        }
    }
    let correlation = if sigma_x * sigma_y > 0.0 {
        covariance / (sigma_x * sigma_y)
    } else {
        0.0
    };
    GlcmFeatures { contrast, homogeneity, energy, correlation }
}

/// The three moment features of one raw-intensity window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentFeatures {
    pub sigma: f64,
    pub skew: f64,
    pub kurtosis: f64,
}

/// Population standard deviation, skewness and excess kurtosis. Both shape
/// statistics are defined as 0 for a constant window (sigma = 0).
pub fn moment_features(values: &[f64]) -> Result<MomentFeatures> {
    if values.is_empty() {
        return Err(Error::invalid("moment features need at least one value"));
    }
    if values.iter().all(|&v| v == values[0]) {
        // A constant window has no dispersion; report exact zeros rather than
        // summation noise so downstream features stay deterministic.
        return Ok(MomentFeatures { sigma: 0.0, skew: 0.0, kurtosis: 0.0 });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let sigma = m2.sqrt();
    let (skew, kurtosis) = if sigma > 0.0 {
        (m3 / (sigma * sigma * sigma), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(MomentFeatures { sigma, skew, kurtosis })
}

/// Windowing and quantization parameters for view extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewConfig {
    pub window: usize,
    pub stride: usize,
    pub levels: usize,
    pub offsets: Vec<(i32, i32)>,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig {
            window: 7,
            stride: 1,
            levels: 16,
            offsets: DEFAULT_OFFSETS.to_vec(),
        }
    }
}

impl ViewConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::invalid(format!(
                "window size must be at least 2, got {}",
                self.window
            )));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be positive"));
        }
        if self.offsets.is_empty() {
            return Err(Error::invalid("at least one co-occurrence offset is required"));
        }
        if self.offsets.iter().any(|&(dy, dx)| dy == 0 && dx == 0) {
            return Err(Error::invalid("offset (0, 0) pairs a pixel with itself"));
        }
        Ok(())
    }
}

/// The seven per-window feature vectors of a single image, in
/// [`VIEW_NAMES`] order. All vectors share length rows * cols of the window
/// grid (row-major window order).
#[derive(Debug, Clone)]
pub struct ImageViews {
    pub grid: (usize, usize),
    pub features: [Vec<f64>; 7],
}

/// Slides the window over the image and evaluates all seven features per
/// position.
pub fn extract_views(img: &GrayImage, config: &ViewConfig) -> Result<ImageViews> {
    config.validate()?;
    let (rows, cols) = window_grid(img.width(), img.height(), config.window, config.stride);
    let q = quantize(img, config.levels)?;
    let d = rows * cols;
    let mut features: [Vec<f64>; 7] = std::array::from_fn(|_| Vec::with_capacity(d));
    let mut raw = Vec::with_capacity(config.window * config.window);
    for gy in 0..rows {
        for gx in 0..cols {
            let y0 = gy * config.stride;
            let x0 = gx * config.stride;
            let g = glcm_window(&q, x0, y0, config.window, config.window, &config.offsets)?;
            let gf = glcm_features(&g);
            raw.clear();
            for y in y0..y0 + config.window {
                for x in x0..x0 + config.window {
                    raw.push(img.get(x, y));
                }
            }
            let mf = moment_features(&raw)?;
            features[0].push(gf.contrast);
            features[1].push(gf.homogeneity);
            features[2].push(gf.energy);
            features[3].push(gf.correlation);
            features[4].push(mf.sigma);
            features[5].push(mf.skew);
            features[6].push(mf.kurtosis);
        }
    }
    Ok(ImageViews { grid: (rows, cols), features })
}

/// One feature view over a whole corpus: an n-samples by d-windows matrix.
#[derive(Debug, Clone)]
pub struct FeatureView {
    pub name: String,
    pub data: Array2<f64>,
}

/// All seven views of a corpus plus optional labels and stable sample ids.
#[derive(Debug, Clone)]
pub struct MultiViewDataset {
    pub views: Vec<FeatureView>,
    pub labels: Option<Vec<usize>>,
    pub sample_ids: Vec<String>,
    /// Common (width, height) every ROI was resampled to.
    pub roi_size: (usize, usize),
}

impl MultiViewDataset {
    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    /// Number of classes implied by the labels (max label + 1).
    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().max().map_or(0, |&m| m + 1))
    }
}

/// Nearest-neighbor resampling to the target size.
fn resample_nearest(img: &GrayImage, tw: usize, th: usize) -> GrayImage {
    if img.width() == tw && img.height() == th {
        return img.clone();
    }
    GrayImage::from_fn(tw, th, |x, y| {
        let sx = (((x as f64 + 0.5) * img.width() as f64 / tw as f64) as usize).min(img.width() - 1);
        let sy =
            (((y as f64 + 0.5) * img.height() as f64 / th as f64) as usize).min(img.height() - 1);
        img.get(sx, sy)
    })
    .expect("resampled values are existing pixels")
}

/// Assembles the seven-view dataset for a corpus of ROIs.
///
/// ROIs of unequal size are nearest-neighbor resampled to the corpus minimum
/// width and height so every image yields the same window grid. When labels
/// are given they must cover every class 0..=max at least once.
pub fn build_dataset(
    rois: &[GrayImage],
    labels: Option<&[usize]>,
    sample_ids: &[String],
    config: &ViewConfig,
) -> Result<MultiViewDataset> {
    config.validate()?;
    if rois.is_empty() {
        return Err(Error::invalid("cannot build a dataset from zero images"));
    }
    if sample_ids.len() != rois.len() {
        return Err(Error::invalid(format!(
            "{} sample ids for {} images",
            sample_ids.len(),
            rois.len()
        )));
    }
    if let Some(l) = labels {
        if l.len() != rois.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} images",
                l.len(),
                rois.len()
            )));
        }
        let n_classes = l.iter().max().map_or(0, |&m| m + 1);
        for c in 0..n_classes {
            if !l.contains(&c) {
                return Err(Error::invalid(format!(
                    "class {c} has no samples (labels must cover 0..={})",
                    n_classes - 1
                )));
            }
        }
    }
    let min_w = rois.iter().map(|r| r.width()).min().unwrap();
    let min_h = rois.iter().map(|r| r.height()).min().unwrap();
    let (rows, cols) = window_grid(min_w, min_h, config.window, config.stride);
    let d = rows * cols;
    if d == 0 {
        return Err(Error::invalid(format!(
            "minimum ROI size {min_w}x{min_h} is smaller than the {0}x{0} window",
            config.window
        )));
    }
    let n = rois.len();
    let mut matrices: Vec<Array2<f64>> = (0..7).map(|_| Array2::zeros((n, d))).collect();
    for (i, roi) in rois.iter().enumerate() {
        let resampled = resample_nearest(roi, min_w, min_h);
        let views = extract_views(&resampled, config)?;
        for (v, feats) in views.features.iter().enumerate() {
            debug_assert_eq!(feats.len(), d);
            for (j, &val) in feats.iter().enumerate() {
                matrices[v][(i, j)] = val;
            }
        }
    }
    let views = VIEW_NAMES
        .iter()
        .zip(matrices)
        .map(|(name, data)| FeatureView { name: (*name).to_string(), data })
        .collect();
    Ok(MultiViewDataset {
        views,
        labels: labels.map(|l| l.to_vec()),
        sample_ids: sample_ids.to_vec(),
        roi_size: (min_w, min_h),
    })
}
