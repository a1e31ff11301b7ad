//! Image preprocessing: grayscale conversion, median denoising, linear
//! intensity normalization, and region-of-interest extraction.
//!
//! Intensities are real-valued in [0, 1] throughout; 8-bit channels are
//! scaled by 1/255 and 16-bit by 1/65535 on ingest. All operations are pure
//! functions of their inputs.

use image::DynamicImage;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A dense grayscale raster with row-major [0, 1] intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Builds an image from row-major samples, validating shape and range.
    pub fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "pixel buffer holds {} values but {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::invalid(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(GrayImage { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_raw(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// How to locate the region of interest within a preprocessed image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RoiSpec {
    /// Explicit rectangle in pixel coordinates.
    Rect { x: usize, y: usize, width: usize, height: usize },
    /// Tight bounding box of the largest 4-connected component of pixels at
    /// or above `threshold`.
    Auto { threshold: f64 },
}

impl Default for RoiSpec {
    fn default() -> Self {
        RoiSpec::Auto { threshold: 0.1 }
    }
}

/// Converts a decoded image to grayscale luminance.
///
/// Multi-channel inputs use the Rec. 601 weights 0.299 R + 0.587 G + 0.114 B;
/// alpha channels are ignored.
pub fn to_grayscale(image: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::invalid("cannot convert an empty image"));
    }
    let luminance = |r: f64, g: f64, b: f64| 0.299 * r + 0.587 * g + 0.114 * b;
    let data: Vec<f64> = match image {
        DynamicImage::ImageLuma8(img) => img.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(img) => img.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(img) => img.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(img) => img.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb8(img) => img
            .pixels()
            .map(|p| {
                luminance(
                    p.0[0] as f64 / 255.0,
                    p.0[1] as f64 / 255.0,
                    p.0[2] as f64 / 255.0,
                )
            })
            .collect(),
        DynamicImage::ImageRgba8(img) => img
            .pixels()
            .map(|p| {
                luminance(
                    p.0[0] as f64 / 255.0,
                    p.0[1] as f64 / 255.0,
                    p.0[2] as f64 / 255.0,
                )
            })
            .collect(),
        other => {
            let rgb = other.to_rgb16();
            rgb.pixels()
                .map(|p| {
                    luminance(
                        p.0[0] as f64 / 65535.0,
                        p.0[1] as f64 / 65535.0,
                        p.0[2] as f64 / 65535.0,
                    )
                })
                .collect()
        }
    };
    // Luminance of in-range channels stays in range; clamp only against
    // float dust from the weighted sum.
    let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    GrayImage::from_raw(w, h, data)
}

/// Median filter with a (2r+1) x (2r+1) square window and edge replication.
///
/// Radius 0 is the identity. Output dimensions equal input dimensions.
pub fn median_filter(img: &GrayImage, radius: usize) -> GrayImage {
    if radius == 0 {
        return img.clone();
    }
    let (w, h) = (img.width, img.height);
    let r = radius as isize;
    let mut out = Vec::with_capacity(w * h);
    let mut window = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1));
    for y in 0..h as isize {
        for x in 0..w as isize {
            window.clear();
            for dy in -r..=r {
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                    let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                    window.push(img.get(sx, sy));
                }
            }
            window.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out.push(window[window.len() / 2]);
        }
    }
    GrayImage { width: w, height: h, data: out }
}

/// Rescales intensities linearly so the minimum maps to 0 and the maximum to
/// 1. A constant image maps to all zeros.
pub fn normalize_linear(img: &GrayImage) -> GrayImage {
    let min = img.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = img.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let data = if max > min {
        let span = max - min;
        img.data.iter().map(|&v| (v - min) / span).collect()
    } else {
        vec![0.0; img.data.len()]
    };
    GrayImage { width: img.width, height: img.height, data }
}

/// Crops the region of interest described by `spec`.
///
/// `Rect` crops exactly the given rectangle (bounds-checked). `Auto` selects
/// the largest 4-connected component of pixels at or above the threshold and
/// crops its tight bounding box; when no pixel reaches the threshold the
/// image has no foreground and `EmptyRoi` is returned.
pub fn extract_roi(img: &GrayImage, spec: &RoiSpec) -> Result<GrayImage> {
    match *spec {
        RoiSpec::Rect { x, y, width, height } => {
            if width == 0 || height == 0 {
                return Err(Error::invalid("ROI rectangle must be nonempty"));
            }
            if x + width > img.width || y + height > img.height {
                return Err(Error::invalid(format!(
                    "ROI {x},{y} {width}x{height} exceeds image {}x{}",
                    img.width, img.height
                )));
            }
            crop(img, x, y, width, height)
        }
        RoiSpec::Auto { threshold } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::invalid(format!(
                    "ROI threshold must lie in [0, 1], got {threshold}"
                )));
            }
            let (x, y, width, height) = largest_component_bbox(img, threshold)?;
            crop(img, x, y, width, height)
        }
    }
}

fn crop(img: &GrayImage, x: usize, y: usize, width: usize, height: usize) -> Result<GrayImage> {
    let mut data = Vec::with_capacity(width * height);
    for row in y..y + height {
        for col in x..x + width {
            data.push(img.get(col, row));
        }
    }
    Ok(GrayImage { width, height, data })
}

/// Tight bounding box (x, y, w, h) of the largest 4-connected foreground
/// component. Components are discovered in row-major scan order, so equal
/// sizes resolve to the component seen first.
fn largest_component_bbox(img: &GrayImage, threshold: f64) -> Result<(usize, usize, usize, usize)> {
    let (w, h) = (img.width, img.height);
    let fg: Vec<bool> = img.data.iter().map(|&v| v >= threshold).collect();
    if !fg.iter().any(|&b| b) {
        return Err(Error::EmptyRoi { threshold });
    }
    let mut visited = vec![false; w * h];
    let mut best: Option<(usize, (usize, usize, usize, usize))> = None;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..w * h {
        if !fg[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let (mut min_x, mut max_x) = (start % w, start % w);
        let (mut min_y, mut max_y) = (start / w, start / w);
        let mut size = 0usize;
        while let Some(idx) = queue.pop_front() {
            size += 1;
            let (x, y) = (idx % w, idx / w);
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
            let mut push = |nx: usize, ny: usize| {
                let nidx = ny * w + nx;
                if fg[nidx] && !visited[nidx] {
                    visited[nidx] = true;
                    queue.push_back(nidx);
                }
            };
            if x > 0 {
                push(x - 1, y);
            }
            if x + 1 < w {
                push(x + 1, y);
            }
            if y > 0 {
                push(x, y - 1);
            }
            if y + 1 < h {
                push(x, y + 1);
            }
        }
        let bbox = (min_x, min_y, max_x - min_x + 1, max_y - min_y + 1);
        if best.map_or(true, |(bs, _)| size > bs) {
            best = Some((size, bbox));
        }
    }
    Ok(best.unwrap().1)
}

/// Reads a PNG or PGM file and converts it to grayscale.
pub fn read_image(path: &Path) -> Result<GrayImage> {
    let img = image::open(path)?;
    to_grayscale(&img)
}

/// Lists the image files (png/pgm/ppm/pbm/pnm) in a directory, sorted by
/// path so corpus order is stable across platforms. Errors when none exist.
pub fn list_image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| {
                    matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "ppm" | "pbm" | "pnm")
                })
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!("no image files found in {}", dir.display())));
    }
    Ok(paths)
}

/// Writes a 16-bit binary PGM, quantizing [0, 1] to 0..=65535.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let buf: Vec<u16> = img
        .pixels()
        .iter()
        .map(|&v| (v * 65535.0).round() as u16)
        .collect();
    let out = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(
        img.width() as u32,
        img.height() as u32,
        buf,
    )
    .expect("buffer sized from image dimensions");
    out.save(path)?;
    Ok(())
}

/// Writes an 8-bit grayscale PNG, quantizing [0, 1] to 0..=255.
pub fn write_png(img: &GrayImage, path: &Path) -> Result<()> {
    let buf: Vec<u8> = img
        .pixels()
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    let out = image::ImageBuffer::<image::Luma<u8>, _>::from_raw(
        img.width() as u32,
        img.height() as u32,
        buf,
    )
    .expect("buffer sized from image dimensions");
    out.save(path)?;
    Ok(())
}
