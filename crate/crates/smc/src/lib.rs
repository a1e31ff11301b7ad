//! Semi-supervised multi-view clustering of textured image corpora.
//!
//! The crate implements a complete screening-style benchmark pipeline:
//!
//! 1. [`imaging`] — grayscale conversion, median denoising, linear intensity
//!    normalization, and region-of-interest extraction;
//! 2. [`views`] — a 7x7 sliding window turned into seven texture views per
//!    image (four co-occurrence features, three moment features);
//! 3. [`reduce`] — per-view supervised discriminant projection (with an
//!    unsupervised principal-component baseline);
//! 4. [`cluster`] — six single-view clustering algorithms behind a named
//!    strategy registry plus a weighted multi-view k-means consensus;
//! 5. [`metrics`] — accuracy, Fowlkes–Mallows, Rand and adjusted Rand
//!    indices against held-out ground truth;
//! 6. [`pipeline`] — stratified cross-validation orchestration, a synthetic
//!    phantom-corpus generator, and CSV/JSON/SVG report emission.
//!
//! Every stage is a pure function of its inputs and the experiment seed;
//! identical configurations reproduce reports bit for bit.

pub mod cluster;
pub mod error;
pub mod imaging;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod reduce;
pub mod seed;
pub mod views;

pub use error::{Error, Result};
