//! Dimensionality reduction: supervised linear discriminant projection and
//! an unsupervised principal-component baseline.
//!
//! Both reducers produce a [`ProjectionModel`] holding the training mean and
//! a d-by-k basis; transforming subtracts the mean and multiplies by the
//! basis. Basis columns are unit-length with the sign fixed so each column's
//! largest-magnitude coordinate is positive, making models reproducible.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg;

/// Default ridge coefficient for the within-class scatter regularizer.
pub const DEFAULT_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    Lda,
    Pca,
}

impl std::fmt::Display for ProjectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProjectionKind::Lda => write!(f, "lda"),
            ProjectionKind::Pca => write!(f, "pca"),
        }
    }
}

/// A fitted linear projection x -> (x - mean) B.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    pub kind: ProjectionKind,
    pub k: usize,
    pub mean: Array1<f64>,
    /// d-by-k basis; columns are unit length, sign-fixed.
    pub basis: Array2<f64>,
    /// Criterion values per component, descending: generalized eigenvalues
    /// for LDA, squared singular values of the centered data for PCA.
    pub eigenvalues: Vec<f64>,
    /// Ridge coefficient used for the fit (LDA only; 0 for PCA).
    pub ridge: f64,
}

impl ProjectionModel {
    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Projects rows of `x` into the reduced space.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "model expects {} features, data has {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        let centered = x - &self.mean.view().insert_axis(ndarray::Axis(0));
        Ok(centered.dot(&self.basis))
    }
}

/// Flips each basis column so its largest-magnitude coordinate (first such
/// index on ties) is positive, and normalizes it to unit length.
fn canonicalize_columns(basis: &mut Array2<f64>) -> Result<()> {
    for mut col in basis.columns_mut() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical(
                "projection direction collapsed to zero".into(),
            ));
        }
        col.mapv_inplace(|v| v / norm);
        let mut pivot = 0usize;
        let mut best = -1.0f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok(())
}

fn class_partition(labels: &[usize]) -> Result<(usize, Vec<Vec<usize>>)> {
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    if n_classes < 2 {
        return Err(Error::DegenerateClass(
            "discriminant fitting needs at least two classes".into(),
        ));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if m.is_empty() {
            return Err(Error::DegenerateClass(format!("class {c} has no samples")));
        }
    }
    Ok((n_classes, members))
}

/// Fits a linear discriminant projection on labeled data.
///
/// The basis spans the top-k generalized eigenvectors of
/// (S_w + ridge * tau * I)^-1 S_b where S_w and S_b are the within- and
/// between-class scatter matrices and tau = trace(S_w) / d scales the ridge
/// to the data. k must not exceed C - 1 (the rank bound of S_b for C
/// classes).
///
/// Because S_b has rank at most C - 1, the nonzero generalized eigenpairs
/// are recovered from a C-by-C reduced problem: with U the matrix of
/// sqrt(n_c)-weighted centered class means and B the regularized S_w, the
/// eigenvalues of U^T B^-1 U are exactly the nonzero generalized eigenvalues
/// and each eigenvector y maps to a direction B^-1 U y. This keeps the cost
/// at one d-by-d Cholesky factorization regardless of d.
pub fn lda_fit(x: &Array2<f64>, labels: &[usize], k: usize, ridge: f64) -> Result<ProjectionModel> {
    let (n, d) = x.dim();
    if n != labels.len() {
        return Err(Error::invalid(format!(
            "{} samples but {} labels",
            n,
            labels.len()
        )));
    }
    if n == 0 || d == 0 {
        return Err(Error::invalid("cannot fit on an empty matrix"));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::invalid(format!("ridge must be nonnegative, got {ridge}")));
    }
    let (n_classes, members) = class_partition(labels)?;
    if k == 0 || k > n_classes - 1 {
        return Err(Error::invalid(format!(
            "k must lie in 1..={} for {} classes, got {k}",
            n_classes - 1,
            n_classes
        )));
    }

    let mean = x.mean_axis(ndarray::Axis(0)).expect("n > 0");
    let mut class_means = Array2::<f64>::zeros((n_classes, d));
    for (c, m) in members.iter().enumerate() {
        for &i in m {
            for j in 0..d {
                class_means[(c, j)] += x[(i, j)];
            }
        }
        let inv = 1.0 / m.len() as f64;
        for j in 0..d {
            class_means[(c, j)] *= inv;
        }
    }

    // S_w = sum over classes of per-class centered Gram matrices.
    let mut s_w = Array2::<f64>::zeros((d, d));
    for (c, m) in members.iter().enumerate() {
        let mut centered = Array2::<f64>::zeros((m.len(), d));
        for (row, &i) in m.iter().enumerate() {
            for j in 0..d {
                centered[(row, j)] = x[(i, j)] - class_means[(c, j)];
            }
        }
        s_w = s_w + centered.t().dot(&centered);
    }

    let tau = s_w.diag().sum() / d as f64;
    // When every sample equals its class mean, tau vanishes; fall back to an
    // absolute floor so the system stays positive definite.
    let reg = if tau > 0.0 { ridge * tau } else { ridge.max(1e-12) };
    for i in 0..d {
        s_w[(i, i)] += reg;
    }

    // U holds sqrt(n_c)-weighted centered class means as columns.
    let mut u = Array2::<f64>::zeros((d, n_classes));
    for c in 0..n_classes {
        let w = (members[c].len() as f64).sqrt();
        for j in 0..d {
            u[(j, c)] = w * (class_means[(c, j)] - mean[j]);
        }
    }

    let l = linalg::cholesky(&s_w)?;
    let z = linalg::solve_spd_multi(&l, &u); // B^-1 U
    let s = u.t().dot(&z); // C x C reduced problem
    let (eigenvalues, y) = linalg::jacobi_eigh(&s)?;

    let scale = eigenvalues[0].abs().max(1e-30);
    let mut basis = Array2::<f64>::zeros((d, k));
    for j in 0..k {
        if eigenvalues[j] <= 1e-12 * scale {
            return Err(Error::DegenerateClass(format!(
                "between-class scatter has rank < {k}: class means are linearly dependent"
            )));
        }
        let yj = y.column(j).to_owned();
        let v = z.dot(&yj);
        for r in 0..d {
            basis[(r, j)] = v[r];
        }
    }
    canonicalize_columns(&mut basis)?;
    Ok(ProjectionModel {
        kind: ProjectionKind::Lda,
        k,
        mean,
        basis,
        eigenvalues: eigenvalues[..k].to_vec(),
        ridge,
    })
}

/// Fits a principal-component projection on unlabeled data.
///
/// The basis holds the top-k right singular directions of the centered data
/// matrix. k must not exceed min(n - 1, d). Whichever of the n-by-n Gram
/// matrix and the d-by-d covariance-scale matrix is smaller is decomposed;
/// both routes yield the same directions.
pub fn pca_fit(x: &Array2<f64>, k: usize) -> Result<ProjectionModel> {
    let (n, d) = x.dim();
    if n < 2 || d == 0 {
        return Err(Error::invalid(format!(
            "principal components need at least 2 samples and 1 feature, got {n}x{d}"
        )));
    }
    let limit = (n - 1).min(d);
    if k == 0 || k > limit {
        return Err(Error::invalid(format!(
            "k must lie in 1..={limit} for a {n}x{d} matrix, got {k}"
        )));
    }
    let mean = x.mean_axis(ndarray::Axis(0)).expect("n > 0");
    let centered = x - &mean.view().insert_axis(ndarray::Axis(0));

    let mut basis = Array2::<f64>::zeros((d, k));
    let eigenvalues: Vec<f64>;
    if n <= d {
        // Gram route: X_c X_c^T u = s^2 u, direction v = X_c^T u / s.
        let gram = centered.dot(&centered.t());
        let (vals, vecs) = linalg::jacobi_eigh(&gram)?;
        let scale = vals[0].abs().max(1e-30);
        for j in 0..k {
            if vals[j] <= 1e-12 * scale {
                return Err(Error::Numerical(format!(
                    "data rank is below the requested {k} components"
                )));
            }
            let u = vecs.column(j).to_owned();
            let v = centered.t().dot(&u);
            for r in 0..d {
                basis[(r, j)] = v[r];
            }
        }
        eigenvalues = vals[..k].to_vec();
    } else {
        let cov_scale = centered.t().dot(&centered);
        let (vals, vecs) = linalg::jacobi_eigh(&cov_scale)?;
        let scale = vals[0].abs().max(1e-30);
        for j in 0..k {
            if vals[j] <= 1e-12 * scale {
                return Err(Error::Numerical(format!(
                    "data rank is below the requested {k} components"
                )));
            }
            for r in 0..d {
                basis[(r, j)] = vecs[(r, j)];
            }
        }
        eigenvalues = vals[..k].to_vec();
    }
    canonicalize_columns(&mut basis)?;
    Ok(ProjectionModel {
        kind: ProjectionKind::Pca,
        k,
        mean,
        basis,
        eigenvalues,
        ridge: 0.0,
    })
}

/// On-disk JSON schema for a projection model.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    kind: ProjectionKind,
    k: usize,
    d: usize,
    ridge: f64,
    eigenvalues: Vec<f64>,
    mean: Vec<f64>,
    /// Row-major d rows of k coefficients.
    basis: Vec<Vec<f64>>,
    /// Fit settings used to produce the model, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_echo: Option<String>,
}

pub fn save_model(model: &ProjectionModel, path: &Path) -> Result<()> {
    save_model_with_echo(model, path, None)
}

/// [`save_model`] with the producing configuration embedded in the file for
/// provenance.
pub fn save_model_with_echo(
    model: &ProjectionModel,
    path: &Path,
    config_echo: Option<&str>,
) -> Result<()> {
    let file = ModelFile {
        kind: model.kind,
        k: model.k,
        d: model.input_dim(),
        ridge: model.ridge,
        eigenvalues: model.eigenvalues.clone(),
        mean: model.mean.to_vec(),
        basis: model
            .basis
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        config_echo: config_echo.map(|s| s.to_string()),
    };
    let json = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ProjectionModel> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.mean.len() != file.d || file.basis.len() != file.d {
        return Err(Error::invalid("model file dimensions are inconsistent"));
    }
    let mut basis = Array2::<f64>::zeros((file.d, file.k));
    for (r, row) in file.basis.iter().enumerate() {
        if row.len() != file.k {
            return Err(Error::invalid("model basis row length mismatch"));
        }
        for (c, &v) in row.iter().enumerate() {
            basis[(r, c)] = v;
        }
    }
    Ok(ProjectionModel {
        kind: file.kind,
        k: file.k,
        mean: Array1::from_vec(file.mean),
        basis,
        eigenvalues: file.eigenvalues,
        ridge: file.ridge,
    })
}
