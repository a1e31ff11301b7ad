//! File interchange: CSV matrices and labels, and view-set directories.
//!
//! Feature matrices travel as CSV with a `sample_id` first column so that
//! separately stored labels can always be re-aligned by id rather than by
//! row position. A full multi-view dataset is a directory holding one CSV
//! per view, a labels CSV, and a small JSON manifest tying them together.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::views::{FeatureView, MultiViewDataset};

/// Writes a matrix with stable row ids: header `sample_id,c0,c1,...`.
pub fn write_matrix_csv(path: &Path, ids: &[String], matrix: &Array2<f64>) -> Result<()> {
    if ids.len() != matrix.nrows() {
        return Err(Error::invalid(format!(
            "{} ids for a {}-row matrix",
            ids.len(),
            matrix.nrows()
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["sample_id".to_string()];
    header.extend((0..matrix.ncols()).map(|j| format!("c{j}")));
    w.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut record = vec![id.clone()];
        record.extend(matrix.row(i).iter().map(|v| format!("{v:?}")));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix_csv`]; returns (ids, matrix).
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.is_empty() || &header[0] != "sample_id" {
        return Err(Error::invalid(format!(
            "{}: expected a 'sample_id' first column, got {:?}",
            path.display(),
            header.iter().next().unwrap_or("")
        )));
    }
    let d = header.len() - 1;
    let mut ids = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for record in r.records() {
        let record = record?;
        if record.len() != d + 1 {
            return Err(Error::invalid(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                ids.len() + 2,
                record.len(),
                d + 1
            )));
        }
        ids.push(record[0].to_string());
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| {
                Error::invalid(format!("{}: '{field}' is not a number", path.display()))
            })?;
            values.push(v);
        }
    }
    let n = ids.len();
    let matrix = Array2::from_shape_vec((n, d), values)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    Ok((ids, matrix))
}

/// Writes labels as `sample_id,label` rows.
pub fn write_labels_csv(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} ids for {} labels",
            ids.len(),
            labels.len()
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_id", "label"])?;
    for (id, label) in ids.iter().zip(labels) {
        w.write_record([id.as_str(), &label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads labels written by [`write_labels_csv`].
pub fn read_labels_csv(path: &Path) -> Result<(Vec<String>, Vec<usize>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() != 2 || &header[0] != "sample_id" || &header[1] != "label" {
        return Err(Error::invalid(format!(
            "{}: expected header sample_id,label",
            path.display()
        )));
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for record in r.records() {
        let record = record?;
        ids.push(record[0].to_string());
        let label: usize = record[1].parse().map_err(|_| {
            Error::invalid(format!(
                "{}: label '{}' is not a non-negative integer",
                path.display(),
                &record[1]
            ))
        })?;
        labels.push(label);
    }
    Ok((ids, labels))
}

/// Reorders `labels` (keyed by `label_ids`) to follow `wanted_ids`.
pub fn align_labels(
    wanted_ids: &[String],
    label_ids: &[String],
    labels: &[usize],
) -> Result<Vec<usize>> {
    let lookup: std::collections::HashMap<&str, usize> = label_ids
        .iter()
        .zip(labels)
        .map(|(id, &l)| (id.as_str(), l))
        .collect();
    if lookup.len() != label_ids.len() {
        return Err(Error::invalid("duplicate sample_id in label file"));
    }
    wanted_ids
        .iter()
        .map(|id| {
            lookup
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::invalid(format!("no label for sample '{id}'")))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ViewEntry {
    name: String,
    file: String,
    columns: usize,
}

/// Manifest written next to the per-view CSVs of a dataset directory.
#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    n_samples: usize,
    roi_width: usize,
    roi_height: usize,
    views: Vec<ViewEntry>,
    labels_file: Option<String>,
    /// Extraction settings used to produce the views, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_echo: Option<String>,
}

/// Saves all views of a dataset into `dir` (created if missing): one
/// `view_<name>.csv` per view, `labels.csv` when labels exist, and
/// `manifest.json` describing the set.
pub fn save_dataset(dir: &Path, dataset: &MultiViewDataset) -> Result<()> {
    save_dataset_with_echo(dir, dataset, None)
}

/// [`save_dataset`] with the producing configuration embedded in the
/// manifest for provenance.
pub fn save_dataset_with_echo(
    dir: &Path,
    dataset: &MultiViewDataset,
    config_echo: Option<&str>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for view in &dataset.views {
        let file = format!("view_{}.csv", view.name);
        write_matrix_csv(&dir.join(&file), &dataset.sample_ids, &view.data)?;
        entries.push(ViewEntry {
            name: view.name.clone(),
            file,
            columns: view.data.ncols(),
        });
    }
    let labels_file = match &dataset.labels {
        Some(labels) => {
            write_labels_csv(&dir.join("labels.csv"), &dataset.sample_ids, labels)?;
            Some("labels.csv".to_string())
        }
        None => None,
    };
    let manifest = DatasetManifest {
        n_samples: dataset.n_samples(),
        roi_width: dataset.roi_size.0,
        roi_height: dataset.roi_size.1,
        views: entries,
        labels_file,
        config_echo: config_echo.map(|s| s.to_string()),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Loads a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<MultiViewDataset> {
    let manifest_path = dir.join("manifest.json");
    let raw = std::fs::read_to_string(&manifest_path)?;
    let manifest: DatasetManifest = serde_json::from_str(&raw)?;
    let mut views = Vec::new();
    let mut sample_ids: Option<Vec<String>> = None;
    for entry in &manifest.views {
        let (ids, data) = read_matrix_csv(&dir.join(&entry.file))?;
        if data.ncols() != entry.columns {
            return Err(Error::invalid(format!(
                "view '{}' has {} columns, manifest says {}",
                entry.name,
                data.ncols(),
                entry.columns
            )));
        }
        match &sample_ids {
            None => sample_ids = Some(ids),
            Some(existing) => {
                if *existing != ids {
                    return Err(Error::invalid(format!(
                        "view '{}' lists different sample ids than earlier views",
                        entry.name
                    )));
                }
            }
        }
        views.push(FeatureView { name: entry.name.clone(), data });
    }
    let sample_ids = sample_ids
        .ok_or_else(|| Error::invalid("dataset manifest lists no views"))?;
    if sample_ids.len() != manifest.n_samples {
        return Err(Error::invalid(format!(
            "manifest says {} samples, views hold {}",
            manifest.n_samples,
            sample_ids.len()
        )));
    }
    let labels = match &manifest.labels_file {
        Some(file) => {
            let (ids, labels) = read_labels_csv(&dir.join(file))?;
            Some(align_labels(&sample_ids, &ids, &labels)?)
        }
        None => None,
    };
    Ok(MultiViewDataset {
        views,
        labels,
        sample_ids,
        roi_size: (manifest.roi_width, manifest.roi_height),
    })
}

/// Resolves a possibly relative path against a base directory.
pub fn resolve_path(base: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use tempfile::TempDir;

    #[test]
    fn matrix_roundtrip_is_bit_exact() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("m.csv");
        let ids = vec!["a".to_string(), "b".to_string()];
        let m = array![[1.5, -2.25, 1.0e-17], [0.1, 3.0, f64::MIN_POSITIVE]];
        write_matrix_csv(&path, &ids, &m).unwrap();
        let (rids, rm) = read_matrix_csv(&path).unwrap();
        assert_eq!(rids, ids);
        assert_eq!(rm.dim(), (2, 3));
        for (x, y) in m.iter().zip(rm.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn labels_roundtrip_and_alignment() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("labels.csv");
        let ids: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        write_labels_csv(&path, &ids, &[2, 0, 1]).unwrap();
        let (rids, rlabels) = read_labels_csv(&path).unwrap();
        assert_eq!(rids, ids);
        assert_eq!(rlabels, vec![2, 0, 1]);

        let wanted: Vec<String> = ["z", "x", "y"].iter().map(|s| s.to_string()).collect();
        let aligned = align_labels(&wanted, &rids, &rlabels).unwrap();
        assert_eq!(aligned, vec![1, 2, 0]);

        let missing: Vec<String> = ["w"].iter().map(|s| s.to_string()).collect();
        assert!(align_labels(&missing, &rids, &rlabels).is_err());
    }

    #[test]
    fn dataset_directory_roundtrip() {
        let dir = TempDir::new().unwrap();
        let dataset = MultiViewDataset {
            views: vec![
                FeatureView { name: "alpha".to_string(), data: array![[1.0, 2.0], [3.0, 4.0]] },
                FeatureView { name: "beta".to_string(), data: array![[5.0], [6.0]] },
            ],
            labels: Some(vec![0, 1]),
            sample_ids: vec!["s0".to_string(), "s1".to_string()],
            roi_size: (9, 7),
        };
        save_dataset(dir.path(), &dataset).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.sample_ids, dataset.sample_ids);
        assert_eq!(loaded.labels, dataset.labels);
        assert_eq!(loaded.roi_size, (9, 7));
        assert_eq!(loaded.views.len(), 2);
        assert_eq!(loaded.views[0].name, "alpha");
        assert_eq!(loaded.views[0].data, dataset.views[0].data);
        assert_eq!(loaded.views[1].data, dataset.views[1].data);
    }

    #[test]
    fn reader_rejects_malformed_input() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "foo,bar\n1,2\n").unwrap();
        assert!(read_matrix_csv(&path).is_err());
        std::fs::write(&path, "sample_id,c0\nrow,notanumber\n").unwrap();
        assert!(read_matrix_csv(&path).is_err());
    }
}
