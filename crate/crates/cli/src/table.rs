//! CSV input for `fit-score`.

use std::path::Path;

use incontext_ad::error::Error;
use incontext_ad::linalg::Matrix;

pub struct FeatureTable {
    pub names: Vec<String>,
    pub x: Matrix<f64>,
    /// Values of the label column: `0`/`1`, or empty / `-1` for unlabeled.
    pub labels: Option<Vec<Option<u8>>>,
}

fn malformed(path: &Path, reason: String) -> Error {
    Error::Malformed { path: path.into(), reason }
}

/// Reads a header plus numeric rows. `label_column`, if named, is split off;
/// `drop` names a column to ignore when present.
pub fn read_features(path: &Path, label_column: Option<&str>, drop: Option<&str>) -> Result<FeatureTable, Error> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.into(), source })?;
    let mut rd = csv::Reader::from_reader(file);
    let header: Vec<String> = rd.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| malformed(path, format!("no column named '{name}'")))?,
        ),
        None => None,
    };
    let drop_idx = drop.and_then(|d| header.iter().position(|h| h == d));
    let feature_idx: Vec<usize> = (0..header.len()).filter(|&i| Some(i) != label_idx && Some(i) != drop_idx).collect();
    if feature_idx.is_empty() {
        return Err(malformed(path, "no feature columns".into()));
    }
    let mut data = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut n = 0;
    for (r, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        if rec.len() != header.len() {
            return Err(malformed(path, format!("row {row}: {} fields, header has {}", rec.len(), header.len())));
        }
        for &c in &feature_idx {
            let cell = rec[c].trim();
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                malformed(path, format!("row {row}, column '{}': '{cell}' is not a finite number", header[c]))
            })?;
            data.push(v);
        }
        if let (Some(c), Some(out)) = (label_idx, labels.as_mut()) {
            let cell = rec[c].trim();
            out.push(match cell {
                "" | "-1" => None,
                "0" | "0.0" => Some(0),
                "1" | "1.0" => Some(1),
                other => {
                    return Err(malformed(
                        path,
                        format!("row {row}, column '{}': label '{other}' must be 0, 1, -1 or empty", header[c]),
                    ))
                }
            });
        }
        n += 1;
    }
    let names = feature_idx.iter().map(|&i| header[i].clone()).collect();
    Ok(FeatureTable { names, x: Matrix::from_vec(n, feature_idx.len(), data), labels })
}
