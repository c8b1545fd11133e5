//! Benchmark datasets: CSV files and small synthetic generators.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{seeded, SeededRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    File { path: String },
    Dev(DevSpec),
    Blobs(BlobSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: Matrix<f64>,
    pub y: Vec<u8>,
    pub source: DatasetSource,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    pub fn n_anomalies(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            source: self.source.clone(),
        }
    }
}

/// Reads a CSV with a header row, feature columns, then a final `label` column in `{0, 1}`.
pub fn load_csv(path: &Path, name: &str) -> Result<Dataset> {
    let table = read_table(path)?;
    let last = table.header.len().checked_sub(1);
    if last.is_none() || table.header[last.unwrap()] != "label" {
        return Err(Error::Malformed { path: path.into(), reason: "the last column must be named 'label'".into() });
    }
    let d = table.header.len() - 1;
    if d == 0 {
        return Err(Error::Malformed { path: path.into(), reason: "no feature columns".into() });
    }
    let mut y = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        let v = row[d];
        if v != 0.0 && v != 1.0 {
            return Err(Error::Malformed { path: path.into(), reason: format!("row {}: label {v} is not 0 or 1", r + 1) });
        }
        y.push(v as u8);
    }
    let x = Matrix::from_fn(table.rows.len(), d, |r, c| table.rows[r][c]);
    Ok(Dataset { name: name.to_string(), x, y, source: DatasetSource::File { path: path.display().to_string() } })
}

/// A numeric CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Reads a header plus decimal cells, reporting the row and column of any bad cell.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(std::fs::File::open(path).map_err(Error::io(path))?);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Malformed {
                path: path.into(),
                reason: format!("row {}: {} fields, header has {}", r + 1, rec.len(), header.len()),
            });
        }
        let row = rec
            .iter()
            .zip(&header)
            .map(|(cell, col)| {
                cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Malformed {
                    path: path.into(),
                    reason: format!("row {}, column '{col}': '{cell}' is not a finite number", r + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Writes features plus a final `label` column.
pub fn write_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::fs::File::create(path).map_err(Error::io(path))?);
    let mut header: Vec<String> = (0..ds.x.cols()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, &y) in ds.x.iter_rows().zip(&ds.y) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(Error::io(path))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DevKind {
    Moons,
    Circles,
}

impl DevKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DevKind::Moons => "moons",
            DevKind::Circles => "circles",
        }
    }
}

/// Two-dimensional dev data: points on two curves with Gaussian noise, plus
/// uniform background anomalies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DevSpec {
    pub kind: DevKind,
    /// Total rows, anomalies included.
    pub n: usize,
    pub noise: f64,
    /// Fraction of rows that are anomalies.
    pub anomaly_ratio: f64,
    /// Anomalies closer than `band · noise` to a curve are redrawn.
    #[serde(default = "default_band")]
    pub band: f64,
    /// Inner/outer radius ratio for circles.
    #[serde(default = "default_factor")]
    pub factor: f64,
    pub seed: u64,
}

fn default_band() -> f64 {
    3.0
}

fn default_factor() -> f64 {
    0.5
}

impl DevSpec {
    pub fn new(kind: DevKind, n: usize, seed: u64) -> Self {
        Self { kind, n, noise: 0.05, anomaly_ratio: 0.1, band: 3.0, factor: 0.5, seed }
    }

    pub fn n_anomalies(&self) -> usize {
        (self.anomaly_ratio * self.n as f64).round() as usize
    }

    /// Euclidean distance from `(x, y)` to the nearer of the two noise-free curves.
    pub fn curve_distance(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            DevKind::Moons => arc_distance(x, y, 0.0, 0.0, true).min(arc_distance(x, y, 1.0, 0.5, false)),
            DevKind::Circles => {
                let r = x.hypot(y);
                (r - 1.0).abs().min((r - self.factor).abs())
            }
        }
    }
}

/// Distance to a unit half circle centred at `(cx, cy)`: the upper half when
/// `upper`, else the lower half.
fn arc_distance(x: f64, y: f64, cx: f64, cy: f64, upper: bool) -> f64 {
    let (dx, dy) = (x - cx, y - cy);
    let on_side = if upper { dy >= 0.0 } else { dy <= 0.0 };
    if on_side {
        (dx.hypot(dy) - 1.0).abs()
    } else {
        (dx - 1.0).hypot(dy).min((dx + 1.0).hypot(dy))
    }
}

/// Isotropic Gaussian offset with radius at most `3 · noise`.
fn noise_offset(noise: f64, rng: &mut SeededRng) -> (f64, f64) {
    loop {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        if a.hypot(b) <= 3.0 {
            return (a * noise, b * noise);
        }
    }
}

pub fn make_dev_dataset(spec: &DevSpec) -> Result<Dataset> {
    if spec.n < 10 {
        return Err(Error::InvalidConfig("dev datasets need n >= 10".into()));
    }
    if !(0.0..1.0).contains(&spec.anomaly_ratio) || !(spec.noise >= 0.0) || !(0.0 < spec.factor && spec.factor < 1.0) {
        return Err(Error::InvalidConfig("dev dataset needs ratio in [0, 1), noise >= 0, factor in (0, 1)".into()));
    }
    let mut rng = seeded(spec.seed);
    let n_anom = spec.n_anomalies();
    let n_norm = spec.n - n_anom;
    let n_outer = n_norm / 2;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(spec.n);
    for i in 0..n_norm {
        let outer = i < n_outer;
        let count = if outer { n_outer } else { n_norm - n_outer };
        let j = if outer { i } else { i - n_outer };
        let t = if count > 1 { j as f64 / (count - 1) as f64 } else { 0.5 };
        let (px, py) = match (spec.kind, outer) {
            (DevKind::Moons, true) => ((PI * t).cos(), (PI * t).sin()),
            (DevKind::Moons, false) => (1.0 - (PI * t).cos(), 1.0 - (PI * t).sin() - 0.5),
            (DevKind::Circles, outer) => {
                // Endpoint excluded so the first and last points do not coincide.
                let a = 2.0 * PI * j as f64 / count as f64;
                let r = if outer { 1.0 } else { spec.factor };
                (r * a.cos(), r * a.sin())
            }
        };
        let (ex, ey) = noise_offset(spec.noise, &mut rng);
        rows.push(vec![px + ex, py + ey]);
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for r in &rows {
        for k in 0..2 {
            lo[k] = lo[k].min(r[k]);
            hi[k] = hi[k].max(r[k]);
        }
    }
    for k in 0..2 {
        let pad = 0.1 * (hi[k] - lo[k]);
        lo[k] -= pad;
        hi[k] += pad;
    }
    let min_dist = spec.band * spec.noise;
    let mut placed = 0;
    let mut attempts = 0usize;
    while placed < n_anom {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(Error::GenerationFailure { attempts, reason: "no room for anomalies outside the band".into() });
        }
        let x = rng.random_range(lo[0]..=hi[0]);
        let y = rng.random_range(lo[1]..=hi[1]);
        if spec.curve_distance(x, y) < min_dist {
            continue;
        }
        rows.push(vec![x, y]);
        placed += 1;
    }
    let mut y = vec![0u8; n_norm];
    y.extend(std::iter::repeat_n(1u8, n_anom));
    Ok(Dataset {
        name: spec.kind.as_str().to_string(),
        x: Matrix::from_rows(&rows),
        y,
        source: DatasetSource::Dev(spec.clone()),
    })
}

/// One Gaussian blob of normals with anomalies far outside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub n_normal: usize,
    pub n_anomalies: usize,
    pub dim: usize,
    /// Distance of every anomaly from the blob centre, in standard deviations.
    pub separation: f64,
    pub seed: u64,
}

pub fn make_blobs(spec: &BlobSpec) -> Result<Dataset> {
    if spec.dim == 0 || spec.n_normal == 0 {
        return Err(Error::InvalidConfig("blobs need dim >= 1 and n_normal >= 1".into()));
    }
    let mut rng = seeded(spec.seed);
    let mut rows = Vec::with_capacity(spec.n_normal + spec.n_anomalies);
    for _ in 0..spec.n_normal {
        rows.push((0..spec.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>());
    }
    for _ in 0..spec.n_anomalies {
        let dir: Vec<f64> = (0..spec.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        rows.push(dir.iter().map(|v| v / norm * spec.separation).collect());
    }
    let mut y = vec![0u8; spec.n_normal];
    y.extend(std::iter::repeat_n(1u8, spec.n_anomalies));
    Ok(Dataset { name: "blobs".into(), x: Matrix::from_rows(&rows), y, source: DatasetSource::Blobs(spec.clone()) })
}
