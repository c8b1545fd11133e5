//! Benchmark runner and report files.
//!
//! `records.csv` columns, in order:
//! `dataset,regime,method,seed,r_a,auc_roc,auc_pr,f1,fit_ms,score_ms`.
//! `r_a` is empty outside the semi-supervised regime.
//!
//! `aggregate.csv` columns, in order:
//! `regime,method,r_a,n_datasets,n_records,auc_roc,auc_pr,f1,mean_rank_auc_roc`.
//! Metric columns average over seeds within each dataset, then over datasets.
//! `mean_rank_auc_roc` ranks the methods on each dataset by their seed-mean
//! AUC-ROC (1 = best, ties share the mean rank) and averages over datasets.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::datasets::Dataset;
use super::knn::KnnDetector;
use super::metrics::{auc_pr, auc_roc, f1_at_contamination};
use super::splits::{split_one_class, split_semi, split_unsupervised, Split};
use crate::detector::{Detector, EnsembleConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::task::Regime;

pub const RECORDS_HEADER: [&str; 10] =
    ["dataset", "regime", "method", "seed", "r_a", "auc_roc", "auc_pr", "f1", "fit_ms", "score_ms"];
pub const AGGREGATE_HEADER: [&str; 9] =
    ["regime", "method", "r_a", "n_datasets", "n_records", "auc_roc", "auc_pr", "f1", "mean_rank_auc_roc"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    /// The in-context detector loaded from a checkpoint.
    Icl,
    Knn { k: usize },
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Icl => "icl",
            MethodSpec::Knn { .. } => "knn",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub regimes: Vec<Regime>,
    pub seeds: Vec<u64>,
    /// Labeled-anomaly fractions run under the semi-supervised regime.
    pub r_a: Vec<f64>,
    /// Datasets with more rows are subsampled to this many before splitting.
    pub row_cap: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { regimes: Regime::ALL.to_vec(), seeds: (0..5).collect(), r_a: vec![0.1], row_cap: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub dataset: String,
    pub regime: Regime,
    pub method: String,
    pub seed: u64,
    pub r_a: Option<f64>,
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub f1: f64,
    pub fit_ms: f64,
    pub score_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub regime: Regime,
    pub method: String,
    pub r_a: Option<f64>,
    pub n_datasets: usize,
    pub n_records: usize,
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub f1: f64,
    pub mean_rank_auc_roc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    /// Records that failed and were left out.
    pub failures: usize,
}

/// A row-capped dataset and the split for one `(regime, r_a, seed)` cell.
pub fn make_split(ds: &Dataset, regime: Regime, r_a: Option<f64>, seed: u64) -> Result<Split> {
    match regime {
        Regime::OneClass => split_one_class(&ds.y, seed),
        Regime::Unsupervised => split_unsupervised(ds.n_rows(), seed),
        Regime::SemiSupervised => split_semi(&ds.y, r_a.unwrap_or(0.0), seed),
    }
}

/// Uniform subsample without replacement down to `cap` rows, keeping row order.
pub fn cap_rows(ds: &Dataset, cap: usize, seed: u64) -> Dataset {
    if ds.n_rows() <= cap {
        return ds.clone();
    }
    let mut idx = rand::seq::index::sample(&mut seeded(seed), ds.n_rows(), cap).into_vec();
    idx.sort_unstable();
    ds.subset(&idx)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Scores the test rows of `split` with `method`; returns (scores, fit_ms, score_ms).
pub fn score_split(
    ds: &Dataset,
    split: &Split,
    method: &MethodSpec,
    detector: Option<&Detector<f32>>,
    seed: u64,
) -> Result<(Vec<f64>, f64, f64)> {
    let train = ds.x.select_rows(&split.train_idx);
    let test = ds.x.select_rows(&split.test_idx);
    match method {
        MethodSpec::Knn { k } => {
            let t = Instant::now();
            let knn = KnnDetector::fit(&train, (*k).min(train.rows()))?;
            let fit_ms = ms(t);
            let t = Instant::now();
            let s = knn.score(&test)?;
            Ok((s, fit_ms, ms(t)))
        }
        MethodSpec::Icl => {
            let base = detector.ok_or_else(|| Error::InvalidConfig("method 'icl' needs a checkpoint".into()))?;
            let det = Detector { params: base.params.clone(), cfg: EnsembleConfig { seed, ..base.cfg.clone() } };
            let t = Instant::now();
            let state = det.fit(&train, split.train_labels.as_deref())?;
            let fit_ms = ms(t);
            let t = Instant::now();
            let s = det.score(&state, &test)?;
            Ok((s, fit_ms, ms(t)))
        }
    }
}

struct Job<'a> {
    ds: &'a Dataset,
    ds_index: usize,
    regime: Regime,
    r_a: Option<f64>,
    seed: u64,
}

/// Runs the full `datasets × regimes × r_a × seeds × methods` grid. Methods
/// share the split of each cell. Failed records are logged and counted.
pub fn run_benchmark(
    datasets: &[Dataset],
    methods: &[MethodSpec],
    detector: Option<&Detector<f32>>,
    cfg: &BenchConfig,
) -> Result<EvalReport> {
    if datasets.is_empty() || methods.is_empty() || cfg.regimes.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs datasets, methods, regimes and seeds".into()));
    }
    if cfg.regimes.contains(&Regime::SemiSupervised) && cfg.r_a.is_empty() {
        return Err(Error::InvalidConfig("semi-supervised runs need at least one r_a".into()));
    }
    let mut jobs = Vec::new();
    for (ds_index, ds) in datasets.iter().enumerate() {
        for &regime in &cfg.regimes {
            let ratios: Vec<Option<f64>> =
                if regime == Regime::SemiSupervised { cfg.r_a.iter().map(|&r| Some(r)).collect() } else { vec![None] };
            for r_a in ratios {
                for &seed in &cfg.seeds {
                    jobs.push(Job { ds, ds_index, regime, r_a, seed });
                }
            }
        }
    }
    let results: Vec<Vec<Result<Record>>> = jobs
        .par_iter()
        .map(|job| {
            let cell_seed = derive_seed(derive_seed(job.seed, job.ds_index as u64), job.regime.index() as u64);
            let capped = cap_rows(job.ds, cfg.row_cap, cell_seed);
            let split = make_split(&capped, job.regime, job.r_a, cell_seed);
            methods
                .iter()
                .map(|m| {
                    let split = split.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))?;
                    let (scores, fit_ms, score_ms) = score_split(&capped, split, m, detector, cell_seed)?;
                    let y: Vec<u8> = split.test_idx.iter().map(|&i| capped.y[i]).collect();
                    Ok(Record {
                        dataset: job.ds.name.clone(),
                        regime: job.regime,
                        method: m.name().to_string(),
                        seed: job.seed,
                        r_a: job.r_a,
                        auc_roc: auc_roc(&scores, &y)?,
                        auc_pr: auc_pr(&scores, &y)?,
                        f1: f1_at_contamination(&scores, &y)?,
                        fit_ms,
                        score_ms,
                    })
                })
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = 0;
    for (job, per_method) in jobs.iter().zip(results) {
        for (m, r) in methods.iter().zip(per_method) {
            match r {
                Ok(rec) => records.push(rec),
                Err(e) => {
                    failures += 1;
                    log::warn!("{} / {} / {} / seed {}: {e}", job.ds.name, job.regime, m.name(), job.seed);
                }
            }
        }
    }
    if failures > 0 {
        log::warn!("{failures} record(s) failed and are excluded from the aggregates");
    }
    let aggregates = aggregate(&records);
    Ok(EvalReport { records, aggregates, failures })
}

/// Grouping key with `r_a` compared bitwise.
type CellKey = (Regime, Option<u64>);

fn cell(r: &Record) -> CellKey {
    (r.regime, r.r_a.map(f64::to_bits))
}

/// Recomputes the aggregate table from records.
pub fn aggregate(records: &[Record]) -> Vec<Aggregate> {
    // (cell, method, dataset) -> metric sums over seeds.
    let mut per_dataset: BTreeMap<(CellKey, String, String), (usize, [f64; 3])> = BTreeMap::new();
    for r in records {
        let e = per_dataset.entry((cell(r), r.method.clone(), r.dataset.clone())).or_insert((0, [0.0; 3]));
        e.0 += 1;
        e.1[0] += r.auc_roc;
        e.1[1] += r.auc_pr;
        e.1[2] += r.f1;
    }
    let seed_mean = |(n, s): &(usize, [f64; 3])| s.map(|v| v / *n as f64);

    // Ranks per (cell, dataset) across methods.
    let mut by_dataset: BTreeMap<(CellKey, String), Vec<(String, f64)>> = BTreeMap::new();
    for ((c, m, d), v) in &per_dataset {
        by_dataset.entry((*c, d.clone())).or_default().push((m.clone(), seed_mean(v)[0]));
    }
    let mut ranks: BTreeMap<(CellKey, String, String), f64> = BTreeMap::new();
    for ((c, d), methods) in &by_dataset {
        for (m, v) in methods {
            let better = methods.iter().filter(|(_, o)| o > v).count() as f64;
            let tied = methods.iter().filter(|(_, o)| o == v).count() as f64;
            ranks.insert((*c, m.clone(), d.clone()), better + (tied + 1.0) / 2.0);
        }
    }

    let mut groups: BTreeMap<(CellKey, String), (usize, usize, [f64; 3], f64)> = BTreeMap::new();
    for (key @ (c, m, _), v) in &per_dataset {
        let g = groups.entry((*c, m.clone())).or_insert((0, 0, [0.0; 3], 0.0));
        g.0 += 1;
        g.1 += v.0;
        for (acc, x) in g.2.iter_mut().zip(seed_mean(v)) {
            *acc += x;
        }
        g.3 += ranks[key];
    }
    groups
        .into_iter()
        .map(|(((regime, r_a), method), (nd, nr, sums, rank))| Aggregate {
            regime,
            method,
            r_a: r_a.map(f64::from_bits),
            n_datasets: nd,
            n_records: nr,
            auc_roc: sums[0] / nd as f64,
            auc_pr: sums[1] / nd as f64,
            f1: sums[2] / nd as f64,
            mean_rank_auc_roc: rank / nd as f64,
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::fs::File::create(path).map_err(Error::io(path))?);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.dataset.clone(),
            r.regime.to_string(),
            r.method.clone(),
            r.seed.to_string(),
            opt(r.r_a),
            r.auc_roc.to_string(),
            r.auc_pr.to_string(),
            r.f1.to_string(),
            r.fit_ms.to_string(),
            r.score_ms.to_string(),
        ])?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_aggregates(path: &Path, aggregates: &[Aggregate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::fs::File::create(path).map_err(Error::io(path))?);
    w.write_record(AGGREGATE_HEADER)?;
    for a in aggregates {
        w.write_record([
            a.regime.to_string(),
            a.method.clone(),
            opt(a.r_a),
            a.n_datasets.to_string(),
            a.n_records.to_string(),
            a.auc_roc.to_string(),
            a.auc_pr.to_string(),
            a.f1.to_string(),
            a.mean_rank_auc_roc.to_string(),
        ])?;
    }
    w.flush().map_err(Error::io(path))
}

/// Writes `records.csv` and `aggregate.csv` into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_records(&dir.join("records.csv"), &report.records)?;
    write_aggregates(&dir.join("aggregate.csv"), &report.aggregates)
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let mut rd = csv::Reader::from_reader(std::fs::File::open(path).map_err(Error::io(path))?);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != RECORDS_HEADER {
        return Err(Error::Malformed { path: path.into(), reason: format!("unexpected header {header:?}") });
    }
    let bad = |row: usize, what: &str| Error::Malformed { path: path.into(), reason: format!("row {row}: bad {what}") };
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let num = |k: usize, what: &str| rec[k].parse::<f64>().map_err(|_| bad(row, what));
        out.push(Record {
            dataset: rec[0].to_string(),
            regime: rec[1].parse().map_err(|_| bad(row, "regime"))?,
            method: rec[2].to_string(),
            seed: rec[3].parse().map_err(|_| bad(row, "seed"))?,
            r_a: if rec[4].is_empty() { None } else { Some(num(4, "r_a")?) },
            auc_roc: num(5, "auc_roc")?,
            auc_pr: num(6, "auc_pr")?,
            f1: num(7, "f1")?,
            fit_ms: num(8, "fit_ms")?,
            score_ms: num(9, "score_ms")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::datasets::{make_dev_dataset, DevKind, DevSpec};

    #[test]
    fn knn_grid_counts_and_round_trip() {
        let ds = make_dev_dataset(&DevSpec::new(DevKind::Moons, 200, 1)).unwrap();
        let cfg = BenchConfig { regimes: vec![Regime::OneClass], ..Default::default() };
        let rep = run_benchmark(&[ds], &[MethodSpec::Knn { k: 5 }], None, &cfg).unwrap();
        assert_eq!(rep.records.len(), 5);
        assert_eq!(rep.failures, 0);
        assert_eq!(rep.aggregates.len(), 1);
        assert_eq!(rep.aggregates[0].mean_rank_auc_roc, 1.0);
        let mean = rep.records.iter().map(|r| r.auc_roc).sum::<f64>() / 5.0;
        assert!((rep.aggregates[0].auc_roc - mean).abs() < 1e-12);

        let dir = tempfile::tempdir().unwrap();
        write_report(dir.path(), &rep).unwrap();
        let back = read_records(&dir.path().join("records.csv")).unwrap();
        assert_eq!(back, rep.records);
    }

    #[test]
    fn missing_detector_counts_as_failure() {
        let ds = make_dev_dataset(&DevSpec::new(DevKind::Circles, 100, 2)).unwrap();
        let cfg = BenchConfig { seeds: vec![0], ..Default::default() };
        let rep = run_benchmark(&[ds], &[MethodSpec::Icl, MethodSpec::Knn { k: 3 }], None, &cfg).unwrap();
        assert_eq!(rep.failures, 3);
        assert_eq!(rep.records.len(), 3);
        let semi = rep.records.iter().find(|r| r.regime == Regime::SemiSupervised).unwrap();
        assert_eq!(semi.r_a, Some(0.1));
    }
}
