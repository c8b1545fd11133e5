use std::path::{Path, PathBuf};

use rayon::prelude::*;

use incontext_ad::config::{Metric, RunConfig};
use incontext_ad::detector::{write_scores, Detector, EnsembleConfig};
use incontext_ad::error::Error;
use incontext_ad::eval::bench::{run_benchmark, score_split, write_report, MethodSpec};
use incontext_ad::eval::datasets::{make_dev_dataset, write_csv, DevKind, DevSpec};
use incontext_ad::eval::metrics::auc_roc;
use incontext_ad::eval::splits::split_one_class;
use incontext_ad::model::checkpoint::{self, Checkpoint};
use incontext_ad::model::ModelParams;
use incontext_ad::task::shard::{read_shard, write_shard};
use incontext_ad::task::{generate_task, Task};
use incontext_ad::train::{train as run_training, TaskSource, TrainOptions};

use crate::table::read_features;
use crate::Failure;

fn load_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn mkdir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })
}

pub fn generate(config: Option<&Path>, n_tasks: u64, start: u64, out: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let tasks: Vec<Task> = (start..start + n_tasks)
        .into_par_iter()
        .map(|i| generate_task(&cfg.task, &cfg.scm, cfg.seed, i))
        .collect::<Result<_, _>>()?;
    let manifest = write_shard(out, &tasks)?;
    cfg.echo_into(out)?;
    let counts: Vec<String> = manifest.regime_counts.iter().map(|(r, n)| format!("{r}={n}")).collect();
    println!("wrote {} tasks to {} ({})", manifest.n_tasks, out.display(), counts.join(", "));
    Ok(())
}

pub fn train(config: Option<&Path>, out: &Path, steps: Option<u64>, resume: bool, shards: &[PathBuf]) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let ckpt_dir = out.join("checkpoint");
    let start = if resume {
        let ck = checkpoint::load(&ckpt_dir)?;
        if ck.params.arch != cfg.arch {
            return Err(Error::InvalidConfig("checkpoint architecture differs from the config".into()).into());
        }
        if ck.optimizer.is_none() && ck.step > 0 {
            return Err(Error::InvalidInput("checkpoint carries no optimizer state to resume from".into()).into());
        }
        ck
    } else {
        if out.join("metrics.csv").exists() {
            return Err(Failure::Usage(format!(
                "{} already holds a training run; pass --resume or choose another directory",
                out.display()
            )));
        }
        let mut ck = Checkpoint::fresh(ModelParams::init(&cfg.arch, cfg.train.seed)?, cfg.train.seed);
        ck.extra.insert("config".into(), serde_json::Value::String(cfg.to_toml()?));
        ck
    };
    let source = if shards.is_empty() {
        TaskSource::Synthetic { cfg: cfg.task.clone(), hp: cfg.scm.clone(), seed: cfg.seed }
    } else {
        let mut tasks = Vec::new();
        for s in shards {
            tasks.extend(read_shard(s)?);
        }
        TaskSource::Fixed(tasks)
    };
    mkdir(out)?;
    cfg.echo_into(out)?;
    let report = run_training(start, &source, &cfg.train, &TrainOptions { out_dir: Some(out), stop_at: steps })?;
    let ck = &report.checkpoint;
    println!(
        "trained to step {} ({} tasks, {:.1} min); checkpoint at {}",
        ck.step,
        ck.tasks_seen,
        ck.wall_ms as f64 / 60_000.0,
        ckpt_dir.display()
    );
    Ok(())
}

enum LabelsMode {
    None,
    OneClass,
    Column(String),
}

fn parse_labels(mode: &str) -> Result<LabelsMode, Failure> {
    match mode {
        "none" => Ok(LabelsMode::None),
        "one-class" => Ok(LabelsMode::OneClass),
        other => match other.strip_prefix("column:") {
            Some(name) if !name.is_empty() => Ok(LabelsMode::Column(name.to_string())),
            _ => Err(Failure::Usage(format!("--labels must be none, one-class or column:<name>, got '{other}'"))),
        },
    }
}

fn ensemble_config(config: Option<&Path>) -> Result<EnsembleConfig, Error> {
    Ok(load_config(config)?.ensemble)
}

pub fn fit_score(
    ckpt: &Path,
    train: &Path,
    labels: &str,
    test: &Path,
    out: &Path,
    config: Option<&Path>,
) -> Result<(), Failure> {
    let mode = parse_labels(labels)?;
    let label_col = match &mode {
        LabelsMode::Column(name) => Some(name.as_str()),
        _ => None,
    };
    let train_t = read_features(train, label_col, None)?;
    let test_t = read_features(test, None, label_col)?;
    if train_t.names != test_t.names {
        return Err(Error::DimensionMismatch(format!(
            "test columns {:?} do not match training columns {:?}",
            test_t.names, train_t.names
        ))
        .into());
    }
    let labels: Option<Vec<Option<u8>>> = match mode {
        LabelsMode::None => None,
        LabelsMode::OneClass => Some(vec![Some(0); train_t.x.rows()]),
        LabelsMode::Column(_) => train_t.labels,
    };
    let ck = checkpoint::load(ckpt)?;
    let det = Detector::new(ck.params, ensemble_config(config)?)?;
    let state = det.fit(&train_t.x, labels.as_deref())?;
    let scores = det.score(&state, &test_t.x)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        mkdir(parent)?;
    }
    write_scores(out, &scores)?;
    println!("scored {} rows into {}", scores.len(), out.display());
    Ok(())
}

pub fn eval(config: &Path, out: &Path, ckpt: Option<&Path>) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(config)?;
    if cfg.eval.datasets.is_empty() {
        return Err(Failure::Usage("the config lists no datasets under [[eval.datasets]]".into()));
    }
    if let Some(c) = ckpt {
        cfg.eval.checkpoint = Some(c.to_path_buf());
    }
    let detector = if cfg.eval.methods.contains(&MethodSpec::Icl) {
        let path = cfg
            .eval
            .checkpoint
            .as_ref()
            .ok_or_else(|| Failure::Usage("method 'icl' needs eval.checkpoint or --checkpoint".into()))?;
        Some(Detector::new(checkpoint::load(path)?.params, cfg.ensemble.clone())?)
    } else {
        None
    };
    let datasets = cfg.eval.datasets.iter().map(|d| d.load()).collect::<Result<Vec<_>, _>>()?;
    let report = run_benchmark(&datasets, &cfg.eval.methods, detector.as_ref(), &cfg.eval.bench)?;
    write_report(out, &report)?;
    cfg.echo_into(out)?;
    println!("{:<16} {:<8} {:>6} {:>8} {:>8} {:>8} {:>6}", "regime", "method", "r_a", "auc_roc", "auc_pr", "f1", "rank");
    for a in &report.aggregates {
        println!(
            "{:<16} {:<8} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>6.2}",
            a.regime.to_string(),
            a.method,
            a.r_a.map(|r| r.to_string()).unwrap_or_else(|| "-".into()),
            a.auc_roc,
            a.auc_pr,
            a.f1,
            a.mean_rank_auc_roc
        );
    }
    println!("{} records, {} failures; report in {}", report.records.len(), report.failures, out.display());
    let mut missed = Vec::new();
    for t in &cfg.eval.thresholds {
        let rows: Vec<_> = report.aggregates.iter().filter(|a| a.regime == t.regime && a.method == t.method).collect();
        if rows.is_empty() {
            missed.push(format!("{} / {}: no results", t.regime, t.method));
        }
        for a in rows {
            let v = match t.metric {
                Metric::AucRoc => a.auc_roc,
                Metric::AucPr => a.auc_pr,
                Metric::F1 => a.f1,
            };
            if !(v >= t.min) {
                missed.push(format!("{} / {} {:?} = {v:.4} < {}", t.regime, t.method, t.metric, t.min));
            }
        }
    }
    if missed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Threshold(missed.join("; ")))
    }
}

pub fn dev_demo(ckpt: &Path, out: &Path, n: usize, seed: u64) -> Result<(), Failure> {
    let ck = checkpoint::load(ckpt)?;
    let det = Detector::new(ck.params, EnsembleConfig { seed, ..EnsembleConfig::default() })?;
    mkdir(out)?;
    let mut summary = serde_json::Map::new();
    for kind in [DevKind::Moons, DevKind::Circles] {
        let ds = make_dev_dataset(&DevSpec::new(kind, n, seed))?;
        let split = split_one_class(&ds.y, seed)?;
        let y: Vec<u8> = split.test_idx.iter().map(|&i| ds.y[i]).collect();
        let (icl, _, _) = score_split(&ds, &split, &MethodSpec::Icl, Some(&det), seed)?;
        let (knn, _, _) = score_split(&ds, &split, &MethodSpec::Knn { k: 5 }, None, seed)?;
        let (a_icl, a_knn) = (auc_roc(&icl, &y)?, auc_roc(&knn, &y)?);
        write_csv(&out.join(format!("{}.csv", kind.as_str())), &ds)?;
        write_csv(&out.join(format!("{}_test.csv", kind.as_str())), &ds.subset(&split.test_idx))?;
        write_scores(&out.join(format!("{}_scores.csv", kind.as_str())), &icl)?;
        println!("{:<8} one-class AUC-ROC: icl {a_icl:.4}  knn {a_knn:.4}", kind.as_str());
        summary.insert(kind.as_str().into(), serde_json::json!({ "auc_roc_icl": a_icl, "auc_roc_knn": a_knn }));
    }
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(summary)).map_err(Error::from)?;
    std::fs::write(&path, text + "\n").map_err(|source| Error::Io { path, source })?;
    Ok(())
}
