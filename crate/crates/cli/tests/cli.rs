use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use incontext_ad::eval::bench::{aggregate, read_records};
use incontext_ad::model::checkpoint;
use incontext_ad::model::{ArchConfig, ModelParams};
use incontext_ad::task::read_shard;
use tempfile::TempDir;

const SMALL: &str = r#"
seed = 4

[task]
d_max = 6
n_support = [8, 24]
n_query = 8

[arch]
n_layers = 1
n_heads = 2
d_model = 8
d_ffn = 16
d_max = 6
d_label = 4
ln_eps = 1e-5

[train]
epochs = 1
steps_per_epoch = 4
tasks_per_step = 2
accum_steps = 1
seed = 3
checkpoint_every = 2

[ensemble]
n_members = 2
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_incontext-ad")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

/// A small model trained for a few steps, in `<tmp>/run/checkpoint`.
fn trained(tmp: &TempDir) -> (PathBuf, PathBuf) {
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let run = tmp.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    (cfg, run.join("checkpoint"))
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&cli(&[])), 1);
    assert_eq!(code(&cli(&["generate", "--out", "x"])), 1);
    assert_eq!(code(&cli(&["frobnicate"])), 1);
    assert_eq!(code(&cli(&["--version"])), 0);
}

#[test]
fn invalid_config_exits_2() {
    let tmp = TempDir::new().unwrap();
    let bad = write(tmp.path(), "bad.toml", "[train]\nepoch = 3\n");
    let out = cli(&["generate", "--config", s(&bad), "--n-tasks", "1", "--out", s(&tmp.path().join("g"))]);
    assert_eq!(code(&out), 2);
    let bad = write(tmp.path(), "bad2.toml", "[task]\nn_query = 7\n");
    assert_eq!(code(&cli(&["generate", "--config", s(&bad), "--n-tasks", "1", "--out", s(&tmp.path().join("g"))])), 2);
}

#[test]
fn generate_is_deterministic_and_counts_regimes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["generate", "--config", s(&cfg), "--n-tasks", "30", "--out", s(&a)]);
    ok(&["generate", "--config", s(&cfg), "--n-tasks", "30", "--out", s(&b)]);
    assert_eq!(files(&a), files(&b));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let counts = manifest["regime_counts"].as_object().unwrap();
    assert_eq!(counts.values().map(|v| v.as_u64().unwrap()).sum::<u64>(), 30);
    let tasks = read_shard(&a).unwrap();
    assert_eq!(tasks.len(), 30);
    assert!(tasks.iter().all(|t| t.validate().is_ok() && t.n_query() == 8));

    // A later window of the same stream reproduces the same tasks.
    let tail = tmp.path().join("tail");
    ok(&["generate", "--config", s(&cfg), "--n-tasks", "5", "--start-index", "25", "--out", s(&tail)]);
    assert_eq!(read_shard(&tail).unwrap(), tasks[25..]);

    let empty = tmp.path().join("empty");
    ok(&["generate", "--config", s(&cfg), "--n-tasks", "0", "--out", s(&empty)]);
    assert!(read_shard(&empty).unwrap().is_empty());
}

#[test]
fn zero_steps_writes_the_initialization() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let run = tmp.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run), "--steps", "0"]);
    let ck = checkpoint::load(&run.join("checkpoint")).unwrap();
    let arch = ArchConfig { n_layers: 1, n_heads: 2, d_model: 8, d_ffn: 16, d_max: 6, d_label: 4, ln_eps: 1e-5 };
    assert_eq!(ck.params, ModelParams::init(&arch, 3).unwrap());
    assert_eq!(ck.step, 0);
}

#[test]
fn training_is_reproducible_and_resumable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["train", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["train", "--config", s(&cfg), "--out", s(&b), "--steps", "2"]);
    // Reusing a run directory without --resume is refused.
    assert_eq!(code(&cli(&["train", "--config", s(&cfg), "--out", s(&b)])), 1);
    ok(&["train", "--config", s(&cfg), "--out", s(&b), "--resume"]);

    let (ca, cb) = (checkpoint::load(&a.join("checkpoint")).unwrap(), checkpoint::load(&b.join("checkpoint")).unwrap());
    assert_eq!(ca.step, 4);
    assert_eq!(ca.params, cb.params);
    assert_eq!(ca.optimizer, cb.optimizer);
    let losses = |dir: &Path| {
        fs::read_to_string(dir.join("metrics.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
    };
    assert_eq!(losses(&a), losses(&b));
    assert_eq!(losses(&a).len(), 4);
}

#[test]
fn training_from_shards() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let shard = tmp.path().join("shard");
    ok(&["generate", "--config", s(&cfg), "--n-tasks", "3", "--out", s(&shard)]);
    let run = tmp.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run), "--shards", s(&shard)]);
    assert_eq!(checkpoint::load(&run.join("checkpoint")).unwrap().tasks_seen, 8);
}

fn table(rows: usize, offset: f64, label: bool) -> String {
    let mut text = String::from(if label { "a,b,c,y\n" } else { "a,b,c\n" });
    for i in 0..rows {
        let v = i as f64 * 0.37 + offset;
        text.push_str(&format!("{},{},{}", v.sin(), v.cos(), (v * 1.3).sin()));
        if label {
            text.push_str(if i % 7 == 0 { ",1" } else { "," });
        }
        text.push('\n');
    }
    text
}

#[test]
fn fit_score_writes_one_score_per_test_row() {
    let tmp = TempDir::new().unwrap();
    let (cfg, ck) = trained(&tmp);
    let train = write(tmp.path(), "train.csv", &table(40, 0.0, true));
    let test = write(tmp.path(), "test.csv", &table(13, 5.0, false));
    let out = tmp.path().join("out/scores.csv");
    for labels in ["none", "one-class", "column:y"] {
        let train = if labels == "column:y" { train.clone() } else { write(tmp.path(), "plain.csv", &table(40, 0.0, false)) };
        ok(&["fit-score", "--checkpoint", s(&ck), "--train", s(&train), "--labels", labels, "--test", s(&test), "--out", s(&out), "--config", s(&cfg)]);
        let text = fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("row_index,score"));
        let scores: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(scores.len(), 13);
        assert!(scores.iter().all(|&p| p > 0.0 && p < 1.0));
    }
    let first = fs::read(&out).unwrap();
    let args = ["fit-score", "--checkpoint", s(&ck), "--train", s(&train), "--labels", "column:y", "--test", s(&test), "--out", s(&out), "--config", s(&cfg)];
    ok(&args);
    assert_eq!(fs::read(&out).unwrap(), first);

    assert_eq!(code(&cli(&["fit-score", "--checkpoint", s(&ck), "--train", s(&train), "--labels", "maybe", "--test", s(&test), "--out", s(&out)])), 1);
    let wide = write(tmp.path(), "wide.csv", "a,b,c,d\n1,2,3,4\n");
    let out2 = cli(&["fit-score", "--checkpoint", s(&ck), "--train", s(&train), "--labels", "column:y", "--test", s(&wide), "--out", s(&out)]);
    assert_eq!(code(&out2), 2);
    let broken = write(tmp.path(), "broken.csv", "a,b,c\n1,x,3\n");
    assert_eq!(code(&cli(&["fit-score", "--checkpoint", s(&ck), "--train", s(&broken), "--test", s(&test), "--out", s(&out)])), 2);
    let missing = tmp.path().join("nope");
    assert_eq!(code(&cli(&["fit-score", "--checkpoint", s(&missing), "--train", s(&train), "--labels", "column:y", "--test", s(&test), "--out", s(&out)])), 3);
}

const REGISTRY: &str = r#"
[[eval.datasets]]
source = "dev"
kind = "moons"
n = 200
noise = 0.05
anomaly_ratio = 0.1
seed = 0

[[eval.datasets]]
source = "dev"
kind = "circles"
n = 200
noise = 0.05
anomaly_ratio = 0.1
seed = 1
"#;

#[test]
fn eval_runs_the_registry_grid() {
    let tmp = TempDir::new().unwrap();
    let (_, ck) = trained(&tmp);
    let cfg = write(tmp.path(), "eval.toml", &format!("{SMALL}\n[eval]\ncheckpoint = \"run/checkpoint\"\n{REGISTRY}"));
    let out = tmp.path().join("report");
    ok(&["eval", "--config", s(&cfg), "--out", s(&out)]);
    let records = read_records(&out.join("records.csv")).unwrap();
    assert_eq!(records.len(), 2 * 3 * 5 * 2);
    let semi: Vec<_> = records.iter().filter(|r| r.r_a.is_some()).collect();
    assert_eq!(semi.len(), 20);
    assert!(semi.iter().all(|r| r.r_a == Some(0.1)));

    let records_text = fs::read_to_string(out.join("records.csv")).unwrap();
    assert!(records_text.starts_with(&incontext_ad::eval::bench::RECORDS_HEADER.join(",")));
    let header = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(header.starts_with(&incontext_ad::eval::bench::AGGREGATE_HEADER.join(",")));
    let derived = aggregate(&records);
    let mut rd = csv::Reader::from_path(out.join("aggregate.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), derived.len());
    for (row, a) in rows.iter().zip(&derived) {
        assert_eq!(&row[0], a.regime.as_str());
        assert_eq!(&row[1], a.method);
        let auc: f64 = row[5].parse().unwrap();
        assert!((auc - a.auc_roc).abs() < 1e-12);
    }

    // Same config, same metrics.
    let again = tmp.path().join("again");
    ok(&["eval", "--config", s(&cfg), "--out", s(&again), "--checkpoint", s(&ck)]);
    let strip_times = |p: &Path| {
        read_records(p).unwrap().into_iter().map(|r| (r.dataset, r.regime, r.method, r.seed, r.auc_roc, r.auc_pr, r.f1)).collect::<Vec<_>>()
    };
    assert_eq!(strip_times(&out.join("records.csv")), strip_times(&again.join("records.csv")));
}

#[test]
fn eval_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let empty = write(tmp.path(), "empty.toml", "seed = 1\n");
    assert_eq!(code(&cli(&["eval", "--config", s(&empty), "--out", s(&tmp.path().join("o"))])), 1);

    let knn_only = format!("[eval]\nmethods = [{{ kind = \"knn\", k = 5 }}]\n[eval.bench]\nseeds = [0]\nregimes = [\"one-class\"]\n{REGISTRY}");
    let cfg = write(tmp.path(), "knn.toml", &knn_only);
    ok(&["eval", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);

    let strict = write(tmp.path(), "strict.toml", &format!("{knn_only}\n[[eval.thresholds]]\nregime = \"one-class\"\nmethod = \"knn\"\nmetric = \"auc_roc\"\nmin = 1.01\n"));
    assert_eq!(code(&cli(&["eval", "--config", s(&strict), "--out", s(&tmp.path().join("o2"))])), 3);

    let icl = write(tmp.path(), "icl.toml", REGISTRY);
    assert_eq!(code(&cli(&["eval", "--config", s(&icl), "--out", s(&tmp.path().join("o3"))])), 1);
}

#[test]
fn dev_demo_writes_sets_scores_and_summary() {
    let tmp = TempDir::new().unwrap();
    let (_, ck) = trained(&tmp);
    let out = tmp.path().join("demo");
    let stdout = ok(&["dev-demo", "--checkpoint", s(&ck), "--out", s(&out), "--n", "200"]);
    assert!(stdout.contains("moons") && stdout.contains("circles"));
    for kind in ["moons", "circles"] {
        for suffix in ["", "_test", "_scores"] {
            assert!(out.join(format!("{kind}{suffix}.csv")).is_file());
        }
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    for kind in ["moons", "circles"] {
        let auc = summary[kind]["auc_roc_knn"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc));
    }
}
