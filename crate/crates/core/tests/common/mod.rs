//! Independent oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::path::PathBuf;

use incontext_ad::linalg::Matrix;
use incontext_ad::model::{layout, ArchConfig, ModelParams};
use incontext_ad::rng::seeded;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    let mut rng = seeded(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn small_arch() -> ArchConfig {
    ArchConfig { n_layers: 2, n_heads: 2, d_model: 16, d_ffn: 24, d_max: 6, d_label: 4, ln_eps: 1e-5 }
}

/// Trained desk checkpoint shipped with the repository.
pub fn desk_checkpoint() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../artifacts/desk/checkpoint")
}

type Rows = Vec<Vec<f64>>;

fn tensor(params: &ModelParams<f64>, name: &str) -> Rows {
    let i = layout(&params.arch).iter().position(|s| s.name == name).unwrap_or_else(|| panic!("no tensor {name}"));
    params.tensors[i].iter_rows().map(<[f64]>::to_vec).collect()
}

fn affine(x: &Rows, w: &Rows, b: &Rows) -> Rows {
    x.iter()
        .map(|row| {
            (0..w[0].len())
                .map(|j| b[0][j] + row.iter().zip(w).map(|(a, wr)| a * wr[j]).sum::<f64>())
                .collect()
        })
        .collect()
}

fn norm(x: &Rows, gain: &Rows, bias: &Rows, eps: f64) -> Rows {
    x.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            row.iter().enumerate().map(|(j, v)| (v - mean) / (var + eps).sqrt() * gain[0][j] + bias[0][j]).collect()
        })
        .collect()
}

fn gelu_tanh(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

/// Joint pass over the concatenated `[support; query]` sequence with an
/// explicit attention mask: every row may attend only to support rows.
/// Written with plain loops, sharing nothing with the library's graph.
pub fn masked_forward(params: &ModelParams<f64>, xs: &Matrix<f64>, ys: &[i8], xq: &Matrix<f64>) -> Vec<f64> {
    let arch = &params.arch;
    let ns = xs.rows();
    let x: Rows = xs.iter_rows().chain(xq.iter_rows()).map(<[f64]>::to_vec).collect();
    let n = x.len();
    let mut h = affine(&x, &tensor(params, "embed.weight"), &tensor(params, "embed.bias"));
    let table = tensor(params, "label_table");
    let (gw, bw) = (tensor(params, "film.gamma"), tensor(params, "film.beta"));
    for i in 0..ns {
        if ys[i] < 0 {
            continue;
        }
        let c = &table[ys[i] as usize];
        for j in 0..arch.d_model {
            let gamma: f64 = c.iter().zip(&gw).map(|(a, w)| a * w[j]).sum();
            let beta: f64 = c.iter().zip(&bw).map(|(a, w)| a * w[j]).sum();
            h[i][j] = (1.0 + gamma) * h[i][j] + beta;
        }
    }
    let dh = arch.d_model / arch.n_heads;
    for l in 0..arch.n_layers {
        let t = |s: &str| tensor(params, &format!("layers.{l}.{s}"));
        let q = affine(&h, &t("attn.wq"), &t("attn.bq"));
        let k = affine(&h, &t("attn.wk"), &t("attn.bk"));
        let v = affine(&h, &t("attn.wv"), &t("attn.bv"));
        let mut att = vec![vec![0.0; arch.d_model]; n];
        for i in 0..n {
            for head in 0..arch.n_heads {
                let cols = head * dh..(head + 1) * dh;
                let allowed = |j: usize| j < ns;
                let logits: Vec<f64> = (0..n)
                    .map(|j| {
                        if allowed(j) {
                            cols.clone().map(|c| q[i][c] * k[j][c]).sum::<f64>() / (dh as f64).sqrt()
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
                let z: f64 = w.iter().sum();
                for c in cols.clone() {
                    att[i][c] = (0..n).map(|j| w[j] / z * v[j][c]).sum();
                }
            }
        }
        let o = affine(&att, &t("attn.wo"), &t("attn.bo"));
        let r: Rows = h.iter().zip(&o).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        let h1 = norm(&r, &t("ln1.gain"), &t("ln1.bias"), arch.ln_eps);
        let a: Rows = affine(&h1, &t("ffn.w1"), &t("ffn.b1")).into_iter().map(|r| r.into_iter().map(gelu_tanh).collect()).collect();
        let f = affine(&a, &t("ffn.w2"), &t("ffn.b2"));
        let r: Rows = h1.iter().zip(&f).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        h = norm(&r, &t("ln2.gain"), &t("ln2.bias"), arch.ln_eps);
    }
    let out = affine(&h[ns..].to_vec(), &tensor(params, "head.weight"), &tensor(params, "head.bias"));
    out.into_iter().map(|r| r[0]).collect()
}

/// Fraction of (anomaly, normal) pairs ordered correctly, ties one half.
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi == 1 && yj == 0 {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Average precision by walking the ranking one position at a time; a row
/// precedes another when it scores higher or ties earlier in the input.
pub fn ap_walk(scores: &[f64], labels: &[u8]) -> f64 {
    let n = scores.len();
    let before = |a: usize, b: usize| scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let mut terms: Vec<(usize, usize)> = (0..n)
        .filter(|&i| labels[i] == 1)
        .map(|i| {
            let rank = 1 + (0..n).filter(|&j| before(j, i)).count();
            let hits = 1 + (0..n).filter(|&j| labels[j] == 1 && before(j, i)).count();
            (rank, hits)
        })
        .collect();
    // Summed top-down so the floating-point result is reproducible.
    terms.sort_unstable();
    terms.iter().map(|&(rank, hits)| hits as f64 / rank as f64).sum::<f64>() / pos as f64
}

/// F1 from the confusion matrix of flagging every row at or above the k-th
/// largest score, `k` the anomaly count.
pub fn f1_confusion(scores: &[f64], labels: &[u8]) -> f64 {
    let k = labels.iter().filter(|&&y| y == 1).count();
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let thr = sorted[k - 1];
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= thr, y == 1) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fneg += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fneg)
    }
}

/// Random scores on a coarse grid (so ties are common) and labels with both
/// classes present.
pub fn tied_instance(rng: &mut impl Rng, n_max: usize) -> (Vec<f64>, Vec<u8>) {
    let n = rng.random_range(2..=n_max);
    let levels = rng.random_range(1..=n.max(2));
    let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
    let mut labels: Vec<u8> = (0..n).map(|_| rng.random_bool(0.3) as u8).collect();
    labels[0] = 1;
    labels[1] = 0;
    (scores, labels)
}

/// Kolmogorov-Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
