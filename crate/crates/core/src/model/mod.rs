//! The encoder `q(y | x, support)`.
//!
//! Support rows are embedded, label-conditioned through FiLM and passed
//! through post-norm transformer blocks with full self-attention. Query rows
//! go through the same blocks but attend only to the support keys and values
//! of each layer, never to other queries. Because the support stream never
//! sees the queries, its per-layer keys and values can be computed once
//! ([`fit`]) and reused for any number of query batches ([`predict`]).

pub mod checkpoint;
pub mod graph;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Scalar};
use crate::preprocess::{fit_norm, prepare, NormStats};
use graph::{sigmoid, Graph, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ffn: usize,
    /// Width every input is padded to.
    pub d_max: usize,
    /// Width of the label embeddings `e0`, `e1`.
    pub d_label: usize,
    #[serde(default = "default_ln_eps")]
    pub ln_eps: f64,
}

fn default_ln_eps() -> f64 {
    1e-5
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ArchConfig {
    /// Small model trainable on a single CPU core in a few hours.
    pub fn desk() -> Self {
        Self { n_layers: 4, n_heads: 4, d_model: 64, d_ffn: 128, d_max: 16, d_label: 16, ln_eps: 1e-5 }
    }

    /// Full-size configuration: 12 layers, 512 wide, 1024 FFN.
    pub fn full() -> Self {
        Self { n_layers: 12, n_heads: 4, d_model: 512, d_ffn: 1024, d_max: 512, d_label: 512, ln_eps: 1e-5 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_layers == 0 || self.n_heads == 0 || self.d_model == 0 || self.d_ffn == 0 || self.d_label == 0 {
            return bad("architecture sizes must be >= 1");
        }
        if self.d_model % self.n_heads != 0 {
            return bad("d_model must be divisible by n_heads");
        }
        if self.d_max == 0 || self.d_max > self.d_model {
            return bad("d_max must lie in [1, d_model]");
        }
        if !(self.ln_eps > 0.0) {
            return bad("ln_eps must be positive");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

const EMBED_W: usize = 0;
const EMBED_B: usize = 1;
const LABEL_TABLE: usize = 2;
const FILM_GAMMA: usize = 3;
const FILM_BETA: usize = 4;
const LAYER_BASE: usize = 5;
const PER_LAYER: usize = 16;

// Offsets within a layer.
const WQ: usize = 0;
const WK: usize = 2;
const WV: usize = 4;
const WO: usize = 6;
const LN1: usize = 8;
const W1: usize = 10;
const W2: usize = 12;
const LN2: usize = 14;

const LAYER_TENSORS: [&str; PER_LAYER] = [
    "attn.wq", "attn.bq", "attn.wk", "attn.bk", "attn.wv", "attn.bv", "attn.wo", "attn.bo", "ln1.gain", "ln1.bias",
    "ffn.w1", "ffn.b1", "ffn.w2", "ffn.b2", "ln2.gain", "ln2.bias",
];

/// Names and shapes of every parameter tensor, in storage order.
pub fn layout(arch: &ArchConfig) -> Vec<TensorSpec> {
    let t = |name: &str, rows, cols| TensorSpec { name: name.to_string(), rows, cols };
    let (d, f) = (arch.d_model, arch.d_ffn);
    let mut out = vec![
        t("embed.weight", arch.d_max, d),
        t("embed.bias", 1, d),
        t("label_table", 2, arch.d_label),
        t("film.gamma", arch.d_label, d),
        t("film.beta", arch.d_label, d),
    ];
    for l in 0..arch.n_layers {
        let shapes = [
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (1, d),
            (1, d),
            (d, f),
            (1, f),
            (f, d),
            (1, d),
            (1, d),
            (1, d),
        ];
        for (name, (r, c)) in LAYER_TENSORS.iter().zip(shapes) {
            out.push(t(&format!("layers.{l}.{name}"), r, c));
        }
    }
    out.push(t("head.weight", d, 1));
    out.push(t("head.bias", 1, 1));
    out
}

fn head_index(arch: &ArchConfig) -> usize {
    LAYER_BASE + PER_LAYER * arch.n_layers
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub arch: ArchConfig,
    /// One tensor per [`layout`] entry, same order.
    pub tensors: Vec<Matrix<T>>,
}

impl<T: Scalar> ModelParams<T> {
    /// Weights `~ N(0, 2 / (fan_in + fan_out))`, biases zero, norm gains one.
    pub fn init(arch: &ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = crate::rng::seeded(seed);
        let tensors = layout(arch)
            .iter()
            .map(|s| {
                if s.name.ends_with("gain") {
                    Matrix::filled(s.rows, s.cols, T::one())
                } else if s.rows == 1 {
                    Matrix::zeros(s.rows, s.cols)
                } else {
                    let std = (2.0 / (s.rows + s.cols) as f64).sqrt();
                    Matrix::from_fn(s.rows, s.cols, |_, _| {
                        T::from_f64_lossy(std * rng.sample::<f64, _>(StandardNormal))
                    })
                }
            })
            .collect();
        Ok(Self { arch: arch.clone(), tensors })
    }

    pub fn n_params(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams { arch: self.arch.clone(), tensors: self.tensors.iter().map(Matrix::cast).collect() }
    }

    pub fn zeros_like(&self) -> Vec<Matrix<T>> {
        self.tensors.iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::all_finite)
    }

    /// Label embedding rows: `0 -> e0`, `1 -> e1`, `-1 -> 0`.
    pub fn label_embedding(&self, labels: &[i8]) -> Result<Matrix<T>> {
        Ok(label_onehot::<T>(labels)?.matmul(&self.tensors[LABEL_TABLE]))
    }

    /// `(1 + γ(c)) ⊙ x + β(c)` with bias-free linear `γ`, `β`.
    pub fn film(&self, x: &Matrix<T>, c: &Matrix<T>) -> Result<Matrix<T>> {
        if c.cols() != self.arch.d_label || x.cols() != self.arch.d_model || x.rows() != c.rows() {
            return Err(Error::DimensionMismatch(format!(
                "FiLM needs {}x{} embeddings and {}x{} conditioning, got {:?} and {:?}",
                c.rows(),
                self.arch.d_model,
                x.rows(),
                self.arch.d_label,
                x.shape(),
                c.shape()
            )));
        }
        let gamma = c.matmul(&self.tensors[FILM_GAMMA]);
        let beta = c.matmul(&self.tensors[FILM_BETA]);
        Ok(graph::film_apply(x, &gamma, &beta))
    }
}

/// One-hot rows over `{0, 1}`; unlabeled rows are all zero.
pub fn label_onehot<T: Scalar>(labels: &[i8]) -> Result<Matrix<T>> {
    let mut m = Matrix::zeros(labels.len(), 2);
    for (row, &y) in labels.iter().enumerate() {
        match y {
            -1 => {}
            0 | 1 => m.set(row, y as usize, T::one()),
            other => return Err(Error::LabelDomain { row, value: other as i64, expected: "{-1, 0, 1}" }),
        }
    }
    Ok(m)
}

/// Parameter handles inside one graph.
struct Bound(Vec<Var>);

fn bind<T: Scalar>(g: &mut Graph<T>, params: &ModelParams<T>, trainable: bool) -> Bound {
    Bound(
        params.tensors.iter().map(|t| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) }).collect(),
    )
}

/// Multi-head `softmax(Q Kᵀ / sqrt(d_h)) V` over pre-sliced heads of `k`, `v`.
fn attend<T: Scalar>(g: &mut Graph<T>, arch: &ArchConfig, q: Var, kh: &[Var], vh: &[Var]) -> Var {
    let dh = arch.head_dim();
    let scale = T::from_f64_lossy(1.0 / (dh as f64).sqrt());
    let heads: Vec<Var> = (0..arch.n_heads)
        .map(|h| {
            let qh = g.slice_cols(q, h * dh, dh);
            let s = g.matmul_bt(qh, kh[h]);
            let p = g.softmax_rows(s, scale);
            g.matmul(p, vh[h])
        })
        .collect();
    if heads.len() == 1 {
        heads[0]
    } else {
        g.concat_cols(&heads)
    }
}

fn split_heads<T: Scalar>(g: &mut Graph<T>, arch: &ArchConfig, x: Var) -> Vec<Var> {
    let dh = arch.head_dim();
    if arch.n_heads == 1 {
        return vec![x];
    }
    (0..arch.n_heads).map(|h| g.slice_cols(x, h * dh, dh)).collect()
}

/// Attention output projection, residual, norm, FFN, residual, norm.
fn block_tail<T: Scalar>(g: &mut Graph<T>, arch: &ArchConfig, p: &[Var], h: Var, att: Var) -> Var {
    let eps = T::from_f64_lossy(arch.ln_eps);
    let o = g.linear(att, p[WO], p[WO + 1]);
    let r = g.add(h, o);
    let h1 = g.layer_norm(r, p[LN1], p[LN1 + 1], eps);
    let a = g.linear(h1, p[W1], p[W1 + 1]);
    let a = g.gelu(a);
    let f = g.linear(a, p[W2], p[W2 + 1]);
    let r = g.add(h1, f);
    g.layer_norm(r, p[LN2], p[LN2 + 1], eps)
}

struct LayerKv {
    k: Var,
    v: Var,
}

/// Support stream; returns the per-layer key/value nodes.
fn support_pass<T: Scalar>(g: &mut Graph<T>, arch: &ArchConfig, b: &Bound, xs: Var, onehot: Var) -> Vec<LayerKv> {
    let p = &b.0;
    let e = g.linear(xs, p[EMBED_W], p[EMBED_B]);
    let c = g.matmul(onehot, p[LABEL_TABLE]);
    let gamma = g.matmul(c, p[FILM_GAMMA]);
    let beta = g.matmul(c, p[FILM_BETA]);
    let mut h = g.film(e, gamma, beta);
    let mut kv = Vec::with_capacity(arch.n_layers);
    for l in 0..arch.n_layers {
        let lp = &p[LAYER_BASE + l * PER_LAYER..LAYER_BASE + (l + 1) * PER_LAYER];
        let k = g.linear(h, lp[WK], lp[WK + 1]);
        let v = g.linear(h, lp[WV], lp[WV + 1]);
        // The last layer's support outputs feed nothing; only its K/V matter.
        if l + 1 < arch.n_layers {
            let q = g.linear(h, lp[WQ], lp[WQ + 1]);
            let kh = split_heads(g, arch, k);
            let vh = split_heads(g, arch, v);
            let att = attend(g, arch, q, &kh, &vh);
            h = block_tail(g, arch, lp, h, att);
        }
        kv.push(LayerKv { k, v });
    }
    kv
}

/// Query stream against per-layer support keys/values; returns `n × 1` logits.
fn query_pass<T: Scalar>(g: &mut Graph<T>, arch: &ArchConfig, b: &Bound, xq: Var, kv: &[LayerKv]) -> Var {
    let p = &b.0;
    let mut h = g.linear(xq, p[EMBED_W], p[EMBED_B]);
    for (l, layer) in kv.iter().enumerate() {
        let lp = &p[LAYER_BASE + l * PER_LAYER..LAYER_BASE + (l + 1) * PER_LAYER];
        let q = g.linear(h, lp[WQ], lp[WQ + 1]);
        let kh = split_heads(g, arch, layer.k);
        let vh = split_heads(g, arch, layer.v);
        let att = attend(g, arch, q, &kh, &vh);
        h = block_tail(g, arch, lp, h, att);
    }
    let hi = head_index(arch);
    g.linear(h, p[hi], p[hi + 1])
}

fn check_inputs<T: Scalar>(arch: &ArchConfig, xs: &Matrix<T>, ys: &[i8], xq: Option<&Matrix<T>>) -> Result<()> {
    if xs.rows() == 0 {
        return Err(Error::EmptyContext);
    }
    if ys.len() != xs.rows() {
        return Err(Error::DimensionMismatch(format!("{} support rows but {} labels", xs.rows(), ys.len())));
    }
    if xs.cols() != arch.d_max {
        return Err(Error::DimensionMismatch(format!(
            "support has {} columns, model expects padded width {}",
            xs.cols(),
            arch.d_max
        )));
    }
    if let Some(xq) = xq {
        if xq.cols() != arch.d_max {
            return Err(Error::DimensionMismatch(format!(
                "query has {} columns, model expects padded width {}",
                xq.cols(),
                arch.d_max
            )));
        }
    }
    Ok(())
}

/// Joint pass over preprocessed support and query rows; one logit per query.
pub fn forward_joint<T: Scalar>(
    params: &ModelParams<T>,
    support_x: &Matrix<T>,
    support_y: &[i8],
    query_x: &Matrix<T>,
) -> Result<Vec<T>> {
    let arch = &params.arch;
    check_inputs(arch, support_x, support_y, Some(query_x))?;
    let mut g = Graph::new();
    let b = bind(&mut g, params, false);
    let xs = g.constant(support_x.clone());
    let oh = g.constant(label_onehot(support_y)?);
    let xq = g.constant(query_x.clone());
    let kv = support_pass(&mut g, arch, &b, xs, oh);
    let logits = query_pass(&mut g, arch, &b, xq, &kv);
    Ok(g.take_value(logits).into_vec())
}

/// Mean query BCE and its gradient for every parameter tensor.
pub fn loss_and_grad<T: Scalar>(
    params: &ModelParams<T>,
    support_x: &Matrix<T>,
    support_y: &[i8],
    query_x: &Matrix<T>,
    query_y: &[i8],
) -> Result<(T, Vec<Matrix<T>>)> {
    let arch = &params.arch;
    check_inputs(arch, support_x, support_y, Some(query_x))?;
    if query_y.len() != query_x.rows() {
        return Err(Error::DimensionMismatch(format!("{} query rows but {} labels", query_x.rows(), query_y.len())));
    }
    let labels = query_y
        .iter()
        .enumerate()
        .map(|(row, &y)| match y {
            0 | 1 => Ok(T::from_f64_lossy(y as f64)),
            other => Err(Error::LabelDomain { row, value: other as i64, expected: "{0, 1}" }),
        })
        .collect::<Result<Vec<T>>>()?;
    let mut g = Graph::new();
    let b = bind(&mut g, params, true);
    let xs = g.constant(support_x.clone());
    let oh = g.constant(label_onehot(support_y)?);
    let xq = g.constant(query_x.clone());
    let kv = support_pass(&mut g, arch, &b, xs, oh);
    let logits = query_pass(&mut g, arch, &b, xq, &kv);
    let loss = g.bce_logits(logits, &labels);
    let value = g.value(loss).get(0, 0);
    let mut grads = g.backward(loss);
    let out = b
        .0
        .iter()
        .zip(&params.tensors)
        .map(|(v, t)| grads[v.index()].take().unwrap_or_else(|| Matrix::zeros(t.rows(), t.cols())))
        .collect();
    Ok((value, out))
}

/// Reusable state of one support set: per-layer keys and values plus the
/// normalization statistics of the raw support.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedContext<T> {
    pub keys: Vec<Matrix<T>>,
    pub values: Vec<Matrix<T>>,
    pub stats: NormStats,
}

impl<T: Scalar> FittedContext<T> {
    pub fn n_layers(&self) -> usize {
        self.keys.len()
    }

    pub fn n_support(&self) -> usize {
        self.keys.first().map_or(0, Matrix::rows)
    }

    /// Scalars held by the cache: `2 · n_layers · N_s · d_model`.
    pub fn cache_len(&self) -> usize {
        self.keys.iter().chain(&self.values).map(Matrix::len).sum()
    }
}

/// Normalizes the raw support, runs it once and caches every layer's K/V.
pub fn fit<T: Scalar>(params: &ModelParams<T>, support_x: &Matrix<T>, support_y: &[i8]) -> Result<FittedContext<T>> {
    let arch = &params.arch;
    if support_x.rows() == 0 {
        return Err(Error::EmptyContext);
    }
    let stats = fit_norm(support_x, arch.d_max)?;
    let xs = prepare(support_x, &stats)?;
    fit_prepared(params, &xs, support_y, stats)
}

/// As [`fit`] for support rows already normalized and padded with `stats`.
pub fn fit_prepared<T: Scalar>(
    params: &ModelParams<T>,
    support_x: &Matrix<T>,
    support_y: &[i8],
    stats: NormStats,
) -> Result<FittedContext<T>> {
    let arch = &params.arch;
    check_inputs(arch, support_x, support_y, None)?;
    let mut g = Graph::new();
    let b = bind(&mut g, params, false);
    let xs = g.constant(support_x.clone());
    let oh = g.constant(label_onehot(support_y)?);
    let kv = support_pass(&mut g, arch, &b, xs, oh);
    let mut keys = Vec::with_capacity(kv.len());
    let mut values = Vec::with_capacity(kv.len());
    for layer in kv {
        keys.push(g.take_value(layer.k));
        values.push(g.take_value(layer.v));
    }
    Ok(FittedContext { keys, values, stats })
}

/// Logits for raw query rows against a fitted support.
pub fn predict_logits<T: Scalar>(params: &ModelParams<T>, ctx: &FittedContext<T>, query_x: &Matrix<T>) -> Result<Vec<T>> {
    if query_x.cols() != ctx.stats.d_in {
        return Err(Error::DimensionMismatch(format!(
            "query has {} features, the context was fitted on {}",
            query_x.cols(),
            ctx.stats.d_in
        )));
    }
    let xq = prepare(query_x, &ctx.stats)?;
    predict_logits_prepared(params, ctx, &xq)
}

pub fn predict_logits_prepared<T: Scalar>(
    params: &ModelParams<T>,
    ctx: &FittedContext<T>,
    query_x: &Matrix<T>,
) -> Result<Vec<T>> {
    let arch = &params.arch;
    if ctx.n_layers() != arch.n_layers {
        return Err(Error::DimensionMismatch(format!(
            "context caches {} layers, model has {}",
            ctx.n_layers(),
            arch.n_layers
        )));
    }
    if query_x.cols() != arch.d_max {
        return Err(Error::DimensionMismatch(format!(
            "query has {} columns, model expects padded width {}",
            query_x.cols(),
            arch.d_max
        )));
    }
    if query_x.rows() == 0 {
        return Ok(Vec::new());
    }
    let mut g = Graph::new();
    let b = bind(&mut g, params, false);
    let xq = g.constant(query_x.clone());
    let kv: Vec<LayerKv> = ctx
        .keys
        .iter()
        .zip(&ctx.values)
        .map(|(k, v)| LayerKv { k: g.constant(k.clone()), v: g.constant(v.clone()) })
        .collect();
    let logits = query_pass(&mut g, arch, &b, xq, &kv);
    Ok(g.take_value(logits).into_vec())
}

/// Anomaly probabilities for raw query rows.
pub fn predict<T: Scalar>(params: &ModelParams<T>, ctx: &FittedContext<T>, query_x: &Matrix<T>) -> Result<Vec<T>> {
    Ok(predict_logits(params, ctx, query_x)?.into_iter().map(sigmoid).collect())
}

/// [`predict`] in batches of at most `chunk` rows.
pub fn predict_chunked<T: Scalar>(
    params: &ModelParams<T>,
    ctx: &FittedContext<T>,
    query_x: &Matrix<T>,
    chunk: usize,
) -> Result<Vec<T>> {
    let chunk = chunk.max(1);
    let mut out = Vec::with_capacity(query_x.rows());
    let mut start = 0;
    while start < query_x.rows() {
        let end = (start + chunk).min(query_x.rows());
        let idx: Vec<usize> = (start..end).collect();
        out.extend(predict(params, ctx, &query_x.select_rows(&idx))?);
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn tiny() -> ArchConfig {
        ArchConfig { n_layers: 2, n_heads: 2, d_model: 8, d_ffn: 12, d_max: 4, d_label: 3, ln_eps: 1e-5 }
    }

    fn random(r: usize, c: usize, seed: u64) -> Matrix<f64> {
        let mut rng = seeded(seed);
        Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn layout_matches_param_count() {
        let p = ModelParams::<f32>::init(&ArchConfig::desk(), 0).unwrap();
        let l = layout(&p.arch);
        assert_eq!(l.len(), p.tensors.len());
        for (s, t) in l.iter().zip(&p.tensors) {
            assert_eq!((s.rows, s.cols), t.shape(), "{}", s.name);
        }
        let d = 64;
        let per_layer = 4 * (d * d + d) + 2 * d + (d * 128 + 128) + (128 * d + d) + 2 * d;
        assert_eq!(p.n_params(), 16 * d + d + 2 * 16 + 2 * 16 * d + 4 * per_layer + d + 1);
    }

    #[test]
    fn full_config_is_about_26m_params() {
        let n: usize = layout(&ArchConfig::full()).iter().map(|s| s.rows * s.cols).sum();
        assert!((25_000_000..28_000_000).contains(&n), "{n}");
    }

    #[test]
    fn unlabeled_rows_embed_to_zero() {
        let p = ModelParams::<f64>::init(&tiny(), 1).unwrap();
        let e = p.label_embedding(&[-1, 0, 1]).unwrap();
        assert!(e.row(0).iter().all(|&v| v == 0.0));
        assert_eq!(e.row(1), p.tensors[LABEL_TABLE].row(0));
        assert_eq!(e.row(2), p.tensors[LABEL_TABLE].row(1));
        let x = random(1, 8, 2);
        assert_eq!(p.film(&x, &e.select_rows(&[0])).unwrap(), x);
        assert!(matches!(p.label_embedding(&[2]), Err(Error::LabelDomain { row: 0, value: 2, .. })));
    }

    #[test]
    fn cache_shape_and_determinism() {
        let p = ModelParams::<f64>::init(&tiny(), 3).unwrap();
        let xs = random(9, 3, 4);
        let ys = vec![-1i8; 9];
        let a = fit(&p, &xs, &ys).unwrap();
        assert_eq!(a.n_layers(), 2);
        assert_eq!(a.cache_len(), 2 * 2 * 9 * 8);
        assert_eq!(fit(&p, &xs, &ys).unwrap(), a);
        assert!(matches!(fit(&p, &Matrix::zeros(0, 3), &[]), Err(Error::EmptyContext)));
    }

    #[test]
    fn predict_equals_joint_forward() {
        let p = ModelParams::<f64>::init(&tiny(), 5).unwrap();
        let xs = random(7, 3, 6);
        let xq = random(5, 3, 7);
        let ys = [0, 1, -1, 0, 0, -1, 1];
        let ctx = fit(&p, &xs, &ys).unwrap();
        let direct: Vec<f64> = forward_joint(&p, &prepare(&xs, &ctx.stats).unwrap(), &ys, &prepare(&xq, &ctx.stats).unwrap())
            .unwrap()
            .into_iter()
            .map(sigmoid)
            .collect();
        let cached = predict(&p, &ctx, &xq).unwrap();
        for (a, b) in direct.iter().zip(&cached) {
            assert!((a - b).abs() < 1e-12);
        }
        let one_by_one = predict_chunked(&p, &ctx, &xq, 1).unwrap();
        for (a, b) in one_by_one.iter().zip(&cached) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(predict(&p, &ctx, &random(2, 4, 8)).is_err());
    }

    #[test]
    fn loss_gradient_spot_check() {
        let p = ModelParams::<f64>::init(&tiny(), 9).unwrap();
        let xs = random(6, 4, 10);
        let xq = random(4, 4, 11);
        let (ys, yq) = ([0i8, 1, -1, 0, -1, 0], [0i8, 1, 1, 0]);
        let (_, grads) = loss_and_grad(&p, &xs, &ys, &xq, &yq).unwrap();
        let h = 1e-5;
        for (ti, (r, c)) in [(EMBED_W, (1, 2)), (FILM_GAMMA, (2, 5)), (LAYER_BASE + WK, (3, 1)), (LAYER_BASE + 16 + LN1, (0, 6))] {
            let mut plus = p.clone();
            plus.tensors[ti].set(r, c, p.tensors[ti].get(r, c) + h);
            let mut minus = p.clone();
            minus.tensors[ti].set(r, c, p.tensors[ti].get(r, c) - h);
            let fd = (loss_and_grad(&plus, &xs, &ys, &xq, &yq).unwrap().0
                - loss_and_grad(&minus, &xs, &ys, &xq, &yq).unwrap().0)
                / (2.0 * h);
            let an = grads[ti].get(r, c);
            assert!((fd - an).abs() <= 1e-6 + 1e-4 * fd.abs(), "tensor {ti}: {an} vs {fd}");
        }
    }
}
