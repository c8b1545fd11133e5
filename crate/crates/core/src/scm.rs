//! Structural causal model prior.
//!
//! An SCM here is a layered MLP-shaped DAG: root "cause" nodes feed hidden
//! layers through sparse random weight matrices, each node applies its own
//! activation and receives additive Gaussian noise. A subset of nodes is
//! observed as features; one further node is binarized into the class label,
//! which splits draws into a normal (`y = 0`) and an anomalous (`y = 1`)
//! class-conditional distribution.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeededRng;

/// Log-uniform location followed by a lower-truncated log-normal draw.
///
/// `m ~ LogUniform(min_mu, max_mu)`, then `v ~ LogNormal(ln m, log_sigma)`
/// conditioned on `v >= floor`, rounded to the nearest integer when `round`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TnluSpec {
    pub max_mu: f64,
    pub min_mu: f64,
    pub round: bool,
    pub floor: f64,
    #[serde(default = "default_log_sigma")]
    pub log_sigma: f64,
}

fn default_log_sigma() -> f64 {
    0.5
}

impl TnluSpec {
    pub fn new(max_mu: f64, min_mu: f64, round: bool, floor: f64) -> Result<Self> {
        let spec = Self { max_mu, min_mu, round, floor, log_sigma: default_log_sigma() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_mu > 0.0 && self.min_mu <= self.max_mu && self.max_mu.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "TNLU requires 0 < min_mu <= max_mu, got min {} max {}",
                self.min_mu, self.max_mu
            )));
        }
        if !(self.floor >= 0.0 && self.floor.is_finite()) {
            return Err(Error::InvalidConfig(format!("TNLU floor must be >= 0, got {}", self.floor)));
        }
        if !(self.log_sigma >= 0.0 && self.log_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("TNLU log_sigma must be >= 0, got {}", self.log_sigma)));
        }
        Ok(())
    }
}

/// Rejection attempts before the truncated draw falls back to its floor.
const TNLU_MAX_REJECTIONS: usize = 10_000;

pub fn sample_tnlu(spec: &TnluSpec, rng: &mut SeededRng) -> f64 {
    let (lo, hi) = (spec.min_mu.ln(), spec.max_mu.ln());
    let log_m = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let mut v = spec.floor;
    for _ in 0..TNLU_MAX_REJECTIONS {
        let z: f64 = rng.sample(StandardNormal);
        let cand = (log_m + spec.log_sigma * z).exp();
        if cand >= spec.floor {
            v = cand;
            break;
        }
    }
    if spec.round {
        v.round().max(spec.floor.ceil())
    } else {
        v
    }
}

/// Integer-valued TNLU draw, at least `min`.
pub fn sample_tnlu_count(spec: &TnluSpec, min: usize, rng: &mut SeededRng) -> usize {
    let v = sample_tnlu(spec, rng);
    (v.round().min(1e6) as usize).max(min)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Elu,
    Sigmoid,
    Identity,
    Sine,
    Softplus,
    Heaviside,
}

impl Activation {
    pub const ALL: [Activation; 7] = [
        Activation::Tanh,
        Activation::Elu,
        Activation::Sigmoid,
        Activation::Identity,
        Activation::Sine,
        Activation::Softplus,
        Activation::Heaviside,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
            Activation::Sine => x.sin(),
            Activation::Softplus => {
                if x > 30.0 {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
            Activation::Heaviside => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScmHyperparams {
    pub depth: TnluSpec,
    pub width: TnluSpec,
    pub num_causes: TnluSpec,
    pub node_noise_std: TnluSpec,
    pub weight_std: TnluSpec,
    /// Weight dropout rate is `dropout_beta_scale * Beta(a, b)`.
    pub dropout_beta_scale: f64,
    /// `a, b ~ U(lo, hi)`.
    pub dropout_beta_range: (f64, f64),
    pub activations: Vec<Activation>,
    /// Probability of each categorical flag being set.
    pub flag_probability: f64,
    /// Shape and scale of the Gamma draw for category counts.
    pub category_gamma: (f64, f64),
    pub zipf_exponent_range: (f64, f64),
    /// Quantiles used by tail binarization of the target.
    pub tail_quantiles: (f64, f64),
    pub retry_cap: usize,
    /// Raw draws per requested row on the first pool batch.
    pub pool_slack: usize,
}

impl Default for ScmHyperparams {
    fn default() -> Self {
        let t = |max_mu, min_mu, round, floor| TnluSpec { max_mu, min_mu, round, floor, log_sigma: 0.5 };
        Self {
            depth: t(8.0, 1.0, true, 2.0),
            width: t(180.0, 5.0, true, 4.0),
            num_causes: t(12.0, 1.0, true, 1.0),
            node_noise_std: t(0.3, 0.0001, false, 0.0),
            weight_std: t(10.0, 0.01, false, 0.0),
            dropout_beta_scale: 0.9,
            dropout_beta_range: (0.1, 5.0),
            activations: Activation::ALL.to_vec(),
            flag_probability: 0.5,
            category_gamma: (1.0, 8.0),
            zipf_exponent_range: (1.2, 3.0),
            tail_quantiles: (0.25, 0.75),
            retry_cap: 16,
            pool_slack: 4,
        }
    }
}

impl ScmHyperparams {
    pub fn validate(&self) -> Result<()> {
        for t in [&self.depth, &self.width, &self.num_causes, &self.node_noise_std, &self.weight_std] {
            t.validate()?;
        }
        if self.activations.is_empty() {
            return Err(Error::InvalidConfig("activation set must be non-empty".into()));
        }
        let (a, b) = self.dropout_beta_range;
        if !(a > 0.0 && a <= b) || !(0.0..1.0).contains(&self.dropout_beta_scale) {
            return Err(Error::InvalidConfig("invalid weight dropout distribution".into()));
        }
        if !(0.0..=1.0).contains(&self.flag_probability) {
            return Err(Error::InvalidConfig("flag_probability must lie in [0, 1]".into()));
        }
        let (lo, hi) = self.tail_quantiles;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::InvalidConfig("tail quantiles must satisfy 0 < lo < hi < 1".into()));
        }
        if self.category_gamma.0 <= 0.0 || self.category_gamma.1 <= 0.0 {
            return Err(Error::InvalidConfig("category gamma parameters must be positive".into()));
        }
        let (zl, zh) = self.zipf_exponent_range;
        if !(zl > 0.0 && zl <= zh) {
            return Err(Error::InvalidConfig("invalid zipf exponent range".into()));
        }
        if self.retry_cap == 0 || self.pool_slack == 0 {
            return Err(Error::InvalidConfig("retry_cap and pool_slack must be >= 1".into()));
        }
        Ok(())
    }

    /// `k ~ max(round(Gamma(shape, scale)), 1)`.
    pub fn sample_category_count(&self, rng: &mut SeededRng) -> usize {
        let (shape, scale) = self.category_gamma;
        let g: f64 = Gamma::new(shape, scale).expect("validated").sample(rng);
        (g.round() as usize).max(1)
    }
}

/// Distribution of a root node.
#[derive(Clone, Debug, PartialEq)]
pub enum CauseDist {
    Gaussian { mean: f64, std: f64 },
    /// Category index with the given probabilities.
    Multinomial { probs: Vec<f64> },
    /// Rank in `1..=k` with `P(r) ∝ r^-exponent`.
    Zipf { k: usize, exponent: f64 },
}

impl CauseDist {
    fn sample(&self, rng: &mut SeededRng) -> f64 {
        match self {
            CauseDist::Gaussian { mean, std } => mean + std * rng.sample::<f64, _>(StandardNormal),
            CauseDist::Multinomial { probs } => categorical(probs, rng) as f64,
            CauseDist::Zipf { k, exponent } => {
                let weights: Vec<f64> = (1..=*k).map(|r| (r as f64).powf(-exponent)).collect();
                let total: f64 = weights.iter().sum();
                let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
                (categorical(&probs, rng) + 1) as f64
            }
        }
    }
}

fn categorical(probs: &[f64], rng: &mut SeededRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Binarization {
    /// `y = 1` iff the target exceeds its median.
    Median,
    /// `y = 0` at or below the `lo` quantile, `y = 1` at or above `hi`;
    /// rows in between are discarded.
    TailQuantiles { lo: f64, hi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Categorical(usize),
}

impl FeatureKind {
    pub fn is_categorical(self) -> bool {
        matches!(self, FeatureKind::Categorical(_))
    }
}

/// A sampled SCM.
#[derive(Clone, Debug, PartialEq)]
pub struct ScmSpec {
    /// Nodes per layer; layer 0 holds the root causes.
    pub layers: Vec<usize>,
    /// `weights[l]` maps layer `l` to layer `l + 1`; dropped edges are exactly zero.
    pub weights: Vec<Matrix<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// Activation per node of layers `1..`.
    pub activations: Vec<Vec<Activation>>,
    /// Additive noise σ per node of layers `1..`.
    pub noise_std: Vec<Vec<f64>>,
    pub causes: Vec<CauseDist>,
    /// Global node ids (layer-major numbering) observed as features, in column order.
    pub feature_indices: Vec<usize>,
    pub target_index: usize,
    /// Category count per feature column, `0` for continuous.
    pub discretization_plan: Vec<usize>,
    /// Bin-to-code permutation per feature column (empty for continuous).
    pub code_permutations: Vec<Vec<usize>>,
    pub target_binarization: Binarization,
    pub dropout_rate: f64,
    pub flags: ScmFlags,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScmFlags {
    pub share_nodewise_noise: bool,
    pub blockwise_dropout: bool,
    pub preserve_feature_order: bool,
    pub blockwise_feature_selection: bool,
}

impl ScmSpec {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.layers.iter().sum()
    }

    pub fn d_in(&self) -> usize {
        self.feature_indices.len()
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        self.discretization_plan
            .iter()
            .map(|&k| if k == 0 { FeatureKind::Continuous } else { FeatureKind::Categorical(k) })
            .collect()
    }

    /// Propagates `n` root draws through every layer, returning all node
    /// values as an `n × num_nodes` matrix in global node order.
    pub fn simulate(&self, n: usize, rng: &mut SeededRng) -> Matrix<f64> {
        let total = self.num_nodes();
        let mut out = Matrix::zeros(n, total);
        let mut layer = Matrix::from_fn(n, self.layers[0], |_, j| self.causes[j].sample(rng));
        let mut offset = 0;
        for l in 0..self.layers.len() {
            for r in 0..n {
                out.row_mut(r)[offset..offset + self.layers[l]].copy_from_slice(layer.row(r));
            }
            offset += self.layers[l];
            if l + 1 == self.layers.len() {
                break;
            }
            let mut next = layer.matmul(&self.weights[l]);
            let acts = &self.activations[l];
            let noise = &self.noise_std[l];
            let bias = &self.biases[l];
            for r in 0..n {
                for (j, v) in next.row_mut(r).iter_mut().enumerate() {
                    let eps: f64 = rng.sample(StandardNormal);
                    *v = acts[j].apply(*v + bias[j]) + noise[j] * eps;
                }
            }
            layer = next;
        }
        out
    }
}

/// Samples an SCM with `d_in` observed features.
pub fn sample_scm(hp: &ScmHyperparams, d_in: usize, rng: &mut SeededRng) -> Result<ScmSpec> {
    if d_in < 2 {
        return Err(Error::InvalidConfig(format!("d_in must be >= 2, got {d_in}")));
    }
    let mut last_nodes = 0;
    for _ in 0..hp.retry_cap {
        let spec = sample_scm_once(hp, d_in, rng);
        match spec {
            Ok(s) => return Ok(s),
            Err(nodes) => last_nodes = nodes,
        }
    }
    Err(Error::GenerationFailure {
        attempts: hp.retry_cap,
        reason: format!("graph with {last_nodes} nodes cannot supply {} observed nodes", d_in + 1),
    })
}

fn sample_scm_once(hp: &ScmHyperparams, d_in: usize, rng: &mut SeededRng) -> std::result::Result<ScmSpec, usize> {
    let p = hp.flag_probability;
    let flags = ScmFlags {
        share_nodewise_noise: rng.random_bool(p),
        blockwise_dropout: rng.random_bool(p),
        preserve_feature_order: rng.random_bool(p),
        blockwise_feature_selection: rng.random_bool(p),
    };
    let depth = sample_tnlu_count(&hp.depth, 2, rng);
    let width = sample_tnlu_count(&hp.width, 4, rng);
    let n_causes = sample_tnlu_count(&hp.num_causes, 1, rng);
    let mut layers = vec![n_causes];
    layers.extend(std::iter::repeat_n(width, depth - 1));
    let total: usize = layers.iter().sum();
    if total < d_in + 1 {
        return Err(total);
    }

    let (a_lo, a_hi) = hp.dropout_beta_range;
    let a = rng.random_range(a_lo..=a_hi);
    let b = rng.random_range(a_lo..=a_hi);
    let dropout_rate = hp.dropout_beta_scale * Beta::new(a, b).expect("validated").sample(rng);
    let weight_std = sample_tnlu(&hp.weight_std, rng);
    // Kept weights are rescaled so the expected fan-in variance does not shrink with dropout.
    let keep_scale = weight_std / (1.0 - dropout_rate).sqrt();
    let shared_noise = sample_tnlu(&hp.node_noise_std, rng);

    let mut weights = Vec::with_capacity(depth - 1);
    let mut biases = Vec::with_capacity(depth - 1);
    let mut activations = Vec::with_capacity(depth - 1);
    let mut noise_std = Vec::with_capacity(depth - 1);
    for l in 0..depth - 1 {
        let (fan_in, fan_out) = (layers[l], layers[l + 1]);
        let n_blocks = if flags.blockwise_dropout { rng.random_range(1..=fan_in.min(fan_out)) } else { 1 };
        let mut w = Matrix::zeros(fan_in, fan_out);
        for i in 0..fan_in {
            for j in 0..fan_out {
                let keep = if flags.blockwise_dropout {
                    i * n_blocks / fan_in == j * n_blocks / fan_out
                } else {
                    rng.random::<f64>() >= dropout_rate
                };
                if keep {
                    w.set(i, j, keep_scale * rng.sample::<f64, _>(StandardNormal));
                }
            }
        }
        weights.push(w);
        biases.push((0..fan_out).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
        activations.push((0..fan_out).map(|_| hp.activations[rng.random_range(0..hp.activations.len())]).collect());
        noise_std.push(
            (0..fan_out)
                .map(|_| if flags.share_nodewise_noise { shared_noise } else { sample_tnlu(&hp.node_noise_std, rng) })
                .collect(),
        );
    }

    let causes = (0..n_causes)
        .map(|_| match rng.random_range(0..3) {
            0 => CauseDist::Gaussian {
                mean: rng.sample(StandardNormal),
                std: rng.sample::<f64, _>(StandardNormal).abs().max(1e-3),
            },
            1 => {
                let k = hp.sample_category_count(rng);
                let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let s: f64 = raw.iter().sum();
                CauseDist::Multinomial { probs: raw.iter().map(|v| v / s).collect() }
            }
            _ => CauseDist::Zipf {
                k: hp.sample_category_count(rng),
                exponent: rng.random_range(hp.zipf_exponent_range.0..=hp.zipf_exponent_range.1),
            },
        })
        .collect();

    // Observed nodes: a contiguous window or a uniform subset, target drawn among them.
    let mut observed: Vec<usize> = if flags.blockwise_feature_selection {
        let start = rng.random_range(0..=total - (d_in + 1));
        (start..start + d_in + 1).collect()
    } else {
        rand::seq::index::sample(rng, total, d_in + 1).into_vec()
    };
    observed.sort_unstable();
    let target_index = observed.remove(rng.random_range(0..observed.len()));
    let mut feature_indices = observed;
    if !flags.preserve_feature_order {
        feature_indices.shuffle(rng);
    }

    // Feature typing: mixed with probability 0.5, else all-discrete or all-continuous.
    let discretize: Vec<bool> = if rng.random_bool(0.5) {
        let p_disc: f64 = rng.random();
        (0..d_in).map(|_| rng.random_bool(p_disc)).collect()
    } else {
        let all = rng.random_bool(0.5);
        vec![all; d_in]
    };
    let mut discretization_plan = Vec::with_capacity(d_in);
    let mut code_permutations = Vec::with_capacity(d_in);
    for &disc in &discretize {
        if disc {
            let k = hp.sample_category_count(rng);
            let mut perm: Vec<usize> = (0..k).collect();
            if !flags.preserve_feature_order {
                perm.shuffle(rng);
            }
            discretization_plan.push(k);
            code_permutations.push(perm);
        } else {
            discretization_plan.push(0);
            code_permutations.push(Vec::new());
        }
    }

    let target_binarization = if rng.random_bool(0.5) {
        Binarization::Median
    } else {
        Binarization::TailQuantiles { lo: hp.tail_quantiles.0, hi: hp.tail_quantiles.1 }
    };

    Ok(ScmSpec {
        layers,
        weights,
        biases,
        activations,
        noise_std,
        causes,
        feature_indices,
        target_index,
        discretization_plan,
        code_permutations,
        target_binarization,
        dropout_rate,
        flags,
    })
}

/// Rows drawn from an SCM, split by the binarized target.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPool {
    pub x_normal: Matrix<f64>,
    pub x_anomalous: Matrix<f64>,
    pub feature_kinds: Vec<FeatureKind>,
}

impl LabeledPool {
    pub fn d_in(&self) -> usize {
        self.feature_kinds.len()
    }
}

/// Linear-interpolated quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Fixed per-SCM mapping from raw node values to labels and feature codes,
/// calibrated on the first batch of a pool draw.
struct Calibration {
    label_cut: Binarization,
    thresholds: (f64, f64),
    bin_edges: Vec<Vec<f64>>,
}

impl Calibration {
    fn fit(spec: &ScmSpec, nodes: &Matrix<f64>) -> Option<Self> {
        let mut target = nodes.column(spec.target_index);
        target.sort_by(f64::total_cmp);
        if target.first() == target.last() {
            return None;
        }
        let thresholds = match spec.target_binarization {
            Binarization::Median => {
                let m = quantile_sorted(&target, 0.5);
                // All mass at or above the median would leave no anomalies.
                if target.last().copied()? <= m {
                    return None;
                }
                (m, m)
            }
            Binarization::TailQuantiles { lo, hi } => {
                let (a, b) = (quantile_sorted(&target, lo), quantile_sorted(&target, hi));
                if a >= b {
                    return None;
                }
                (a, b)
            }
        };
        let bin_edges = spec
            .feature_indices
            .iter()
            .zip(&spec.discretization_plan)
            .map(|(&node, &k)| {
                if k <= 1 {
                    return Vec::new();
                }
                let mut col = nodes.column(node);
                col.sort_by(f64::total_cmp);
                (1..k).map(|i| quantile_sorted(&col, i as f64 / k as f64)).collect()
            })
            .collect();
        Some(Self { label_cut: spec.target_binarization, thresholds, bin_edges })
    }

    fn label(&self, t: f64) -> Option<u8> {
        match self.label_cut {
            Binarization::Median => Some(u8::from(t > self.thresholds.0)),
            Binarization::TailQuantiles { .. } => {
                if t <= self.thresholds.0 {
                    Some(0)
                } else if t >= self.thresholds.1 {
                    Some(1)
                } else {
                    None
                }
            }
        }
    }

    fn features(&self, spec: &ScmSpec, nodes: &[f64]) -> Vec<f64> {
        spec.feature_indices
            .iter()
            .enumerate()
            .map(|(c, &node)| {
                let v = nodes[node];
                match spec.discretization_plan[c] {
                    0 => v,
                    1 => 0.0,
                    _ => {
                        let bin = self.bin_edges[c].iter().filter(|&&e| v > e).count();
                        spec.code_permutations[c][bin] as f64
                    }
                }
            })
            .collect()
    }
}

/// Draws `n0` normal and `n1` anomalous rows from `spec`.
pub fn draw_pool(spec: &ScmSpec, n0: usize, n1: usize, rng: &mut SeededRng) -> Result<LabeledPool> {
    draw_pool_with(spec, n0, n1, 4, 16, rng)
}

pub fn draw_pool_with(
    spec: &ScmSpec,
    n0: usize,
    n1: usize,
    slack: usize,
    retry_cap: usize,
    rng: &mut SeededRng,
) -> Result<LabeledPool> {
    let d_in = spec.d_in();
    let batch = (slack * (n0 + n1)).max(64);
    let mut normal: Vec<f64> = Vec::with_capacity(n0 * d_in);
    let mut anomalous: Vec<f64> = Vec::with_capacity(n1 * d_in);
    let (mut got0, mut got1) = (0usize, 0usize);
    let mut calibration: Option<Calibration> = None;

    for _ in 0..retry_cap {
        let nodes = spec.simulate(batch, rng);
        if !nodes.all_finite() {
            calibration = None;
            continue;
        }
        if calibration.is_none() {
            calibration = Calibration::fit(spec, &nodes);
            if calibration.is_none() {
                continue;
            }
        }
        let cal = calibration.as_ref().expect("set above");
        for row in nodes.iter_rows() {
            match cal.label(row[spec.target_index]) {
                Some(0) if got0 < n0 => {
                    normal.extend(cal.features(spec, row));
                    got0 += 1;
                }
                Some(1) if got1 < n1 => {
                    anomalous.extend(cal.features(spec, row));
                    got1 += 1;
                }
                _ => {}
            }
        }
        if got0 == n0 && got1 == n1 {
            return Ok(LabeledPool {
                x_normal: Matrix::from_vec(n0, d_in, normal),
                x_anomalous: Matrix::from_vec(n1, d_in, anomalous),
                feature_kinds: spec.feature_kinds(),
            });
        }
    }
    Err(Error::GenerationFailure {
        attempts: retry_cap,
        reason: if calibration.is_none() {
            "degenerate target".into()
        } else {
            format!("class sizes {got0}/{n0} normal, {got1}/{n1} anomalous")
        },
    })
}
