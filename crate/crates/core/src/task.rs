//! Synthetic anomaly-detection episodes across the three supervision regimes.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::preprocess::{apply_norm, fit_norm};
use crate::rng::{stream, SeededRng};
use crate::scm::{draw_pool_with, sample_scm, FeatureKind, LabeledPool, ScmHyperparams};
use crate::synth::{perturb_categorical, perturb_continuous, structural_anomalies, PerturbConfig};

pub mod shard;

pub use shard::{deserialize_task, read_shard, serialize_task, write_shard};

/// Support label for a row whose label is hidden.
pub const UNLABELED: i8 = -1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    OneClass,
    Unsupervised,
    SemiSupervised,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::OneClass, Regime::Unsupervised, Regime::SemiSupervised];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::OneClass => "one-class",
            Regime::Unsupervised => "unsupervised",
            Regime::SemiSupervised => "semi-supervised",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-class" => Ok(Regime::OneClass),
            "unsupervised" => Ok(Regime::Unsupervised),
            "semi-supervised" => Ok(Regime::SemiSupervised),
            other => Err(Error::InvalidInput(format!("unknown regime '{other}'"))),
        }
    }
}

/// How a query row was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryKind {
    Normal,
    Structural,
    Perturbed,
}

impl QueryKind {
    pub fn code(self) -> char {
        match self {
            QueryKind::Normal => 'n',
            QueryKind::Structural => 's',
            QueryKind::Perturbed => 'p',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'n' => Some(QueryKind::Normal),
            's' => Some(QueryKind::Structural),
            'p' => Some(QueryKind::Perturbed),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    /// `d_in ~ U(2, d_max)`.
    pub d_max: usize,
    /// Inclusive bounds of `N_s ~ U(lo, hi)`.
    pub n_support: (usize, usize),
    pub n_query: usize,
    /// `(one-class, unsupervised, semi-supervised)`.
    pub regime_weights: [f64; 3],
    /// `ρ ~ U(0, contamination_max)`.
    pub contamination_max: f64,
    pub perturb: PerturbConfig,
    /// Fresh SCMs tried before a task is declared a generation failure.
    pub max_attempts: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            d_max: 16,
            n_support: (5, 256),
            n_query: 64,
            regime_weights: [1.0 / 3.0; 3],
            contamination_max: 0.4,
            perturb: PerturbConfig::default(),
            max_attempts: 64,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        let w = self.regime_weights;
        if w.iter().any(|&v| !(v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("regime weights must be non-negative and sum to 1".into()));
        }
        if self.n_query == 0 || self.n_query % 2 != 0 {
            return Err(Error::InvalidConfig("n_query must be even and positive".into()));
        }
        let (lo, hi) = self.n_support;
        if lo < 5 || lo > hi {
            return Err(Error::InvalidConfig("n_support must satisfy 5 <= lo <= hi".into()));
        }
        if self.d_max < 2 {
            return Err(Error::InvalidConfig("d_max must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.contamination_max) {
            return Err(Error::InvalidConfig("contamination_max must lie in [0, 1]".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidConfig("max_attempts must be >= 1".into()));
        }
        self.perturb.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskMeta {
    /// Sampled contamination ratio (recorded even when the regime ignores it).
    pub rho: f64,
    /// Sampled supervision ratio; only applied in the semi-supervised regime.
    pub rho_sup: f64,
    /// Anomalous rows placed in the support.
    pub n_anomalies: usize,
    /// Support anomalies whose label is revealed.
    pub n_labeled: usize,
    pub d_in: usize,
    pub seed: u64,
    pub index: u64,
    pub query_kinds: Vec<QueryKind>,
}

/// One episode: a (possibly labeled) support set and a balanced query set.
#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub support_x: Matrix<f32>,
    /// Values in `{-1, 0, 1}`; `-1` is unlabeled.
    pub support_y: Vec<i8>,
    pub query_x: Matrix<f32>,
    /// Values in `{0, 1}`.
    pub query_y: Vec<i8>,
    pub regime: Regime,
    pub meta: TaskMeta,
}

/// Half-away-from-zero rounding of `ratio * count`.
pub fn round_count(ratio: f64, count: usize) -> usize {
    (ratio * count as f64).round() as usize
}

impl Task {
    pub fn n_support(&self) -> usize {
        self.support_x.rows()
    }

    pub fn n_query(&self) -> usize {
        self.query_x.rows()
    }

    /// Checks every label and composition invariant of the episode.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        let n_s = self.n_support();
        if self.support_y.len() != n_s || self.query_y.len() != self.n_query() {
            return bad("label vectors do not match row counts".into());
        }
        if self.support_x.cols() != self.meta.d_in || self.query_x.cols() != self.meta.d_in {
            return bad("feature width does not match meta.d_in".into());
        }
        let count = |ys: &[i8], v: i8| ys.iter().filter(|&&y| y == v).count();
        match self.regime {
            Regime::OneClass => {
                if count(&self.support_y, 0) != n_s || self.meta.n_anomalies != 0 {
                    return bad("one-class support must be all-normal and labeled 0".into());
                }
            }
            Regime::Unsupervised => {
                if count(&self.support_y, UNLABELED) != n_s {
                    return bad("unsupervised support must be entirely unlabeled".into());
                }
                if self.meta.n_anomalies != round_count(self.meta.rho, n_s) {
                    return bad("unsupervised contamination count mismatch".into());
                }
            }
            Regime::SemiSupervised => {
                let ones = count(&self.support_y, 1);
                if ones + count(&self.support_y, UNLABELED) != n_s {
                    return bad("semi-supervised support labels must be in {-1, 1}".into());
                }
                if self.meta.n_anomalies != round_count(self.meta.rho, n_s)
                    || ones != round_count(self.meta.rho_sup, self.meta.n_anomalies)
                    || ones != self.meta.n_labeled
                {
                    return bad("semi-supervised labeled count mismatch".into());
                }
            }
        }
        let n_q = self.n_query();
        if n_q % 2 != 0 || count(&self.query_y, 1) != n_q / 2 || count(&self.query_y, 0) != n_q / 2 {
            return bad("query must be balanced".into());
        }
        let kinds = &self.meta.query_kinds;
        if kinds.len() != n_q {
            return bad("query kinds length mismatch".into());
        }
        let n_struct = kinds.iter().filter(|&&k| k == QueryKind::Structural).count();
        let n_pert = kinds.iter().filter(|&&k| k == QueryKind::Perturbed).count();
        if n_struct != n_q / 4 || n_pert != n_q / 2 - n_q / 4 {
            return bad("query anomaly-type split mismatch".into());
        }
        for (k, &y) in kinds.iter().zip(&self.query_y) {
            if (*k == QueryKind::Normal) != (y == 0) {
                return bad("query kind disagrees with label".into());
            }
        }
        Ok(())
    }
}

/// `Categorical(π)` over the three regimes.
pub fn sample_regime(weights: &[f64; 3], rng: &mut SeededRng) -> Regime {
    let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (r, &w) in Regime::ALL.iter().zip(weights) {
        acc += w;
        if u < acc && w > 0.0 {
            return *r;
        }
    }
    // Rounding at the top end: last regime with positive weight.
    *Regime::ALL.iter().zip(weights).rev().find(|(_, &w)| w > 0.0).map(|(r, _)| r).unwrap_or(&Regime::OneClass)
}

/// Per-task draws that tests may pin instead of sampling.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TaskOverrides {
    pub regime: Option<Regime>,
    pub rho: Option<f64>,
    pub rho_sup: Option<f64>,
    pub n_support: Option<usize>,
    pub d_in: Option<usize>,
}

/// Builds task `index` of the stream seeded by `master_seed`.
pub fn generate_task(cfg: &TaskConfig, hp: &ScmHyperparams, master_seed: u64, index: u64) -> Result<Task> {
    let mut rng = stream(master_seed, index);
    let mut t = build_task(cfg, hp, &TaskOverrides::default(), &mut rng)?;
    t.meta.seed = master_seed;
    t.meta.index = index;
    Ok(t)
}

pub fn build_task(
    cfg: &TaskConfig,
    hp: &ScmHyperparams,
    overrides: &TaskOverrides,
    rng: &mut SeededRng,
) -> Result<Task> {
    let regime = sample_regime(&cfg.regime_weights, rng);
    let rho = rng.random_range(0.0..=cfg.contamination_max);
    let rho_sup: f64 = rng.random();
    let d_in = rng.random_range(2..=cfg.d_max.max(2));
    let n_s = rng.random_range(cfg.n_support.0..=cfg.n_support.1);

    let regime = overrides.regime.unwrap_or(regime);
    let rho = overrides.rho.unwrap_or(rho);
    let rho_sup = if regime == Regime::SemiSupervised { overrides.rho_sup.unwrap_or(rho_sup) } else { 0.0 };
    let d_in = overrides.d_in.unwrap_or(d_in);
    let n_s = overrides.n_support.unwrap_or(n_s);
    if n_s == 0 {
        return Err(Error::InvalidConfig("support size must be positive".into()));
    }

    let n_anom = if regime == Regime::OneClass { 0 } else { round_count(rho, n_s) };
    let n_labeled = if regime == Regime::SemiSupervised { round_count(rho_sup, n_anom) } else { 0 };
    let n_q = cfg.n_query;
    let n_struct = n_q / 4;
    let n_pert = n_q / 2 - n_struct;
    let n0 = (n_s - n_anom) + n_q / 2 + n_pert;
    // The query's structural anomalies are resampled from a reserve twice their size.
    let n1 = n_anom + 2 * n_struct;

    let mut last_err = None;
    for _ in 0..cfg.max_attempts {
        let attempt = sample_scm(hp, d_in, rng).and_then(|spec| {
            let pool = draw_pool_with(&spec, n0, n1, hp.pool_slack, hp.retry_cap, rng)?;
            assemble(cfg, pool, regime, n_s, n_anom, n_labeled, n_struct, n_pert, rng)
        });
        match attempt {
            Ok((support_x, support_y, query_x, query_y, query_kinds)) => {
                return Ok(Task {
                    support_x,
                    support_y,
                    query_x,
                    query_y,
                    regime,
                    meta: TaskMeta {
                        rho,
                        rho_sup,
                        n_anomalies: n_anom,
                        n_labeled,
                        d_in,
                        seed: 0,
                        index: 0,
                        query_kinds,
                    },
                });
            }
            Err(e @ (Error::GenerationFailure { .. } | Error::StructuralClassEmpty)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationFailure {
        attempts: cfg.max_attempts,
        reason: last_err.map_or_else(|| "no attempt made".into(), |e| e.to_string()),
    })
}

type Assembled = (Matrix<f32>, Vec<i8>, Matrix<f32>, Vec<i8>, Vec<QueryKind>);

#[allow(clippy::too_many_arguments)]
fn assemble(
    cfg: &TaskConfig,
    pool: LabeledPool,
    regime: Regime,
    n_s: usize,
    n_anom: usize,
    n_labeled: usize,
    n_struct: usize,
    n_pert: usize,
    rng: &mut SeededRng,
) -> Result<Assembled> {
    let kinds: Vec<FeatureKind> = pool.feature_kinds.clone();
    let n_q = 2 * (n_struct + n_pert);
    let n_norm_support = n_s - n_anom;

    // Normal pool rows: support normals, then query normals, then rows to corrupt.
    let normal_idx: Vec<usize> = (0..n_norm_support).collect();
    let qnorm_idx: Vec<usize> = (n_norm_support..n_norm_support + n_q / 2).collect();
    let pert_idx: Vec<usize> = (n_norm_support + n_q / 2..n_norm_support + n_q / 2 + n_pert).collect();

    let mut support = pool.x_normal.select_rows(&normal_idx);
    let mut support_y = vec![if regime == Regime::OneClass { 0i8 } else { UNLABELED }; n_norm_support];
    if n_anom > 0 {
        let anomalies = pool.x_anomalous.select_rows(&(0..n_anom).collect::<Vec<_>>());
        support = support.vstack(&anomalies);
        let mut labels = vec![UNLABELED; n_anom];
        for l in labels.iter_mut().take(n_labeled) {
            *l = 1;
        }
        labels.shuffle(rng);
        support_y.extend(labels);
    }
    let mut order: Vec<usize> = (0..n_s).collect();
    order.shuffle(rng);
    let support = support.select_rows(&order);
    let support_y: Vec<i8> = order.iter().map(|&i| support_y[i]).collect();

    let reserve = LabeledPool {
        x_normal: Matrix::zeros(0, kinds.len()),
        x_anomalous: pool.x_anomalous.select_rows(&(n_anom..pool.x_anomalous.rows()).collect::<Vec<_>>()),
        feature_kinds: kinds.clone(),
    };
    let structural = if n_struct > 0 {
        structural_anomalies(&reserve, n_struct, rng)?
    } else {
        Matrix::zeros(0, kinds.len())
    };
    let to_corrupt = perturb_categorical(&pool.x_normal.select_rows(&pert_idx), &kinds, &cfg.perturb, rng);

    // Support-only statistics, applied to every row before continuous corruption.
    let stats = fit_norm(&support, cfg.d_max.max(kinds.len()))?;
    let support_n = apply_norm(&support, &stats)?;
    let qnorm = apply_norm(&pool.x_normal.select_rows(&qnorm_idx), &stats)?;
    let structural = apply_norm(&structural, &stats)?;
    let corrupted = perturb_continuous(&apply_norm(&to_corrupt, &stats)?, &kinds, &cfg.perturb, rng);

    let query = qnorm.vstack(&structural).vstack(&corrupted);
    let mut query_kinds = vec![QueryKind::Normal; n_q / 2];
    query_kinds.extend(std::iter::repeat_n(QueryKind::Structural, n_struct));
    query_kinds.extend(std::iter::repeat_n(QueryKind::Perturbed, n_pert));
    let mut qorder: Vec<usize> = (0..n_q).collect();
    qorder.shuffle(rng);
    let query = query.select_rows(&qorder);
    let query_kinds: Vec<QueryKind> = qorder.iter().map(|&i| query_kinds[i]).collect();
    let query_y = query_kinds.iter().map(|&k| i8::from(k != QueryKind::Normal)).collect();

    Ok((support_n.cast(), support_y, query.cast(), query_y, query_kinds))
}
