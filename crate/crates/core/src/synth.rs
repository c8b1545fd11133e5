//! The two anomaly families: structural anomalies drawn from the SCM's
//! anomalous class, and perturbation anomalies made by corrupting normal rows.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeededRng;
use crate::scm::{FeatureKind, LabeledPool};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub lambda_max: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self { sigma_min: 0.1, sigma_max: 10.0, lambda_max: 1.0 }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma_max) {
            return Err(Error::InvalidConfig("perturbation requires 0 < sigma_min <= sigma_max".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda_max) {
            return Err(Error::InvalidConfig("lambda_max must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn sample_sigma(&self, rng: &mut SeededRng) -> f64 {
        let (lo, hi) = (self.sigma_min.ln(), self.sigma_max.ln());
        if hi > lo {
            rng.random_range(lo..=hi).exp()
        } else {
            self.sigma_min
        }
    }
}

/// `n` rows sampled uniformly with replacement from the anomalous class.
pub fn structural_anomalies(pool: &LabeledPool, n: usize, rng: &mut SeededRng) -> Result<Matrix<f64>> {
    let m = pool.x_anomalous.rows();
    if m == 0 {
        return Err(Error::StructuralClassEmpty);
    }
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
    Ok(pool.x_anomalous.select_rows(&idx))
}

/// Masked additive Gaussian corruption of the continuous columns of `x`.
///
/// Each row draws a sparsity `s ~ U(0, 1)`; each continuous cell is then
/// perturbed as `x + m σ ε` with `m ~ Bernoulli(s)`,
/// `σ ~ LogUniform(sigma_min, sigma_max)` and `ε ~ N(0, 1)`.
pub fn perturb_continuous(
    x: &Matrix<f64>,
    kinds: &[FeatureKind],
    cfg: &PerturbConfig,
    rng: &mut SeededRng,
) -> Matrix<f64> {
    let sparsity: Vec<f64> = (0..x.rows()).map(|_| rng.random()).collect();
    perturb_continuous_with_sparsity(x, kinds, cfg, &sparsity, rng)
}

/// `x + m σ ε`; unmasked cells come back bit-identical.
#[inline]
pub fn corrupt_cell(x: f64, masked: bool, sigma: f64, eps: f64) -> f64 {
    if masked {
        x + sigma * eps
    } else {
        x
    }
}

/// As [`perturb_continuous`] with the per-row sparsity given.
pub fn perturb_continuous_with_sparsity(
    x: &Matrix<f64>,
    kinds: &[FeatureKind],
    cfg: &PerturbConfig,
    sparsity: &[f64],
    rng: &mut SeededRng,
) -> Matrix<f64> {
    assert_eq!(kinds.len(), x.cols(), "feature kinds must cover every column");
    assert_eq!(sparsity.len(), x.rows());
    let mut out = x.clone();
    for (r, &s) in sparsity.iter().enumerate() {
        for (c, kind) in kinds.iter().enumerate() {
            if kind.is_categorical() {
                continue;
            }
            let masked = rng.random::<f64>() < s;
            let sigma = cfg.sample_sigma(rng);
            let eps: f64 = rng.sample(StandardNormal);
            out.set(r, c, corrupt_cell(x.get(r, c), masked, sigma, eps));
        }
    }
    out
}

/// Replaces each categorical cell, with probability `λ ~ U(0, lambda_max)`,
/// by a category drawn uniformly from all `k` codes.
pub fn perturb_categorical(
    x: &Matrix<f64>,
    kinds: &[FeatureKind],
    cfg: &PerturbConfig,
    rng: &mut SeededRng,
) -> Matrix<f64> {
    let lambda = if cfg.lambda_max > 0.0 { rng.random_range(0.0..=cfg.lambda_max) } else { 0.0 };
    perturb_categorical_with_rate(x, kinds, lambda, rng)
}

pub fn perturb_categorical_with_rate(
    x: &Matrix<f64>,
    kinds: &[FeatureKind],
    lambda: f64,
    rng: &mut SeededRng,
) -> Matrix<f64> {
    assert_eq!(kinds.len(), x.cols(), "feature kinds must cover every column");
    let mut out = x.clone();
    for r in 0..x.rows() {
        for (c, kind) in kinds.iter().enumerate() {
            if let FeatureKind::Categorical(k) = *kind {
                if rng.random::<f64>() < lambda {
                    out.set(r, c, rng.random_range(0..k) as f64);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn pool_with(anomalous: Vec<Vec<f64>>) -> LabeledPool {
        let d = anomalous.first().map_or(2, Vec::len);
        LabeledPool {
            x_normal: Matrix::zeros(0, d),
            x_anomalous: if anomalous.is_empty() { Matrix::zeros(0, d) } else { Matrix::from_rows(&anomalous) },
            feature_kinds: vec![FeatureKind::Continuous; d],
        }
    }

    #[test]
    fn structural_zero_rows() {
        let p = pool_with(vec![vec![1.0, 2.0]]);
        assert_eq!(structural_anomalies(&p, 0, &mut seeded(0)).unwrap().rows(), 0);
    }

    #[test]
    fn structural_singleton_support() {
        let p = pool_with(vec![vec![1.5, -2.0]]);
        let out = structural_anomalies(&p, 7, &mut seeded(1)).unwrap();
        assert!(out.iter_rows().all(|r| r == [1.5, -2.0]));
    }

    #[test]
    fn structural_rows_come_from_pool() {
        let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let p = pool_with(rows.clone());
        let out = structural_anomalies(&p, 50, &mut seeded(2)).unwrap();
        for r in out.iter_rows() {
            assert!(rows.iter().any(|p| p.as_slice() == r));
        }
    }

    #[test]
    fn structural_empty_class_errors() {
        let p = pool_with(vec![]);
        assert!(matches!(structural_anomalies(&p, 3, &mut seeded(0)), Err(Error::StructuralClassEmpty)));
    }

    #[test]
    fn cell_formula() {
        assert_eq!(corrupt_cell(1.0, true, 2.0, 0.5), 2.0);
        assert_eq!(corrupt_cell(1.0, false, 2.0, 0.5), 1.0);
    }

    #[test]
    fn zero_sparsity_is_identity() {
        let x = Matrix::from_fn(10, 4, |i, j| (i as f64) - (j as f64) * 0.3);
        let kinds = vec![FeatureKind::Continuous; 4];
        let out = perturb_continuous_with_sparsity(&x, &kinds, &PerturbConfig::default(), &[0.0; 10], &mut seeded(3));
        assert_eq!(out, x);
    }

    #[test]
    fn continuous_corruption_skips_categorical_columns() {
        let x = Matrix::from_fn(20, 3, |i, _| (i % 3) as f64);
        let kinds = [FeatureKind::Continuous, FeatureKind::Categorical(3), FeatureKind::Continuous];
        let out = perturb_continuous_with_sparsity(&x, &kinds, &PerturbConfig::default(), &[1.0; 20], &mut seeded(4));
        assert_eq!(out.column(1), x.column(1));
        assert_ne!(out.column(0), x.column(0));
    }

    #[test]
    fn categorical_rate_zero_and_single_category() {
        let x = Matrix::from_fn(30, 2, |i, j| if j == 0 { (i % 4) as f64 } else { 0.0 });
        let kinds = [FeatureKind::Categorical(4), FeatureKind::Categorical(1)];
        assert_eq!(perturb_categorical_with_rate(&x, &kinds, 0.0, &mut seeded(5)), x);
        let out = perturb_categorical_with_rate(&x, &kinds, 1.0, &mut seeded(5));
        assert!(out.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn categorical_corruption_skips_continuous_columns() {
        let x = Matrix::from_fn(30, 2, |i, j| if j == 0 { 0.5 + i as f64 } else { (i % 2) as f64 });
        let kinds = [FeatureKind::Continuous, FeatureKind::Categorical(2)];
        let out = perturb_categorical(&x, &kinds, &PerturbConfig::default(), &mut seeded(6));
        assert_eq!(out.column(0), x.column(0));
    }
}
