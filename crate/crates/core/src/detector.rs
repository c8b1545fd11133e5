//! The user-facing detector: fit on a training table (optionally with some
//! labels), score new rows.
//!
//! Each ensemble member sees its own view of the training data: a feature
//! ordering (or a feature subset when the table is wider than the model) and,
//! for large tables, a subsample of the rows. Scores are the member mean.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Scalar};
use crate::model::{fit, predict_chunked, FittedContext, ModelParams};
use crate::rng::stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub n_members: usize,
    pub feature_permutation: bool,
    /// Features per member when the input is wider than the model; defaults to `d_max`.
    pub feature_subset_size: Option<usize>,
    /// Largest context a member conditions on.
    pub context_cap: usize,
    pub seed: u64,
    /// Query rows per forward pass.
    pub query_chunk: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { n_members: 4, feature_permutation: true, feature_subset_size: None, context_cap: 256, seed: 0, query_chunk: 512 }
    }
}

impl EnsembleConfig {
    pub fn validate(&self, d_max: usize) -> Result<()> {
        if self.n_members == 0 {
            return Err(Error::InvalidConfig("n_members must be >= 1".into()));
        }
        if self.context_cap == 0 || self.query_chunk == 0 {
            return Err(Error::InvalidConfig("context_cap and query_chunk must be >= 1".into()));
        }
        if let Some(k) = self.feature_subset_size {
            if k == 0 || k > d_max {
                return Err(Error::InvalidConfig(format!("feature_subset_size must lie in [1, {d_max}]")));
            }
        }
        Ok(())
    }
}

/// The rows and columns one member conditions on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberView {
    /// Input columns in the order the member presents them.
    pub features: Vec<usize>,
    /// Training rows forming the member's context, ascending.
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Member<T> {
    pub view: MemberView,
    pub ctx: FittedContext<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorState<T> {
    pub d_in: usize,
    pub members: Vec<Member<T>>,
}

/// Maps optional `{0, 1}` labels to the model domain: absent `-1`, else the label.
pub fn encode_labels(n_rows: usize, labels: Option<&[Option<u8>]>) -> Result<Vec<i8>> {
    let Some(labels) = labels else { return Ok(vec![-1; n_rows]) };
    if labels.len() != n_rows {
        return Err(Error::DimensionMismatch(format!("{n_rows} training rows but {} labels", labels.len())));
    }
    labels
        .iter()
        .enumerate()
        .map(|(row, l)| match l {
            None => Ok(-1),
            Some(v @ (0 | 1)) => Ok(*v as i8),
            Some(v) => Err(Error::LabelDomain { row, value: *v as i64, expected: "{0, 1} or absent" }),
        })
        .collect()
}

/// Draws one view per member. Rows labeled anomalous are kept first when the
/// context has to be subsampled.
pub fn plan_members(n_rows: usize, d_in: usize, encoded: &[i8], d_max: usize, cfg: &EnsembleConfig) -> Vec<MemberView> {
    (0..cfg.n_members)
        .map(|m| {
            let mut rng = stream(cfg.seed, m as u64);
            let mut features: Vec<usize> = (0..d_in).collect();
            if d_in > d_max {
                let k = cfg.feature_subset_size.unwrap_or(d_max);
                features.shuffle(&mut rng);
                features.truncate(k);
                if !cfg.feature_permutation {
                    features.sort_unstable();
                }
            } else if cfg.feature_permutation {
                features.shuffle(&mut rng);
            }
            let rows = if n_rows <= cfg.context_cap {
                (0..n_rows).collect()
            } else {
                let (mut anomalous, mut rest): (Vec<usize>, Vec<usize>) = (0..n_rows).partition(|&i| encoded[i] == 1);
                anomalous.shuffle(&mut rng);
                anomalous.truncate(cfg.context_cap);
                rest.shuffle(&mut rng);
                rest.truncate(cfg.context_cap - anomalous.len());
                let mut rows = anomalous;
                rows.extend(rest);
                rows.sort_unstable();
                rows
            };
            MemberView { features, rows }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Detector<T> {
    pub params: ModelParams<T>,
    pub cfg: EnsembleConfig,
}

impl<T: Scalar> Detector<T> {
    pub fn new(params: ModelParams<T>, cfg: EnsembleConfig) -> Result<Self> {
        cfg.validate(params.arch.d_max)?;
        Ok(Self { params, cfg })
    }

    /// Fits every member; `labels[i] = None` marks row `i` as unlabeled.
    pub fn fit(&self, train_x: &Matrix<f64>, labels: Option<&[Option<u8>]>) -> Result<DetectorState<T>> {
        if train_x.rows() == 0 {
            return Err(Error::EmptyContext);
        }
        if train_x.cols() == 0 {
            return Err(Error::InvalidInput("training data has no features".into()));
        }
        let encoded = encode_labels(train_x.rows(), labels)?;
        let views = plan_members(train_x.rows(), train_x.cols(), &encoded, self.params.arch.d_max, &self.cfg);
        self.fit_views(train_x, &encoded, views)
    }

    /// Fits members on explicitly given views with model-domain labels.
    pub fn fit_views(&self, train_x: &Matrix<f64>, encoded: &[i8], views: Vec<MemberView>) -> Result<DetectorState<T>> {
        if train_x.rows() == 0 {
            return Err(Error::EmptyContext);
        }
        if encoded.len() != train_x.rows() {
            return Err(Error::DimensionMismatch(format!("{} rows but {} labels", train_x.rows(), encoded.len())));
        }
        let x = train_x.cast::<T>();
        let members = views
            .into_par_iter()
            .map(|view| {
                let sx = x.select_rows(&view.rows).select_cols(&view.features);
                let sy: Vec<i8> = view.rows.iter().map(|&r| encoded[r]).collect();
                let ctx = fit(&self.params, &sx, &sy)?;
                Ok(Member { view, ctx })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DetectorState { d_in: train_x.cols(), members })
    }

    /// Member-mean anomaly probability per row.
    pub fn score(&self, state: &DetectorState<T>, test_x: &Matrix<f64>) -> Result<Vec<f64>> {
        Ok(mean_scores(&self.member_scores(state, test_x)?, test_x.rows()))
    }

    /// Per-member probabilities, in member order.
    pub fn member_scores(&self, state: &DetectorState<T>, test_x: &Matrix<f64>) -> Result<Vec<Vec<f64>>> {
        if test_x.cols() != state.d_in {
            return Err(Error::DimensionMismatch(format!(
                "test data has {} features, the detector was fitted on {}",
                test_x.cols(),
                state.d_in
            )));
        }
        let x = test_x.cast::<T>();
        state
            .members
            .par_iter()
            .map(|m| {
                let p = predict_chunked(&self.params, &m.ctx, &x.select_cols(&m.view.features), self.cfg.query_chunk)?;
                Ok(p.into_iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
            })
            .collect()
    }
}

fn mean_scores(per_member: &[Vec<f64>], n: usize) -> Vec<f64> {
    let k = per_member.len().max(1) as f64;
    (0..n).map(|i| per_member.iter().map(|m| m[i]).sum::<f64>() / k).collect()
}

/// Writes `row_index,score`.
pub fn write_scores(path: &Path, scores: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::fs::File::create(path).map_err(Error::io(path))?);
    w.write_record(["row_index", "score"])?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()])?;
    }
    w.flush().map_err(Error::io(path))
}
