//! Exact k-nearest-neighbour distance detector.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Debug)]
pub struct KnnDetector {
    train: Matrix<f64>,
    k: usize,
}

impl KnnDetector {
    pub fn fit(train: &Matrix<f64>, k: usize) -> Result<Self> {
        if k == 0 || k > train.rows() {
            return Err(Error::InvalidConfig(format!("k = {k} must lie in [1, {}]", train.rows())));
        }
        Ok(Self { train: train.clone(), k })
    }

    /// Euclidean distance from each row to its `k`-th nearest training row.
    pub fn score(&self, x: &Matrix<f64>) -> Result<Vec<f64>> {
        if x.cols() != self.train.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} features, the detector was fitted on {}",
                x.cols(),
                self.train.cols()
            )));
        }
        let mut d2 = vec![0.0; self.train.rows()];
        Ok(x.iter_rows()
            .map(|q| {
                for (slot, t) in d2.iter_mut().zip(self.train.iter_rows()) {
                    *slot = q.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                }
                let (_, kth, _) = d2.select_nth_unstable_by(self.k - 1, f64::total_cmp);
                kth.sqrt()
            })
            .collect())
    }
}
