//! Model-facing input pipeline: support-only z-scoring, clipping to
//! `[-100, 100]`, zero-padding to `d_max` and `sqrt(d_max / d_in)` rescaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Scalar};

pub const CLIP: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mu: Vec<f64>,
    /// Population standard deviation per column.
    pub sigma: Vec<f64>,
    /// Zero-variance columns, passed through unscaled.
    pub flagged: Vec<bool>,
    pub d_in: usize,
    pub d_max: usize,
}

impl NormStats {
    pub fn rescale_factor(&self) -> f64 {
        (self.d_max as f64 / self.d_in as f64).sqrt()
    }
}

/// Column statistics of the support set.
pub fn fit_norm<T: Scalar>(support: &Matrix<T>, d_max: usize) -> Result<NormStats> {
    let (n, d) = support.shape();
    if n == 0 {
        return Err(Error::EmptyContext);
    }
    let mut mu = vec![0.0; d];
    let mut sigma = vec![0.0; d];
    let mut flagged = vec![false; d];
    for c in 0..d {
        let col: Vec<f64> = (0..n).map(|r| support.get(r, c).to_f64().unwrap_or(f64::NAN)).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let constant = col.iter().all(|&v| v == col[0]);
        mu[c] = mean;
        sigma[c] = if constant { 0.0 } else { var.sqrt() };
        flagged[c] = constant || sigma[c] == 0.0;
    }
    Ok(NormStats { mu, sigma, flagged, d_in: d, d_max })
}

/// Z-scores with `stats` (flagged columns untouched) and clips to `[-100, 100]`.
pub fn apply_norm<T: Scalar>(x: &Matrix<T>, stats: &NormStats) -> Result<Matrix<T>> {
    if x.cols() != stats.d_in {
        return Err(Error::DimensionMismatch(format!(
            "input has {} columns, normalization statistics cover {}",
            x.cols(),
            stats.d_in
        )));
    }
    let mut out = x.clone();
    for r in 0..x.rows() {
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            let raw = v.to_f64().unwrap_or(f64::NAN);
            let z = if stats.flagged[c] { raw } else { (raw - stats.mu[c]) / stats.sigma[c] };
            *v = T::from_f64_lossy(z.clamp(-CLIP, CLIP));
        }
    }
    Ok(out)
}

/// Zero-pads to `d_max` columns and multiplies by `sqrt(d_max / d_in)`.
pub fn pad_and_rescale<T: Scalar>(x: &Matrix<T>, stats: &NormStats) -> Result<Matrix<T>> {
    if stats.d_in > stats.d_max {
        return Err(Error::DimensionMismatch(format!(
            "{} features exceed the model maximum of {}; subsample features first",
            stats.d_in, stats.d_max
        )));
    }
    if x.cols() != stats.d_in {
        return Err(Error::DimensionMismatch(format!("input has {} columns, expected {}", x.cols(), stats.d_in)));
    }
    let factor = T::from_f64_lossy(stats.rescale_factor());
    let mut out = Matrix::zeros(x.rows(), stats.d_max);
    for r in 0..x.rows() {
        for (o, &v) in out.row_mut(r).iter_mut().zip(x.row(r)) {
            *o = v * factor;
        }
    }
    Ok(out)
}

/// Pads already-normalized rows to `d_max`, rescaling by `sqrt(d_max / cols)`.
pub fn pad_to<T: Scalar>(x: &Matrix<T>, d_max: usize) -> Result<Matrix<T>> {
    let d = x.cols();
    let stats = NormStats { mu: vec![0.0; d], sigma: vec![1.0; d], flagged: vec![false; d], d_in: d, d_max };
    pad_and_rescale(x, &stats)
}

/// Full pipeline for rows already known to share the support's columns.
pub fn prepare<T: Scalar>(x: &Matrix<T>, stats: &NormStats) -> Result<Matrix<T>> {
    pad_and_rescale(&apply_norm(x, stats)?, stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_column() {
        let s = fit_norm(&Matrix::from_rows(&[vec![0.0f64], vec![2.0]]), 4).unwrap();
        assert_eq!(s.mu, vec![1.0]);
        assert_eq!(s.sigma, vec![1.0]);
        assert_eq!(apply_norm(&Matrix::from_rows(&[vec![4.0f64]]), &s).unwrap().get(0, 0), 3.0);
    }

    #[test]
    fn constant_column_passes_through() {
        let x = Matrix::from_rows(&[vec![0.1f64, 1.0], vec![0.1, 3.0], vec![0.1, 5.0]]);
        let s = fit_norm(&x, 2).unwrap();
        assert_eq!(s.flagged, vec![true, false]);
        assert_eq!(s.sigma[0], 0.0);
        let y = apply_norm(&x, &s).unwrap();
        assert_eq!(y.column(0), vec![0.1, 0.1, 0.1]);
    }

    #[test]
    fn single_row_support_flags_everything() {
        let s = fit_norm(&Matrix::from_rows(&[vec![3.0f32, -1.0, 7.5]]), 8).unwrap();
        assert_eq!(s.mu, vec![3.0, -1.0, 7.5]);
        assert!(s.sigma.iter().all(|&v| v == 0.0));
        assert!(s.flagged.iter().all(|&f| f));
    }

    #[test]
    fn clipping_boundary() {
        let s = NormStats { mu: vec![0.0], sigma: vec![0.001], flagged: vec![false], d_in: 1, d_max: 1 };
        let y = apply_norm(&Matrix::from_rows(&[vec![1.0f64], vec![-1.0]]), &s).unwrap();
        assert_eq!(y.column(0), vec![100.0, -100.0]);
    }

    #[test]
    fn empty_support_and_width_errors() {
        assert!(matches!(fit_norm(&Matrix::<f64>::zeros(0, 3), 4), Err(Error::EmptyContext)));
        let s = fit_norm(&Matrix::from_rows(&[vec![1.0f64, 2.0]]), 4).unwrap();
        assert!(apply_norm(&Matrix::<f64>::zeros(1, 3), &s).is_err());
        let wide = NormStats { d_max: 1, ..s };
        assert!(pad_and_rescale(&Matrix::<f64>::zeros(1, 2), &wide).is_err());
    }

    #[test]
    fn rescale_factors() {
        let eq = NormStats { mu: vec![0.0; 4], sigma: vec![1.0; 4], flagged: vec![false; 4], d_in: 4, d_max: 4 };
        let x = Matrix::from_fn(3, 4, |i, j| (i + j) as f64);
        assert_eq!(pad_and_rescale(&x, &eq).unwrap(), x);
        let wide = NormStats {
            mu: vec![0.0; 128],
            sigma: vec![1.0; 128],
            flagged: vec![false; 128],
            d_in: 128,
            d_max: 512,
        };
        assert_eq!(wide.rescale_factor(), 2.0);
        let y = pad_and_rescale(&Matrix::filled(2, 128, 1.5f64), &wide).unwrap();
        assert_eq!(y.cols(), 512);
        assert!(y.row(0)[..128].iter().all(|&v| v == 3.0));
        assert!(y.row(1)[128..].iter().all(|&v| v == 0.0));
    }
}
