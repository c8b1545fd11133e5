//! Train/test splits for the three supervision protocols.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::task::Regime;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    /// Training rows; may repeat under bootstrapping.
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    /// Per training row: the exposed label, or `None` when hidden. Absent
    /// entirely when no labels are exposed.
    pub train_labels: Option<Vec<Option<u8>>>,
    pub regime: Regime,
    pub seed: u64,
    /// Fraction of training anomalies whose labels are exposed (semi-supervised only).
    pub r_a: Option<f64>,
}

fn class_indices(labels: &[u8]) -> (Vec<usize>, Vec<usize>) {
    (0..labels.len()).partition(|&i| labels[i] == 0)
}

/// Half of the normal rows (rounded down) for training, all-zero labels;
/// the other normals plus every anomaly for testing.
pub fn split_one_class(labels: &[u8], seed: u64) -> Result<Split> {
    let (mut normals, anomalies) = class_indices(labels);
    if normals.len() < 2 || anomalies.is_empty() {
        return Err(Error::InvalidInput(format!(
            "one-class split needs >= 2 normal rows and >= 1 anomaly, found {} and {}",
            normals.len(),
            anomalies.len()
        )));
    }
    let mut rng = seeded(seed);
    normals.shuffle(&mut rng);
    let n_train = normals.len() / 2;
    let mut train_idx = normals[..n_train].to_vec();
    train_idx.sort_unstable();
    let mut test_idx: Vec<usize> = normals[n_train..].iter().chain(&anomalies).copied().collect();
    test_idx.sort_unstable();
    Ok(Split {
        train_labels: Some(vec![Some(0); train_idx.len()]),
        train_idx,
        test_idx,
        regime: Regime::OneClass,
        seed,
        r_a: None,
    })
}

/// `N` draws with replacement for training, no labels; the full dataset for testing.
pub fn split_unsupervised(n_rows: usize, seed: u64) -> Result<Split> {
    if n_rows == 0 {
        return Err(Error::EmptyContext);
    }
    let mut rng = seeded(seed);
    let train_idx = (0..n_rows).map(|_| rng.random_range(0..n_rows)).collect();
    Ok(Split {
        train_idx,
        test_idx: (0..n_rows).collect(),
        train_labels: None,
        regime: Regime::Unsupervised,
        seed,
        r_a: None,
    })
}

/// Stratified 70/30 split; `round(r_a · train anomalies)` training anomalies
/// get exposed label `1`, every other training row stays unlabeled.
pub fn split_semi(labels: &[u8], r_a: f64, seed: u64) -> Result<Split> {
    if !(0.0..=1.0).contains(&r_a) {
        return Err(Error::InvalidConfig(format!("r_a must lie in [0, 1], got {r_a}")));
    }
    let (mut normals, mut anomalies) = class_indices(labels);
    let mut rng = seeded(seed);
    normals.shuffle(&mut rng);
    anomalies.shuffle(&mut rng);
    let cut = |n: usize| (0.7 * n as f64).round() as usize;
    let (tn, ta) = (cut(normals.len()), cut(anomalies.len()));
    if tn == 0 || ta == 0 || tn == normals.len() || ta == anomalies.len() {
        return Err(Error::InvalidInput(format!(
            "stratified split impossible with {} normal and {} anomalous rows",
            normals.len(),
            anomalies.len()
        )));
    }
    let n_exposed = (r_a * ta as f64).round() as usize;
    let exposed: Vec<usize> = anomalies[..n_exposed].to_vec();
    let mut train_idx: Vec<usize> = normals[..tn].iter().chain(&anomalies[..ta]).copied().collect();
    train_idx.sort_unstable();
    let mut test_idx: Vec<usize> = normals[tn..].iter().chain(&anomalies[ta..]).copied().collect();
    test_idx.sort_unstable();
    let train_labels = train_idx.iter().map(|i| if exposed.contains(i) { Some(1) } else { None }).collect();
    Ok(Split { train_idx, test_idx, train_labels: Some(train_labels), regime: Regime::SemiSupervised, seed, r_a: Some(r_a) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_class_sizes() {
        let labels: Vec<u8> = [vec![0; 10], vec![1; 3]].concat();
        let s = split_one_class(&labels, 1).unwrap();
        assert_eq!(s.train_idx.len(), 5);
        assert_eq!(s.test_idx.len(), 8);
        assert!(s.train_idx.iter().all(|&i| labels[i] == 0));
        assert!(s.train_idx.iter().all(|i| !s.test_idx.contains(i)));
        assert!(split_one_class(&[0; 5], 1).is_err());
    }

    #[test]
    fn bootstrap_single_row() {
        let s = split_unsupervised(1, 3).unwrap();
        assert_eq!(s.train_idx, vec![0]);
        assert_eq!(s.test_idx, vec![0]);
        assert!(s.train_labels.is_none());
    }

    #[test]
    fn semi_exposure_counts() {
        let labels: Vec<u8> = [vec![0; 300], vec![1; 143]].concat();
        let count = |r| {
            let s = split_semi(&labels, r, 2).unwrap();
            s.train_labels.unwrap().iter().filter(|l| l.is_some()).count()
        };
        assert_eq!(count(0.0), 0);
        assert_eq!(count(1.0), 100);
        assert_eq!(count(0.05), 5);
        assert!(split_semi(&[0, 0, 1], 0.5, 0).is_err());
    }
}
