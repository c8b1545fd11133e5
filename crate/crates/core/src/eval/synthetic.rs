//! Query-level evaluation on generated tasks.

use crate::error::Result;
use crate::eval::knn::KnnDetector;
use crate::eval::metrics::auc_roc;
use crate::linalg::Scalar;
use crate::model::graph::sigmoid;
use crate::model::{forward_joint, ModelParams};
use crate::preprocess::pad_to;
use crate::task::Task;

/// Anomaly probabilities of a task's query rows given its support.
pub fn task_query_scores<T: Scalar>(params: &ModelParams<T>, task: &Task) -> Result<Vec<f64>> {
    let d_max = params.arch.d_max;
    let xs = pad_to(&task.support_x.cast::<T>(), d_max)?;
    let xq = pad_to(&task.query_x.cast::<T>(), d_max)?;
    let logits = forward_joint(params, &xs, &task.support_y, &xq)?;
    Ok(logits.into_iter().map(|z| sigmoid(z).to_f64().unwrap_or(f64::NAN)).collect())
}

pub fn query_labels(task: &Task) -> Vec<u8> {
    task.query_y.iter().map(|&y| y as u8).collect()
}

/// Query AUC-ROC of the model on one task.
pub fn task_auc<T: Scalar>(params: &ModelParams<T>, task: &Task) -> Result<f64> {
    auc_roc(&task_query_scores(params, task)?, &query_labels(task))
}

/// Query AUC-ROC of a kNN scorer fitted on the support rows not labeled anomalous.
pub fn task_knn_auc(task: &Task, k: usize) -> Result<f64> {
    let keep: Vec<usize> = (0..task.n_support()).filter(|&i| task.support_y[i] != 1).collect();
    let train = task.support_x.select_rows(&keep).cast::<f64>();
    let det = KnnDetector::fit(&train, k.min(train.rows()))?;
    auc_roc(&det.score(&task.query_x.cast::<f64>())?, &query_labels(task))
}
