//! Evaluation: protocol splits, ranking metrics, datasets, a kNN reference
//! detector and the benchmark runner.

pub mod bench;
pub mod datasets;
pub mod knn;
pub mod metrics;
pub mod splits;
pub mod synthetic;
