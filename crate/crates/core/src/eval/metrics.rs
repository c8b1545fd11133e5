//! Ranking metrics over anomaly scores; label `1` is the anomalous class.

use crate::error::{Error, Result};

fn counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if let Some(row) = labels.iter().position(|&y| y > 1) {
        return Err(Error::LabelDomain { row, value: labels[row] as i64, expected: "{0, 1}" });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    Ok((pos, labels.len() - pos))
}

/// Indices by descending score; ties keep input order.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Probability that a random anomaly outscores a random normal row, ties
/// counting one half.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = counts(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("AUC-ROC needs both classes".into()));
    }
    // Mann-Whitney U from mid-ranks of ascending scores.
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Average precision: the mean, over anomalies, of the precision at each
/// anomaly's position in the descending-score ranking. Tied scores are
/// ranked in input order.
pub fn auc_pr(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, _) = counts(scores, labels)?;
    if pos == 0 {
        return Err(Error::InvalidInput("AUC-PR needs at least one anomaly".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in ranked(scores).iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// F1 when every row scoring at least the `k`-th highest score is flagged,
/// with `k` the number of true anomalies. Ties at the threshold are all
/// flagged.
pub fn f1_at_contamination(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, _) = counts(scores, labels)?;
    if pos == 0 {
        return Err(Error::InvalidInput("F1 needs at least one anomaly".into()));
    }
    let threshold = scores[ranked(scores)[pos - 1]];
    let (mut tp, mut flagged) = (0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        if s >= threshold {
            flagged += 1;
            tp += y as usize;
        }
    }
    // 2PR / (P + R) with integer counts: one rounding only.
    Ok((2 * tp) as f64 / (flagged + pos) as f64)
}
