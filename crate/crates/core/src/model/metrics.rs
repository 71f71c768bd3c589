use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Accuracy,
    Auroc,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Accuracy => "accuracy",
            Metric::Auroc => "auroc",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "auroc" | "auc" => Ok(Metric::Auroc),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(p, y)| argmax(p) == **y)
        .count();
    Ok(hits as f64 / probs.len() as f64)
}

/// Mann–Whitney estimate of `P(score⁺ > score⁻)`, ties counted half.
pub fn auroc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // mid-ranks over tie groups, 1-based
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// `metric` over class probabilities; AUROC scores class 1.
pub fn score(probs: &[Vec<f64>], labels: &[usize], metric: Metric) -> Result<f64> {
    match metric {
        Metric::Accuracy => accuracy(probs, labels),
        Metric::Auroc => {
            if let Some(p) = probs.iter().find(|p| p.len() != 2) {
                return Err(Error::Config(format!(
                    "auroc needs a binary classifier, got {} classes",
                    p.len()
                )));
            }
            let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
            let positive: Vec<bool> = labels.iter().map(|&y| y == 1).collect();
            auroc(&scores, &positive)
        }
    }
}

/// Mean softmax cross-entropy.
pub fn cross_entropy(probs: &[Vec<f64>], labels: &[usize]) -> f64 {
    probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            // f64::max would swallow a NaN
            let q = if p[y].is_nan() { p[y] } else { p[y].max(f64::MIN_POSITIVE) };
            -q.ln()
        })
        .sum::<f64>()
        / probs.len().max(1) as f64
}
