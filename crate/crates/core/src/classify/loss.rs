//! Output heads: softmax with cross-entropy, sigmoid with binary cross-entropy.

use crate::embed::log_sigmoid;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln softmax(s)[target]` and its gradient `softmax(s) - onehot(target)`.
pub fn softmax_ce(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&s| (s - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[target];
    let grad = logits
        .iter()
        .enumerate()
        .map(|(i, &s)| (s - log_sum).exp() - if i == target { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

pub fn sigmoid(x: f64) -> f64 {
    crate::embed::sigmoid(x)
}

/// Summed per-class binary cross-entropy and its gradient `σ(s) - t`.
pub fn sigmoid_bce(logits: &[f64], targets: &[bool]) -> (f64, Vec<f64>) {
    assert_eq!(logits.len(), targets.len(), "one target bit per logit");
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(targets)
        .map(|(&s, &t)| {
            // -t·ln σ(s) - (1-t)·ln(1-σ(s)), with 1-σ(s) = σ(-s).
            loss -= if t { log_sigmoid(s) } else { log_sigmoid(-s) };
            sigmoid(s) - if t { 1.0 } else { 0.0 }
        })
        .collect();
    (loss, grad)
}
