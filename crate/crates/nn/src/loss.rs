//! Softmax output and cross-entropy loss.

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln p[label]`, computed from logits via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Gradient of `cross_entropy(softmax(logits), label)` w.r.t. the logits:
/// `p - one_hot(label)`.
pub fn softmax_cross_entropy_grad(logits: &[f64], label: usize) -> Vec<f64> {
    let mut p = softmax(logits);
    p[label] -= 1.0;
    p
}
