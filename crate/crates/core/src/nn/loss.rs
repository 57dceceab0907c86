/// Probability clamp used inside the logarithms.
pub const PROB_EPS: f64 = 1e-7;

/// Weighted binary cross-entropy
/// `-mean(w_pos * y * ln p + (1 - y) * ln(1 - p))` on clamped probabilities.
///
/// Returns the loss and its gradient with respect to each `p`.
pub fn weighted_bce(p: &[f64], y: &[f64], w_pos: f64) -> (f64, Vec<f64>) {
    assert_eq!(p.len(), y.len(), "prediction/label length mismatch");
    if p.is_empty() {
        return (0.0, Vec::new());
    }
    let n = p.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(p.len());
    for (&pi, &yi) in p.iter().zip(y) {
        let pc = pi.clamp(PROB_EPS, 1.0 - PROB_EPS);
        loss -= w_pos * yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln();
        grad.push(-(w_pos * yi / pc - (1.0 - yi) / (1.0 - pc)) / n);
    }
    (loss / n, grad)
}

/// Gradient of [`weighted_bce`] with respect to the logits `p = sigmoid(z)`,
/// written in fused form so it stays informative when the sigmoid saturates.
pub fn weighted_bce_logit_grad(p: &[f64], y: &[f64], w_pos: f64) -> Vec<f64> {
    let n = p.len() as f64;
    p.iter()
        .zip(y)
        .map(|(&pi, &yi)| ((w_pos * yi + 1.0 - yi) * pi - w_pos * yi) / n)
        .collect()
}
