use super::tensor::Tensor2;
use crate::error::{MdalError, Result};

const LOG_FLOOR: f64 = 1e-30;

/// Row-wise softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

pub fn softmax_rows(logits: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        out.row_mut(r).copy_from_slice(&softmax(logits.row(r)));
    }
    out
}

/// Summed cross-entropy and its per-logit gradient, both divided by `denom`.
///
/// Grouped forward passes use this with the full batch size so that the
/// pieces add up to the batch mean.
pub fn cross_entropy_scaled(
    logits: &Tensor2,
    labels: &[usize],
    denom: f64,
) -> Result<(f64, Tensor2, Tensor2)> {
    if labels.len() != logits.rows() {
        return Err(MdalError::Dimension(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    let classes = logits.cols();
    let probs = softmax_rows(logits);
    let mut grad = probs.clone();
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(MdalError::Input(format!(
                "label {y} out of range for {classes} classes"
            )));
        }
        total -= probs.get(r, y).max(LOG_FLOOR).ln();
        let g = grad.row_mut(r);
        g[y] -= 1.0;
        g.iter_mut().for_each(|v| *v /= denom);
    }
    Ok((total / denom, grad, probs))
}

/// Mean cross-entropy over rows and `(softmax − onehot) / n`.
pub fn softmax_cross_entropy(logits: &Tensor2, labels: &[usize]) -> Result<(f64, Tensor2)> {
    if logits.rows() == 0 {
        return Err(MdalError::Input("cross-entropy of an empty batch".into()));
    }
    let (loss, grad, _) = cross_entropy_scaled(logits, labels, logits.rows() as f64)?;
    Ok((loss, grad))
}
