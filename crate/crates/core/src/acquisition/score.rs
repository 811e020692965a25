use crate::error::{MdalError, Result};
use crate::models::ModelGraph;

/// Complement of the best-vs-second-best margin: `1 − (p₁ − p₂)`.
/// Higher means more uncertain.
pub fn score_bvsb(p: &[f64]) -> Result<f64> {
    if p.len() < 2 {
        return Err(MdalError::Input(format!(
            "margin score needs at least 2 classes, got {}",
            p.len()
        )));
    }
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in p {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    Ok(1.0 - (first - second))
}

/// Expected last-layer gradient norm `Σ_y p_y ‖p − e_y‖ · sqrt(‖h‖² + 1)`.
pub fn egl_closed_form(p: &[f64], h: &[f64]) -> f64 {
    let pp: f64 = p.iter().map(|v| v * v).sum();
    let scale = (h.iter().map(|v| v * v).sum::<f64>() + 1.0).sqrt();
    // ‖p − e_y‖² = ‖p‖² − 2p_y + 1
    let expected: f64 = p
        .iter()
        .map(|&py| py * (pp - 2.0 * py + 1.0).max(0.0).sqrt())
        .sum();
    expected * scale
}

pub fn score_egl(model: &ModelGraph, x: &[f64], domain: usize) -> Result<f64> {
    let t = model.forward_predict(x, domain)?;
    Ok(egl_closed_form(&t.probs, &t.penultimate))
}
