use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{MdalError, Result};
use crate::nn::{
    optimizer_step, softmax_cross_entropy, Activation, DenseLayer, OptimizerKind, OptimizerState, Tensor2,
};

/// Training setup of the domain probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Share of each domain used to train the probe; the rest is scored.
    pub train_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            hidden: 32,
            epochs: 300,
            learning_rate: 1e-2,
            train_fraction: 0.5,
        }
    }
}

fn predict(layers: &[DenseLayer], x: &Tensor2) -> Result<Vec<usize>> {
    let h = layers[0].infer(x)?;
    let z = layers[1].infer(&h)?;
    Ok(z.iter_rows()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Held-out accuracy of a freshly trained one-hidden-layer classifier that
/// predicts the domain of each feature row. Features are frozen inputs.
pub fn domain_probe<R: Rng + ?Sized>(
    features: &Tensor2,
    domains: &[usize],
    domain_count: usize,
    config: &ProbeConfig,
    rng: &mut R,
) -> Result<f64> {
    if features.rows() != domains.len() {
        return Err(MdalError::Dimension(format!(
            "{} feature rows for {} domain ids",
            features.rows(),
            domains.len()
        )));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for k in 0..domain_count {
        let mut rows: Vec<usize> = (0..domains.len()).filter(|&r| domains[r] == k).collect();
        if rows.len() < 2 {
            return Err(MdalError::Evaluation(format!("domain {k} has fewer than 2 probe rows")));
        }
        rows.shuffle(rng);
        let n_train = ((rows.len() as f64 * config.train_fraction).round() as usize).clamp(1, rows.len() - 1);
        train.extend_from_slice(&rows[..n_train]);
        test.extend_from_slice(&rows[n_train..]);
    }
    let x_train = features.select_rows(&train);
    let y_train: Vec<usize> = train.iter().map(|&r| domains[r]).collect();
    let mut layers = vec![
        DenseLayer::glorot("probe_hidden", features.cols(), config.hidden, Activation::Relu, rng),
        DenseLayer::glorot("probe_out", config.hidden, domain_count, Activation::Identity, rng),
    ];
    let mut opt = OptimizerState::new(OptimizerKind::Adam, config.learning_rate, 0.0)?;
    for _ in 0..config.epochs {
        let (h, c0) = layers[0].forward(&x_train)?;
        let (z, c1) = layers[1].forward(&h)?;
        let (_, dz) = softmax_cross_entropy(&z, &y_train)?;
        let (dh, g1) = layers[1].backward(&c1, &dz)?;
        let (_, g0) = layers[0].backward(&c0, &dh)?;
        optimizer_step(&mut layers, &[g0, g1], &mut opt)?;
    }
    let pred = predict(&layers, &features.select_rows(&test))?;
    let correct = pred.iter().zip(&test).filter(|(p, &r)| **p == domains[r]).count();
    Ok(correct as f64 / test.len() as f64)
}
