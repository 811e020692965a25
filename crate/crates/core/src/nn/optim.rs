use serde::{Deserialize, Serialize};

use super::layer::{DenseLayer, LayerGrads};
use crate::error::{MdalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    // one flat [weights.., bias..] slot per layer, allocated on the first step
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(MdalError::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(MdalError::Config(format!(
                "weight decay must be non-negative, got {weight_decay}"
            )));
        }
        Ok(Self {
            kind,
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Applies one update to every layer. Weight decay is added to the gradient
/// (`g + wd·p`) before either update rule.
///
/// Gradients are validated before anything is written, so a non-finite
/// gradient leaves parameters and moments untouched.
pub fn optimizer_step(
    layers: &mut [DenseLayer],
    grads: &[LayerGrads],
    state: &mut OptimizerState,
) -> Result<()> {
    if layers.len() != grads.len() {
        return Err(MdalError::Dimension(format!(
            "{} gradient blocks for {} layers",
            grads.len(),
            layers.len()
        )));
    }
    for (layer, g) in layers.iter().zip(grads) {
        if g.weights.shape() != layer.weights.shape() || g.bias.len() != layer.bias.len() {
            return Err(MdalError::Dimension(format!(
                "gradient shape mismatch for layer {}",
                layer.name
            )));
        }
        if !g.weights.is_finite() {
            return Err(MdalError::Numeric(format!("{}.weights gradient", layer.name)));
        }
        if g.bias.iter().any(|v| !v.is_finite()) {
            return Err(MdalError::Numeric(format!("{}.bias gradient", layer.name)));
        }
    }
    if state.kind == OptimizerKind::Adam && state.first_moment.is_empty() {
        state.first_moment = layers.iter().map(|l| vec![0.0; l.param_count()]).collect();
        state.second_moment = state.first_moment.clone();
    }
    state.step += 1;
    let t = state.step as i32;
    let lr = state.learning_rate;
    let wd = state.weight_decay;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    for (slot, (layer, g)) in layers.iter_mut().zip(grads).enumerate() {
        let params = layer
            .weights
            .data_mut()
            .iter_mut()
            .chain(layer.bias.iter_mut());
        let gs = g.iter();
        match state.kind {
            OptimizerKind::Sgd => {
                for (p, &gv) in params.zip(gs) {
                    *p -= lr * (gv + wd * *p);
                }
            }
            OptimizerKind::Adam => {
                let m = &mut state.first_moment[slot];
                let v = &mut state.second_moment[slot];
                if m.len() != layer_len(g) {
                    return Err(MdalError::Dimension(format!(
                        "optimizer moments do not match layer {}",
                        layer.name
                    )));
                }
                for ((p, &gv), (mi, vi)) in params.zip(gs).zip(m.iter_mut().zip(v.iter_mut())) {
                    let gd = gv + wd * *p;
                    *mi = b1 * *mi + (1.0 - b1) * gd;
                    *vi = b2 * *vi + (1.0 - b2) * gd * gd;
                    let mhat = *mi / c1;
                    let vhat = *vi / c2;
                    *p -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

fn layer_len(g: &LayerGrads) -> usize {
    g.weights.data().len() + g.bias.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Tensor2};

    fn scalar_layer(p: f64) -> DenseLayer {
        DenseLayer {
            name: "s".into(),
            weights: Tensor2::new(1, 1, vec![p]).unwrap(),
            bias: vec![0.0],
            activation: Activation::Identity,
        }
    }

    fn scalar_grad(g: f64) -> LayerGrads {
        LayerGrads {
            weights: Tensor2::new(1, 1, vec![g]).unwrap(),
            bias: vec![0.0],
        }
    }

    #[test]
    fn one_sgd_step() {
        let mut layers = vec![scalar_layer(1.0)];
        let mut st = OptimizerState::new(OptimizerKind::Sgd, 0.1, 0.0).unwrap();
        optimizer_step(&mut layers, &[scalar_grad(1.0)], &mut st).unwrap();
        assert!((layers[0].weights.get(0, 0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn sgd_coupled_weight_decay() {
        let mut layers = vec![scalar_layer(2.0)];
        let mut st = OptimizerState::new(OptimizerKind::Sgd, 0.1, 0.5).unwrap();
        optimizer_step(&mut layers, &[scalar_grad(0.0)], &mut st).unwrap();
        // 2 − 0.1·(0 + 0.5·2)
        assert!((layers[0].weights.get(0, 0) - 1.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr() {
        for g in [0.3, -2.0, 1e-3] {
            let mut layers = vec![scalar_layer(1.0)];
            let mut st = OptimizerState::new(OptimizerKind::Adam, 0.01, 0.0).unwrap();
            optimizer_step(&mut layers, &[scalar_grad(g)], &mut st).unwrap();
            let delta = (layers[0].weights.get(0, 0) - 1.0).abs();
            let expect = 0.01 * g.abs() / (g.abs() + 1e-8);
            assert!((delta - expect).abs() < 1e-15, "{delta} vs {expect}");
            assert!((delta - 0.01).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut layers = vec![scalar_layer(0.7)];
            let mut st = OptimizerState::new(kind, 0.1, 0.0).unwrap();
            for _ in 0..3 {
                optimizer_step(&mut layers, &[scalar_grad(0.0)], &mut st).unwrap();
            }
            assert_eq!(layers[0].weights.get(0, 0), 0.7);
            assert_eq!(st.step_count(), 3);
        }
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut layers = vec![scalar_layer(1.0)];
        let mut st = OptimizerState::new(OptimizerKind::Adam, 0.1, 0.0).unwrap();
        let err = optimizer_step(&mut layers, &[scalar_grad(f64::NAN)], &mut st).unwrap_err();
        assert!(matches!(&err, MdalError::Numeric(msg) if msg.contains("s.weights")));
        assert_eq!(layers[0].weights.get(0, 0), 1.0);
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(OptimizerState::new(OptimizerKind::Sgd, 0.0, 0.0).is_err());
        assert!(OptimizerState::new(OptimizerKind::Sgd, 0.1, -1.0).is_err());
    }
}
