use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use crate::error::{MdalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected layer `y = act(x·W + b)` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub name: String,
    pub weights: Tensor2,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Values saved by [`DenseLayer::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor2,
    pre_activation: Tensor2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Tensor2,
    pub bias: Vec<f64>,
}

impl LayerGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: Tensor2::zeros(layer.input_dim(), layer.output_dim()),
            bias: vec![0.0; layer.output_dim()],
        }
    }

    pub fn add_assign(&mut self, other: &LayerGrads) {
        self.weights
            .add_assign(&other.weights)
            .expect("gradient shapes are fixed by the owning layer");
        self.bias
            .iter_mut()
            .zip(&other.bias)
            .for_each(|(a, b)| *a += b);
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.data().iter().chain(&self.bias)
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|&g| g == 0.0)
    }
}

impl DenseLayer {
    pub fn zeros(name: impl Into<String>, input: usize, output: usize, activation: Activation) -> Self {
        Self {
            name: name.into(),
            weights: Tensor2::zeros(input, output),
            bias: vec![0.0; output],
            activation,
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        name: impl Into<String>,
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let data = (0..input * output)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            name: name.into(),
            weights: Tensor2::new(input, output, data).expect("length matches"),
            bias: vec![0.0; output],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.bias.len()
    }

    fn affine(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.input_dim() {
            return Err(MdalError::Dimension(format!(
                "layer {} expects {} inputs, got {}",
                self.name,
                self.input_dim(),
                x.cols()
            )));
        }
        let mut z = x.matmul(&self.weights)?;
        for r in 0..z.rows() {
            z.row_mut(r)
                .iter_mut()
                .zip(&self.bias)
                .for_each(|(v, b)| *v += b);
        }
        Ok(z)
    }

    /// Forward pass without keeping a cache.
    pub fn infer(&self, x: &Tensor2) -> Result<Tensor2> {
        let mut z = self.affine(x)?;
        let act = self.activation;
        z.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        Ok(z)
    }

    pub fn forward(&self, x: &Tensor2) -> Result<(Tensor2, DenseCache)> {
        let z = self.affine(x)?;
        let act = self.activation;
        let mut y = z.clone();
        y.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        Ok((
            y,
            DenseCache {
                input: x.clone(),
                pre_activation: z,
            },
        ))
    }

    /// Returns the gradient w.r.t. the layer input and the parameter gradients.
    pub fn backward(&self, cache: &DenseCache, dy: &Tensor2) -> Result<(Tensor2, LayerGrads)> {
        if dy.shape() != cache.pre_activation.shape() {
            return Err(MdalError::Dimension(format!(
                "layer {} upstream gradient {:?}, expected {:?}",
                self.name,
                dy.shape(),
                cache.pre_activation.shape()
            )));
        }
        let act = self.activation;
        let mut dz = dy.clone();
        dz.data_mut()
            .iter_mut()
            .zip(cache.pre_activation.data())
            .for_each(|(g, &z)| *g *= act.derivative(z));
        let weights = cache.input.t_matmul(&dz)?;
        let bias = dz.column_sums();
        let dx = dz.matmul_t(&self.weights)?;
        Ok((dx, LayerGrads { weights, bias }))
    }
}

/// `act(x·W + b)` for every row of `x`.
pub fn dense_forward(x: &Tensor2, layer: &DenseLayer) -> Result<Tensor2> {
    layer.infer(x)
}
