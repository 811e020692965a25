use super::tensor::Tensor2;
use crate::error::{MdalError, Result};

/// Identity on the way forward; scales the upstream gradient by `−λ` on the way back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReversal {
    lambda: f64,
}

impl GradientReversal {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(MdalError::Input(format!(
                "gradient reversal needs a finite λ ≥ 0, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn forward(&self, x: &Tensor2) -> Tensor2 {
        x.clone()
    }

    pub fn backward(&self, upstream: &Tensor2) -> Tensor2 {
        let mut g = upstream.clone();
        // -0.0 * g would leave signed zeros; keep λ = 0 exactly zero
        if self.lambda == 0.0 {
            g.data_mut().iter_mut().for_each(|v| *v = 0.0);
        } else {
            g.scale(-self.lambda);
        }
        g
    }
}
