//! Trainable layers with explicit forward and backward passes.
//!
//! Every layer follows the same contract: `forward` returns the output plus
//! a tape of cached intermediates, `backward` consumes exactly one matching
//! tape and returns the input gradient (when requested) together with
//! gradients for the layer's trainable parameter arrays, in the same order
//! as [`trainable arrays`](crate::network::Layer::trainable_arrays_mut).
//! Frozen parameters never receive a gradient entry.

mod batchnorm;
mod conv;
mod dense;
mod kan_conv;
mod kan_linear;
mod loss;
mod pool;

pub use batchnorm::{BatchNormLayer, BatchNormTape};
pub use conv::{ConvLayer, ConvTape};
pub use dense::{DenseLayer, DenseTape};
pub use kan_conv::{KanConvConfig, KanConvLayer, KanConvTape};
pub use kan_linear::{KanLinearConfig, KanLinearLayer, KanLinearTape};
pub use loss::{mse, softmax_cross_entropy};
pub use pool::{MaxPoolLayer, MaxPoolTape};

use crate::error::{KanError, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Fixed activation applied after an affine map (or standalone).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    Silu,
}

impl Activation {
    pub(crate) fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::None => x,
            Activation::Relu => x.max(0.0),
            Activation::Silu => crate::tensor::silu(x),
        }
    }

    pub(crate) fn derivative(&self, x: f64) -> f64 {
        match self {
            Activation::None => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Silu => crate::tensor::silu_prime(x),
        }
    }
}

/// Standalone elementwise activation (used between batch norm and pooling
/// in the convolutional stacks).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivationLayer {
    pub kind: Activation,
}

pub struct ActivationTape {
    input: Tensor,
}

impl ActivationLayer {
    pub fn new(kind: Activation) -> ActivationLayer {
        ActivationLayer { kind }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, ActivationTape) {
        let out = x.map(|v| self.kind.apply(v));
        (
            out,
            ActivationTape {
                input: x.clone(),
            },
        )
    }

    pub fn backward(&self, grad_out: &Tensor, tape: ActivationTape) -> Result<Tensor> {
        if grad_out.shape() != tape.input.shape() {
            return Err(KanError::ShapeMismatch {
                op: "activation backward",
                left: grad_out.shape().to_vec(),
                right: tape.input.shape().to_vec(),
            });
        }
        let data = grad_out
            .data()
            .iter()
            .zip(tape.input.data())
            .map(|(&g, &x)| g * self.kind.derivative(x))
            .collect();
        Tensor::from_vec(tape.input.shape(), data)
    }
}

/// Gradients for one layer, aligned with its trainable-array order.
pub type LayerGrads = Vec<Vec<f64>>;

pub(crate) fn ensure_finite(t: &Tensor, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(KanError::NonFinite(what.to_string()))
    }
}
