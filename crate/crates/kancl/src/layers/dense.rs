//! Fully connected layer with a fixed activation, the MLP building block.

use crate::error::{KanError, Result};
use crate::layers::{ensure_finite, Activation, LayerGrads};
use crate::tensor::{Rng, Tensor};
use serde::{Deserialize, Serialize};

/// Affine map plus fixed activation. Weights are stored `[d_in, d_out]`
/// so a batch multiplies through directly; biases start at zero and the
/// weights use Kaiming-uniform initialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub d_in: usize,
    pub d_out: usize,
    pub activation: Activation,
    w: Tensor,
    b: Tensor,
}

pub struct DenseTape {
    input: Tensor,
    pre: Tensor,
}

impl DenseLayer {
    pub fn new(d_in: usize, d_out: usize, activation: Activation, rng: &mut Rng) -> DenseLayer {
        let bound = (6.0 / d_in as f64).sqrt();
        DenseLayer {
            d_in,
            d_out,
            activation,
            w: rng.uniform_tensor(&[d_in, d_out], -bound, bound),
            b: Tensor::zeros(&[d_out]),
        }
    }

    pub fn weights(&self) -> &Tensor {
        &self.w
    }

    pub fn trainable_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![("w", self.w.data_mut()), ("b", self.b.data_mut())]
    }

    pub fn state_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![("w", self.w.data_mut()), ("b", self.b.data_mut())]
    }

    pub fn trainable_param_count(&self) -> usize {
        self.d_in * self.d_out + self.d_out
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, DenseTape)> {
        if x.rank() != 2 || x.shape()[1] != self.d_in {
            return Err(KanError::ShapeMismatch {
                op: "dense forward",
                left: x.shape().to_vec(),
                right: vec![self.d_in],
            });
        }
        let mut pre = x.matmul(&self.w)?;
        {
            let d_out = self.d_out;
            let bias = self.b.data();
            for row in pre.data_mut().chunks_mut(d_out) {
                for (v, &b) in row.iter_mut().zip(bias.iter()) {
                    *v += b;
                }
            }
        }
        let out = pre.map(|v| self.activation.apply(v));
        ensure_finite(&out, &format!("dense [{}x{}]", self.d_in, self.d_out))?;
        Ok((
            out,
            DenseTape {
                input: x.clone(),
                pre,
            },
        ))
    }

    pub fn backward(
        &self,
        grad_out: &Tensor,
        tape: &DenseTape,
        needs_input_grad: bool,
    ) -> Result<(Option<Tensor>, LayerGrads)> {
        if grad_out.shape() != tape.pre.shape() {
            return Err(KanError::ShapeMismatch {
                op: "dense backward",
                left: grad_out.shape().to_vec(),
                right: tape.pre.shape().to_vec(),
            });
        }
        let dpre_data: Vec<f64> = grad_out
            .data()
            .iter()
            .zip(tape.pre.data())
            .map(|(&g, &p)| g * self.activation.derivative(p))
            .collect();
        let dpre = Tensor::from_vec(grad_out.shape(), dpre_data)?;

        let grad_w = tape.input.matmul_tn(&dpre)?;
        let grad_b = dpre.sum_axis(0)?;
        let grads = vec![grad_w.data().to_vec(), grad_b.data().to_vec()];

        let grad_x = if needs_input_grad {
            Some(dpre.matmul_nt(&self.w)?)
        } else {
            None
        };
        Ok((grad_x, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_through() {
        let mut l = DenseLayer::new(3, 3, Activation::None, &mut Rng::new(1));
        l.w = Tensor::eye(3);
        l.b = Tensor::zeros(&[3]);
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, -0.5]).unwrap();
        let (out, _) = l.forward(&x).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn relu_blocks_gradient_at_negative_preactivation() {
        let mut l = DenseLayer::new(1, 1, Activation::Relu, &mut Rng::new(2));
        l.w = Tensor::from_vec(&[1, 1], vec![1.0]).unwrap();
        l.b = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        let x = Tensor::from_vec(&[1, 1], vec![-3.0]).unwrap();
        let (out, tape) = l.forward(&x).unwrap();
        assert_eq!(out.data()[0], 0.0);
        let ones = Tensor::filled(&[1, 1], 1.0);
        let (gx, grads) = l.backward(&ones, &tape, true).unwrap();
        assert_eq!(gx.unwrap().data()[0], 0.0);
        assert_eq!(grads[0][0], 0.0); // weight gradient also blocked
    }

    #[test]
    fn gradients_match_finite_differences() {
        for activation in [Activation::None, Activation::Relu, Activation::Silu] {
            let mut l = DenseLayer::new(4, 3, activation, &mut Rng::new(3));
            let mut rng = Rng::new(4);
            let x = rng.uniform_tensor(&[2, 4], -1.0, 1.0);
            let weights = rng.uniform_tensor(&[2, 3], -1.0, 1.0);
            let loss = |l: &DenseLayer, x: &Tensor| -> f64 {
                let (out, _) = l.forward(x).unwrap();
                out.mul(&weights).unwrap().sum()
            };
            let (_, tape) = l.forward(&x).unwrap();
            let (grad_x, grads) = l.backward(&weights, &tape, true).unwrap();
            let grad_x = grad_x.unwrap();

            let eps = 1e-6;
            for idx in 0..x.len() {
                let mut xp = x.clone();
                xp.data_mut()[idx] += eps;
                let mut xm = x.clone();
                xm.data_mut()[idx] -= eps;
                let fd = (loss(&l, &xp) - loss(&l, &xm)) / (2.0 * eps);
                let got = grad_x.data()[idx];
                let denom = fd.abs().max(got.abs()).max(1e-6);
                assert!(((got - fd) / denom).abs() < 1e-4, "{activation:?} input {idx}");
            }
            for slot in 0..2 {
                let len = grads[slot].len();
                for idx in 0..len {
                    let orig = {
                        let mut arrays = l.trainable_arrays_mut();
                        let v = arrays[slot].1[idx];
                        arrays[slot].1[idx] = v + eps;
                        v
                    };
                    let up = loss(&l, &x);
                    {
                        let mut arrays = l.trainable_arrays_mut();
                        arrays[slot].1[idx] = orig - eps;
                    }
                    let down = loss(&l, &x);
                    {
                        let mut arrays = l.trainable_arrays_mut();
                        arrays[slot].1[idx] = orig;
                    }
                    let fd = (up - down) / (2.0 * eps);
                    let got = grads[slot][idx];
                    let denom = fd.abs().max(got.abs()).max(1e-6);
                    assert!(
                        ((got - fd) / denom).abs() < 1e-4,
                        "{activation:?} slot {slot} idx {idx}: {got} vs {fd}"
                    );
                }
            }
        }
    }
}
