//! Per-channel batch normalization for 4-D activations.

use crate::error::{KanError, Result};
use crate::layers::LayerGrads;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

const EPS: f64 = 1e-5;

/// Batch statistics in training mode, running statistics in evaluation.
/// Running stats update with `running = (1 - momentum) * running +
/// momentum * batch_stat` (unbiased variance), and only in training mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNormLayer {
    pub channels: usize,
    pub momentum: f64,
    gamma: Tensor,
    shift: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
}

pub struct BatchNormTape {
    /// Normalized values before scale/shift, `[batch, c, h, w]`.
    x_hat: Tensor,
    /// Per-channel `1 / sqrt(var + eps)` actually used in the forward.
    inv_std: Vec<f64>,
    training: bool,
}

impl BatchNormLayer {
    pub fn new(channels: usize) -> BatchNormLayer {
        BatchNormLayer {
            channels,
            momentum: 0.1,
            gamma: Tensor::filled(&[channels], 1.0),
            shift: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], 1.0),
        }
    }

    pub fn trainable_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("gamma", self.gamma.data_mut()),
            ("shift", self.shift.data_mut()),
        ]
    }

    pub fn state_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("gamma", self.gamma.data_mut()),
            ("shift", self.shift.data_mut()),
            ("running_mean", self.running_mean.data_mut()),
            ("running_var", self.running_var.data_mut()),
        ]
    }

    pub fn trainable_param_count(&self) -> usize {
        2 * self.channels
    }

    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<(Tensor, BatchNormTape)> {
        if x.rank() != 4 || x.shape()[1] != self.channels {
            return Err(KanError::ShapeMismatch {
                op: "batchnorm forward",
                left: x.shape().to_vec(),
                right: vec![self.channels],
            });
        }
        let (batch, ch, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        if training && batch < 2 {
            return Err(KanError::InvalidConfig(
                "batch norm in training mode needs batch size >= 2".into(),
            ));
        }
        let n = (batch * h * w) as f64;
        let plane = h * w;

        let mut x_hat = Tensor::zeros(x.shape());
        let mut out = Tensor::zeros(x.shape());
        let mut inv_stds = vec![0.0; ch];
        for c in 0..ch {
            let (mean, var) = if training {
                let mut sum = 0.0;
                for b in 0..batch {
                    let base = (b * ch + c) * plane;
                    for i in 0..plane {
                        sum += x.data()[base + i];
                    }
                }
                let mean = sum / n;
                let mut sq = 0.0;
                for b in 0..batch {
                    let base = (b * ch + c) * plane;
                    for i in 0..plane {
                        let d = x.data()[base + i] - mean;
                        sq += d * d;
                    }
                }
                let var = sq / n;
                self.running_mean.data_mut()[c] =
                    (1.0 - self.momentum) * self.running_mean.data()[c] + self.momentum * mean;
                let unbiased = if n > 1.0 { sq / (n - 1.0) } else { var };
                self.running_var.data_mut()[c] =
                    (1.0 - self.momentum) * self.running_var.data()[c] + self.momentum * unbiased;
                (mean, var)
            } else {
                (self.running_mean.data()[c], self.running_var.data()[c])
            };
            let inv_std = 1.0 / (var + EPS).sqrt();
            inv_stds[c] = inv_std;
            let g = self.gamma.data()[c];
            let s = self.shift.data()[c];
            for b in 0..batch {
                let base = (b * ch + c) * plane;
                for i in 0..plane {
                    let xh = (x.data()[base + i] - mean) * inv_std;
                    x_hat.data_mut()[base + i] = xh;
                    out.data_mut()[base + i] = g * xh + s;
                }
            }
        }
        Ok((
            out,
            BatchNormTape {
                x_hat,
                inv_std: inv_stds,
                training,
            },
        ))
    }

    pub fn backward(
        &self,
        grad_out: &Tensor,
        tape: &BatchNormTape,
        needs_input_grad: bool,
    ) -> Result<(Option<Tensor>, LayerGrads)> {
        if grad_out.shape() != tape.x_hat.shape() {
            return Err(KanError::ShapeMismatch {
                op: "batchnorm backward",
                left: grad_out.shape().to_vec(),
                right: tape.x_hat.shape().to_vec(),
            });
        }
        let shape = tape.x_hat.shape();
        let (batch, ch, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let plane = h * w;
        let n = (batch * plane) as f64;

        let mut grad_gamma = vec![0.0; ch];
        let mut grad_shift = vec![0.0; ch];
        let mut grad_x = needs_input_grad.then(|| Tensor::zeros(shape));
        for c in 0..ch {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for b in 0..batch {
                let base = (b * ch + c) * plane;
                for i in 0..plane {
                    let dy = grad_out.data()[base + i];
                    let xh = tape.x_hat.data()[base + i];
                    sum_dy += dy;
                    sum_dy_xhat += dy * xh;
                }
            }
            grad_gamma[c] = sum_dy_xhat;
            grad_shift[c] = sum_dy;

            if let Some(gx) = grad_x.as_mut() {
                let g = self.gamma.data()[c];
                let inv_std = tape.inv_std[c];
                for b in 0..batch {
                    let base = (b * ch + c) * plane;
                    for i in 0..plane {
                        let dy = grad_out.data()[base + i];
                        let xh = tape.x_hat.data()[base + i];
                        let v = if tape.training {
                            // batch statistics couple every sample in the channel
                            g * inv_std * (dy - sum_dy / n - xh * sum_dy_xhat / n)
                        } else {
                            g * inv_std * dy
                        };
                        gx.data_mut()[base + i] = v;
                    }
                }
            }
        }
        Ok((grad_x, vec![grad_gamma, grad_shift]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    #[test]
    fn training_output_is_normalized_per_channel() {
        let mut bn = BatchNormLayer::new(3);
        let mut rng = Rng::new(9);
        let x = rng.uniform_tensor(&[4, 3, 5, 5], -3.0, 7.0);
        let (out, _) = bn.forward(&x, true).unwrap();
        let n = (4 * 5 * 5) as f64;
        for c in 0..3 {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for b in 0..4 {
                let base = (b * 3 + c) * 25;
                for i in 0..25 {
                    sum += out.data()[base + i];
                    sq += out.data()[base + i] * out.data()[base + i];
                }
            }
            let mean = sum / n;
            let var = sq / n - mean * mean;
            assert!(mean.abs() < 1e-9, "channel {c} mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "channel {c} var {var}");
        }
    }

    #[test]
    fn batch_of_one_is_rejected_in_training() {
        let mut bn = BatchNormLayer::new(2);
        let x = Tensor::zeros(&[1, 2, 3, 3]);
        assert!(bn.forward(&x, true).is_err());
        assert!(bn.forward(&x, false).is_ok());
    }

    #[test]
    fn eval_mode_uses_running_statistics() {
        let mut bn = BatchNormLayer::new(1);
        let mut rng = Rng::new(10);
        // drive the running stats toward the data distribution
        for _ in 0..200 {
            let x = rng.normal_tensor(&[8, 1, 2, 2], 3.0, 2.0);
            bn.forward(&x, true).unwrap();
        }
        let x = Tensor::filled(&[1, 1, 1, 1], 3.0);
        let (out, _) = bn.forward(&x, false).unwrap();
        // x at the running mean normalizes to roughly zero
        assert!(out.data()[0].abs() < 0.2, "{}", out.data()[0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut bn = BatchNormLayer::new(2);
        let mut rng = Rng::new(11);
        // non-trivial gamma/shift
        bn.gamma = Tensor::from_vec(&[2], vec![1.3, 0.7]).unwrap();
        bn.shift = Tensor::from_vec(&[2], vec![0.2, -0.4]).unwrap();
        let x = rng.uniform_tensor(&[3, 2, 2, 2], -1.0, 1.0);
        let weights = rng.uniform_tensor(&[3, 2, 2, 2], -1.0, 1.0);

        let loss = |bn: &BatchNormLayer, x: &Tensor| -> f64 {
            let mut bn = bn.clone(); // running stats untouched in the original
            let (out, _) = bn.forward(x, true).unwrap();
            out.mul(&weights).unwrap().sum()
        };

        let (_, tape) = bn.clone().forward(&x, true).unwrap();
        let (grad_x, grads) = bn.backward(&weights, &tape, true).unwrap();
        let grad_x = grad_x.unwrap();

        let eps = 1e-5;
        for idx in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[idx] += eps;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= eps;
            let fd = (loss(&bn, &xp) - loss(&bn, &xm)) / (2.0 * eps);
            let got = grad_x.data()[idx];
            let denom = fd.abs().max(got.abs()).max(1e-6);
            assert!(((got - fd) / denom).abs() < 1e-4, "input {idx}: {got} vs {fd}");
        }
        for slot in 0..2 {
            for idx in 0..2 {
                let orig = {
                    let mut arrays = bn.trainable_arrays_mut();
                    let v = arrays[slot].1[idx];
                    arrays[slot].1[idx] = v + eps;
                    v
                };
                let up = loss(&bn, &x);
                {
                    let mut arrays = bn.trainable_arrays_mut();
                    arrays[slot].1[idx] = orig - eps;
                }
                let down = loss(&bn, &x);
                {
                    let mut arrays = bn.trainable_arrays_mut();
                    arrays[slot].1[idx] = orig;
                }
                let fd = (up - down) / (2.0 * eps);
                let got = grads[slot][idx];
                let denom = fd.abs().max(got.abs()).max(1e-6);
                assert!(((got - fd) / denom).abs() < 1e-4, "slot {slot} idx {idx}");
            }
        }
    }
}
