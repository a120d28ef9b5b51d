//! Max pooling with a fixed down-sampling factor.

use crate::error::{KanError, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Non-overlapping max pool; the factor must divide both spatial dims.
/// Backward routes the gradient to the argmax cell, ties broken toward
/// the lowest (row-major) index so the pass is deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxPoolLayer {
    pub factor: usize,
}

pub struct MaxPoolTape {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl MaxPoolLayer {
    pub fn new(factor: usize) -> MaxPoolLayer {
        MaxPoolLayer { factor }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, MaxPoolTape)> {
        if x.rank() != 4 {
            return Err(KanError::ShapeMismatch {
                op: "maxpool forward",
                left: x.shape().to_vec(),
                right: vec![],
            });
        }
        let (batch, ch, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let p = self.factor;
        if p == 0 || h % p != 0 || w % p != 0 {
            return Err(KanError::InvalidConfig(format!(
                "pool factor {p} must divide spatial dims {h}x{w}"
            )));
        }
        let (oh, ow) = (h / p, w / p);
        let mut out = Tensor::zeros(&[batch, ch, oh, ow]);
        let mut argmax = vec![0usize; batch * ch * oh * ow];
        let xd = x.data();
        let od = out.data_mut();
        for b in 0..batch {
            for c in 0..ch {
                let plane = (b * ch + c) * h * w;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best_idx = plane + (oy * p) * w + ox * p;
                        let mut best = xd[best_idx];
                        for dy in 0..p {
                            for dx in 0..p {
                                let idx = plane + (oy * p + dy) * w + (ox * p + dx);
                                if xd[idx] > best {
                                    best = xd[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        let out_idx = ((b * ch + c) * oh + oy) * ow + ox;
                        od[out_idx] = best;
                        argmax[out_idx] = best_idx;
                    }
                }
            }
        }
        Ok((
            out,
            MaxPoolTape {
                input_shape: x.shape().to_vec(),
                argmax,
            },
        ))
    }

    pub fn backward(&self, grad_out: &Tensor, tape: &MaxPoolTape) -> Result<Tensor> {
        if grad_out.len() != tape.argmax.len() {
            return Err(KanError::ShapeMismatch {
                op: "maxpool backward",
                left: grad_out.shape().to_vec(),
                right: vec![tape.argmax.len()],
            });
        }
        let mut grad_x = Tensor::zeros(&tape.input_shape);
        let gd = grad_x.data_mut();
        for (out_idx, &in_idx) in tape.argmax.iter().enumerate() {
            gd[in_idx] += grad_out.data()[out_idx];
        }
        Ok(grad_x)
    }
}
