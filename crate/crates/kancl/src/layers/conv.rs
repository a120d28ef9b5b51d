//! Classic 2-D convolution (stride 1, same padding) via window unfolding.

use crate::error::{KanError, Result};
use crate::layers::{ensure_finite, LayerGrads};
use crate::tensor::{Rng, Tensor};
use serde::{Deserialize, Serialize};

/// Unfolds `[batch, c_in, h, w]` into `[batch * h * w, c_in * k_s * k_s]`
/// windows with zero same-padding (asymmetric when the kernel side is even,
/// trailing side gets the extra pad). Row order is `(b, y, x)`, column order
/// `(c, u, v)`.
pub(crate) fn im2col(x: &Tensor, k_s: usize) -> Result<Tensor> {
    if x.rank() != 4 {
        return Err(KanError::ShapeMismatch {
            op: "im2col",
            left: x.shape().to_vec(),
            right: vec![],
        });
    }
    let (batch, c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let pad = (k_s - 1) / 2;
    let cols = c_in * k_s * k_s;
    let mut out = Tensor::zeros(&[batch * h * w, cols]);
    let od = out.data_mut();
    let xd = x.data();
    // valid v-range per output column: sx = xx + v - pad must fall in [0, w)
    let v_ranges: Vec<(usize, usize, usize)> = (0..w)
        .map(|xx| {
            let vlo = pad.saturating_sub(xx);
            let vhi = k_s.min(w + pad - xx);
            (vlo, vhi, xx + vlo - pad)
        })
        .collect();
    for b in 0..batch {
        for y in 0..h {
            for xx in 0..w {
                let row = ((b * h + y) * w + xx) * cols;
                let (vlo, vhi, sx0) = v_ranges[xx];
                if vlo >= vhi {
                    continue;
                }
                for c in 0..c_in {
                    let plane = (b * c_in + c) * h * w;
                    for u in 0..k_s {
                        let sy = y + u;
                        if sy < pad || sy >= h + pad {
                            continue;
                        }
                        let src = plane + (sy - pad) * w + sx0;
                        let dst = row + (c * k_s + u) * k_s + vlo;
                        od[dst..dst + vhi - vlo].copy_from_slice(&xd[src..src + vhi - vlo]);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`im2col`]: scatter-adds window gradients back onto the image.
pub(crate) fn col2im(
    grad_cols: &Tensor,
    shape: &[usize],
    k_s: usize,
) -> Result<Tensor> {
    let (batch, c_in, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    let pad = (k_s - 1) / 2;
    let cols = c_in * k_s * k_s;
    if grad_cols.shape() != [batch * h * w, cols] {
        return Err(KanError::ShapeMismatch {
            op: "col2im",
            left: grad_cols.shape().to_vec(),
            right: vec![batch * h * w, cols],
        });
    }
    let mut out = Tensor::zeros(shape);
    let od = out.data_mut();
    let gd = grad_cols.data();
    let v_ranges: Vec<(usize, usize, usize)> = (0..w)
        .map(|xx| {
            let vlo = pad.saturating_sub(xx);
            let vhi = k_s.min(w + pad - xx);
            (vlo, vhi, xx + vlo - pad)
        })
        .collect();
    for b in 0..batch {
        for y in 0..h {
            for xx in 0..w {
                let row = ((b * h + y) * w + xx) * cols;
                let (vlo, vhi, sx0) = v_ranges[xx];
                if vlo >= vhi {
                    continue;
                }
                for c in 0..c_in {
                    let plane = (b * c_in + c) * h * w;
                    for u in 0..k_s {
                        let sy = y + u;
                        if sy < pad || sy >= h + pad {
                            continue;
                        }
                        let dst = plane + (sy - pad) * w + sx0;
                        let src = row + (c * k_s + u) * k_s + vlo;
                        for i in 0..vhi - vlo {
                            od[dst + i] += gd[src + i];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `[batch * h * w, n_f]` rows back to `[batch, n_f, h, w]`.
pub(crate) fn rows_to_feature_maps(
    rows: &Tensor,
    batch: usize,
    n_f: usize,
    h: usize,
    w: usize,
) -> Tensor {
    let mut out = Tensor::zeros(&[batch, n_f, h, w]);
    let od = out.data_mut();
    let rd = rows.data();
    for b in 0..batch {
        for y in 0..h {
            for x in 0..w {
                let row = ((b * h + y) * w + x) * n_f;
                for f in 0..n_f {
                    od[((b * n_f + f) * h + y) * w + x] = rd[row + f];
                }
            }
        }
    }
    out
}

/// Inverse of [`rows_to_feature_maps`].
pub(crate) fn feature_maps_to_rows(maps: &Tensor) -> Tensor {
    let (batch, n_f, h, w) = (
        maps.shape()[0],
        maps.shape()[1],
        maps.shape()[2],
        maps.shape()[3],
    );
    let mut out = Tensor::zeros(&[batch * h * w, n_f]);
    let od = out.data_mut();
    let md = maps.data();
    for b in 0..batch {
        for f in 0..n_f {
            for y in 0..h {
                for x in 0..w {
                    od[((b * h + y) * w + x) * n_f + f] = md[((b * n_f + f) * h + y) * w + x];
                }
            }
        }
    }
    out
}

/// Classic convolution: `n_f` filters of side `k_s` over `c_in` channels,
/// stride 1, zero same-padding. Filters are stored flattened as
/// `[c_in * k_s * k_s, n_f]` (logical `[n_f, c_in, k_s, k_s]`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvLayer {
    pub n_f: usize,
    pub k_s: usize,
    pub c_in: usize,
    filters: Tensor,
    bias: Tensor,
}

pub struct ConvTape {
    input_shape: Vec<usize>,
    cols: Tensor,
}

impl ConvLayer {
    pub fn new(c_in: usize, n_f: usize, k_s: usize, rng: &mut Rng) -> ConvLayer {
        let fan_in = c_in * k_s * k_s;
        let bound = (6.0 / fan_in as f64).sqrt();
        ConvLayer {
            n_f,
            k_s,
            c_in,
            filters: rng.uniform_tensor(&[fan_in, n_f], -bound, bound),
            bias: Tensor::zeros(&[n_f]),
        }
    }

    pub fn trainable_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("filters", self.filters.data_mut()),
            ("bias", self.bias.data_mut()),
        ]
    }

    pub fn state_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        self.trainable_arrays_mut()
    }

    pub fn trainable_param_count(&self) -> usize {
        self.n_f * self.c_in * self.k_s * self.k_s + self.n_f
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvTape)> {
        if x.rank() != 4 || x.shape()[1] != self.c_in {
            return Err(KanError::ShapeMismatch {
                op: "conv forward",
                left: x.shape().to_vec(),
                right: vec![self.c_in],
            });
        }
        let (batch, _, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let cols = im2col(x, self.k_s)?;
        let mut rows = cols.matmul(&self.filters)?;
        {
            let n_f = self.n_f;
            let bias = self.bias.data();
            for row in rows.data_mut().chunks_mut(n_f) {
                for (v, &b) in row.iter_mut().zip(bias.iter()) {
                    *v += b;
                }
            }
        }
        let out = rows_to_feature_maps(&rows, batch, self.n_f, h, w);
        ensure_finite(&out, &format!("conv [{}x{}x{}]", self.n_f, self.c_in, self.k_s))?;
        Ok((
            out,
            ConvTape {
                input_shape: x.shape().to_vec(),
                cols,
            },
        ))
    }

    pub fn backward(
        &self,
        grad_out: &Tensor,
        tape: &ConvTape,
        needs_input_grad: bool,
    ) -> Result<(Option<Tensor>, LayerGrads)> {
        let grad_rows = feature_maps_to_rows(grad_out);
        let grad_filters = tape.cols.matmul_tn(&grad_rows)?;
        let grad_bias = grad_rows.sum_axis(0)?;
        let grads = vec![grad_filters.data().to_vec(), grad_bias.data().to_vec()];
        let grad_x = if needs_input_grad {
            let grad_cols = grad_rows.matmul_nt(&self.filters)?;
            Some(col2im(&grad_cols, &tape.input_shape, self.k_s)?)
        } else {
            None
        };
        Ok((grad_x, grads))
    }
}
