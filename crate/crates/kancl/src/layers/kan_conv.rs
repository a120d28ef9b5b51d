//! KAN convolution: each kernel cell applies a learnable spline activation
//! to its input entry instead of multiplying by a scalar, and the window sums
//! the results. Equivalent to a KAN linear layer of width `c_in * k_s^2`
//! applied to every unfolded window, which is exactly how it is computed.

use crate::error::{KanError, Result};
use crate::layers::conv::{col2im, feature_maps_to_rows, im2col, rows_to_feature_maps};
use crate::layers::{KanLinearConfig, KanLinearLayer, KanLinearTape, LayerGrads};
use crate::tensor::{Rng, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KanConvConfig {
    pub c_in: usize,
    pub n_f: usize,
    pub k_s: usize,
    pub grid_size: usize,
    pub order: usize,
    pub lo: f64,
    pub hi: f64,
    pub train_ws: bool,
    pub train_wb: bool,
    pub squash_input: bool,
}

impl KanConvConfig {
    pub fn new(c_in: usize, n_f: usize, k_s: usize, grid_size: usize, order: usize) -> Self {
        KanConvConfig {
            c_in,
            n_f,
            k_s,
            grid_size,
            order,
            lo: -1.0,
            hi: 1.0,
            train_ws: true,
            train_wb: true,
            squash_input: false,
        }
    }
}

/// One KAN convolution layer (stride 1, zero same-padding). The per-cell
/// spline edges live in an inner [`KanLinearLayer`] with
/// `d_in = c_in * k_s^2`, `d_out = n_f`; there is no bias term, matching the
/// efficient linear formulation it builds on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KanConvLayer {
    pub k_s: usize,
    pub c_in: usize,
    pub n_f: usize,
    inner: KanLinearLayer,
}

pub struct KanConvTape {
    input_shape: Vec<usize>,
    inner: KanLinearTape,
}

impl KanConvLayer {
    pub fn new(cfg: KanConvConfig, rng: &mut Rng) -> Result<KanConvLayer> {
        let inner_cfg = KanLinearConfig {
            d_in: cfg.c_in * cfg.k_s * cfg.k_s,
            d_out: cfg.n_f,
            grid_size: cfg.grid_size,
            order: cfg.order,
            lo: cfg.lo,
            hi: cfg.hi,
            with_beta: false,
            train_ws: cfg.train_ws,
            train_wb: cfg.train_wb,
            train_beta: false,
            squash_input: cfg.squash_input,
        };
        Ok(KanConvLayer {
            k_s: cfg.k_s,
            c_in: cfg.c_in,
            n_f: cfg.n_f,
            inner: KanLinearLayer::new(inner_cfg, rng)?,
        })
    }

    pub fn inner(&self) -> &KanLinearLayer {
        &self.inner
    }

    pub fn trainable_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        self.inner.trainable_arrays_mut()
    }

    pub fn state_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        self.inner.state_arrays_mut()
    }

    pub fn trainable_param_count(&self) -> usize {
        self.inner.trainable_param_count()
    }

    pub fn forward(&self, x: &Tensor, training: bool) -> Result<(Tensor, KanConvTape)> {
        if x.rank() != 4 || x.shape()[1] != self.c_in {
            return Err(KanError::ShapeMismatch {
                op: "kan_conv forward",
                left: x.shape().to_vec(),
                right: vec![self.c_in],
            });
        }
        let (batch, _, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let cols = im2col(x, self.k_s)?;
        let (rows, inner_tape) = self.inner.forward(&cols, training)?;
        let out = rows_to_feature_maps(&rows, batch, self.n_f, h, w);
        Ok((
            out,
            KanConvTape {
                input_shape: x.shape().to_vec(),
                inner: inner_tape,
            },
        ))
    }

    pub fn backward(
        &self,
        grad_out: &Tensor,
        tape: &KanConvTape,
        needs_input_grad: bool,
    ) -> Result<(Option<Tensor>, LayerGrads)> {
        let grad_rows = feature_maps_to_rows(grad_out);
        let (grad_cols, grads) = self
            .inner
            .backward(&grad_rows, &tape.inner, needs_input_grad)?;
        let grad_x = match grad_cols {
            Some(gc) => Some(col2im(&gc, &tape.input_shape, self.k_s)?),
            None => None,
        };
        Ok((grad_x, grads))
    }
}
