//! KAN linear layer in its efficient matrix form.
//!
//! Every edge (o, j) carries a learnable activation
//! `phi(x) = w_b * silu(x) + w_s * spline(x) + beta`, where the spline is a
//! weighted sum of the layer-wide B-spline basis. Node `o` outputs the sum of
//! its incoming edges. The forward pass expands the input batch into a
//! `[batch, d_in * (G + k)]` basis matrix and performs one matrix product
//! against the scale-adjusted coefficients, which is exactly equivalent to
//! evaluating every edge spline separately and summing.

use crate::error::{KanError, Result};
use crate::layers::{ensure_finite, LayerGrads};
use crate::spline::KnotGrid;
use crate::tensor::{silu_prime, Rng, Tensor};
use serde::{Deserialize, Serialize};

/// Construction parameters for one KAN linear layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KanLinearConfig {
    pub d_in: usize,
    pub d_out: usize,
    pub grid_size: usize,
    pub order: usize,
    /// Spline input domain.
    pub lo: f64,
    pub hi: f64,
    /// Whether the per-node output bias `beta` exists at all (the efficient
    /// formulation drops it; the full formulation keeps it).
    pub with_beta: bool,
    pub train_ws: bool,
    pub train_wb: bool,
    pub train_beta: bool,
    /// Hidden layers squash incoming activations through tanh so they stay
    /// inside the spline domain without losing gradient to hard clamping.
    pub squash_input: bool,
}

impl KanLinearConfig {
    pub fn new(d_in: usize, d_out: usize, grid_size: usize, order: usize) -> KanLinearConfig {
        KanLinearConfig {
            d_in,
            d_out,
            grid_size,
            order,
            lo: -1.0,
            hi: 1.0,
            with_beta: false,
            train_ws: true,
            train_wb: true,
            train_beta: false,
            squash_input: false,
        }
    }

    /// Efficient formulation: scale factors trainable, no bias term.
    pub fn effkan(d_in: usize, d_out: usize, grid_size: usize, order: usize) -> KanLinearConfig {
        KanLinearConfig::new(d_in, d_out, grid_size, order)
    }

    /// Full formulation: scale factors and bias all trainable.
    pub fn pykan_full(d_in: usize, d_out: usize, grid_size: usize, order: usize) -> KanLinearConfig {
        KanLinearConfig {
            with_beta: true,
            train_beta: true,
            ..KanLinearConfig::new(d_in, d_out, grid_size, order)
        }
    }

    /// Continual-learning configuration: residual scale and bias frozen at
    /// their initialization values; spline scale trainability is the one
    /// remaining choice.
    pub fn cl(
        d_in: usize,
        d_out: usize,
        grid_size: usize,
        order: usize,
        ws_trainable: bool,
        with_beta: bool,
    ) -> KanLinearConfig {
        KanLinearConfig {
            with_beta,
            train_ws: ws_trainable,
            train_wb: false,
            train_beta: false,
            ..KanLinearConfig::new(d_in, d_out, grid_size, order)
        }
    }

    pub fn domain(mut self, lo: f64, hi: f64) -> KanLinearConfig {
        self.lo = lo;
        self.hi = hi;
        self
    }

    pub fn squashed(mut self) -> KanLinearConfig {
        self.squash_input = true;
        self
    }
}

/// One KAN linear layer.
///
/// Storage layout (all row-major):
/// - `coef`: `[d_in * m, d_out]` with row `j * m + i` holding coefficient
///   `c_i` of edge `(o, j)` in column `o`, where `m = G + k`;
/// - `w_s`, `w_b`: `[d_in, d_out]` spline / residual scales per edge;
/// - `beta`: `[d_out]`, present only in the full formulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KanLinearLayer {
    pub cfg: KanLinearConfig,
    grid: KnotGrid,
    coef: Tensor,
    w_s: Tensor,
    w_b: Tensor,
    beta: Option<Tensor>,
}

/// Cached intermediates from one forward pass.
pub struct KanLinearTape {
    /// Post-squash input values, `[batch, d_in]`.
    z: Tensor,
    /// Basis expansion of `z`, `[batch, d_in * m]`.
    basis: Tensor,
}

impl KanLinearLayer {
    pub fn new(cfg: KanLinearConfig, rng: &mut Rng) -> Result<KanLinearLayer> {
        if cfg.d_in == 0 || cfg.d_out == 0 {
            return Err(KanError::InvalidConfig(
                "KAN layer widths must be positive".into(),
            ));
        }
        if cfg.train_beta && !cfg.with_beta {
            return Err(KanError::InvalidConfig(
                "cannot train a bias the layer does not have".into(),
            ));
        }
        let grid = KnotGrid::new(cfg.lo, cfg.hi, cfg.grid_size, cfg.order)?;
        let m = grid.basis_count();
        let coef = rng.normal_tensor(&[cfg.d_in * m, cfg.d_out], 0.0, 0.1 / (m as f64).sqrt());
        let bound = 1.0 / (cfg.d_in as f64).sqrt();
        // The two reference formulations initialize the spline scale
        // differently, and continual-learning retention hinges on it: the
        // full (bias-carrying) form starts every w_s at one, the efficient
        // form draws small per-edge scales so spline-path logit dynamics
        // stay slow and sign-diverse.
        let w_s = if cfg.with_beta {
            Tensor::filled(&[cfg.d_in, cfg.d_out], 1.0)
        } else {
            rng.uniform_tensor(&[cfg.d_in, cfg.d_out], -bound, bound)
        };
        // Per-edge residual scales start at small random values so the
        // summed SiLU term stays O(1) in wide layers instead of drifting
        // by O(d_in), which would saturate downstream squashes.
        let w_b = rng.uniform_tensor(&[cfg.d_in, cfg.d_out], -bound, bound);
        let beta = cfg.with_beta.then(|| Tensor::zeros(&[cfg.d_out]));
        Ok(KanLinearLayer {
            cfg,
            grid,
            coef,
            w_s,
            w_b,
            beta,
        })
    }

    pub fn d_in(&self) -> usize {
        self.cfg.d_in
    }

    pub fn d_out(&self) -> usize {
        self.cfg.d_out
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    /// Coefficient `c_i` of edge `(o, j)`.
    pub fn coef_at(&self, o: usize, j: usize, i: usize) -> f64 {
        let m = self.grid.basis_count();
        self.coef.data()[(j * m + i) * self.cfg.d_out + o]
    }

    pub fn ws_at(&self, o: usize, j: usize) -> f64 {
        self.w_s.data()[j * self.cfg.d_out + o]
    }

    pub fn wb_at(&self, o: usize, j: usize) -> f64 {
        self.w_b.data()[j * self.cfg.d_out + o]
    }

    pub fn beta_at(&self, o: usize) -> f64 {
        self.beta.as_ref().map_or(0.0, |b| b.data()[o])
    }

    /// All coefficients of edge `(o, j)` in basis order.
    pub fn edge_coefficients(&self, o: usize, j: usize) -> Vec<f64> {
        (0..self.grid.basis_count())
            .map(|i| self.coef_at(o, j, i))
            .collect()
    }

    /// Trainable parameter arrays in declaration order.
    pub fn trainable_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut arrays: Vec<(&'static str, &mut [f64])> =
            vec![("coef", self.coef.data_mut())];
        if self.cfg.train_ws {
            arrays.push(("w_s", self.w_s.data_mut()));
        }
        if self.cfg.train_wb {
            arrays.push(("w_b", self.w_b.data_mut()));
        }
        if self.cfg.train_beta {
            arrays.push(("beta", self.beta.as_mut().expect("beta exists").data_mut()));
        }
        arrays
    }

    /// Every parameter array, trainable or frozen, in declaration order.
    pub fn state_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut arrays: Vec<(&'static str, &mut [f64])> = vec![
            ("coef", self.coef.data_mut()),
            ("w_s", self.w_s.data_mut()),
            ("w_b", self.w_b.data_mut()),
        ];
        if let Some(beta) = self.beta.as_mut() {
            arrays.push(("beta", beta.data_mut()));
        }
        arrays
    }

    /// Coefficients pre-multiplied by their edge's spline scale, shaped for
    /// the batched matrix product.
    fn scaled_coef(&self) -> Tensor {
        let m = self.grid.basis_count();
        let d_out = self.cfg.d_out;
        let mut out = self.coef.clone();
        let data = out.data_mut();
        let ws = self.w_s.data();
        for j in 0..self.cfg.d_in {
            let ws_row = &ws[j * d_out..(j + 1) * d_out];
            for i in 0..m {
                let row = &mut data[(j * m + i) * d_out..(j * m + i + 1) * d_out];
                for (v, &s) in row.iter_mut().zip(ws_row.iter()) {
                    *v *= s;
                }
            }
        }
        out
    }

    fn squash(&self, x: &Tensor) -> Tensor {
        if self.cfg.squash_input {
            x.map(f64::tanh)
        } else {
            x.clone()
        }
    }

    /// Basis expansion of the (squashed) inputs: row `b` holds the basis
    /// vectors of all `d_in` coordinates side by side.
    fn basis_matrix(&self, z: &Tensor) -> Tensor {
        let (batch, d_in) = (z.shape()[0], z.shape()[1]);
        let m = self.grid.basis_count();
        let k = self.cfg.order;
        let mut basis = Tensor::zeros(&[batch, d_in * m]);
        let data = basis.data_mut();
        let mut window = [0.0; 16];
        for (row, z_row) in z.data().chunks(d_in).enumerate() {
            let row_base = row * d_in * m;
            for (j, &v) in z_row.iter().enumerate() {
                let first = self.grid.basis_nonzero(v, &mut window);
                let base = row_base + j * m + first;
                data[base..base + k + 1].copy_from_slice(&window[..k + 1]);
            }
        }
        basis
    }

    /// `out[b, o] = sum_j w_b[o,j] silu(z[b,j]) + w_s[o,j] spline_{o,j}(z[b,j]) (+ beta[o])`.
    pub fn forward(&self, x: &Tensor, training: bool) -> Result<(Tensor, KanLinearTape)> {
        let _ = training;
        if x.rank() != 2 || x.shape()[1] != self.cfg.d_in {
            return Err(KanError::ShapeMismatch {
                op: "kan_linear forward",
                left: x.shape().to_vec(),
                right: vec![self.cfg.d_in],
            });
        }
        let z = self.squash(x);
        let basis = self.basis_matrix(&z);
        let mut out = basis.matmul(&self.scaled_coef())?;
        let silu_z = z.silu();
        let base = silu_z.matmul(&self.w_b)?;
        out = out.add(&base)?;
        if let Some(beta) = &self.beta {
            let d_out = self.cfg.d_out;
            let out_data = out.data_mut();
            let beta_data = beta.data();
            for row in out_data.chunks_mut(d_out) {
                for (v, &b) in row.iter_mut().zip(beta_data.iter()) {
                    *v += b;
                }
            }
        }
        ensure_finite(
            &out,
            &format!("kan_linear [{}x{}]", self.cfg.d_in, self.cfg.d_out),
        )?;
        Ok((out, KanLinearTape { z, basis }))
    }

    /// Backward pass. Returns the input gradient (when requested) and
    /// gradients for the trainable arrays in declaration order.
    pub fn backward(
        &self,
        grad_out: &Tensor,
        tape: &KanLinearTape,
        needs_input_grad: bool,
    ) -> Result<(Option<Tensor>, LayerGrads)> {
        let (batch, d_in) = (tape.z.shape()[0], tape.z.shape()[1]);
        let d_out = self.cfg.d_out;
        if grad_out.shape() != [batch, d_out] {
            return Err(KanError::ShapeMismatch {
                op: "kan_linear backward",
                left: grad_out.shape().to_vec(),
                right: vec![batch, d_out],
            });
        }
        let m = self.grid.basis_count();

        // M[(j,i), o] = sum_b grad_out[b,o] * B_i(z[b,j])
        let basis_grad = tape.basis.matmul_tn(grad_out)?;

        let mut grads: LayerGrads = Vec::new();

        // dL/dcoef[(j,i), o] = w_s[o,j] * M[(j,i), o]
        let mut coef_grad = basis_grad.clone();
        {
            let data = coef_grad.data_mut();
            let ws = self.w_s.data();
            for j in 0..d_in {
                let ws_row = &ws[j * d_out..(j + 1) * d_out];
                for i in 0..m {
                    let row = &mut data[(j * m + i) * d_out..(j * m + i + 1) * d_out];
                    for (v, &s) in row.iter_mut().zip(ws_row.iter()) {
                        *v *= s;
                    }
                }
            }
        }
        grads.push(coef_grad.data().to_vec());

        // dL/dw_s[o,j] = sum_b grad_out[b,o] * spline_{o,j}(z[b,j])
        //             = sum_i coef[(j,i), o] * M[(j,i), o]
        if self.cfg.train_ws {
            let mut ws_grad = vec![0.0; d_in * d_out];
            let coef = self.coef.data();
            let mg = basis_grad.data();
            for j in 0..d_in {
                let target = &mut ws_grad[j * d_out..(j + 1) * d_out];
                for i in 0..m {
                    let base = (j * m + i) * d_out;
                    for o in 0..d_out {
                        target[o] += coef[base + o] * mg[base + o];
                    }
                }
            }
            grads.push(ws_grad);
        }

        // dL/dw_b[o,j] = sum_b grad_out[b,o] * silu(z[b,j])
        if self.cfg.train_wb {
            let silu_z = tape.z.silu();
            let wb_grad = silu_z.matmul_tn(grad_out)?;
            grads.push(wb_grad.data().to_vec());
        }

        // dL/dbeta[o] = sum_b grad_out[b,o]
        if self.cfg.train_beta {
            let beta_grad = grad_out.sum_axis(0)?;
            grads.push(beta_grad.data().to_vec());
        }

        let grad_x = if needs_input_grad {
            Some(self.input_grad(grad_out, tape)?)
        } else {
            None
        };
        Ok((grad_x, grads))
    }

    fn input_grad(&self, grad_out: &Tensor, tape: &KanLinearTape) -> Result<Tensor> {
        let (batch, d_in) = (tape.z.shape()[0], tape.z.shape()[1]);
        let m = self.grid.basis_count();
        let k = self.cfg.order;

        // T[b, (j,i)] = sum_o grad_out[b,o] * w_s[o,j] * coef[(j,i),o]
        let t = grad_out.matmul_nt(&self.scaled_coef())?;
        // residual: sum_o grad_out[b,o] * w_b[o,j]
        let residual = grad_out.matmul_nt(&self.w_b)?;

        let mut grad_z = Tensor::zeros(&[batch, d_in]);
        {
            let gz = grad_z.data_mut();
            let td = t.data();
            let rd = residual.data();
            let zd = tape.z.data();
            let mut window = [0.0; 16];
            let mut dwindow = [0.0; 16];
            for (idx, &zv) in zd.iter().enumerate() {
                let b = idx / d_in;
                let j = idx % d_in;
                // spline term is constant beyond the clamped domain
                let spline_term = if zv >= self.grid.lo() && zv <= self.grid.hi() {
                    let first = self
                        .grid
                        .basis_nonzero_with_deriv(zv, &mut window, &mut dwindow)?;
                    let base = b * d_in * m + j * m + first;
                    let mut acc = 0.0;
                    for r in 0..=k {
                        acc += td[base + r] * dwindow[r];
                    }
                    acc
                } else {
                    0.0
                };
                gz[idx] = spline_term + rd[idx] * silu_prime(zv);
            }
        }
        if self.cfg.squash_input {
            // z = tanh(x), dz/dx = 1 - z^2
            let data = grad_z
                .data()
                .iter()
                .zip(tape.z.data())
                .map(|(&g, &z)| g * (1.0 - z * z))
                .collect();
            Tensor::from_vec(&[batch, d_in], data)
        } else {
            Ok(grad_z)
        }
    }

    /// Total number of trainable scalars.
    pub fn trainable_param_count(&self) -> usize {
        let m = self.grid.basis_count();
        let edges = self.cfg.d_in * self.cfg.d_out;
        let mut count = edges * m;
        if self.cfg.train_ws {
            count += edges;
        }
        if self.cfg.train_wb {
            count += edges;
        }
        if self.cfg.train_beta {
            count += self.cfg.d_out;
        }
        count
    }
}
