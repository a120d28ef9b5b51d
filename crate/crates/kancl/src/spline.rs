//! Uniform B-spline knot grids, Cox-de Boor basis evaluation and
//! differentiation, and spline evaluation.
//!
//! A grid over `[lo, hi]` with `G` intervals and order `k` carries
//! `G + 2k + 1` uniformly spaced knots extending `k*h` beyond each bound
//! (`h = (hi - lo) / G`) and supports `G + k` basis functions. Inputs are
//! clamped to `[lo, hi]` before evaluation; the grids are fixed, never
//! refined or extended during training.

use crate::error::{KanError, Result};
use serde::{Deserialize, Serialize};

/// Extended uniform knot vector defining the B-spline basis of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid {
    lo: f64,
    hi: f64,
    grid_size: usize,
    order: usize,
    knots: Vec<f64>,
    /// `1 / (j * h)` for `j = 0..=k`: the only denominators the Cox-de Boor
    /// triangle sees on a uniform grid (index 0 unused).
    inv_diff: Vec<f64>,
}

impl KnotGrid {
    /// Builds the uniform grid. Errors on non-finite bounds, `lo >= hi`,
    /// or `grid_size < 1`.
    pub fn new(lo: f64, hi: f64, grid_size: usize, order: usize) -> Result<KnotGrid> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(KanError::InvalidGrid(format!(
                "bounds must be finite, got [{lo}, {hi}]"
            )));
        }
        if lo >= hi {
            return Err(KanError::InvalidGrid(format!(
                "lower bound {lo} must be below upper bound {hi}"
            )));
        }
        if grid_size < 1 {
            return Err(KanError::InvalidGrid("grid size must be >= 1".into()));
        }
        if order >= 16 {
            return Err(KanError::InvalidGrid(
                "spline order above 15 is not supported".into(),
            ));
        }
        let h = (hi - lo) / grid_size as f64;
        let n_knots = grid_size + 2 * order + 1;
        let knots = (0..n_knots)
            .map(|i| lo + (i as f64 - order as f64) * h)
            .collect();
        let inv_diff = (0..=order)
            .map(|j| if j == 0 { 0.0 } else { 1.0 / (j as f64 * h) })
            .collect();
        Ok(KnotGrid {
            lo,
            hi,
            grid_size,
            order,
            knots,
            inv_diff,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `G + k`.
    pub fn basis_count(&self) -> usize {
        self.grid_size + self.order
    }

    /// Inputs outside `[lo, hi]` are clamped before evaluation.
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Knot span index for a clamped input, in `[k, G+k-1]`, such that
    /// `knots[span] <= x < knots[span+1]` (closed on top at `hi`).
    pub fn find_span(&self, x: f64) -> usize {
        let h = (self.hi - self.lo) / self.grid_size as f64;
        let idx = ((x - self.lo) / h).floor() as isize;
        let idx = idx.clamp(0, self.grid_size as isize - 1) as usize;
        idx + self.order
    }

    /// Evaluates the `k + 1` non-vanishing basis functions at `x` into
    /// `out[..k+1]` and returns the index of the first one, `span - k`.
    /// Cox-de Boor triangle; at most `k + 1` entries of the full basis
    /// vector are ever nonzero.
    pub fn basis_nonzero(&self, x: f64, out: &mut [f64]) -> usize {
        let x = self.clamp(x);
        let span = self.find_span(x);
        let k = self.order;
        debug_assert!(out.len() > k);
        let t = &self.knots;

        out[0] = 1.0;
        let mut left = [0.0; 16];
        let mut right = [0.0; 16];
        for j in 1..=k {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            // uniform knots: every level-j denominator is exactly j*h
            let inv = self.inv_diff[j];
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] * inv;
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        span - k
    }

    /// Like [`basis_nonzero`](Self::basis_nonzero) but also writes the first
    /// derivatives of the same `k + 1` functions into `deriv[..k+1]`.
    /// Requires `k >= 1`.
    pub fn basis_nonzero_with_deriv(
        &self,
        x: f64,
        out: &mut [f64],
        deriv: &mut [f64],
    ) -> Result<usize> {
        let k = self.order;
        if k == 0 {
            return Err(KanError::UnsupportedOrder);
        }
        let x = self.clamp(x);
        let span = self.find_span(x);
        let t = &self.knots;
        debug_assert!(out.len() > k && deriv.len() > k);

        // Run the triangle up to order k-1, keep those values, then finish.
        out[0] = 1.0;
        let mut left = [0.0; 16];
        let mut right = [0.0; 16];
        let mut lower = [0.0; 16]; // order k-1 values
        for j in 1..=k {
            if j == k {
                lower[..k].copy_from_slice(&out[..k]);
            }
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let inv = self.inv_diff[j];
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] * inv;
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }

        // B'_{i,k} = k * ( B_{i,k-1}/(t_{i+k}-t_i) - B_{i+1,k-1}/(t_{i+k+1}-t_{i+1}) );
        // both spans cover k intervals, so both denominators are k*h.
        let scale = k as f64 * self.inv_diff[k];
        for r in 0..=k {
            let a = if r >= 1 { scale * lower[r - 1] } else { 0.0 };
            let b = if r < k { scale * lower[r] } else { 0.0 };
            deriv[r] = a - b;
        }
        Ok(span - k)
    }

    /// Full basis vector of length `G + k` at `x`.
    pub fn basis_eval(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(KanError::NonFinite("basis_eval input".into()));
        }
        let k = self.order;
        let mut window = [0.0; 16];
        let first = self.basis_nonzero(x, &mut window);
        let mut values = vec![0.0; self.basis_count()];
        values[first..=first + k].copy_from_slice(&window[..k + 1]);
        Ok(values)
    }

    /// Full derivative vector `dB_i/dx` of length `G + k` at `x`.
    pub fn basis_derivative(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(KanError::NonFinite("basis_derivative input".into()));
        }
        let k = self.order;
        let mut window = [0.0; 16];
        let mut dwindow = [0.0; 16];
        let first = self.basis_nonzero_with_deriv(x, &mut window, &mut dwindow)?;
        let mut values = vec![0.0; self.basis_count()];
        values[first..=first + k].copy_from_slice(&dwindow[..k + 1]);
        Ok(values)
    }

    /// `spline(x) = sum_i coef[i] * B_i(x)`; `coef` must have `G + k` entries.
    pub fn spline_eval(&self, x: f64, coef: &[f64]) -> Result<f64> {
        if coef.len() != self.basis_count() {
            return Err(KanError::CoefficientLength {
                expected: self.basis_count(),
                got: coef.len(),
            });
        }
        if !x.is_finite() {
            return Err(KanError::NonFinite("spline_eval input".into()));
        }
        let k = self.order;
        let mut window = [0.0; 16];
        let first = self.basis_nonzero(x, &mut window);
        let mut acc = 0.0;
        for r in 0..=k {
            acc += coef[first + r] * window[r];
        }
        Ok(acc)
    }
}
