//! Minimal dense N-dimensional `f64` array plus a seeded, platform-stable RNG.
//!
//! Values are stored row-major. Operations are pure (inputs borrowed, output
//! owned) and use fixed loop orders so that identical inputs always produce
//! bit-identical outputs. There is no broadcasting beyond scalars: layers
//! reshape explicitly, and shape errors are loud.

use crate::error::{KanError, Result};
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Dense row-major `f64` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Tensor {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(KanError::ShapeMismatch {
                op: "from_vec",
                left: shape.to_vec(),
                right: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    /// Identity matrix of side `n`.
    pub fn eye(n: usize) -> Tensor {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access for the owner (parameter updates); library operations
    /// themselves never mutate their inputs.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Same data, new shape; element count must match.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(KanError::ShapeMismatch {
                op: "reshape",
                left: self.shape.clone(),
                right: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix product of a `[m, k]` by a `[k, n]` tensor.
    ///
    /// Fixed i-k-j loop order; the reduction over `k` is never reordered, so
    /// results are deterministic across runs.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(KanError::ShapeMismatch {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let n = other.shape[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row_out = &mut out[i * n..(i + 1) * n];
            let row_a = &self.data[i * k..(i + 1) * k];
            for (p, &a) in row_a.iter().enumerate() {
                if a == 0.0 {
                    continue; // KAN basis matrices are mostly zero
                }
                let row_b = &other.data[p * n..(p + 1) * n];
                for (o, &b) in row_out.iter_mut().zip(row_b.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `self^T * other` for `self [p, m]`, `other [p, n]`, without
    /// materializing the transpose. Deterministic accumulation order
    /// (outer loop over `p`).
    pub fn matmul_tn(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[0] != other.shape[0] {
            return Err(KanError::ShapeMismatch {
                op: "matmul_tn",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let (p, m) = (self.shape[0], self.shape[1]);
        let n = other.shape[1];
        let mut out = vec![0.0; m * n];
        for r in 0..p {
            let row_a = &self.data[r * m..(r + 1) * m];
            let row_b = &other.data[r * n..(r + 1) * n];
            for (i, &a) in row_a.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row_out = &mut out[i * n..(i + 1) * n];
                for (o, &b) in row_out.iter_mut().zip(row_b.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `self * other^T` for `self [m, p]`, `other [n, p]`, without
    /// materializing the transpose. Each output entry is one sequential
    /// dot product over `p`.
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[1] {
            return Err(KanError::ShapeMismatch {
                op: "matmul_nt",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let (m, p) = (self.shape[0], self.shape[1]);
        let n = other.shape[0];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row_a = &self.data[i * p..(i + 1) * p];
            for j in 0..n {
                let row_b = &other.data[j * p..(j + 1) * p];
                let mut acc = 0.0;
                for (&a, &b) in row_a.iter().zip(row_b.iter()) {
                    acc += a * b;
                }
                out[i * n + j] = acc;
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// Transpose of a 2-D tensor.
    pub fn transposed(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(KanError::ShapeMismatch {
                op: "transpose",
                left: self.shape.clone(),
                right: vec![],
            });
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }

    fn zip(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape == other.shape {
            let data = self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect();
            Ok(Tensor {
                shape: self.shape.clone(),
                data,
            })
        } else if other.data.len() == 1 {
            let b = other.data[0];
            Ok(self.map(|a| f(a, b)))
        } else if self.data.len() == 1 {
            let a = self.data[0];
            let data = other.data.iter().map(|&b| f(a, b)).collect();
            Ok(Tensor {
                shape: other.shape.clone(),
                data,
            })
        } else {
            Err(KanError::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            })
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "mul", |a, b| a * b)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn silu(&self) -> Tensor {
        self.map(silu)
    }

    pub fn relu(&self) -> Tensor {
        self.map(|v| v.max(0.0))
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map(sigmoid)
    }

    pub fn exp(&self) -> Tensor {
        self.map(f64::exp)
    }

    fn axis_layout(&self, axis: usize) -> Result<(usize, usize, usize, Vec<usize>)> {
        if axis >= self.rank() {
            return Err(KanError::AxisOutOfRange {
                axis,
                rank: self.rank(),
            });
        }
        let outer: usize = self.shape[..axis].iter().product();
        let mid = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out_shape = self.shape.clone();
        out_shape.remove(axis);
        Ok((outer, mid, inner, out_shape))
    }

    /// Sum along `axis`; the axis is removed from the result shape.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        let (outer, mid, inner, out_shape) = self.axis_layout(axis)?;
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for m in 0..mid {
                let base = (o * mid + m) * inner;
                for i in 0..inner {
                    out[o * inner + i] += self.data[base + i];
                }
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data: out,
        })
    }

    /// Maximum along `axis`.
    pub fn max_axis(&self, axis: usize) -> Result<Tensor> {
        let (outer, mid, inner, out_shape) = self.axis_layout(axis)?;
        let mut out = vec![f64::NEG_INFINITY; outer * inner];
        for o in 0..outer {
            for m in 0..mid {
                let base = (o * mid + m) * inner;
                for i in 0..inner {
                    let v = self.data[base + i];
                    if v > out[o * inner + i] {
                        out[o * inner + i] = v;
                    }
                }
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data: out,
        })
    }

    /// Index of the maximum along `axis`, ties broken toward the lowest index.
    /// Indices are returned as exact small integers in an `f64` tensor.
    pub fn argmax_axis(&self, axis: usize) -> Result<Tensor> {
        let (outer, mid, inner, out_shape) = self.axis_layout(axis)?;
        let mut best = vec![f64::NEG_INFINITY; outer * inner];
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for m in 0..mid {
                let base = (o * mid + m) * inner;
                for i in 0..inner {
                    let v = self.data[base + i];
                    if v > best[o * inner + i] {
                        best[o * inner + i] = v;
                        out[o * inner + i] = m as f64;
                    }
                }
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data: out,
        })
    }

    /// Total sum over all entries, in storage order.
    pub fn sum(&self) -> f64 {
        let mut acc = 0.0;
        for &v in &self.data {
            acc += v;
        }
        acc
    }

    /// Row-wise argmax of a `[rows, cols]` tensor as plain indices.
    pub fn argmax_rows(&self) -> Result<Vec<usize>> {
        if self.rank() != 2 {
            return Err(KanError::ShapeMismatch {
                op: "argmax_rows",
                left: self.shape.clone(),
                right: vec![],
            });
        }
        let (rows, cols) = (self.shape[0], self.shape[1]);
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &self.data[r * cols..(r + 1) * cols];
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            out.push(best);
        }
        Ok(out)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// SiLU, the residual activation `b(x) = x * sigmoid(x)`.
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

/// Derivative of SiLU: `sigmoid(x) * (1 + x * (1 - sigmoid(x)))`.
pub fn silu_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Seeded random generator with platform-stable output.
///
/// Identical seeds produce identical draw sequences across runs and
/// platforms. `substream` derives independent generators from the same
/// seed, used to give every grid run its own stream.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator derived from the same seed; draws never overlap
    /// with other substreams.
    pub fn substream(&self, stream: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream);
        Rng {
            seed: self.seed,
            inner,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.gen()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..hi)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        Normal::new(mean, std)
            .expect("std must be finite and non-negative")
            .sample(&mut self.inner)
    }

    pub fn uniform_tensor(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        let len = shape.iter().product();
        let data = (0..len).map(|_| self.uniform(lo, hi)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn normal_tensor(&mut self, shape: &[usize], mean: f64, std: f64) -> Tensor {
        let len = shape.iter().product();
        let normal = Normal::new(mean, std).expect("std must be finite and non-negative");
        let data = (0..len).map(|_| normal.sample(&mut self.inner)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_is_exact() {
        let mut rng = Rng::new(7);
        let a = rng.uniform_tensor(&[3, 3], -2.0, 2.0);
        let out = a.matmul(&Tensor::eye(3)).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn matmul_zero_case() {
        let a = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = Tensor::zeros(&[2, 1]);
        let out = a.matmul(&z).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn matmul_hand_computed() {
        // [[1,2],[3,4]] x [[5],[6]] = [[17],[39]]
        let a = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(&[2, 1], vec![5.0, 6.0]).unwrap();
        let out = a.matmul(&b).unwrap();
        assert_eq!(out.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "unexpected message: {msg}");
    }

    #[test]
    fn silu_values() {
        assert_eq!(silu(0.0), 0.0);
        // 1 * sigmoid(1), computed independently from 1/(1+e^-1)
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((silu(1.0) - expected).abs() < 1e-15);
        assert_eq!(Tensor::scalar(-3.0).relu().data()[0], 0.0);
    }

    #[test]
    fn reduce_examples() {
        let v = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v.sum_axis(0).unwrap().data(), &[6.0]);

        // argmax ties break toward the lowest index
        let t = Tensor::from_vec(&[3], vec![0.1, 0.9, 0.9]).unwrap();
        assert_eq!(t.argmax_axis(0).unwrap().data(), &[1.0]);

        // brute-force max over axis 0 of [[1,5],[3,2]]
        let m = Tensor::from_vec(&[2, 2], vec![1.0, 5.0, 3.0, 2.0]).unwrap();
        assert_eq!(m.max_axis(0).unwrap().data(), &[3.0, 5.0]);
    }

    #[test]
    fn reduce_axis_out_of_range() {
        let v = Tensor::zeros(&[3]);
        assert!(matches!(
            v.sum_axis(1),
            Err(KanError::AxisOutOfRange { axis: 1, rank: 1 })
        ));
    }

    #[test]
    fn binary_ops_reject_mismatched_shapes() {
        let a = Tensor::zeros(&[2, 2]);
        let b = Tensor::zeros(&[2, 3]);
        assert!(a.add(&b).is_err());
        // scalar broadcast is allowed
        let s = Tensor::scalar(2.0);
        let out = a.add(&s).unwrap();
        assert_eq!(out.data(), &[2.0; 4]);
    }

    #[test]
    fn determinism_same_inputs_bit_identical() {
        let mut rng = Rng::new(123);
        let a = rng.uniform_tensor(&[17, 23], -1.0, 1.0);
        let b = rng.uniform_tensor(&[23, 11], -1.0, 1.0);
        let x = a.matmul(&b).unwrap();
        let y = a.matmul(&b).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn seeded_rng_reproducible() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = Rng::new(42);
        let mut d = Rng::new(43);
        assert_ne!(c.next_u64(), d.next_u64());
    }

    #[test]
    fn substreams_are_independent_and_reproducible() {
        let root = Rng::new(9);
        let mut s1 = root.substream(1);
        let mut s1b = root.substream(1);
        let mut s2 = root.substream(2);
        let a: Vec<u64> = (0..16).map(|_| s1.next_u64()).collect();
        let b: Vec<u64> = (0..16).map(|_| s1b.next_u64()).collect();
        let c: Vec<u64> = (0..16).map(|_| s2.next_u64()).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn matmul_variants_agree_with_explicit_transpose() {
        let mut rng = Rng::new(41);
        let a = rng.uniform_tensor(&[9, 5], -1.0, 1.0);
        let b = rng.uniform_tensor(&[9, 7], -1.0, 1.0);
        let tn = a.matmul_tn(&b).unwrap();
        let reference = a.transposed().unwrap().matmul(&b).unwrap();
        assert_eq!(tn.shape(), &[5, 7]);
        for (x, y) in tn.data().iter().zip(reference.data()) {
            assert!((x - y).abs() < 1e-12);
        }

        let c = rng.uniform_tensor(&[4, 9], -1.0, 1.0);
        let d = rng.uniform_tensor(&[6, 9], -1.0, 1.0);
        let nt = c.matmul_nt(&d).unwrap();
        let reference = c.matmul(&d.transposed().unwrap()).unwrap();
        assert_eq!(nt.shape(), &[4, 6]);
        for (x, y) in nt.data().iter().zip(reference.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_round_trip() {
        let mut rng = Rng::new(5);
        let a = rng.uniform_tensor(&[4, 7], -1.0, 1.0);
        let back = a.transposed().unwrap().transposed().unwrap();
        assert_eq!(a, back);
    }
}
