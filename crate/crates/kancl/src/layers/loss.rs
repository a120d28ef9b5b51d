//! Loss functions: softmax cross-entropy for classification, mean squared
//! error for 1D regression. Both return the scalar loss and the gradient
//! with respect to their first argument.

use crate::error::{KanError, Result};
use crate::tensor::Tensor;

/// Mean cross-entropy over the batch with log-sum-exp stabilization.
/// `grad = (softmax - onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[u8]) -> Result<(f64, Tensor)> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() {
        return Err(KanError::ShapeMismatch {
            op: "softmax_cross_entropy",
            left: logits.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    let (batch, classes) = (logits.shape()[0], logits.shape()[1]);
    for &label in labels {
        if label as usize >= classes {
            return Err(KanError::LabelOutOfRange(label, classes as u8));
        }
    }
    let mut grad = Tensor::zeros(&[batch, classes]);
    let gdata = grad.data_mut();
    let mut total = 0.0;
    let scale = 1.0 / batch as f64;
    for b in 0..batch {
        let row = &logits.data()[b * classes..(b + 1) * classes];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &l in row {
            denom += (l - max).exp();
        }
        let lse = max + denom.ln();
        let y = labels[b] as usize;
        total += lse - row[y];
        let grow = &mut gdata[b * classes..(b + 1) * classes];
        for (c, &l) in row.iter().enumerate() {
            grow[c] = ((l - max).exp() / denom) * scale;
        }
        grow[y] -= scale;
    }
    Ok((total * scale, grad))
}

/// Mean squared error over all entries. `grad = 2 (pred - target) / N`.
pub fn mse(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(KanError::ShapeMismatch {
            op: "mse",
            left: pred.shape().to_vec(),
            right: target.shape().to_vec(),
        });
    }
    let n = pred.len() as f64;
    let mut total = 0.0;
    let grad_data: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            total += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((total / n, Tensor::from_vec(pred.shape(), grad_data)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::filled(&[3, 10], 0.7);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 5, 9]).unwrap();
        assert!((loss - 10.0f64.ln()).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn confident_correct_logits_drive_loss_to_zero() {
        let mut logits = Tensor::zeros(&[1, 10]);
        logits.data_mut()[3] = 1e6;
        let (loss, _) = softmax_cross_entropy(&logits, &[3]).unwrap();
        assert!(loss.abs() < 1e-9, "{loss}");
        assert!(loss.is_finite());
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let logits = Tensor::zeros(&[1, 10]);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[10]),
            Err(KanError::LabelOutOfRange(10, 10))
        ));
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = Rng::new(19);
        let logits = rng.uniform_tensor(&[4, 10], -2.0, 2.0);
        let labels = [1u8, 0, 9, 4];
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let eps = 1e-6;
        for idx in 0..logits.len() {
            let mut lp = logits.clone();
            lp.data_mut()[idx] += eps;
            let mut lm = logits.clone();
            lm.data_mut()[idx] -= eps;
            let (up, _) = softmax_cross_entropy(&lp, &labels).unwrap();
            let (down, _) = softmax_cross_entropy(&lm, &labels).unwrap();
            let fd = (up - down) / (2.0 * eps);
            assert!(
                (grad.data()[idx] - fd).abs() < 1e-6,
                "logit {idx}: {} vs {fd}",
                grad.data()[idx]
            );
        }
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let mut rng = Rng::new(20);
        let pred = rng.uniform_tensor(&[6], -1.0, 1.0);
        let target = rng.uniform_tensor(&[6], -1.0, 1.0);
        let (_, grad) = mse(&pred, &target).unwrap();
        let eps = 1e-6;
        for idx in 0..pred.len() {
            let mut pp = pred.clone();
            pp.data_mut()[idx] += eps;
            let mut pm = pred.clone();
            pm.data_mut()[idx] -= eps;
            let (up, _) = mse(&pp, &target).unwrap();
            let (down, _) = mse(&pm, &target).unwrap();
            let fd = (up - down) / (2.0 * eps);
            assert!((grad.data()[idx] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let t = Tensor::from_vec(&[3], vec![0.1, 0.2, 0.3]).unwrap();
        let (loss, grad) = mse(&t, &t).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&v| v == 0.0));
    }
}
