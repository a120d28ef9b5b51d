//! Optimization and the class-incremental training protocol.
//!
//! The optimizer keeps moment state only for trainable parameter arrays, so
//! frozen parameters are structurally incapable of drifting. [`run_cl`]
//! trains one task at a time with the learning rate decayed at each task
//! boundary and evaluates on the fixed test set after every epoch.

mod grid;
mod metrics;
mod peaks;

pub use grid::{run_grid, GridOutcome, GridRunResult, GridSpec, RunConfig};
pub use metrics::{
    read_confusion_csv, read_grid_csv, read_grid_summary, read_run_csv, read_run_summary,
    write_confusion_csv, write_grid_csv, write_grid_summary, write_run_csv, write_run_summary,
    GridRow, GridSummary, RunSummary,
};
pub use peaks::{ablation_configs, run_peaks_cl, PeaksConfig, PeaksReport};

use crate::data::{ClTask, LabeledImages};
use crate::error::{KanError, Result};
use crate::layers::softmax_cross_entropy;
use crate::network::Network;
use crate::tensor::{Rng, Tensor};
use serde::{Deserialize, Serialize};
use std::time::Instant;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptKind {
    Sgd,
    Adam,
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Gradient-descent family optimizer. State arrays exist only for the
/// network's trainable parameters, in enumeration order.
pub struct Optimizer {
    pub kind: OptKind,
    lr: f64,
    step_count: u64,
    state: Vec<Vec<Moments>>,
}

impl Optimizer {
    pub fn new(kind: OptKind, lr: f64, network: &mut Network) -> Optimizer {
        let state = network
            .layers
            .iter_mut()
            .map(|layer| {
                layer
                    .trainable_arrays_mut()
                    .into_iter()
                    .map(|(_, arr)| Moments {
                        m: vec![0.0; arr.len()],
                        v: vec![0.0; arr.len()],
                    })
                    .collect()
            })
            .collect();
        Optimizer {
            kind,
            lr,
            step_count: 0,
            state,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    /// One parameter update from per-layer gradients (aligned with the
    /// network's trainable arrays).
    pub fn apply(&mut self, network: &mut Network, grads: &[Vec<Vec<f64>>]) -> Result<()> {
        if grads.len() != network.layers.len() {
            return Err(KanError::InvalidConfig(
                "gradient set does not match network layers".into(),
            ));
        }
        self.step_count += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step_count as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step_count as i32);
        for (layer_idx, layer) in network.layers.iter_mut().enumerate() {
            let arrays = layer.trainable_arrays_mut();
            if arrays.len() != grads[layer_idx].len() {
                return Err(KanError::InvalidConfig(format!(
                    "layer {layer_idx}: {} gradient arrays for {} trainable arrays",
                    grads[layer_idx].len(),
                    arrays.len()
                )));
            }
            for (slot, (_, params)) in arrays.into_iter().enumerate() {
                let g = &grads[layer_idx][slot];
                if g.len() != params.len() {
                    return Err(KanError::InvalidConfig(format!(
                        "layer {layer_idx} slot {slot}: gradient length {} vs {}",
                        g.len(),
                        params.len()
                    )));
                }
                match self.kind {
                    OptKind::Sgd => {
                        for (p, &gi) in params.iter_mut().zip(g.iter()) {
                            *p -= self.lr * gi;
                        }
                    }
                    OptKind::Adam => {
                        let state = &mut self.state[layer_idx][slot];
                        for i in 0..params.len() {
                            let gi = g[i];
                            state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * gi;
                            state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                            let m_hat = state.m[i] / bc1;
                            let v_hat = state.v[i] / bc2;
                            params[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Forward, loss, backward, update on one classification batch.
/// Returns the batch loss; a non-finite loss aborts with a diagnostic.
pub fn step_classify(
    network: &mut Network,
    x: &Tensor,
    labels: &[u8],
    opt: &mut Optimizer,
) -> Result<f64> {
    let (logits, tape) = network.forward(x, true)?;
    let (loss, grad) = softmax_cross_entropy(&logits, labels)?;
    if !loss.is_finite() {
        return Err(KanError::NonFinite(format!(
            "training loss at step {}",
            opt.step_count + 1
        )));
    }
    let grads = network.backward(&grad, tape)?;
    opt.apply(network, &grads)?;
    Ok(loss)
}

/// Like [`step_classify`] for regression under mean squared error.
pub fn step_regress(
    network: &mut Network,
    x: &Tensor,
    y: &Tensor,
    opt: &mut Optimizer,
) -> Result<f64> {
    let (out, tape) = network.forward(x, true)?;
    let (loss, grad) = crate::layers::mse(&out, y)?;
    if !loss.is_finite() {
        return Err(KanError::NonFinite(format!(
            "training loss at step {}",
            opt.step_count + 1
        )));
    }
    let grads = network.backward(&grad, tape)?;
    opt.apply(network, &grads)?;
    Ok(loss)
}

/// Task ordering plus the per-task schedule: at task `t` the learning rate
/// is `lr0 * decay^(t-1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClSchedule {
    pub epochs_per_task: usize,
    pub lr0: f64,
    pub decay: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub optimizer: OptKind,
}

impl ClSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs_per_task < 1 {
            return Err(KanError::InvalidConfig(
                "epochs_per_task: must be >= 1".into(),
            ));
        }
        if self.batch_size < 1 {
            return Err(KanError::InvalidConfig("batch_size: must be >= 1".into()));
        }
        if !(self.lr0 > 0.0) || !self.lr0.is_finite() {
            return Err(KanError::InvalidConfig("lr: must be positive".into()));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(KanError::InvalidConfig("decay: must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn lr_at_task(&self, task_index: usize) -> f64 {
        self.lr0 * self.decay.powi(task_index as i32 - 1)
    }
}

/// One epoch's measurements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub test_accuracy: f64,
}

/// Everything recorded over one continual-learning run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub records: Vec<EpochRecord>,
    /// One 10x10 confusion matrix per epoch, rows = true, cols = predicted.
    pub confusions: Vec<[[u32; 10]; 10]>,
    pub per_task_best: Vec<f64>,
    pub wall_seconds: f64,
    pub param_count: usize,
}

impl RunMetrics {
    /// Highest test accuracy observed during the final task.
    pub fn best_final_task(&self) -> f64 {
        self.per_task_best.last().copied().unwrap_or(0.0)
    }

    pub fn accuracy_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.test_accuracy).collect()
    }
}

/// Tallies a 10x10 confusion matrix, `m[true][predicted]`.
pub fn confusion(predictions: &[usize], labels: &[u8]) -> Result<[[u32; 10]; 10]> {
    if predictions.len() != labels.len() {
        return Err(KanError::ShapeMismatch {
            op: "confusion",
            left: vec![predictions.len()],
            right: vec![labels.len()],
        });
    }
    let mut m = [[0u32; 10]; 10];
    for (&p, &t) in predictions.iter().zip(labels.iter()) {
        if t > 9 {
            return Err(KanError::LabelOutOfRange(t, 10));
        }
        if p > 9 {
            return Err(KanError::LabelOutOfRange(p as u8, 10));
        }
        m[t as usize][p] += 1;
    }
    Ok(m)
}

pub fn accuracy_of(m: &[[u32; 10]; 10]) -> f64 {
    let total: u32 = m.iter().flatten().sum();
    let trace: u32 = (0..10).map(|i| m[i][i]).sum();
    if total == 0 {
        0.0
    } else {
        trace as f64 / total as f64
    }
}

/// Full-test-set evaluation: accuracy plus the confusion matrix.
pub fn evaluate(
    network: &mut Network,
    test: &LabeledImages,
    test_indices: &[usize],
) -> Result<(f64, [[u32; 10]; 10])> {
    let conv = network.spec.model.is_convolutional();
    // window unfolding makes conv batches memory-hungry
    let batch = if conv { 64 } else { 512 };
    let mut predictions = Vec::with_capacity(test_indices.len());
    let mut labels = Vec::with_capacity(test_indices.len());
    for chunk in test_indices.chunks(batch) {
        let (x, y) = if conv {
            test.batch_images(chunk)
        } else {
            test.batch_flat(chunk)
        };
        let (logits, _) = network.forward(&x, false)?;
        predictions.extend(logits.argmax_rows()?);
        labels.extend(y);
    }
    let m = confusion(&predictions, &labels)?;
    Ok((accuracy_of(&m), m))
}

/// Class-incremental training: task `t` trains only on task-`t` samples for
/// `epochs_per_task` epochs at `lr0 * decay^(t-1)`, evaluating on the fixed
/// test set after every epoch.
pub fn run_cl(
    network: &mut Network,
    schedule: &ClSchedule,
    train: &LabeledImages,
    tasks: &[ClTask],
    test: &LabeledImages,
    test_indices: &[usize],
) -> Result<RunMetrics> {
    run_cl_with(network, schedule, train, tasks, test, test_indices, &mut |_| {})
}

/// [`run_cl`] with a per-epoch observer (progress printing and the like).
pub fn run_cl_with(
    network: &mut Network,
    schedule: &ClSchedule,
    train: &LabeledImages,
    tasks: &[ClTask],
    test: &LabeledImages,
    test_indices: &[usize],
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<RunMetrics> {
    schedule.validate()?;
    if tasks.is_empty() {
        return Err(KanError::InvalidConfig("no tasks".into()));
    }
    let start = Instant::now();
    let conv = network.spec.model.is_convolutional();
    let mut opt = Optimizer::new(schedule.optimizer, schedule.lr0, network);
    // shuffling gets its own substream so it is independent of init draws
    let mut shuffle_rng = Rng::new(schedule.seed).substream(1);

    let mut records = Vec::new();
    let mut confusions = Vec::new();
    let mut per_task_best = Vec::with_capacity(tasks.len());
    let mut epoch_counter = 0usize;

    for task in tasks {
        let lr = schedule.lr_at_task(task.task_index);
        opt.set_lr(lr);
        let mut task_best = 0.0f64;
        for _ in 0..schedule.epochs_per_task {
            epoch_counter += 1;
            let mut indices = task.indices.clone();
            shuffle_rng.shuffle(&mut indices);
            let mut loss_sum = 0.0;
            let mut batches = 0usize;
            for chunk in indices.chunks(schedule.batch_size) {
                if chunk.len() < 2 {
                    continue; // batch statistics are undefined on singletons
                }
                let (x, y) = if conv {
                    train.batch_images(chunk)
                } else {
                    train.batch_flat(chunk)
                };
                loss_sum += step_classify(network, &x, &y, &mut opt)?;
                batches += 1;
            }
            let train_loss = if batches > 0 {
                loss_sum / batches as f64
            } else {
                f64::NAN
            };
            let (acc, matrix) = evaluate(network, test, test_indices)?;
            task_best = task_best.max(acc);
            let record = EpochRecord {
                epoch: epoch_counter,
                task: task.task_index,
                lr,
                train_loss,
                test_accuracy: acc,
            };
            on_epoch(&record);
            records.push(record);
            confusions.push(matrix);
        }
        per_task_best.push(task_best);
    }

    Ok(RunMetrics {
        records,
        confusions,
        per_task_best,
        wall_seconds: start.elapsed().as_secs_f64(),
        param_count: network.trainable_param_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkSpec;

    #[test]
    fn sgd_step_matches_hand_computation() {
        // [1,1] KAN with G=1, k=0 has exactly one parameter c; the layer
        // output is c for any input, so mse(c, y) gives dL/dc = 2(c - y).
        let spec = NetworkSpec::kan(vec![1, 1], 1, 0).cl_mode(false).with_domain(0.0, 1.0);
        let mut net = spec.build(&mut Rng::new(1)).unwrap();
        assert_eq!(net.trainable_param_count(), 1);
        let c0 = {
            let mut arrays = net.layers[0].trainable_arrays_mut();
            // silence the residual term so the output is the coefficient
            arrays[0].1[0] = 0.25;
            0.25
        };
        for layer in &mut net.layers {
            for (name, arr) in layer.state_arrays_mut() {
                match name {
                    "w_b" => arr.fill(0.0),
                    "w_s" => arr.fill(1.0),
                    _ => {}
                }
            }
        }
        let mut opt = Optimizer::new(OptKind::Sgd, 0.1, &mut net);
        let x = Tensor::from_vec(&[1, 1], vec![0.4]).unwrap();
        let y = Tensor::from_vec(&[1, 1], vec![1.0]).unwrap();
        let loss = step_regress(&mut net, &x, &y, &mut opt).unwrap();
        assert!((loss - (c0 - 1.0) * (c0 - 1.0)).abs() < 1e-15);
        let expected = c0 - 0.1 * 2.0 * (c0 - 1.0);
        let arrays = net.layers[0].trainable_arrays_mut();
        assert_eq!(arrays[0].1[0], expected);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let spec = NetworkSpec::kan(vec![2, 2], 4, 2);
        let mut net = spec.build(&mut Rng::new(2)).unwrap();
        let before = net.state_snapshot();
        // perfect prediction: mse gradient is exactly zero
        let x = Tensor::from_vec(&[1, 2], vec![0.3, -0.2]).unwrap();
        let (y, _) = net.forward(&x, true).unwrap();
        let mut opt = Optimizer::new(OptKind::Sgd, 0.5, &mut net);
        step_regress(&mut net, &x, &y, &mut opt).unwrap();
        assert_eq!(before, net.state_snapshot());
    }

    #[test]
    fn frozen_parameters_bit_identical_over_100_steps() {
        let spec = NetworkSpec::kan(vec![3, 4, 2], 5, 3).cl_mode(true).with_beta_term();
        let mut net = spec.build(&mut Rng::new(3)).unwrap();
        let frozen_before: Vec<Vec<f64>> = snapshot_frozen(&net);
        let mut opt = Optimizer::new(OptKind::Adam, 1e-2, &mut net);
        let mut rng = Rng::new(4);
        for _ in 0..100 {
            let x = rng.uniform_tensor(&[8, 3], -1.0, 1.0);
            let labels: Vec<u8> = (0..8).map(|_| (rng.next_u64() % 2) as u8).collect();
            step_classify(&mut net, &x, &labels, &mut opt).unwrap();
        }
        assert_eq!(frozen_before, snapshot_frozen(&net));
        // and the trainable coefficients did move
        let spec_fixed = NetworkSpec::kan(vec![3, 4, 2], 5, 3).cl_mode(true).with_beta_term();
        let reference = spec_fixed.build(&mut Rng::new(3)).unwrap();
        assert_ne!(net.state_snapshot(), reference.state_snapshot());
    }

    /// Frozen arrays = state arrays minus trainable ones, matched by name.
    fn snapshot_frozen(net: &Network) -> Vec<Vec<f64>> {
        let mut copy = net.clone();
        let mut out = Vec::new();
        for layer in &mut copy.layers {
            let trainable: Vec<&'static str> =
                layer.trainable_arrays_mut().into_iter().map(|(n, _)| n).collect();
            for (name, arr) in layer.state_arrays_mut() {
                if !trainable.contains(&name) {
                    out.push(arr.to_vec());
                }
            }
        }
        out
    }

    #[test]
    fn ws_trainable_run_changes_only_coef_and_ws() {
        let spec = NetworkSpec::kan(vec![3, 3], 5, 3).cl_mode(true);
        let mut net = spec.build(&mut Rng::new(5)).unwrap();
        let mut before: Vec<(String, Vec<f64>)> = Vec::new();
        for layer in &mut net.clone().layers {
            for (name, arr) in layer.state_arrays_mut() {
                before.push((name.to_string(), arr.to_vec()));
            }
        }
        let mut opt = Optimizer::new(OptKind::Sgd, 0.05, &mut net);
        let x = Rng::new(6).uniform_tensor(&[4, 3], -1.0, 1.0);
        step_classify(&mut net, &x, &[0, 1, 2, 1], &mut opt).unwrap();
        let mut idx = 0;
        for layer in &mut net.layers {
            for (name, arr) in layer.state_arrays_mut() {
                let (ref before_name, ref before_arr) = before[idx];
                assert_eq!(name, before_name);
                match name {
                    "coef" | "w_s" => assert_ne!(&arr.to_vec(), before_arr, "{name} should move"),
                    _ => assert_eq!(&arr.to_vec(), before_arr, "{name} should be frozen"),
                }
                idx += 1;
            }
        }
    }

    #[test]
    fn lr_decay_schedule() {
        let schedule = ClSchedule {
            epochs_per_task: 1,
            lr0: 1e-5,
            decay: 0.8,
            seed: 0,
            batch_size: 64,
            optimizer: OptKind::Adam,
        };
        // lr at task 5 = 1e-5 * 0.8^4 = 4.096e-6
        assert!((schedule.lr_at_task(5) - 4.096e-6).abs() < 1e-18);
        let flat = ClSchedule {
            decay: 1.0,
            ..schedule
        };
        for t in 1..=5 {
            assert_eq!(flat.lr_at_task(t), 1e-5);
        }
    }

    #[test]
    fn confusion_examples() {
        // perfect predictions produce a diagonal matrix
        let labels: Vec<u8> = (0..10).collect();
        let preds: Vec<usize> = (0..10).collect();
        let m = confusion(&preds, &labels).unwrap();
        for t in 0..10 {
            for p in 0..10 {
                assert_eq!(m[t][p], u32::from(t == p));
            }
        }
        assert_eq!(accuracy_of(&m), 1.0);

        // constant zero predictor on a balanced set: one column, 10% accuracy
        let labels: Vec<u8> = (0..100).map(|i| (i % 10) as u8).collect();
        let preds = vec![0usize; 100];
        let m = confusion(&preds, &labels).unwrap();
        for t in 0..10 {
            assert_eq!(m[t][0], 10);
        }
        assert!((accuracy_of(&m) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn confusion_matches_hand_tally() {
        let mut rng = Rng::new(7);
        let labels: Vec<u8> = (0..100).map(|_| (rng.next_u64() % 10) as u8).collect();
        let preds: Vec<usize> = (0..100).map(|_| (rng.next_u64() % 10) as usize).collect();
        let m = confusion(&preds, &labels).unwrap();
        // independent tally
        let mut hand = [[0u32; 10]; 10];
        for i in 0..100 {
            hand[labels[i] as usize][preds[i]] += 1;
        }
        assert_eq!(m, hand);
        let total: u32 = m.iter().flatten().sum();
        assert_eq!(total, 100);
    }

    #[test]
    fn confusion_rejects_out_of_range() {
        assert!(confusion(&[0], &[10]).is_err());
        assert!(confusion(&[11], &[0]).is_err());
        assert!(confusion(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn schedule_validation() {
        let good = ClSchedule {
            epochs_per_task: 1,
            lr0: 1e-3,
            decay: 1.0,
            seed: 0,
            batch_size: 4,
            optimizer: OptKind::Sgd,
        };
        assert!(good.validate().is_ok());
        assert!(ClSchedule { epochs_per_task: 0, ..good.clone() }.validate().is_err());
        assert!(ClSchedule { decay: 0.0, ..good.clone() }.validate().is_err());
        assert!(ClSchedule { decay: 1.5, ..good.clone() }.validate().is_err());
        assert!(ClSchedule { lr0: -1.0, ..good }.validate().is_err());
    }
}
