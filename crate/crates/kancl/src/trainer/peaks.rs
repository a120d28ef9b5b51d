//! Sequential training on the 1D Gaussian peaks, one peak per task.
//!
//! A [1, 1] KAN with a dense grid over [0, 1] is trained full-batch on each
//! peak in turn. After every task the learned function is measured against
//! the ground truth on a dense evaluation grid, reported as one RMSE per
//! peak window. Freezing the scale and bias terms confines every update to
//! the spline coefficients whose basis support contains the task's inputs.

use crate::data::{gaussian_peaks, PeaksDataset};
use crate::error::Result;
use crate::network::{Network, NetworkSpec};
use crate::tensor::{Rng, Tensor};
use crate::trainer::{step_regress, OptKind, Optimizer};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeaksConfig {
    pub n_peaks: usize,
    pub points_per_peak: usize,
    pub amplitude: f64,
    pub sigma: f64,
    pub grid_size: usize,
    pub order: usize,
    pub lr: f64,
    /// Full-batch steps per task.
    pub epochs_per_task: usize,
    pub seed: u64,
    /// Dense evaluation points per peak window.
    pub eval_per_window: usize,
    /// Trainability of the scale factors (w_s and w_b together) and bias.
    pub train_scales: bool,
    pub train_bias: bool,
}

impl Default for PeaksConfig {
    fn default() -> PeaksConfig {
        PeaksConfig {
            n_peaks: 5,
            points_per_peak: 200,
            amplitude: 1.0,
            sigma: 0.02,
            grid_size: 200,
            order: 3,
            lr: 1.0,
            epochs_per_task: 2000,
            seed: 0,
            eval_per_window: 200,
            train_scales: false,
            train_bias: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeaksReport {
    pub config: PeaksConfig,
    /// RMSE per window of the untrained network.
    pub initial_rmse: Vec<f64>,
    /// `rmse_after_task[t][w]`: RMSE in window `w+1` after task `t+1`.
    pub rmse_after_task: Vec<Vec<f64>>,
    /// Dense-grid x positions, final predictions, and ground truth.
    pub eval_xs: Vec<f64>,
    pub final_predictions: Vec<f64>,
    pub targets: Vec<f64>,
    /// Window index (1-based) of each evaluation point.
    pub eval_window: Vec<usize>,
}

impl PeaksReport {
    /// RMSE over every window after the final task.
    pub fn final_rmse(&self) -> &[f64] {
        self.rmse_after_task.last().expect("at least one task")
    }
}

fn eval_grid(ds: &PeaksDataset, per_window: usize) -> (Vec<f64>, Vec<usize>, Vec<f64>) {
    let mut xs = Vec::with_capacity(ds.n_peaks * per_window);
    let mut windows = Vec::with_capacity(ds.n_peaks * per_window);
    let mut targets = Vec::with_capacity(ds.n_peaks * per_window);
    for j in 1..=ds.n_peaks {
        let (lo, hi) = ds.window(j);
        for i in 0..per_window {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / per_window as f64;
            xs.push(x);
            windows.push(j);
            targets.push(ds.target(x, j));
        }
    }
    (xs, windows, targets)
}

fn predict(net: &mut Network, xs: &[f64]) -> Result<Vec<f64>> {
    let x = Tensor::from_vec(&[xs.len(), 1], xs.to_vec())?;
    let (out, _) = net.forward(&x, false)?;
    Ok(out.data().to_vec())
}

fn rmse_per_window(
    predictions: &[f64],
    targets: &[f64],
    windows: &[usize],
    n_peaks: usize,
) -> Vec<f64> {
    let mut sq = vec![0.0; n_peaks];
    let mut counts = vec![0usize; n_peaks];
    for i in 0..predictions.len() {
        let w = windows[i] - 1;
        let d = predictions[i] - targets[i];
        sq[w] += d * d;
        counts[w] += 1;
    }
    sq.iter()
        .zip(&counts)
        .map(|(&s, &c)| (s / c.max(1) as f64).sqrt())
        .collect()
}

/// Runs the sequential-peaks study for one trainability configuration.
pub fn run_peaks_cl(config: &PeaksConfig) -> Result<PeaksReport> {
    let rng = Rng::new(config.seed);
    let ds = gaussian_peaks(
        config.n_peaks,
        config.points_per_peak,
        config.amplitude,
        config.sigma,
        &mut rng.substream(1),
    )?;

    let mut spec = NetworkSpec::kan(vec![1, 1], config.grid_size, config.order)
        .with_domain(0.0, 1.0)
        .with_beta_term();
    spec.train_ws = config.train_scales;
    spec.train_wb = config.train_scales;
    spec.train_beta = config.train_bias;
    let mut net = spec.build(&mut rng.substream(2))?;
    let mut opt = Optimizer::new(OptKind::Sgd, config.lr, &mut net);

    let (eval_xs, eval_window, targets) = eval_grid(&ds, config.eval_per_window);
    let initial_rmse = rmse_per_window(
        &predict(&mut net, &eval_xs)?,
        &targets,
        &eval_window,
        config.n_peaks,
    );

    let mut rmse_after_task = Vec::with_capacity(config.n_peaks);
    for task in 1..=config.n_peaks {
        let points = ds.task_points(task);
        let xs: Vec<f64> = points.iter().map(|&i| ds.xs[i]).collect();
        let ys: Vec<f64> = points.iter().map(|&i| ds.ys[i]).collect();
        let x = Tensor::from_vec(&[xs.len(), 1], xs)?;
        let y = Tensor::from_vec(&[ys.len(), 1], ys)?;
        for _ in 0..config.epochs_per_task {
            step_regress(&mut net, &x, &y, &mut opt)?;
        }
        rmse_after_task.push(rmse_per_window(
            &predict(&mut net, &eval_xs)?,
            &targets,
            &eval_window,
            config.n_peaks,
        ));
    }

    let final_predictions = predict(&mut net, &eval_xs)?;
    Ok(PeaksReport {
        config: config.clone(),
        initial_rmse,
        rmse_after_task,
        eval_xs,
        final_predictions,
        targets,
        eval_window,
    })
}

/// The four trainability configurations of the ablation: everything frozen,
/// scales+bias trainable, scales trainable only, bias trainable only.
///
/// Full-batch gradient descent diverges at the reference rate (1.0) once the
/// bias term trains, so those two configurations run at half the base rate.
pub fn ablation_configs(base: &PeaksConfig) -> Vec<(&'static str, PeaksConfig)> {
    let mut out = Vec::new();
    for (name, scales, bias) in [
        ("frozen", false, false),
        ("scales_and_bias_trainable", true, true),
        ("scales_trainable", true, false),
        ("bias_trainable", false, true),
    ] {
        let lr = if bias { base.lr * 0.5 } else { base.lr };
        out.push((
            name,
            PeaksConfig {
                train_scales: scales,
                train_bias: bias,
                lr,
                ..base.clone()
            },
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untrained_rmse_equals_direct_measurement() {
        let config = PeaksConfig {
            epochs_per_task: 1,
            n_peaks: 2,
            points_per_peak: 10,
            grid_size: 20,
            eval_per_window: 25,
            ..PeaksConfig::default()
        };
        let report = run_peaks_cl(&config).unwrap();
        assert_eq!(report.initial_rmse.len(), 2);
        // untrained function is the randomly-initialized phi; its error is
        // bounded by amplitude plus the small initial function magnitude
        for &r in &report.initial_rmse {
            assert!(r.is_finite() && r < 3.0);
        }
    }

    #[test]
    fn single_peak_is_ordinary_regression() {
        let config = PeaksConfig {
            n_peaks: 1,
            points_per_peak: 100,
            sigma: 0.1,
            grid_size: 50,
            epochs_per_task: 800,
            eval_per_window: 100,
            ..PeaksConfig::default()
        };
        let report = run_peaks_cl(&config).unwrap();
        assert_eq!(report.rmse_after_task.len(), 1);
        assert!(
            report.final_rmse()[0] < 0.05,
            "single-task fit should converge: {}",
            report.final_rmse()[0]
        );
    }

    #[test]
    fn frozen_scales_preserve_earlier_peaks() {
        let config = PeaksConfig {
            epochs_per_task: 700,
            points_per_peak: 80,
            eval_per_window: 60,
            ..PeaksConfig::default()
        };
        let report = run_peaks_cl(&config).unwrap();
        // after all five tasks every window is fit
        for (w, &r) in report.final_rmse().iter().enumerate() {
            assert!(r < 0.06, "window {}: rmse {r}", w + 1);
        }
        // later tasks barely touch the first window: only basis functions
        // whose support straddles a window boundary can move it at all
        let after_first = report.rmse_after_task[0][0];
        let after_last = report.rmse_after_task[4][0];
        assert!(
            after_last <= after_first + 1e-3,
            "first window degraded: {after_first} -> {after_last}"
        );
    }
}
