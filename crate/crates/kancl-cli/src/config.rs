//! Run configuration: a single TOML document per run, fully validated
//! before anything executes. Command-line flags override file values.

use kancl::network::{ModelKind, NetworkSpec};
use kancl::trainer::{ClSchedule, GridSpec, OptKind, PeaksConfig};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    /// mlp | kan | convnet | kanv | convkan | kkan
    pub model: String,
    /// Widths for the linear families; ignored by conv families.
    pub widths: Vec<usize>,
    pub grid_size: usize,
    pub order: usize,
    pub train_ws: bool,
    pub train_wb: bool,
    pub train_beta: bool,
    pub with_beta: bool,
    pub batch_norm: bool,
    pub epochs_per_task: usize,
    pub lr: f64,
    pub decay: f64,
    pub seed: u64,
    pub batch_size: usize,
    /// adam | sgd
    pub optimizer: String,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// 0 keeps the full test set; otherwise exactly this many per class.
    pub test_per_class: usize,
    /// 0 trains on every task sample; otherwise at most this many per task.
    pub train_limit: usize,
    /// Task class sets; defaults to {0,1},{2,3},...,{8,9}.
    pub class_pairs: Option<Vec<Vec<u8>>>,
    pub grid: Option<GridSection>,
    pub peaks: Option<PeaksSection>,
}

impl Default for FileConfig {
    fn default() -> FileConfig {
        // the efficient-KAN row of the optimal-configuration table
        FileConfig {
            model: "kan".into(),
            widths: vec![784, 128, 10],
            grid_size: 5,
            order: 3,
            train_ws: true,
            train_wb: false,
            train_beta: false,
            with_beta: false,
            batch_norm: true,
            epochs_per_task: 5,
            lr: 1e-5,
            decay: 0.8,
            seed: 42,
            batch_size: 64,
            optimizer: "adam".into(),
            data_dir: None,
            out_dir: None,
            test_per_class: 0,
            train_limit: 0,
            class_pairs: None,
            grid: None,
            peaks: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lrs: Vec<f64>,
    pub decays: Vec<f64>,
    pub epoch_counts: Vec<usize>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeaksSection {
    pub n_peaks: usize,
    pub points_per_peak: usize,
    pub amplitude: f64,
    pub sigma: f64,
    pub grid_size: usize,
    pub order: usize,
    pub lr: f64,
    pub epochs_per_task: usize,
    pub eval_per_window: usize,
}

impl Default for PeaksSection {
    fn default() -> PeaksSection {
        let d = PeaksConfig::default();
        PeaksSection {
            n_peaks: d.n_peaks,
            points_per_peak: d.points_per_peak,
            amplitude: d.amplitude,
            sigma: d.sigma,
            grid_size: d.grid_size,
            order: d.order,
            lr: d.lr,
            epochs_per_task: d.epochs_per_task,
            eval_per_window: d.eval_per_window,
        }
    }
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> Result<FileConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    pub fn model_kind(&self) -> Result<ModelKind, String> {
        match self.model.as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "kan" => Ok(ModelKind::Kan),
            "convnet" => Ok(ModelKind::Convnet),
            "kanv" => Ok(ModelKind::Kanv),
            "convkan" => Ok(ModelKind::Convkan),
            "kkan" => Ok(ModelKind::Kkan),
            other => Err(format!(
                "model: unknown value {other:?} (expected mlp|kan|convnet|kanv|convkan|kkan)"
            )),
        }
    }

    pub fn optimizer_kind(&self) -> Result<OptKind, String> {
        match self.optimizer.as_str() {
            "adam" => Ok(OptKind::Adam),
            "sgd" => Ok(OptKind::Sgd),
            other => Err(format!("optimizer: unknown value {other:?} (expected adam|sgd)")),
        }
    }

    pub fn network_spec(&self) -> Result<NetworkSpec, String> {
        let model = self.model_kind()?;
        let spec = match model {
            ModelKind::Mlp => NetworkSpec::mlp(self.widths.clone()),
            ModelKind::Kan => {
                let mut s = NetworkSpec::kan(self.widths.clone(), self.grid_size, self.order);
                s.train_ws = self.train_ws;
                s.train_wb = self.train_wb;
                s.train_beta = self.train_beta;
                s.with_beta = self.with_beta;
                s
            }
            conv => {
                let mut s = NetworkSpec::conv(conv, self.grid_size, self.order, self.batch_norm);
                s.train_ws = self.train_ws;
                s.train_wb = self.train_wb;
                s
            }
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }

    pub fn schedule(&self) -> Result<ClSchedule, String> {
        let schedule = ClSchedule {
            epochs_per_task: self.epochs_per_task,
            lr0: self.lr,
            decay: self.decay,
            seed: self.seed,
            batch_size: self.batch_size,
            optimizer: self.optimizer_kind()?,
        };
        schedule.validate().map_err(|e| e.to_string())?;
        Ok(schedule)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, String> {
        let section = self
            .grid
            .as_ref()
            .ok_or_else(|| "grid: section missing from config".to_string())?;
        if section.lrs.is_empty()
            || section.decays.is_empty()
            || section.epoch_counts.is_empty()
            || section.seeds.is_empty()
        {
            return Err("grid: lrs, decays, epoch_counts, and seeds must be non-empty".into());
        }
        Ok(GridSpec {
            lrs: section.lrs.clone(),
            decays: section.decays.clone(),
            epoch_counts: section.epoch_counts.clone(),
            seeds: section.seeds.clone(),
            batch_size: self.batch_size,
            optimizer: self.optimizer_kind()?,
        })
    }

    pub fn peaks_config(&self) -> PeaksConfig {
        let s = self.peaks.clone().unwrap_or_default();
        PeaksConfig {
            n_peaks: s.n_peaks,
            points_per_peak: s.points_per_peak,
            amplitude: s.amplitude,
            sigma: s.sigma,
            grid_size: s.grid_size,
            order: s.order,
            lr: s.lr,
            epochs_per_task: s.epochs_per_task,
            seed: self.seed,
            eval_per_window: s.eval_per_window,
            train_scales: false,
            train_bias: false,
        }
    }
}
