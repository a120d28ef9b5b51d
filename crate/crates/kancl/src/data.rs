//! MNIST IDX ingestion, class-incremental task splitting, balanced test
//! sets, and the synthetic 1D Gaussian-peaks regression set.
//!
//! IDX files are parsed bit-exactly: 4-byte big-endian magic, big-endian
//! 32-bit dimension sizes, unsigned-byte payload. Files starting with the
//! gzip prefix `0x1F 0x8B` are decompressed transparently. Nothing here
//! downloads data; callers hand in paths.

use crate::error::{KanError, Result};
use crate::tensor::{Rng, Tensor};
use flate2::read::GzDecoder;
use std::io::Read;
use std::path::Path;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Grayscale images (0-255) with labels 0-9.
#[derive(Debug, Clone)]
pub struct LabeledImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, row-major per image.
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| KanError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    if raw.len() >= 2 && raw[0] == 0x1F && raw[1] == 0x8B {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| KanError::Dataset(format!("{}: gzip: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| KanError::Dataset(format!("{}: truncated header", path.display())))
}

/// Loads an images/labels IDX pair (raw or gzip-compressed).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledImages> {
    let img = read_maybe_gzip(images_path)?;
    let magic = be_u32(&img, 0, images_path)?;
    if magic != IMAGES_MAGIC {
        return Err(KanError::Dataset(format!(
            "{}: bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}",
            images_path.display()
        )));
    }
    let count = be_u32(&img, 4, images_path)? as usize;
    let rows = be_u32(&img, 8, images_path)? as usize;
    let cols = be_u32(&img, 12, images_path)? as usize;
    let payload = &img[16..];
    if payload.len() != count * rows * cols {
        return Err(KanError::Dataset(format!(
            "{}: payload {} bytes, expected {}",
            images_path.display(),
            payload.len(),
            count * rows * cols
        )));
    }

    let lab = read_maybe_gzip(labels_path)?;
    let magic = be_u32(&lab, 0, labels_path)?;
    if magic != LABELS_MAGIC {
        return Err(KanError::Dataset(format!(
            "{}: bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}",
            labels_path.display()
        )));
    }
    let lab_count = be_u32(&lab, 4, labels_path)? as usize;
    let labels = &lab[8..];
    if labels.len() != lab_count {
        return Err(KanError::Dataset(format!(
            "{}: payload {} bytes, expected {lab_count}",
            labels_path.display(),
            labels.len()
        )));
    }
    if lab_count != count {
        return Err(KanError::Dataset(format!(
            "image count {count} does not match label count {lab_count}"
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(KanError::LabelOutOfRange(bad, 10));
    }
    Ok(LabeledImages {
        count,
        rows,
        cols,
        images: payload.to_vec(),
        labels: labels.to_vec(),
    })
}

impl LabeledImages {
    /// Pixels of the selected samples as a `[n, rows*cols]` tensor rescaled
    /// from 0-255 into `[-1, 1]`.
    pub fn batch_flat(&self, indices: &[usize]) -> (Tensor, Vec<u8>) {
        let dim = self.rows * self.cols;
        let mut data = Vec::with_capacity(indices.len() * dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let img = &self.images[i * dim..(i + 1) * dim];
            data.extend(img.iter().map(|&p| p as f64 / 255.0 * 2.0 - 1.0));
            labels.push(self.labels[i]);
        }
        (
            Tensor::from_vec(&[indices.len(), dim], data).expect("sized above"),
            labels,
        )
    }

    /// Same pixels shaped `[n, 1, rows, cols]` for the convolutional stacks.
    pub fn batch_images(&self, indices: &[usize]) -> (Tensor, Vec<u8>) {
        let (flat, labels) = self.batch_flat(indices);
        let n = indices.len();
        let t = flat
            .reshape(&[n, 1, self.rows, self.cols])
            .expect("same element count");
        (t, labels)
    }
}

/// One class-incremental task: a class set plus the indices of the training
/// samples whose labels fall in it. Order within a task is deterministic
/// here; the trainer shuffles per epoch with the run's seed.
#[derive(Debug, Clone)]
pub struct ClTask {
    /// 1-based position in the task sequence.
    pub task_index: usize,
    pub classes: Vec<u8>,
    pub indices: Vec<usize>,
}

/// The five-task label split: {0,1}, {2,3}, ..., {8,9}.
pub fn default_class_pairs() -> Vec<Vec<u8>> {
    (0..5).map(|i| vec![2 * i as u8, 2 * i as u8 + 1]).collect()
}

/// Splits training data into disjoint-class tasks. Every index whose label
/// belongs to `pairs[i]` lands in task `i + 1` and nowhere else.
pub fn split_class_il(data: &LabeledImages, pairs: &[Vec<u8>]) -> Result<Vec<ClTask>> {
    let mut seen = [false; 10];
    for classes in pairs {
        for &c in classes {
            if c > 9 {
                return Err(KanError::LabelOutOfRange(c, 10));
            }
            if seen[c as usize] {
                return Err(KanError::InvalidConfig(format!(
                    "class {c} appears in more than one task"
                )));
            }
            seen[c as usize] = true;
        }
    }
    let mut tasks: Vec<ClTask> = pairs
        .iter()
        .enumerate()
        .map(|(i, classes)| ClTask {
            task_index: i + 1,
            classes: classes.clone(),
            indices: Vec::new(),
        })
        .collect();
    let mut class_to_task = [usize::MAX; 10];
    for (t, classes) in pairs.iter().enumerate() {
        for &c in classes {
            class_to_task[c as usize] = t;
        }
    }
    for (idx, &label) in data.labels.iter().enumerate() {
        let t = class_to_task[label as usize];
        if t != usize::MAX {
            tasks[t].indices.push(idx);
        }
    }
    Ok(tasks)
}

/// Balanced test selection. `None` keeps the full test set (whose per-class
/// counts already average 1000 with a spread of about 59 for standard
/// MNIST); `Some(t)` subsamples exactly `t` indices per class.
pub fn build_balanced_test(
    test: &LabeledImages,
    per_class_target: Option<usize>,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); 10];
    for (idx, &label) in test.labels.iter().enumerate() {
        by_class[label as usize].push(idx);
    }
    if let Some(missing) = by_class.iter().position(|v| v.is_empty()) {
        return Err(KanError::Dataset(format!(
            "test set has no samples of class {missing}"
        )));
    }
    match per_class_target {
        None => Ok((0..test.count).collect()),
        Some(target) => {
            let mut out = Vec::with_capacity(target * 10);
            for mut pool in by_class {
                if target > pool.len() {
                    return Err(KanError::InvalidConfig(format!(
                        "requested {target} per class but only {} available",
                        pool.len()
                    )));
                }
                rng.shuffle(&mut pool);
                pool.truncate(target);
                pool.sort_unstable();
                out.extend(pool);
            }
            Ok(out)
        }
    }
}

/// Synthetic 1D regression set: `n_peaks` consecutive Gaussian bumps on
/// [0, 1], one per window, presented as sequential tasks.
#[derive(Debug, Clone)]
pub struct PeaksDataset {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// 1-based window index per point.
    pub peak_index: Vec<usize>,
    pub n_peaks: usize,
    pub amplitude: f64,
    pub sigma: f64,
}

impl PeaksDataset {
    /// Center of peak `j` (1-based): `(2j - 1) / (2 n)`.
    pub fn center(&self, j: usize) -> f64 {
        (2.0 * j as f64 - 1.0) / (2.0 * self.n_peaks as f64)
    }

    /// Window of peak `j` (1-based): `[(j-1)/n, j/n]`.
    pub fn window(&self, j: usize) -> (f64, f64) {
        let n = self.n_peaks as f64;
        ((j as f64 - 1.0) / n, j as f64 / n)
    }

    /// Ground-truth target at `x` for a point in window `j`.
    pub fn target(&self, x: f64, j: usize) -> f64 {
        let c = self.center(j);
        self.amplitude * (-(x - c) * (x - c) / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// Indices of the points belonging to peak `j`.
    pub fn task_points(&self, j: usize) -> Vec<usize> {
        (0..self.xs.len())
            .filter(|&i| self.peak_index[i] == j)
            .collect()
    }
}

pub fn gaussian_peaks(
    n_peaks: usize,
    points_per_peak: usize,
    amplitude: f64,
    sigma: f64,
    rng: &mut Rng,
) -> Result<PeaksDataset> {
    if n_peaks < 1 || points_per_peak < 1 {
        return Err(KanError::InvalidConfig(
            "need at least one peak and one point per peak".into(),
        ));
    }
    if !(sigma > 0.0) || !amplitude.is_finite() {
        return Err(KanError::InvalidConfig(
            "sigma must be positive and amplitude finite".into(),
        ));
    }
    let mut ds = PeaksDataset {
        xs: Vec::with_capacity(n_peaks * points_per_peak),
        ys: Vec::with_capacity(n_peaks * points_per_peak),
        peak_index: Vec::with_capacity(n_peaks * points_per_peak),
        n_peaks,
        amplitude,
        sigma,
    };
    for j in 1..=n_peaks {
        let (lo, hi) = ds.window(j);
        for _ in 0..points_per_peak {
            let x = rng.uniform(lo, hi);
            ds.xs.push(x);
            ds.ys.push(ds.target(x, j));
            ds.peak_index.push(j);
        }
    }
    Ok(ds)
}
