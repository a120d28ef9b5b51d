//! Metrics emission: one CSV per run, one CSV per epoch confusion matrix,
//! one JSON summary per run or grid. Readers for the same schemas back the
//! `verify` pass, which re-parses everything the tool emits.

use crate::error::{KanError, Result};
use crate::trainer::{EpochRecord, GridOutcome, RunMetrics};
use serde::{Deserialize, Serialize};
use std::path::Path;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> KanError + '_ {
    move |e| KanError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// `epoch,task,lr,loss,test_accuracy` rows, one per epoch.
pub fn write_run_csv(path: &Path, metrics: &RunMetrics) -> Result<()> {
    let mut out = String::from("epoch,task,lr,loss,test_accuracy\n");
    for r in &metrics.records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.task, r.lr, r.train_loss, r.test_accuracy
        ));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub fn read_run_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| KanError::Dataset(format!("{}: empty", path.display())))?;
    if header != "epoch,task,lr,loss,test_accuracy" {
        return Err(KanError::Dataset(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(KanError::Dataset(format!(
                "{}: line {}: expected 5 fields",
                path.display(),
                n + 2
            )));
        }
        let parse_err = |what: &str| {
            KanError::Dataset(format!("{}: line {}: bad {what}", path.display(), n + 2))
        };
        records.push(EpochRecord {
            epoch: fields[0].parse().map_err(|_| parse_err("epoch"))?,
            task: fields[1].parse().map_err(|_| parse_err("task"))?,
            lr: fields[2].parse().map_err(|_| parse_err("lr"))?,
            train_loss: fields[3].parse().map_err(|_| parse_err("loss"))?,
            test_accuracy: fields[4].parse().map_err(|_| parse_err("test_accuracy"))?,
        });
    }
    Ok(records)
}

/// Ten rows of ten counts, rows = true class, columns = predicted.
pub fn write_confusion_csv(path: &Path, matrix: &[[u32; 10]; 10]) -> Result<()> {
    let mut out = String::new();
    for row in matrix {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub fn read_confusion_csv(path: &Path) -> Result<[[u32; 10]; 10]> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut matrix = [[0u32; 10]; 10];
    let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    if rows.len() != 10 {
        return Err(KanError::Dataset(format!(
            "{}: expected 10 rows, found {}",
            path.display(),
            rows.len()
        )));
    }
    for (i, line) in rows.iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 10 {
            return Err(KanError::Dataset(format!(
                "{}: row {i}: expected 10 columns",
                path.display()
            )));
        }
        for (j, cell) in cells.iter().enumerate() {
            matrix[i][j] = cell.parse().map_err(|_| {
                KanError::Dataset(format!("{}: row {i} col {j}: bad count", path.display()))
            })?;
        }
    }
    Ok(matrix)
}

/// JSON summary of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub param_count: usize,
    pub epochs: usize,
    pub per_task_best: Vec<f64>,
    pub best_final_task: f64,
    pub wall_seconds: f64,
}

pub fn write_run_summary(path: &Path, model: &str, metrics: &RunMetrics) -> Result<()> {
    let summary = RunSummary {
        model: model.to_string(),
        param_count: metrics.param_count,
        epochs: metrics.records.len(),
        per_task_best: metrics.per_task_best.clone(),
        best_final_task: metrics.best_final_task(),
        wall_seconds: metrics.wall_seconds,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| KanError::Dataset(format!("summary: {e}")))?;
    std::fs::write(path, json).map_err(io_err(path))
}

pub fn read_run_summary(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|e| KanError::Dataset(format!("{}: {e}", path.display())))
}

/// One row per grid cell in the results table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridRow {
    pub index: usize,
    pub lr: f64,
    pub decay: f64,
    pub epochs_per_task: usize,
    pub seed: u64,
    pub status: String,
    pub best_final_task: Option<f64>,
    pub per_task_best: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSummary {
    pub model: String,
    pub runs: Vec<GridRow>,
    pub best_index: Option<usize>,
}

pub fn write_grid_summary(path: &Path, model: &str, outcome: &GridOutcome) -> Result<()> {
    let summary = GridSummary {
        model: model.to_string(),
        runs: grid_rows(outcome),
        best_index: outcome.best,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| KanError::Dataset(format!("summary: {e}")))?;
    std::fs::write(path, json).map_err(io_err(path))
}

fn grid_rows(outcome: &GridOutcome) -> Vec<GridRow> {
    outcome
        .runs
        .iter()
        .map(|r| GridRow {
            index: r.index,
            lr: r.config.lr,
            decay: r.config.decay,
            epochs_per_task: r.config.epochs_per_task,
            seed: r.config.seed,
            status: if r.error.is_some() { "failed" } else { "ok" }.to_string(),
            best_final_task: r.best_final_task(),
            per_task_best: r.metrics.as_ref().map(|m| m.per_task_best.clone()),
        })
        .collect()
}

/// `index,lr,decay,epochs_per_task,seed,status,best_final_task` rows, the
/// full results table of one grid.
pub fn write_grid_csv(path: &Path, outcome: &GridOutcome) -> Result<()> {
    let mut out = String::from("index,lr,decay,epochs_per_task,seed,status,best_final_task\n");
    for r in grid_rows(outcome) {
        let best = r
            .best_final_task
            .map(|a| a.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.index, r.lr, r.decay, r.epochs_per_task, r.seed, r.status, best
        ));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub fn read_grid_csv(path: &Path) -> Result<Vec<GridRow>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| KanError::Dataset(format!("{}: empty", path.display())))?;
    if header != "index,lr,decay,epochs_per_task,seed,status,best_final_task" {
        return Err(KanError::Dataset(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(KanError::Dataset(format!(
                "{}: line {}: expected 7 fields",
                path.display(),
                n + 2
            )));
        }
        let parse_err = |what: &str| {
            KanError::Dataset(format!("{}: line {}: bad {what}", path.display(), n + 2))
        };
        rows.push(GridRow {
            index: fields[0].parse().map_err(|_| parse_err("index"))?,
            lr: fields[1].parse().map_err(|_| parse_err("lr"))?,
            decay: fields[2].parse().map_err(|_| parse_err("decay"))?,
            epochs_per_task: fields[3].parse().map_err(|_| parse_err("epochs_per_task"))?,
            seed: fields[4].parse().map_err(|_| parse_err("seed"))?,
            status: fields[5].to_string(),
            best_final_task: if fields[6].is_empty() {
                None
            } else {
                Some(fields[6].parse().map_err(|_| parse_err("best_final_task"))?)
            },
            per_task_best: None,
        });
    }
    Ok(rows)
}

pub fn read_grid_summary(path: &Path) -> Result<GridSummary> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|e| KanError::Dataset(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_metrics() -> RunMetrics {
        let mut confusion = [[0u32; 10]; 10];
        confusion[0][0] = 3;
        confusion[1][0] = 2;
        RunMetrics {
            records: vec![
                EpochRecord {
                    epoch: 1,
                    task: 1,
                    lr: 1e-3,
                    train_loss: 2.25,
                    test_accuracy: 0.6,
                },
                EpochRecord {
                    epoch: 2,
                    task: 2,
                    lr: 8e-4,
                    train_loss: 1.5,
                    test_accuracy: 0.7,
                },
            ],
            confusions: vec![confusion, confusion],
            per_task_best: vec![0.6, 0.7],
            wall_seconds: 1.25,
            param_count: 42,
        }
    }

    #[test]
    fn run_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let metrics = sample_metrics();
        write_run_csv(&path, &metrics).unwrap();
        let records = read_run_csv(&path).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].epoch, 1);
        assert_eq!(records[1].lr, 8e-4);
        assert_eq!(records[1].test_accuracy, 0.7);
    }

    #[test]
    fn confusion_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("conf.csv");
        let mut m = [[0u32; 10]; 10];
        for i in 0..10 {
            for j in 0..10 {
                m[i][j] = (i * 10 + j) as u32;
            }
        }
        write_confusion_csv(&path, &m).unwrap();
        assert_eq!(read_confusion_csv(&path).unwrap(), m);
    }

    #[test]
    fn summaries_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.json");
        write_run_summary(&path, "kan", &sample_metrics()).unwrap();
        let summary = read_run_summary(&path).unwrap();
        assert_eq!(summary.model, "kan");
        assert_eq!(summary.param_count, 42);
        assert_eq!(summary.best_final_task, 0.7);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "epoch,task\n1,2\n").unwrap();
        assert!(read_run_csv(&path).is_err());
        std::fs::write(&path, "epoch,task,lr,loss,test_accuracy\n1,2,x,0,0\n").unwrap();
        assert!(read_run_csv(&path).is_err());
    }
}
