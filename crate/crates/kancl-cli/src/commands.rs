//! Subcommand implementations.

use crate::{CliError, Ctx};
use kancl::accounting::{count_network, network_count_specs};
use kancl::data::{
    build_balanced_test, default_class_pairs, load_idx, split_class_il, ClTask, LabeledImages,
};
use kancl::plot::{accuracy_svg, function_overlay_svg};
use kancl::tensor::Rng;
use kancl::trainer::{
    ablation_configs, read_confusion_csv, read_grid_csv, read_grid_summary, read_run_csv,
    read_run_summary, run_cl_with, run_grid, run_peaks_cl, write_confusion_csv, write_grid_csv,
    write_grid_summary, write_run_csv, write_run_summary, PeaksReport, RunMetrics,
};
use serde::Serialize;
use std::path::{Path, PathBuf};

const MNIST_FILES: [(&str, &str); 2] = [
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
];

/// Accepts raw or gzip-compressed official file names.
fn find_data_file(dir: &Path, base: &str) -> Option<PathBuf> {
    for candidate in [dir.join(base), dir.join(format!("{base}.gz"))] {
        if candidate.is_file() {
            return Some(candidate);
        }
    }
    None
}

fn require_data_file(dir: &Path, base: &str) -> Result<PathBuf, CliError> {
    find_data_file(dir, base).ok_or_else(|| {
        CliError::data(format!(
            "missing data file {} (or {}.gz) in {}; run `kancl check-data`",
            base,
            base,
            dir.display()
        ))
    })
}

struct Mnist {
    train: LabeledImages,
    test: LabeledImages,
}

fn load_mnist(dir: &Path) -> Result<Mnist, CliError> {
    let (train_images, train_labels) = MNIST_FILES[0];
    let (test_images, test_labels) = MNIST_FILES[1];
    let train = load_idx(
        &require_data_file(dir, train_images)?,
        &require_data_file(dir, train_labels)?,
    )?;
    let test = load_idx(
        &require_data_file(dir, test_images)?,
        &require_data_file(dir, test_labels)?,
    )?;
    Ok(Mnist { train, test })
}

fn ensure_out_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))
}

fn prepared_tasks(ctx: &Ctx, train: &LabeledImages) -> Result<Vec<ClTask>, CliError> {
    let pairs = ctx
        .cfg
        .class_pairs
        .clone()
        .unwrap_or_else(default_class_pairs);
    let mut tasks = split_class_il(train, &pairs)?;
    if ctx.cfg.train_limit > 0 {
        for task in &mut tasks {
            task.indices.truncate(ctx.cfg.train_limit);
        }
    }
    Ok(tasks)
}

fn test_selection(ctx: &Ctx, test: &LabeledImages, seed: u64) -> Result<Vec<usize>, CliError> {
    let target = (ctx.cfg.test_per_class > 0).then_some(ctx.cfg.test_per_class);
    Ok(build_balanced_test(test, target, &mut Rng::new(seed).substream(7))?)
}

fn write_run_artifacts(
    out: &Path,
    model: &str,
    metrics: &RunMetrics,
    epochs_per_task: usize,
    n_tasks: usize,
) -> Result<(), CliError> {
    ensure_out_dir(out)?;
    write_run_csv(&out.join("run.csv"), metrics)?;
    for (i, matrix) in metrics.confusions.iter().enumerate() {
        write_confusion_csv(&out.join(format!("confusion_ep{:03}.csv", i + 1)), matrix)?;
    }
    write_run_summary(&out.join("summary.json"), model, metrics)?;
    let svg = accuracy_svg(
        &metrics.accuracy_curve(),
        epochs_per_task,
        n_tasks,
        &format!("{model}: test accuracy"),
    );
    std::fs::write(out.join("accuracy.svg"), svg)
        .map_err(|e| CliError::data(format!("cannot write accuracy.svg: {e}")))?;
    Ok(())
}

pub fn train(ctx: &Ctx) -> Result<(), CliError> {
    let spec = ctx.cfg.network_spec().map_err(CliError::config)?;
    let schedule = ctx.cfg.schedule().map_err(CliError::config)?;
    // reject anything the accounting module cannot price before training
    let count = count_network(&network_count_specs(&spec)?)?;

    let mnist = load_mnist(&ctx.data_dir)?;
    let tasks = prepared_tasks(ctx, &mnist.train)?;
    let test_indices = test_selection(ctx, &mnist.test, ctx.cfg.seed)?;

    println!(
        "model {} | {} trainable parameters (nominal {}) | {} tasks x {} epochs | lr {} decay {}",
        ctx.cfg.model,
        count.actual_total,
        count.nominal_total,
        tasks.len(),
        schedule.epochs_per_task,
        schedule.lr0,
        schedule.decay
    );

    let mut net = spec.build(&mut Rng::new(ctx.cfg.seed))?;
    let metrics = run_cl_with(
        &mut net,
        &schedule,
        &mnist.train,
        &tasks,
        &mnist.test,
        &test_indices,
        &mut |r| {
            println!(
                "epoch {:3} task {} lr {:.2e} loss {:.4} accuracy {:.4}",
                r.epoch, r.task, r.lr, r.train_loss, r.test_accuracy
            );
        },
    )?;

    write_run_artifacts(
        &ctx.out_dir,
        &ctx.cfg.model,
        &metrics,
        schedule.epochs_per_task,
        tasks.len(),
    )?;
    println!(
        "best final-task accuracy {:.4} | wall {:.1}s | outputs in {}",
        metrics.best_final_task(),
        metrics.wall_seconds,
        ctx.out_dir.display()
    );
    Ok(())
}

pub fn grid(ctx: &Ctx) -> Result<(), CliError> {
    let spec = ctx.cfg.network_spec().map_err(CliError::config)?;
    count_network(&network_count_specs(&spec)?)?;
    let grid_spec = ctx.cfg.grid_spec().map_err(CliError::config)?;

    let mnist = load_mnist(&ctx.data_dir)?;
    let tasks = prepared_tasks(ctx, &mnist.train)?;
    let test_indices = test_selection(ctx, &mnist.test, ctx.cfg.seed)?;

    println!(
        "grid: {} runs ({} lrs x {} decays x {} epoch counts x {} seeds), {} worker(s)",
        grid_spec.run_count(),
        grid_spec.lrs.len(),
        grid_spec.decays.len(),
        grid_spec.epoch_counts.len(),
        grid_spec.seeds.len(),
        ctx.jobs
    );
    let outcome = run_grid(
        &spec,
        &grid_spec,
        &mnist.train,
        &tasks,
        &mnist.test,
        &test_indices,
        ctx.jobs,
    )?;

    ensure_out_dir(&ctx.out_dir)?;
    write_grid_csv(&ctx.out_dir.join("grid.csv"), &outcome)?;
    write_grid_summary(&ctx.out_dir.join("grid_summary.json"), &ctx.cfg.model, &outcome)?;

    let failed = outcome.runs.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        println!("{failed} run(s) failed and were excluded from best-run selection");
    }
    match outcome.best_run() {
        Some(best) => {
            let metrics = best.metrics.as_ref().expect("best run succeeded");
            println!(
                "best run #{}: lr {} decay {} epochs {} seed {} -> final-task best {:.4}",
                best.index,
                best.config.lr,
                best.config.decay,
                best.config.epochs_per_task,
                best.config.seed,
                metrics.best_final_task()
            );
            write_run_artifacts(
                &ctx.out_dir.join("best"),
                &ctx.cfg.model,
                metrics,
                best.config.epochs_per_task,
                tasks.len(),
            )?;
        }
        None => println!("no run succeeded"),
    }
    println!("outputs in {}", ctx.out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct PeaksAblationSummary {
    name: String,
    train_scales: bool,
    train_bias: bool,
    initial_rmse: Vec<f64>,
    final_rmse: Vec<f64>,
}

fn write_peaks_report(out: &Path, name: &str, report: &PeaksReport) -> Result<(), CliError> {
    ensure_out_dir(out)?;
    // per-task RMSE table
    let n = report.config.n_peaks;
    let mut rmse = String::from("task");
    for w in 1..=n {
        rmse.push_str(&format!(",window_{w}"));
    }
    rmse.push('\n');
    for (t, row) in report.rmse_after_task.iter().enumerate() {
        rmse.push_str(&(t + 1).to_string());
        for v in row {
            rmse.push_str(&format!(",{v}"));
        }
        rmse.push('\n');
    }
    std::fs::write(out.join("rmse.csv"), rmse)
        .map_err(|e| CliError::data(format!("cannot write rmse.csv: {e}")))?;

    // dense-grid predictions after the final task
    let mut pred = String::from("x,prediction,target,window\n");
    for i in 0..report.eval_xs.len() {
        pred.push_str(&format!(
            "{},{},{},{}\n",
            report.eval_xs[i], report.final_predictions[i], report.targets[i],
            report.eval_window[i]
        ));
    }
    std::fs::write(out.join("predictions.csv"), pred)
        .map_err(|e| CliError::data(format!("cannot write predictions.csv: {e}")))?;

    let svg = function_overlay_svg(
        &report.eval_xs,
        &report.final_predictions,
        &report.targets,
        &format!("peaks: {name}"),
    );
    std::fs::write(out.join("overlay.svg"), svg)
        .map_err(|e| CliError::data(format!("cannot write overlay.svg: {e}")))?;
    Ok(())
}

pub fn peaks(ctx: &Ctx) -> Result<(), CliError> {
    let base = ctx.cfg.peaks_config();
    let out_root = ctx.out_dir.join("peaks");
    ensure_out_dir(&out_root)?;
    let mut summaries = Vec::new();
    for (name, config) in ablation_configs(&base) {
        println!(
            "peaks ablation {name}: scales {} bias {}",
            if config.train_scales { "trainable" } else { "fixed" },
            if config.train_bias { "trainable" } else { "fixed" },
        );
        let report = run_peaks_cl(&config)?;
        let final_rmse = report.final_rmse().to_vec();
        println!(
            "  final RMSE per window: {}",
            final_rmse
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
        write_peaks_report(&out_root.join(name), name, &report)?;
        summaries.push(PeaksAblationSummary {
            name: name.to_string(),
            train_scales: config.train_scales,
            train_bias: config.train_bias,
            initial_rmse: report.initial_rmse.clone(),
            final_rmse,
        });
    }
    let json = serde_json::to_string_pretty(&summaries)
        .map_err(|e| CliError::runtime(format!("summary: {e}")))?;
    std::fs::write(out_root.join("summary.json"), json)
        .map_err(|e| CliError::data(format!("cannot write summary.json: {e}")))?;
    println!("outputs in {}", out_root.display());
    Ok(())
}

#[derive(Serialize)]
struct ParamsReport {
    model: String,
    layers: Vec<serde_json::Value>,
    nominal_total: u64,
    actual_total: u64,
    batch_norm_params: usize,
    instantiated_trainable_total: usize,
}

pub fn params(ctx: &Ctx) -> Result<(), CliError> {
    let spec = ctx.cfg.network_spec().map_err(CliError::config)?;
    let counts = count_network(&network_count_specs(&spec)?)?;
    let net = spec.build(&mut Rng::new(ctx.cfg.seed))?;
    let layers = counts
        .layers
        .iter()
        .map(|(layer_spec, count)| {
            serde_json::json!({
                "layer": layer_spec,
                "nominal": count.nominal,
                "actual": count.actual,
            })
        })
        .collect();
    let bn_params = if spec.model.is_convolutional() && spec.batch_norm {
        // two conv stages, scale and shift over five channels each
        20
    } else {
        0
    };
    let report = ParamsReport {
        model: ctx.cfg.model.clone(),
        layers,
        nominal_total: counts.nominal_total,
        actual_total: counts.actual_total,
        batch_norm_params: bn_params,
        instantiated_trainable_total: net.trainable_param_count(),
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::runtime(format!("params: {e}")))?;
    println!("{json}");
    Ok(())
}

pub fn check_data(ctx: &Ctx) -> Result<(), CliError> {
    println!("data directory: {}", ctx.data_dir.display());
    let expected = [
        ("train-images-idx3-ubyte", 47_040_016u64),
        ("train-labels-idx1-ubyte", 60_008),
        ("t10k-images-idx3-ubyte", 7_840_016),
        ("t10k-labels-idx1-ubyte", 10_008),
    ];
    let mut missing = Vec::new();
    for (base, raw_size) in expected {
        match find_data_file(&ctx.data_dir, base) {
            Some(path) => {
                let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
                println!(
                    "  found   {} ({} bytes; {} bytes uncompressed expected)",
                    path.display(),
                    size,
                    raw_size
                );
            }
            None => {
                println!("  missing {base} (or {base}.gz)");
                missing.push(base);
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::data(format!(
            "{} of 4 MNIST files missing in {}",
            missing.len(),
            ctx.data_dir.display()
        )));
    }
    let mnist = load_mnist(&ctx.data_dir)?;
    println!(
        "  parsed: {} training and {} test samples, {}x{} pixels",
        mnist.train.count, mnist.test.count, mnist.train.rows, mnist.train.cols
    );
    Ok(())
}

fn verify_run_dir(dir: &Path) -> Result<usize, CliError> {
    let mut checked = 0usize;
    let summary = read_run_summary(&dir.join("summary.json"))?;
    checked += 1;
    let records = read_run_csv(&dir.join("run.csv"))?;
    checked += 1;
    if records.len() != summary.epochs {
        return Err(CliError::config(format!(
            "{}: summary says {} epochs, run.csv has {}",
            dir.display(),
            summary.epochs,
            records.len()
        )));
    }
    let mut row_sums: Option<Vec<u32>> = None;
    for (i, record) in records.iter().enumerate() {
        let path = dir.join(format!("confusion_ep{:03}.csv", i + 1));
        let matrix = read_confusion_csv(&path)?;
        checked += 1;
        // accuracy equals trace over total
        let total: u32 = matrix.iter().flatten().sum();
        let trace: u32 = (0..10).map(|c| matrix[c][c]).sum();
        let acc = trace as f64 / total as f64;
        if (acc - record.test_accuracy).abs() > 1e-9 {
            return Err(CliError::config(format!(
                "{}: accuracy {} does not match confusion trace {}",
                path.display(),
                record.test_accuracy,
                acc
            )));
        }
        // row sums (true per-class counts) must be identical at every epoch
        let sums: Vec<u32> = matrix.iter().map(|row| row.iter().sum()).collect();
        match &row_sums {
            None => row_sums = Some(sums),
            Some(expected) if *expected != sums => {
                return Err(CliError::config(format!(
                    "{}: confusion row sums changed between epochs",
                    path.display()
                )));
            }
            _ => {}
        }
    }
    // per-task bests recomputable from the records
    let mut best_by_task: Vec<(usize, f64)> = Vec::new();
    for r in &records {
        match best_by_task.iter_mut().find(|(t, _)| *t == r.task) {
            Some((_, best)) => *best = best.max(r.test_accuracy),
            None => best_by_task.push((r.task, r.test_accuracy)),
        }
    }
    let recomputed: Vec<f64> = best_by_task.iter().map(|(_, b)| *b).collect();
    if recomputed != summary.per_task_best {
        return Err(CliError::config(format!(
            "{}: per_task_best does not match run.csv",
            dir.display()
        )));
    }
    if !dir.join("accuracy.svg").is_file() {
        return Err(CliError::config(format!(
            "{}: accuracy.svg missing",
            dir.display()
        )));
    }
    Ok(checked)
}

pub fn verify(ctx: &Ctx) -> Result<(), CliError> {
    let dir = &ctx.out_dir;
    let mut checked = 0usize;
    if dir.join("grid.csv").is_file() {
        let rows = read_grid_csv(&dir.join("grid.csv"))?;
        let summary = read_grid_summary(&dir.join("grid_summary.json"))?;
        checked += 2;
        if rows.len() != summary.runs.len() {
            return Err(CliError::config(
                "grid.csv and grid_summary.json disagree on run count".to_string(),
            ));
        }
        // best index is the argmax of the table
        let table_best = rows
            .iter()
            .filter(|r| r.status == "ok")
            .max_by(|a, b| {
                let (x, y) = (a.best_final_task.unwrap_or(0.0), b.best_final_task.unwrap_or(0.0));
                x.partial_cmp(&y)
                    .unwrap()
                    .then(b.index.cmp(&a.index)) // ties resolve to the lowest index
            })
            .map(|r| r.index);
        if table_best != summary.best_index {
            return Err(CliError::config(format!(
                "grid summary best index {:?} does not match table argmax {:?}",
                summary.best_index, table_best
            )));
        }
        if dir.join("best").is_dir() {
            checked += verify_run_dir(&dir.join("best"))?;
        }
    } else if dir.join("run.csv").is_file() {
        checked += verify_run_dir(dir)?;
    } else {
        return Err(CliError::data(format!(
            "{}: nothing to verify (no run.csv or grid.csv)",
            dir.display()
        )));
    }
    println!("verified {checked} artifact(s) in {}", dir.display());
    Ok(())
}
