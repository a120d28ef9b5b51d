use kancl::data::{default_class_pairs, load_idx, split_class_il, LabeledImages};
use kancl::layers::{KanLinearConfig, KanLinearLayer};
use kancl::network::{Layer, Network, NetworkSpec};
use kancl::tensor::{Rng, Tensor};
use kancl::trainer::{confusion, step_classify, ClSchedule, OptKind, Optimizer, accuracy_of};
use std::path::Path;

fn batch_std(data: &LabeledImages, idx: &[usize], mean: f64, std: f64) -> (Tensor, Vec<u8>) {
    let dim = data.rows * data.cols;
    let mut out = Vec::with_capacity(idx.len() * dim);
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        out.extend(
            data.images[i * dim..(i + 1) * dim]
                .iter()
                .map(|&p| (p as f64 / 255.0 - mean) / std),
        );
        labels.push(data.labels[i]);
    }
    (Tensor::from_vec(&[idx.len(), dim], out).unwrap(), labels)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_tasks: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-5);
    let batch: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(64);
    let dir = Path::new("data/mnist");
    let train = load_idx(&dir.join("train-images-idx3-ubyte.gz"), &dir.join("train-labels-idx1-ubyte.gz")).unwrap();
    let test = load_idx(&dir.join("t10k-images-idx3-ubyte.gz"), &dir.join("t10k-labels-idx1-ubyte.gz")).unwrap();
    let mut tasks = split_class_il(&train, &default_class_pairs()).unwrap();
    tasks.truncate(n_tasks);
    let test_indices: Vec<usize> = (0..test.count).collect();
    let (mean, std) = (0.1307, 0.3081);

    // [784,128,10], no squash, efficient-kan-ish: random w_s, standardized inputs
    let mut rng = Rng::new(1);
    let spec = NetworkSpec::kan(vec![784, 128, 10], 5, 3).cl_mode(true);
    let mut layers = Vec::new();
    for pair in [[784usize, 128], [128, 10]] {
        let cfg = KanLinearConfig::cl(pair[0], pair[1], 5, 3, true, false);
        layers.push(Layer::KanLinear(KanLinearLayer::new(cfg, &mut rng).unwrap()));
    }
    let mut net = Network { spec, layers };
    let schedule = ClSchedule { epochs_per_task: 5, lr0: lr, decay: 0.8, seed: 1, batch_size: batch, optimizer: OptKind::Adam };
    let mut opt = Optimizer::new(OptKind::Adam, lr, &mut net);
    let mut shuffle = Rng::new(1).substream(1);
    let mut accs = Vec::new();
    for task in &tasks {
        opt.set_lr(schedule.lr_at_task(task.task_index));
        for _ in 0..schedule.epochs_per_task {
            let mut idx = task.indices.clone();
            shuffle.shuffle(&mut idx);
            for chunk in idx.chunks(batch) {
                if chunk.len() < 2 { continue; }
                let (x, y) = batch_std(&train, chunk, mean, std);
                step_classify(&mut net, &x, &y, &mut opt).unwrap();
            }
            let mut preds = Vec::new();
            let mut labels = Vec::new();
            for chunk in test_indices.chunks(512) {
                let (x, y) = batch_std(&test, chunk, mean, std);
                let (logits, _) = net.forward(&x, false).unwrap();
                preds.extend(logits.argmax_rows().unwrap());
                labels.extend(y);
            }
            let m = confusion(&preds, &labels).unwrap();
            accs.push(format!("{:.3}", accuracy_of(&m)));
        }
    }
    println!("std+nosquash lr={lr} batch={batch}: {}", accs.join(" "));
}
