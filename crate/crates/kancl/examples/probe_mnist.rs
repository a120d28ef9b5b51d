use kancl::data::{default_class_pairs, load_idx, split_class_il};
use kancl::layers::{KanLinearConfig, KanLinearLayer};
use kancl::network::{Layer, Network, NetworkSpec};
use kancl::tensor::Rng;
use kancl::trainer::{run_cl, ClSchedule, OptKind};
use std::path::Path;

fn build_variant(squash: bool, ws_random: bool, seed: u64) -> Network {
    let mut rng = Rng::new(seed);
    let spec = NetworkSpec::kan(vec![784, 128, 10], 5, 3).cl_mode(true);
    let mut layers = Vec::new();
    for (i, pair) in [[784usize, 128], [128, 10]].iter().enumerate() {
        let cfg = KanLinearConfig {
            squash_input: squash && i > 0,
            ..KanLinearConfig::cl(pair[0], pair[1], 5, 3, true, false)
        };
        let mut l = KanLinearLayer::new(cfg, &mut rng).unwrap();
        if ws_random {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            let mut r2 = Rng::new(seed).substream(99 + i as u64);
            for (name, arr) in l.state_arrays_mut() {
                if name == "w_s" {
                    for v in arr.iter_mut() {
                        *v = r2.uniform(-bound, bound);
                    }
                }
            }
        }
        layers.push(Layer::KanLinear(l));
    }
    Network { spec, layers }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let tasks_to_run: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-5);
    let batch: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(64);
    let dir = Path::new("data/mnist");
    let train = load_idx(&dir.join("train-images-idx3-ubyte.gz"), &dir.join("train-labels-idx1-ubyte.gz")).unwrap();
    let test = load_idx(&dir.join("t10k-images-idx3-ubyte.gz"), &dir.join("t10k-labels-idx1-ubyte.gz")).unwrap();
    let mut tasks = split_class_il(&train, &default_class_pairs()).unwrap();
    tasks.truncate(tasks_to_run);
    let test_indices: Vec<usize> = (0..test.count).collect();
    let schedule = ClSchedule {
        epochs_per_task: 5,
        lr0: lr,
        decay: 0.8,
        seed: 1,
        batch_size: batch,
        optimizer: OptKind::Adam,
    };
    for (name, squash, ws_random) in [("squash+ws_random", true, true)] {
        let mut net = build_variant(squash, ws_random, 1);
        let m = run_cl(&mut net, &schedule, &train, &tasks, &test, &test_indices).unwrap();
        let accs: Vec<String> = m.records.iter().map(|r| format!("{:.3}", r.test_accuracy)).collect();
        println!("{name} lr={lr} batch={batch}: {}", accs.join(" "));
    }
}
