use kancl::data::{default_class_pairs, load_idx, split_class_il};
use kancl::network::{ModelKind, NetworkSpec};
use kancl::tensor::Rng;
use kancl::trainer::{evaluate, step_classify, OptKind, Optimizer};
use std::path::Path;
use std::time::Instant;

fn main() {
    let dir = Path::new("data/mnist");
    let train = load_idx(
        &dir.join("train-images-idx3-ubyte.gz"),
        &dir.join("train-labels-idx1-ubyte.gz"),
    )
    .unwrap();
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte.gz"),
        &dir.join("t10k-labels-idx1-ubyte.gz"),
    )
    .unwrap();
    println!("train {} test {}", train.count, test.count);
    let tasks = split_class_il(&train, &default_class_pairs()).unwrap();
    let task1 = &tasks[0];
    println!("task1 samples: {}", task1.indices.len());
    let test_indices: Vec<usize> = (0..test.count).collect();

    for (name, spec) in [
        ("kan", NetworkSpec::kan(vec![784, 128, 10], 5, 3).cl_mode(true)),
        ("mlp", NetworkSpec::mlp(vec![784, 784, 285, 256, 10])),
        ("kanv", NetworkSpec::conv(ModelKind::Kanv, 5, 3, true)),
        ("convnet", NetworkSpec::conv(ModelKind::Convnet, 5, 3, true)),
    ] {
        let mut net = spec.build(&mut Rng::new(1)).unwrap();
        let mut opt = Optimizer::new(OptKind::Adam, 1e-3, &mut net);
        let conv = net.spec.model.is_convolutional();
        let t0 = Instant::now();
        let n_batches = 40;
        for chunk in task1.indices.chunks(64).take(n_batches) {
            let (x, y) = if conv { train.batch_images(chunk) } else { train.batch_flat(chunk) };
            step_classify(&mut net, &x, &y, &mut opt).unwrap();
        }
        let per_batch = t0.elapsed().as_secs_f64() / n_batches as f64;
        let t1 = Instant::now();
        let (acc, _) = evaluate(&mut net, &test, &test_indices[..2000]).unwrap();
        let eval_2k = t1.elapsed().as_secs_f64();
        let epoch_est = per_batch * (task1.indices.len() as f64 / 64.0) + eval_2k * 5.0;
        println!(
            "{name}: {per_batch:.3}s/batch, eval2k {eval_2k:.2}s, est epoch+fulleval {epoch_est:.1}s, acc {acc:.3}"
        );
    }
}
