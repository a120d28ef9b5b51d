use kancl::tensor::{Rng, Tensor};
use std::time::Instant;

fn main() {
    let mut rng = Rng::new(1);
    // EffKAN layer-1 shape: basis matrix x reshaped coefficients
    let a = rng.uniform_tensor(&[64, 6272], -1.0, 1.0);
    let b = rng.uniform_tensor(&[6272, 128], -1.0, 1.0);
    let t0 = Instant::now();
    let mut acc = 0.0;
    let iters = 20;
    for _ in 0..iters {
        let c = a.matmul(&b).unwrap();
        acc += c.data()[0];
    }
    let dt = t0.elapsed().as_secs_f64() / iters as f64;
    let flops = 2.0 * 64.0 * 6272.0 * 128.0;
    println!("dense: {:.4} s/iter, {:.2} GFLOP/s ({acc})", dt, flops / dt / 1e9);

    // 50% sparse a (like a G=5,k=3 basis matrix)
    let mut a2 = a.clone();
    for (i, v) in a2.data_mut().iter_mut().enumerate() {
        if i % 2 == 0 { *v = 0.0; }
    }
    let t0 = Instant::now();
    for _ in 0..iters {
        let c = a2.matmul(&b).unwrap();
        acc += c.data()[0];
    }
    let dt = t0.elapsed().as_secs_f64() / iters as f64;
    println!("half-zero: {:.4} s/iter, {:.2} effective GFLOP/s ({acc})", dt, flops / dt / 1e9);
}
