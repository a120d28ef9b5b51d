use kancl::layers::{KanConvConfig, KanConvLayer};
use kancl::tensor::{Rng, Tensor};
use std::time::Instant;

fn main() {
    let mut rng = Rng::new(1);
    let l = KanConvLayer::new(KanConvConfig { squash_input: true, ..KanConvConfig::new(5, 5, 3, 5, 3) }, &mut rng).unwrap();
    let x = rng.uniform_tensor(&[64, 5, 28, 28], -1.0, 1.0);
    let g = rng.uniform_tensor(&[64, 5, 28, 28], -1.0, 1.0);

    let t0 = Instant::now();
    let mut tapes = Vec::new();
    for _ in 0..5 { tapes.push(l.forward(&x, true).unwrap()); }
    println!("forward: {:.3}s", t0.elapsed().as_secs_f64() / 5.0);

    let t0 = Instant::now();
    for t in &tapes {
        l.backward(&g, &t.1, false).unwrap();
    }
    println!("backward (no grad_x): {:.3}s", t0.elapsed().as_secs_f64() / 5.0);

    let t0 = Instant::now();
    for t in &tapes {
        l.backward(&g, &t.1, true).unwrap();
    }
    println!("backward (with grad_x): {:.3}s", t0.elapsed().as_secs_f64() / 5.0);
}
