use kancl::layers::{KanLinearConfig, KanLinearLayer};
use kancl::tensor::Rng;
use std::time::Instant;

fn main() {
    let mut rng = Rng::new(1);
    let cfg = KanLinearConfig { squash_input: true, ..KanLinearConfig::effkan(45, 5, 5, 3) };
    let l = KanLinearLayer::new(cfg, &mut rng).unwrap();
    let x = rng.uniform_tensor(&[50176, 45], -1.0, 1.0);
    // warm
    l.forward(&x, true).unwrap();
    let t0 = Instant::now();
    for _ in 0..5 { std::hint::black_box(l.forward(&x, true).unwrap()); }
    println!("inner kan_linear fwd [50176x45]: {:.3}s", t0.elapsed().as_secs_f64() / 5.0);
}
