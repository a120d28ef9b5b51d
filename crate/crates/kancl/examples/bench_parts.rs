use kancl::spline::KnotGrid;
use kancl::tensor::{Rng, Tensor};
use std::time::Instant;

fn main() {
    let mut rng = Rng::new(1);
    let x = rng.uniform_tensor(&[50176, 45], -1.0, 1.0);

    let t0 = Instant::now();
    let z = x.map(f64::tanh);
    println!("tanh map: {:.3}s", t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let s = z.silu();
    println!("silu map: {:.3}s", t0.elapsed().as_secs_f64());
    std::hint::black_box(&s);

    let grid = KnotGrid::new(-1.0, 1.0, 5, 3).unwrap();
    let t0 = Instant::now();
    let mut window = [0.0; 16];
    let mut acc = 0.0;
    for &v in z.data() {
        let first = grid.basis_nonzero(v, &mut window);
        acc += window[0] + first as f64;
    }
    println!("basis evals ({}): {:.3}s ({acc:.1})", z.len(), t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let mut basis = Tensor::zeros(&[50176, 360]);
    println!("zeros alloc 144MB: {:.3}s", t0.elapsed().as_secs_f64());
    let t0 = Instant::now();
    let data = basis.data_mut();
    let mut widx = 0usize;
    for (i, &v) in z.data().iter().enumerate() {
        let first = grid.basis_nonzero(v, &mut window);
        let row = i / 45; let j = i % 45;
        let base = row * 360 + j * 8 + first;
        data[base..base + 4].copy_from_slice(&window[..4]);
        widx += 1;
    }
    println!("basis fill: {:.3}s ({widx})", t0.elapsed().as_secs_f64());

    let coef = rng.uniform_tensor(&[360, 5], -1.0, 1.0);
    let t0 = Instant::now();
    let out = basis.matmul(&coef).unwrap();
    println!("matmul [50176x360]x[360x5]: {:.3}s", t0.elapsed().as_secs_f64());
    std::hint::black_box(&out);

    let coef_t = rng.uniform_tensor(&[5, 360], -1.0, 1.0);
    let t0 = Instant::now();
    let out = basis.matmul_nt(&coef_t).unwrap();
    println!("matmul_nt [50176x360]x[5x360]T: {:.3}s", t0.elapsed().as_secs_f64());
    std::hint::black_box(&out);
}
