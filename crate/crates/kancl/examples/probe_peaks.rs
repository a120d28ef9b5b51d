use kancl::trainer::{run_peaks_cl, PeaksConfig};

fn main() {
    for (scales, bias) in [(true, true), (true, false), (false, true)] {
        for lr in [1.0, 0.5, 0.2, 0.1, 0.05] {
            let config = PeaksConfig {
                train_scales: scales,
                train_bias: bias,
                lr,
                ..PeaksConfig::default()
            };
            match run_peaks_cl(&config) {
                Ok(report) => {
                    let f = report.final_rmse();
                    println!(
                        "scales={scales} bias={bias} lr={lr}: final rmse {}",
                        f.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" ")
                    );
                    break;
                }
                Err(e) => println!("scales={scales} bias={bias} lr={lr}: {e}"),
            }
        }
    }
}
