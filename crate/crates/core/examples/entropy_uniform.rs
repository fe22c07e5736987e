//! Differential entropy against the bounding box of the data.
//!
//! Uniform data has the box as its own density, so the estimate should sit
//! at the log volume; a Gaussian lands well below it.
//!
//! cargo run --release --example entropy_uniform

use minee::distributions::{CorrelatedGaussianModel, ReferenceSampler, UniformBoxReference};
use minee::trainer::{run_entropy_estimation, EntropyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = EntropyConfig {
        iterations: 3000,
        ..EntropyConfig::default()
    };

    let square = UniformBoxReference::new(vec![0.0, 0.0], vec![2.0, 3.0])?;
    let data = square.sample(400, 1);
    let out = run_entropy_estimation(&config, &data)?;
    let h = out.trace.last().map_or(f64::NAN, |r| r.smoothed_estimate);
    println!("uniform on [0,2]x[0,3]: estimate {h:.4}, ln 6 = {:.4}", 6f64.ln());
    println!("  fitted box log volume {:.4}", out.reference.log_volume());

    let gauss = CorrelatedGaussianModel::new(0.8, 1)?.sample(400, 2);
    let out = run_entropy_estimation(&config, &gauss)?;
    let h = out.trace.last().map_or(f64::NAN, |r| r.smoothed_estimate);
    let truth = 1.0 + (2.0 * std::f64::consts::PI).ln() + 0.5 * (1.0f64 - 0.64).ln();
    println!("gaussian rho 0.8: estimate {h:.4}, true entropy {truth:.4}");
    println!("  box log volume {:.4}", out.reference.log_volume());
    Ok(())
}
