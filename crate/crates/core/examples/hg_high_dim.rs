//! MI-NEE against the closed-form MI of d correlated Gaussian pairs.
//!
//! cargo run --release --example hg_high_dim [d] [iterations]

use minee::distributions::{CorrelatedGaussianModel, SyntheticModel};
use minee::experiment::preset;
use minee::trainer::run_estimation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let d: usize = args.next().map_or(Ok(2), |s| s.parse())?;
    let iterations: u64 = args.next().map_or(Ok(3000), |s| s.parse())?;

    let mut config = preset("hg09d6-minee").expect("known preset");
    config.model = SyntheticModel::Hg(CorrelatedGaussianModel::new(0.9, d)?);
    config.iterations = iterations;
    config.ref_factor = 50;
    config.eval_every = 250;

    let truth = config.model.ground_truth()?.value;
    let out = run_estimation(&config)?;
    for row in &out.trace.rows {
        println!("{:>6} {:.4}", row.iteration, row.smoothed_estimate);
    }
    println!("d {d}: ground truth {truth:.4}");
    Ok(())
}
