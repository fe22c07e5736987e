//! MI-NEE on the mixed Gaussian, printing the smoothed estimate as it trains.
//!
//! cargo run --release --example mi_mixed_gaussian [iterations]

use minee::experiment::preset;
use minee::trainer::run_estimation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations = std::env::args().nth(1).map_or(Ok(10_000), |s| s.parse())?;
    let mut config = preset("mg09-minee").expect("known preset");
    config.iterations = iterations;
    config.eval_every = 500;

    let truth = config.model.ground_truth()?.value;
    let out = run_estimation(&config)?;
    println!("{:>9} {:>9} {:>9}", "iteration", "raw", "smoothed");
    for row in &out.trace.rows {
        println!("{:>9} {:>9.4} {:>9.4}", row.iteration, row.raw_estimate, row.smoothed_estimate);
    }
    println!("ground truth {truth:.4}");
    Ok(())
}
