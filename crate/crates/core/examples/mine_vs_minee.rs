//! Both estimators on the same data, written to disk and tabulated.
//!
//! cargo run --release --example mine_vs_minee [iterations]

use minee::experiment::{compare_runs, format_compare_table, preset, run_to_dir};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations = std::env::args().nth(1).map_or(Ok(20_000), |s| s.parse())?;
    let root = std::env::temp_dir().join("minee-mine-vs-minee");
    let mut dirs = Vec::new();
    for name in ["mg09-minee", "mg09-mine"] {
        let mut config = preset(name).expect("known preset");
        config.iterations = iterations;
        let dir = root.join(name);
        let run = run_to_dir(&config, Some(name), &dir)?;
        println!("{name}: {:.1}s", run.summary.wall_clock_seconds);
        dirs.push(dir);
    }
    print!("{}", format_compare_table(&compare_runs(&dirs)?));
    println!("traces in {}", root.display());
    Ok(())
}
