use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use minee::distributions::GroundTruthMethod;
use minee::experiment::{
    compare_runs, format_compare_table, model_from_flags, preset, run_to_dir, ConfigOverrides,
    ModelKind, PRESET_NAMES,
};
use minee::nn::Activation;
use minee::trainer::Mode;

#[derive(Parser)]
#[command(name = "minee", version, about = "Mutual information by neural entropic estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one estimator and write trace.csv and summary.json.
    Run(RunArgs),
    /// Print the true mutual information of a model.
    GroundTruth(ModelArgs),
    /// Tabulate finished runs.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// mg or hg
    #[arg(long, value_parser = str::parse::<ModelKind>)]
    model: ModelKind,
    #[arg(long)]
    rho: Option<f64>,
    /// Per-block dimension of the hg model.
    #[arg(long)]
    d: Option<usize>,
}

fn parse_hidden(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .filter(|w| !w.trim().is_empty())
        .map(|w| w.trim().parse::<usize>().map_err(|e| format!("bad width {w:?}: {e}")))
        .collect()
}

#[derive(Args)]
struct RunArgs {
    /// Starting configuration; flags override it. Without a preset the run
    /// starts from mg09-minee.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    preset: Option<String>,
    #[arg(long, value_parser = str::parse::<Mode>)]
    mode: Option<Mode>,
    #[arg(long, value_parser = str::parse::<ModelKind>)]
    model: Option<ModelKind>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    /// Number of data samples.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    ref_factor: Option<usize>,
    /// Regenerate reference samples every step (true) or draw from a fixed pool.
    #[arg(long)]
    ref_fresh: Option<bool>,
    #[arg(long)]
    grad_ema_rate: Option<f64>,
    #[arg(long)]
    estimate_ema_rate: Option<f64>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated hidden widths, e.g. 100,100,100.
    #[arg(long, value_parser = parse_hidden)]
    // fully qualified so clap takes one comma list rather than repeated values
    hidden: Option<::std::vec::Vec<usize>>,
    #[arg(long, value_parser = str::parse::<Activation>)]
    activation: Option<Activation>,
    /// Fraction of each column's range added to both sides of the box.
    #[arg(long)]
    box_margin: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            mode: self.mode,
            model: self.model,
            rho: self.rho,
            d: self.d,
            n_samples: self.n,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            ref_factor: self.ref_factor,
            ref_fresh_each_step: self.ref_fresh,
            grad_ema_rate: self.grad_ema_rate,
            estimate_ema_rate: self.estimate_ema_rate,
            iterations: self.iterations,
            eval_every: self.eval_every,
            seed: self.seed,
            hidden_widths: self.hidden.clone(),
            activation: self.activation,
            box_margin: self.box_margin,
        }
    }
}

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

fn run(args: RunArgs) -> ExitCode {
    let name = args.preset.as_deref().unwrap_or("mg09-minee");
    let base = preset(name).expect("clap restricts preset names");
    let config = match args.overrides().apply(base) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run_to_dir(&config, args.preset.as_deref(), &args.out) {
        Ok(artifacts) => {
            let s = &artifacts.summary;
            let estimate = s
                .final_smoothed_estimate
                .map_or("none".to_string(), |v| format!("{v:.5}"));
            let converged = s
                .convergence_iteration
                .map_or("never".to_string(), |v| v.to_string());
            println!(
                "estimate {estimate} nats (ground truth {:.5}), within 10% from iteration {converged}, {:.1}s",
                s.ground_truth, s.wall_clock_seconds
            );
            if let Some(d) = &s.divergence {
                eprintln!("diverged at iteration {}: {}", d.iteration, d.reason);
                return ExitCode::from(EXIT_DIVERGED);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn ground_truth(args: ModelArgs) -> ExitCode {
    let truth = model_from_flags(args.model, args.rho, args.d).and_then(|m| m.ground_truth());
    match truth {
        Ok(t) => {
            println!("{:.5}", t.value);
            match t.oracle {
                GroundTruthMethod::ClosedForm => println!("method: closed form"),
                GroundTruthMethod::Quadrature {
                    resolution,
                    refined_resolution,
                    coarse_value,
                    half_width,
                } => println!(
                    "method: quadrature on [-{half_width}, {half_width}]^2, {resolution} and {refined_resolution} intervals per axis, values {coarse_value:.8} and {:.8}",
                    t.value
                ),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::GroundTruth(args) => ground_truth(args),
        Command::Compare { dirs } => match compare_runs(&dirs) {
            Ok(rows) => {
                print!("{}", format_compare_table(&rows));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_FAILURE)
            }
        },
    }
}
