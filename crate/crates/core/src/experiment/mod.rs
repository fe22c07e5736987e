//! Named experiment presets, run artifacts and their comparison.
//!
//! A run directory holds `trace.csv` and `summary.json`. The summary carries
//! the fully resolved [`RunConfig`], so [`RunConfig::to_flags`] can replay
//! any run from the command line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{
    CorrelatedGaussianModel, DistributionError, GroundTruthMethod, MixedGaussianModel,
    SyntheticModel,
};
use crate::matrix::MatrixError;
use crate::nn::Activation;
use crate::trainer::{
    convergence_iteration, run_estimation, Mode, NetworkShape, RunConfig, Trace, TrainError,
};

/// Mutual information of MG(0.9) in nats, from the default-resolution
/// quadrature.
pub const MG09_GROUND_TRUTH: f64 = 0.40844254977570404;

/// Band used for the convergence iteration reported in summaries.
pub const CONVERGENCE_TOLERANCE: f64 = 0.1;

pub const PRESET_NAMES: [&str; 4] = ["mg09-minee", "mg09-mine", "hg09d6-minee", "hg09d6-mine"];

/// Hidden layers used by the HG(0.9, 6) presets.
pub const HG_PRESET_HIDDEN: [usize; 3] = [32, 32, 32];

fn base_config(mode: Mode, model: SyntheticModel) -> RunConfig {
    RunConfig {
        mode,
        model,
        n_samples: 400,
        batch_size: 100,
        learning_rate: 1e-4,
        ref_factor: 10,
        ref_fresh_each_step: true,
        grad_ema_rate: 0.01,
        estimate_ema_rate: 0.01,
        iterations: 40_000,
        seed: 0,
        network: NetworkShape::default(),
        eval_every: 100,
        box_margin: 0.0,
    }
}

/// The configuration stored under a preset name.
pub fn preset(name: &str) -> Option<RunConfig> {
    let mg = SyntheticModel::Mg(MixedGaussianModel { rho: 0.9 });
    let hg = SyntheticModel::Hg(CorrelatedGaussianModel { rho: 0.9, d: 6 });
    let hg_network = NetworkShape {
        hidden_widths: HG_PRESET_HIDDEN.to_vec(),
        activation: Activation::Elu,
    };
    let config = match name {
        "mg09-minee" => base_config(Mode::Minee, mg),
        "mg09-mine" => RunConfig {
            iterations: 100_000,
            ..base_config(Mode::Mine, mg)
        },
        "hg09d6-minee" => RunConfig {
            learning_rate: 5e-5,
            ref_factor: 300,
            iterations: 12_000,
            network: hg_network,
            ..base_config(Mode::Minee, hg)
        },
        "hg09d6-mine" => RunConfig {
            learning_rate: 5e-5,
            iterations: 30_000,
            network: hg_network,
            ..base_config(Mode::Mine, hg)
        },
        _ => return None,
    };
    Some(config)
}

impl RunConfig {
    /// Command-line flags that reproduce this configuration without a preset.
    /// Floats use round-trip formatting, so the replayed run is identical.
    pub fn to_flags(&self) -> Vec<String> {
        let mut flags: Vec<(&str, String)> = vec![("--mode", self.mode.to_string())];
        match self.model {
            SyntheticModel::Mg(m) => {
                flags.push(("--model", "mg".into()));
                flags.push(("--rho", format!("{:?}", m.rho)));
            }
            SyntheticModel::Hg(m) => {
                flags.push(("--model", "hg".into()));
                flags.push(("--rho", format!("{:?}", m.rho)));
                flags.push(("--d", m.d.to_string()));
            }
        }
        let hidden: Vec<String> = self.network.hidden_widths.iter().map(|w| w.to_string()).collect();
        flags.extend([
            ("--n", self.n_samples.to_string()),
            ("--batch-size", self.batch_size.to_string()),
            ("--lr", format!("{:?}", self.learning_rate)),
            ("--ref-factor", self.ref_factor.to_string()),
            ("--ref-fresh", self.ref_fresh_each_step.to_string()),
            ("--grad-ema-rate", format!("{:?}", self.grad_ema_rate)),
            ("--estimate-ema-rate", format!("{:?}", self.estimate_ema_rate)),
            ("--iterations", self.iterations.to_string()),
            ("--eval-every", self.eval_every.to_string()),
            ("--seed", self.seed.to_string()),
            ("--hidden", hidden.join(",")),
            ("--activation", self.network.activation.to_string()),
            ("--box-margin", format!("{:?}", self.box_margin)),
        ]);
        flags
            .into_iter()
            .flat_map(|(k, v)| [k.to_string(), v])
            .collect()
    }
}

/// Which synthetic model a flag set names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mg,
    Hg,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mg" => Ok(ModelKind::Mg),
            "hg" => Ok(ModelKind::Hg),
            other => Err(format!("unknown model {other:?} (expected mg or hg)")),
        }
    }
}

/// Builds a model from flags; `rho` defaults to 0.9 and `d` to 1.
pub fn model_from_flags(
    kind: ModelKind,
    rho: Option<f64>,
    d: Option<usize>,
) -> Result<SyntheticModel, DistributionError> {
    let rho = rho.unwrap_or(0.9);
    Ok(match kind {
        ModelKind::Mg => SyntheticModel::Mg(MixedGaussianModel::new(rho)?),
        ModelKind::Hg => SyntheticModel::Hg(CorrelatedGaussianModel::new(rho, d.unwrap_or(1))?),
    })
}

/// Individually overridable run settings; `None` keeps the base value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub mode: Option<Mode>,
    pub model: Option<ModelKind>,
    pub rho: Option<f64>,
    pub d: Option<usize>,
    pub n_samples: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub ref_factor: Option<usize>,
    pub ref_fresh_each_step: Option<bool>,
    pub grad_ema_rate: Option<f64>,
    pub estimate_ema_rate: Option<f64>,
    pub iterations: Option<u64>,
    pub eval_every: Option<u64>,
    pub seed: Option<u64>,
    pub hidden_widths: Option<Vec<usize>>,
    pub activation: Option<Activation>,
    pub box_margin: Option<f64>,
}

impl ConfigOverrides {
    /// Applies the overrides to `base` and validates the result. Model flags
    /// not given fall back to the base model's values when the kind matches.
    pub fn apply(&self, base: RunConfig) -> Result<RunConfig, String> {
        let mut c = base;
        let base_kind = match c.model {
            SyntheticModel::Mg(_) => ModelKind::Mg,
            SyntheticModel::Hg(_) => ModelKind::Hg,
        };
        if self.model.is_some() || self.rho.is_some() || self.d.is_some() {
            let kind = self.model.unwrap_or(base_kind);
            let (rho, d) = match (kind == base_kind, c.model) {
                (true, SyntheticModel::Hg(m)) => (self.rho.or(Some(m.rho)), self.d.or(Some(m.d))),
                (true, SyntheticModel::Mg(m)) => (self.rho.or(Some(m.rho)), self.d),
                (false, _) => (self.rho, self.d),
            };
            if kind == ModelKind::Mg && d.is_some_and(|d| d != 1) {
                return Err("--d applies only to the hg model".into());
            }
            c.model = model_from_flags(kind, rho, d).map_err(|e| e.to_string())?;
        }
        macro_rules! set {
            ($($field:ident $(. $sub:ident)* <- $src:ident),* $(,)?) => {
                $(if let Some(v) = self.$src.clone() { c.$field$(.$sub)* = v; })*
            };
        }
        set!(
            mode <- mode,
            n_samples <- n_samples,
            batch_size <- batch_size,
            learning_rate <- learning_rate,
            ref_factor <- ref_factor,
            ref_fresh_each_step <- ref_fresh_each_step,
            grad_ema_rate <- grad_ema_rate,
            estimate_ema_rate <- estimate_ema_rate,
            iterations <- iterations,
            eval_every <- eval_every,
            seed <- seed,
            network.hidden_widths <- hidden_widths,
            network.activation <- activation,
            box_margin <- box_margin,
        );
        c.validate()?;
        Ok(c)
    }
}

/// Where a run stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub iteration: u64,
    pub reason: String,
}

/// Contents of `summary.json`. Field order is the key order on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub preset: Option<String>,
    pub config: RunConfig,
    pub ground_truth: f64,
    pub ground_truth_oracle: GroundTruthMethod,
    pub final_smoothed_estimate: Option<f64>,
    pub convergence_iteration: Option<u64>,
    pub convergence_tolerance: f64,
    pub recorded_points: usize,
    pub wall_clock_seconds: f64,
    pub diverged: bool,
    pub divergence: Option<Divergence>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Train(TrainError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: MatrixError },
    #[error("{path}: malformed summary: {message}")]
    Summary { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Outcome of [`run_to_dir`]; a diverged run still wrote its artifacts.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub trace: Trace,
}

/// Runs `config` and writes `trace.csv` and `summary.json` into `out`.
///
/// Divergence is not an error here: the partial trace is written and the
/// summary is flagged. Other training failures are returned.
pub fn run_to_dir(
    config: &RunConfig,
    preset: Option<&str>,
    out: &Path,
) -> Result<RunArtifacts, ExperimentError> {
    let truth = config.model.ground_truth()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let started = Instant::now();
    let (trace, divergence) = match run_estimation(config) {
        Ok(output) => (output.trace, None),
        Err(TrainError::Diverged {
            iteration,
            reason,
            trace,
        }) => (trace, Some(Divergence { iteration, reason })),
        Err(e) => return Err(ExperimentError::Train(e)),
    };
    let wall_clock_seconds = started.elapsed().as_secs_f64();

    let trace_path = out.join("trace.csv");
    let file = fs::File::create(&trace_path).map_err(io_err(&trace_path))?;
    trace
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|source| ExperimentError::Trace {
            path: trace_path.clone(),
            source,
        })?;

    let summary = RunSummary {
        preset: preset.map(str::to_string),
        config: config.clone(),
        ground_truth: truth.value,
        ground_truth_oracle: truth.oracle,
        final_smoothed_estimate: trace.last().map(|r| r.smoothed_estimate),
        convergence_iteration: convergence_iteration(&trace, truth.value, CONVERGENCE_TOLERANCE),
        convergence_tolerance: CONVERGENCE_TOLERANCE,
        recorded_points: trace.len(),
        wall_clock_seconds,
        diverged: divergence.is_some(),
        divergence,
    };
    let summary_path = out.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    fs::write(&summary_path, json).map_err(io_err(&summary_path))?;
    Ok(RunArtifacts { summary, trace })
}

pub fn read_summary(dir: &Path) -> Result<RunSummary, ExperimentError> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Summary {
        path,
        message: e.to_string(),
    })
}

pub fn read_trace(dir: &Path) -> Result<Trace, ExperimentError> {
    let path = dir.join("trace.csv");
    let file = fs::File::open(&path).map_err(io_err(&path))?;
    Trace::read_csv(file).map_err(|source| ExperimentError::Trace { path, source })
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub name: String,
    pub final_estimate: Option<f64>,
    pub relative_error: Option<f64>,
    pub convergence_iteration: Option<u64>,
    pub diverged: bool,
}

impl CompareRow {
    pub fn from_summary(name: String, s: &RunSummary) -> Self {
        let relative_error = s
            .final_smoothed_estimate
            .filter(|_| s.ground_truth != 0.0)
            .map(|e| (e - s.ground_truth) / s.ground_truth);
        Self {
            name,
            final_estimate: s.final_smoothed_estimate,
            relative_error,
            convergence_iteration: s.convergence_iteration,
            diverged: s.diverged,
        }
    }
}

/// Reads the summary in each directory; rows are named after the directory.
pub fn compare_runs<P: AsRef<Path>>(dirs: &[P]) -> Result<Vec<CompareRow>, ExperimentError> {
    dirs.iter()
        .map(|d| {
            let d = d.as_ref();
            let name = d
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| d.display().to_string());
            Ok(CompareRow::from_summary(name, &read_summary(d)?))
        })
        .collect()
}

/// Shown in the convergence column when a run never settled in the band.
pub const NOT_CONVERGED: &str = "-";

pub fn format_compare_table(rows: &[CompareRow]) -> String {
    let fmt_opt = |v: Option<String>| v.unwrap_or_else(|| NOT_CONVERGED.to_string());
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                fmt_opt(r.final_estimate.map(|v| format!("{v:.5}"))),
                fmt_opt(r.relative_error.map(|v| format!("{:+.2}%", 100.0 * v))),
                fmt_opt(r.convergence_iteration.map(|v| v.to_string())),
                if r.diverged { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    let header = ["run", "final_estimate", "rel_error", "converged_at", "diverged"];
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cols: &[String]| {
        let parts: Vec<String> = cols
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        writeln!(out, "{}", parts.join("  ").trim_end()).expect("write to string");
    };
    line(&header.map(String::from));
    for row in &cells {
        line(row);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{ground_truth_mi_mg, DEFAULT_MG_RESOLUTION};

    #[test]
    fn presets_exist_and_validate() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            assert_eq!((c.n_samples, c.batch_size), (400, 100));
            assert_eq!(c.estimate_ema_rate, 0.01);
        }
        assert!(preset("mg09").is_none());
        let hg = preset("hg09d6-minee").unwrap();
        assert_eq!((hg.learning_rate, hg.ref_factor), (5e-5, 300));
        assert_eq!(preset("mg09-minee").unwrap().ref_factor, 10);
        assert_eq!(preset("mg09-mine").unwrap().grad_ema_rate, 0.01);
    }

    #[test]
    fn frozen_mg_constant_matches_quadrature() {
        let q = ground_truth_mi_mg(&MixedGaussianModel { rho: 0.9 }, DEFAULT_MG_RESOLUTION).unwrap();
        assert_eq!(q.value, MG09_GROUND_TRUTH);
    }

    #[test]
    fn table_uses_sentinel_for_missing_convergence() {
        let rows = vec![
            CompareRow {
                name: "a".into(),
                final_estimate: Some(1.0),
                relative_error: Some(0.05),
                convergence_iteration: Some(1200),
                diverged: false,
            },
            CompareRow {
                name: "bbbb".into(),
                final_estimate: None,
                relative_error: None,
                convergence_iteration: None,
                diverged: true,
            },
        ];
        let t = format_compare_table(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains("1200") && lines[1].contains("+5.00%"));
        assert!(lines[2].starts_with("bbbb") && lines[2].contains(NOT_CONVERGED) && lines[2].ends_with("yes"));
    }
}
