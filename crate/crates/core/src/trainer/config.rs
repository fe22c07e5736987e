use serde::{Deserialize, Serialize};

use crate::distributions::SyntheticModel;
use crate::nn::{Activation, NetworkSpec};

/// Which reference the mutual-information run estimates against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Three DV terms against uniform bounding boxes.
    Minee,
    /// One DV term against resampled marginals, EMA-corrected gradient.
    Mine,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "minee" => Ok(Mode::Minee),
            "mine" => Ok(Mode::Mine),
            other => Err(format!("unknown mode {other:?} (expected minee or mine)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Minee => "minee",
            Mode::Mine => "mine",
        })
    }
}

/// Hidden stack shared by every critic head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self {
            hidden_widths: NetworkSpec::DEFAULT_HIDDEN.to_vec(),
            activation: Activation::Elu,
        }
    }
}

/// Everything that determines a mutual-information run. The trace is a pure
/// function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: SyntheticModel,
    pub n_samples: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// `N' = ref_factor · N`; also the reference-to-data ratio inside a
    /// minibatch. Ignored by [`Mode::Mine`].
    pub ref_factor: usize,
    pub ref_fresh_each_step: bool,
    pub grad_ema_rate: f64,
    pub estimate_ema_rate: f64,
    pub iterations: u64,
    pub seed: u64,
    pub network: NetworkShape,
    pub eval_every: u64,
    /// Fraction of each column's range added on both sides of the box.
    pub box_margin: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.model.validate().map_err(|e| e.to_string())?;
        if self.n_samples == 0 {
            return Err("n_samples must be positive".into());
        }
        if self.batch_size == 0 || self.batch_size > self.n_samples {
            return Err(format!(
                "batch_size must be in 1..={} (n_samples), got {}",
                self.n_samples, self.batch_size
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.ref_factor == 0 {
            return Err("ref_factor must be positive".into());
        }
        for (name, r) in [
            ("grad_ema_rate", self.grad_ema_rate),
            ("estimate_ema_rate", self.estimate_ema_rate),
        ] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(format!("{name} must be in (0, 1], got {r}"));
            }
        }
        if self.eval_every == 0 {
            return Err("eval_every must be positive".into());
        }
        if !(self.box_margin >= 0.0 && self.box_margin.is_finite()) {
            return Err(format!("box_margin must be non-negative, got {}", self.box_margin));
        }
        if self.network.hidden_widths.contains(&0) {
            return Err("hidden widths must be positive".into());
        }
        Ok(())
    }

    pub fn reference_size(&self) -> usize {
        self.ref_factor * self.n_samples
    }

    pub fn reference_batch_size(&self) -> usize {
        match self.mode {
            Mode::Minee => self.ref_factor * self.batch_size,
            Mode::Mine => self.batch_size,
        }
    }
}

/// Settings for a single-distribution entropy run; the data are supplied
/// separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub ref_factor: usize,
    pub ref_fresh_each_step: bool,
    pub estimate_ema_rate: f64,
    pub iterations: u64,
    pub seed: u64,
    pub network: NetworkShape,
    pub eval_every: u64,
    pub box_margin: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            learning_rate: 1e-4,
            ref_factor: 10,
            ref_fresh_each_step: true,
            estimate_ema_rate: 0.01,
            iterations: 5000,
            seed: 0,
            network: NetworkShape::default(),
            eval_every: 100,
            box_margin: 0.0,
        }
    }
}
