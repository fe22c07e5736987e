//! Sample estimators built on the Donsker-Varadhan representation
//!
//! ```text
//! D(p_Z || p_Z') = sup_f  E[f(Z)] - ln E[exp f(Z')]
//! ```
//!
//! and the entropy / mutual-information estimates assembled from it. The
//! trainable side (losses and their gradients for a network `f`) lives in
//! [`critic`].

pub mod critic;

use thiserror::Error;

use crate::distributions::{DistributionError, UniformBoxReference};
use crate::matrix::SampleBatch;
use crate::nn::NnError;

pub use critic::{
    dv_loss_and_gradient, DvLoss, GradientEma, Head, HeadSelection, MiCritic, MiCriticSpec, MiLoss,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("empty {0} batch")]
    EmptyBatch(&'static str),
    #[error("non-finite loss {0}")]
    NonFiniteLoss(f64),
    #[error("critic heads must have a single output, found {0}")]
    NotScalar(usize),
}

/// `ln(exp a + exp b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln((1/n) Σ exp v_i)`, computed after subtracting the maximum.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "log_mean_exp of an empty slice");
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + (sum / values.len() as f64).ln()
}

/// `ln Σ w_i exp v_i` for non-negative weights.
pub fn weighted_log_sum_exp(values: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(values.len(), weights.len());
    let max = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - max).exp())
        .sum();
    max + sum.ln()
}

/// One Donsker-Varadhan objective value `mean f(data) - ln mean exp f(ref)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvEstimate {
    pub mean_f_data: f64,
    pub log_mean_exp_f_ref: f64,
    pub value: f64,
}

impl DvEstimate {
    fn new(mean_f_data: f64, log_mean_exp_f_ref: f64) -> Self {
        Self {
            mean_f_data,
            log_mean_exp_f_ref,
            value: mean_f_data - log_mean_exp_f_ref,
        }
    }
}

pub fn dv_estimate(f_data: &[f64], f_ref: &[f64]) -> DvEstimate {
    assert!(!f_data.is_empty() && !f_ref.is_empty(), "empty DV sample");
    let mean = f_data.iter().sum::<f64>() / f_data.len() as f64;
    DvEstimate::new(mean, log_mean_exp(f_ref))
}

/// DV objective with the two expectations taken under discrete weighted
/// measures (for example quadrature nodes). Weights are normalized here.
pub fn dv_estimate_weighted(
    f_data: &[f64],
    data_weights: &[f64],
    f_ref: &[f64],
    ref_weights: &[f64],
) -> DvEstimate {
    assert_eq!(f_data.len(), data_weights.len());
    let total: f64 = data_weights.iter().sum();
    let mean = f_data
        .iter()
        .zip(data_weights)
        .map(|(f, w)| f * w)
        .sum::<f64>()
        / total;
    let ref_total: f64 = ref_weights.iter().sum();
    DvEstimate::new(mean, weighted_log_sum_exp(f_ref, ref_weights) - ref_total.ln())
}

/// `(1/N) Σ ln 1/p_Z'(Z_i)`; for a box this is its log-volume.
pub fn cross_entropy_estimate(
    reference: &UniformBoxReference,
    data: &SampleBatch,
) -> Result<f64, EstimatorError> {
    if data.is_empty() {
        return Err(EstimatorError::EmptyBatch("data"));
    }
    reference.log_density(data).into_result()?;
    // every in-support term equals the log-volume; averaging N copies of it
    // would only add rounding
    Ok(reference.log_volume())
}

/// Entropy estimate: cross entropy against the box minus the DV divergence
/// estimate for the critic outputs `f_data`, `f_ref`.
pub fn entropy_estimate(
    reference: &UniformBoxReference,
    data: &SampleBatch,
    f_data: &[f64],
    f_ref: &[f64],
) -> Result<f64, EstimatorError> {
    if f_data.is_empty() {
        return Err(EstimatorError::EmptyBatch("critic data"));
    }
    if f_ref.is_empty() {
        return Err(EstimatorError::EmptyBatch("critic reference"));
    }
    Ok(cross_entropy_estimate(reference, data)? - dv_estimate(f_data, f_ref).value)
}

/// Outputs of the three critic heads over one set of rows: `f0` on the
/// joint rows, `f1` on their x-blocks and `f2` on their y-blocks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MiHeads {
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

/// The three DV terms and their signed combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    pub joint: DvEstimate,
    pub x: DvEstimate,
    pub y: DvEstimate,
    pub value: f64,
}

/// `dv(f0) - dv(f1) - dv(f2)`.
pub fn mi_estimate(heads_data: &MiHeads, heads_ref: &MiHeads) -> MiEstimate {
    let joint = dv_estimate(&heads_data.f0, &heads_ref.f0);
    let x = dv_estimate(&heads_data.f1, &heads_ref.f1);
    let y = dv_estimate(&heads_data.f2, &heads_ref.f2);
    MiEstimate {
        joint,
        x,
        y,
        value: joint.value - x.value - y.value,
    }
}

/// The single-supremum estimate against the marginal-product reference.
pub fn mine_estimate(f0_data: &[f64], f0_ref: &[f64]) -> f64 {
    dv_estimate(f0_data, f0_ref).value
}
