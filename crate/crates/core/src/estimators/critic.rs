//! Trainable critics and their DV losses.
//!
//! For a scalar network `φ` the loss on a data batch `Z` and a reference
//! batch `Z'` is
//!
//! ```text
//! L(θ) = -mean φ(Z) + ln mean exp φ(Z')
//! ```
//!
//! Its gradient is a reverse pass with output cotangents `-1/N` on the data
//! rows and the softmax weights `exp φ(z'_i) / Σ_j exp φ(z'_j)` on the
//! reference rows. With a
//! [`GradientEma`] the softmax denominator `mean exp φ(Z')` is replaced by
//! its exponential moving average, which is the small-batch bias correction
//! used with the resampled-marginal reference.

use serde::{Deserialize, Serialize};

use super::{log_add_exp, DvEstimate, EstimatorError, MiHeads};
use crate::matrix::{JointLayout, Matrix, SampleBatch};
use crate::nn::{forward_view, init_into, Activation, ForwardPass, NetworkSpec, ParamView};

/// Moving average of the batch mean of `exp φ` over the reference rows.
/// Stored as a logarithm so large critic outputs cannot overflow it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientEma {
    pub rate: f64,
    log_value: Option<f64>,
}

impl GradientEma {
    pub fn new(rate: f64) -> Self {
        assert!(rate > 0.0 && rate <= 1.0, "EMA rate must be in (0, 1]");
        Self {
            rate,
            log_value: None,
        }
    }

    /// Current average of `exp φ`, if any batch has been seen.
    pub fn value(&self) -> Option<f64> {
        self.log_value.map(f64::exp)
    }

    pub fn log_value(&self) -> Option<f64> {
        self.log_value
    }

    /// `ema ← (1 - r) ema + r · batch_mean`, with the first batch initializing it.
    /// Returns the updated log-average.
    pub fn update(&mut self, log_batch_mean: f64) -> f64 {
        let next = match self.log_value {
            None => log_batch_mean,
            Some(prev) => log_add_exp(
                (1.0 - self.rate).ln() + prev,
                self.rate.ln() + log_batch_mean,
            ),
        };
        self.log_value = Some(next);
        next
    }
}

/// Loss value, gradient and the DV estimate of one minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct DvLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub estimate: DvEstimate,
}

/// Rows per forward/backward block; keeps every hidden activation of a block
/// in cache.
const GRAD_BLOCK_ROWS: usize = 512;

/// Accumulates the DV loss gradient of a scalar critic into `grad`.
///
/// Rows are processed in blocks. The reference-row weights
/// `exp φ_i / Σ_j exp φ_j` need the full denominator, so the reference part is
/// accumulated as `Σ exp(φ_i - m) ∇φ_i` under a running maximum `m` and
/// normalized once every row has been seen.
pub(crate) fn dv_loss_into(
    params: ParamView<'_>,
    data: &SampleBatch,
    reference: &SampleBatch,
    ema: Option<&mut GradientEma>,
    grad: &mut [f64],
) -> Result<(f64, DvEstimate), EstimatorError> {
    if params.spec.output_dim != 1 {
        return Err(EstimatorError::NotScalar(params.spec.output_dim));
    }
    if data.is_empty() {
        return Err(EstimatorError::EmptyBatch("data"));
    }
    if reference.is_empty() {
        return Err(EstimatorError::EmptyBatch("reference"));
    }
    let n = data.rows();
    let mut data_grad = vec![0.0; grad.len()];
    let mut sum_f_data = 0.0;
    for start in (0..n).step_by(GRAD_BLOCK_ROWS) {
        let block = data.slice_rows(start..(start + GRAD_BLOCK_ROWS).min(n));
        let pass = ForwardPass::run(params, &block)?;
        sum_f_data = pass.output().as_slice().iter().fold(sum_f_data, |a, f| a + f);
        let cot = Matrix::column(vec![-1.0 / n as f64; block.rows()]);
        pass.backward_into(&cot, &mut data_grad)?;
    }

    let n_ref = reference.rows();
    let mut ref_grad = vec![0.0; grad.len()];
    let mut shift = f64::NEG_INFINITY;
    let mut sum_exp = 0.0;
    for start in (0..n_ref).step_by(GRAD_BLOCK_ROWS) {
        let block = reference.slice_rows(start..(start + GRAD_BLOCK_ROWS).min(n_ref));
        let pass = ForwardPass::run(params, &block)?;
        let phi = pass.output().as_slice();
        let m = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m > shift {
            let rescale = (shift - m).exp();
            ref_grad.iter_mut().for_each(|g| *g *= rescale);
            sum_exp *= rescale;
            shift = m;
        }
        let weights: Vec<f64> = phi.iter().map(|f| (f - shift).exp()).collect();
        sum_exp += weights.iter().sum::<f64>();
        pass.backward_into(&Matrix::column(weights), &mut ref_grad)?;
    }

    let log_n_ref = (n_ref as f64).ln();
    let estimate = DvEstimate::new(sum_f_data / n as f64, shift + sum_exp.ln() - log_n_ref);
    let loss = -estimate.value;
    if !loss.is_finite() {
        return Err(EstimatorError::NonFiniteLoss(loss));
    }
    let log_denominator = match ema {
        Some(ema) => ema.update(estimate.log_mean_exp_f_ref),
        None => estimate.log_mean_exp_f_ref,
    };
    let ref_scale = (shift - log_n_ref - log_denominator).exp();
    for ((g, d), r) in grad.iter_mut().zip(&data_grad).zip(&ref_grad) {
        *g += d + ref_scale * r;
    }
    Ok((loss, estimate))
}

/// DV loss and its gradient for a scalar network.
pub fn dv_loss_and_gradient(
    params: ParamView<'_>,
    data: &SampleBatch,
    reference: &SampleBatch,
    ema: Option<&mut GradientEma>,
) -> Result<DvLoss, EstimatorError> {
    let mut grad = vec![0.0; params.values.len()];
    let (loss, estimate) = dv_loss_into(params, data, reference, ema, &mut grad)?;
    Ok(DvLoss {
        loss,
        grad,
        estimate,
    })
}

/// The three critic outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    /// `f0` on joint `(x, y)` rows.
    Joint,
    /// `f1` on x-blocks.
    X,
    /// `f2` on y-blocks.
    Y,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Joint, Head::X, Head::Y];

    fn index(self) -> usize {
        match self {
            Head::Joint => 0,
            Head::X => 1,
            Head::Y => 2,
        }
    }

    pub fn columns(self, layout: JointLayout) -> std::ops::Range<usize> {
        match self {
            Head::Joint => 0..layout.joint_dim(),
            Head::X => layout.x_range(),
            Head::Y => layout.y_range(),
        }
    }
}

/// Which loss terms an MI step trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadSelection {
    /// `L0 + L1 + L2`.
    All,
    /// `L0` alone: the marginal-product reference special case.
    JointOnly,
}

/// Architecture of the three-headed critic: one hidden stack per head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiCriticSpec {
    pub layout: JointLayout,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
}

impl MiCriticSpec {
    pub fn head_spec(&self, head: Head) -> NetworkSpec {
        NetworkSpec {
            input_dim: head.columns(self.layout).len(),
            hidden_widths: self.hidden_widths.clone(),
            output_dim: 1,
            activation: self.activation,
        }
    }
}

/// A single parameter vector `θ` driving three scalar outputs. Each head
/// owns a contiguous block of `θ` and only sees its own input columns, so
/// `f1` depends on x alone and `f2` on y alone.
#[derive(Debug, Clone, PartialEq)]
pub struct MiCritic {
    spec: MiCriticSpec,
    heads: [NetworkSpec; 3],
    offsets: [usize; 4],
    values: Vec<f64>,
}

/// Loss, gradient and per-head DV estimates of one MI minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct MiLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub joint: DvEstimate,
    pub x: Option<DvEstimate>,
    pub y: Option<DvEstimate>,
}

impl MiCritic {
    pub fn zeros(spec: MiCriticSpec) -> Self {
        let heads = Head::ALL.map(|h| spec.head_spec(h));
        let mut offsets = [0; 4];
        for (i, h) in heads.iter().enumerate() {
            offsets[i + 1] = offsets[i] + h.param_count();
        }
        let values = vec![0.0; offsets[3]];
        Self {
            spec,
            heads,
            offsets,
            values,
        }
    }

    /// Each head initialized as [`crate::nn::init_params`] does, drawing the
    /// joint, x and y heads in that order from one stream.
    pub fn init(spec: MiCriticSpec, seed: u64) -> Self {
        let mut critic = Self::zeros(spec);
        let mut rng = crate::nn::init_stream(seed);
        for h in Head::ALL {
            let range = critic.head_range(h);
            let head_spec = critic.heads[h.index()].clone();
            init_into(&head_spec, &mut critic.values[range], &mut rng);
        }
        critic
    }

    pub fn spec(&self) -> &MiCriticSpec {
        &self.spec
    }

    pub fn layout(&self) -> JointLayout {
        self.spec.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn head_range(&self, head: Head) -> std::ops::Range<usize> {
        let i = head.index();
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn head(&self, head: Head) -> ParamView<'_> {
        ParamView {
            spec: &self.heads[head.index()],
            values: &self.values[self.head_range(head)],
        }
    }

    fn head_input(&self, head: Head, rows: &SampleBatch) -> SampleBatch {
        match head {
            Head::Joint => rows.clone(),
            _ => rows.select_columns(head.columns(self.layout())),
        }
    }

    /// Output of one head on joint rows.
    pub fn evaluate_head(&self, head: Head, rows: &SampleBatch) -> Result<Vec<f64>, EstimatorError> {
        let out = match head {
            Head::Joint => forward_view(self.head(head), rows)?,
            _ => forward_view(self.head(head), &self.head_input(head, rows))?,
        };
        Ok(out.into_vec())
    }

    /// All three heads on joint rows.
    pub fn evaluate(&self, rows: &SampleBatch) -> Result<MiHeads, EstimatorError> {
        Ok(MiHeads {
            f0: self.evaluate_head(Head::Joint, rows)?,
            f1: self.evaluate_head(Head::X, rows)?,
            f2: self.evaluate_head(Head::Y, rows)?,
        })
    }

    /// Summed DV losses of the selected heads and the gradient over all of
    /// `θ`. Heads that are not selected get an exactly zero gradient. The EMA,
    /// when given, corrects the joint head's gradient only.
    pub fn mi_loss_and_gradient(
        &self,
        data: &SampleBatch,
        reference: &SampleBatch,
        selection: HeadSelection,
        ema: Option<&mut GradientEma>,
    ) -> Result<MiLoss, EstimatorError> {
        let mut grad = vec![0.0; self.values.len()];
        let range = self.head_range(Head::Joint);
        let (mut loss, joint) =
            dv_loss_into(self.head(Head::Joint), data, reference, ema, &mut grad[range])?;
        let (mut x, mut y) = (None, None);
        if selection == HeadSelection::All {
            for (head, slot) in [(Head::X, &mut x), (Head::Y, &mut y)] {
                let range = self.head_range(head);
                let (l, est) = dv_loss_into(
                    self.head(head),
                    &self.head_input(head, data),
                    &self.head_input(head, reference),
                    None,
                    &mut grad[range],
                )?;
                loss += l;
                *slot = Some(est);
            }
        }
        Ok(MiLoss {
            loss,
            grad,
            joint,
            x,
            y,
        })
    }
}
