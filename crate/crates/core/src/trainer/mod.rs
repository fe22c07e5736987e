//! The training loop that turns a critic into an estimate.
//!
//! A run draws its data once, then repeats: take a data minibatch (a fresh
//! permutation every epoch), take a reference minibatch, compute the DV
//! loss gradient, apply one Adam step. Every `eval_every` steps the
//! full-sample estimate is appended to the [`Trace`].
//!
//! All randomness comes from ChaCha8 streams of the run seed, so a trace is a
//! pure function of its config:
//!
//! | stream | use |
//! |---|---|
//! | 0 | data samples |
//! | 1 | critic initialization |
//! | 2 | minibatch order |
//! | 3 | reference minibatches |
//! | 4 | evaluation reference sample |

mod config;
mod trace;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::distributions::{
    DistributionError, ReferenceSampler, ResampledMarginalReference, UniformBoxReference,
};
use crate::estimators::{
    dv_loss_and_gradient, entropy_estimate, mi_estimate, mine_estimate, EstimatorError,
    GradientEma, Head, HeadSelection, MiCritic, MiCriticSpec,
};
use crate::matrix::{Matrix, SampleBatch};
use crate::nn::{adam_step, forward, init_params, AdamConfig, AdamState, NetworkSpec, NnError, ParameterSet};

pub use config::{EntropyConfig, Mode, NetworkShape, RunConfig};
pub use trace::{convergence_iteration, smooth, Trace, TraceRow, TRACE_HEADER};
use trace::TraceRecorder;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    /// Training produced a non-finite loss, gradient or estimate. `trace`
    /// holds every point recorded before the failure.
    #[error("diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: u64,
        reason: String,
        trace: Trace,
    },
}

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Yields minibatches of row indices; every index appears exactly once per
/// epoch and the order is reshuffled at each epoch start. When `n` is not a
/// multiple of the batch size the last batch of an epoch is shorter.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    order: Vec<usize>,
    batch: usize,
    pos: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    pub fn new(n: usize, batch: usize, rng: ChaCha8Rng) -> Self {
        assert!(n > 0 && batch > 0, "empty epoch");
        Self {
            order: (0..n).collect(),
            batch: batch.min(n),
            pos: n,
            rng,
        }
    }

    pub fn next_batch(&mut self) -> &[usize] {
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let start = self.pos;
        self.pos = end;
        &self.order[start..end]
    }
}

/// Source of reference minibatches.
enum ReferenceStream {
    Fresh {
        reference: UniformBoxReference,
        batch: usize,
    },
    Pool {
        pool: SampleBatch,
        sampler: EpochSampler,
    },
    Marginals {
        reference: ResampledMarginalReference,
        batch: usize,
    },
}

impl ReferenceStream {
    fn next(&mut self, rng: &mut ChaCha8Rng) -> SampleBatch {
        match self {
            ReferenceStream::Fresh { reference, batch } => reference.sample_with(*batch, rng),
            ReferenceStream::Pool { pool, sampler } => pool.select_rows(sampler.next_batch()),
            ReferenceStream::Marginals { reference, batch } => reference.sample_with(*batch, rng),
        }
    }
}

fn uniform_reference_stream(
    reference: &UniformBoxReference,
    n_ref: usize,
    batch: usize,
    fresh: bool,
    seed: u64,
) -> (ReferenceStream, SampleBatch) {
    // The evaluation sample doubles as the fixed pool when references are not
    // regenerated each step.
    let eval_ref = reference.sample_with(n_ref, &mut stream(seed, 4));
    let stream = if fresh {
        ReferenceStream::Fresh {
            reference: reference.clone(),
            batch,
        }
    } else {
        ReferenceStream::Pool {
            pool: eval_ref.clone(),
            sampler: EpochSampler::new(n_ref, batch, stream(seed, 3)),
        }
    };
    (stream, eval_ref)
}

fn diverged(iteration: u64, reason: impl ToString, recorder: TraceRecorder) -> TrainError {
    TrainError::Diverged {
        iteration,
        reason: reason.to_string(),
        trace: recorder.into_trace(),
    }
}

fn step_failure(err: EstimatorError, iteration: u64, recorder: TraceRecorder) -> TrainError {
    match err {
        EstimatorError::NonFiniteLoss(_) | EstimatorError::Nn(NnError::NonFiniteGradient { .. }) => {
            diverged(iteration, err, recorder)
        }
        other => TrainError::Estimator(other),
    }
}

/// Result of a mutual-information run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub critic: MiCritic,
}

/// Trains a three-headed critic according to `config` and records its
/// mutual-information estimates.
pub fn run_estimation(config: &RunConfig) -> Result<RunOutput, TrainError> {
    config.validate().map_err(TrainError::InvalidConfig)?;
    let layout = config.model.layout();
    let data = config.model.sample(config.n_samples, config.seed);
    let mut critic = MiCritic::init(
        MiCriticSpec {
            layout,
            hidden_widths: config.network.hidden_widths.clone(),
            activation: config.network.activation,
        },
        config.seed,
    );
    let mut adam = AdamState::new(critic.len(), AdamConfig::with_learning_rate(config.learning_rate));
    let mut batches = EpochSampler::new(config.n_samples, config.batch_size, stream(config.seed, 2));
    let mut ref_rng = stream(config.seed, 3);
    let mut eval_rng = stream(config.seed, 4);
    let mut recorder = TraceRecorder::new(config.estimate_ema_rate);

    let (mut references, eval_ref, selection, mut grad_ema) = match config.mode {
        Mode::Minee => {
            let reference = UniformBoxReference::from_samples(&data, config.box_margin)?;
            let (s, eval_ref) = uniform_reference_stream(
                &reference,
                config.reference_size(),
                config.reference_batch_size(),
                config.ref_fresh_each_step,
                config.seed,
            );
            (s, Some(eval_ref), HeadSelection::All, None)
        }
        Mode::Mine => {
            let reference = ResampledMarginalReference::from_joint(&data, layout)?;
            let s = ReferenceStream::Marginals {
                reference,
                batch: config.reference_batch_size(),
            };
            (s, None, HeadSelection::JointOnly, Some(GradientEma::new(config.grad_ema_rate)))
        }
    };
    let marginals = match config.mode {
        Mode::Mine => Some(ResampledMarginalReference::from_joint(&data, layout)?),
        Mode::Minee => None,
    };

    for t in 1..=config.iterations {
        let data_batch = data.select_rows(batches.next_batch());
        let ref_batch = references.next(&mut ref_rng);
        let step = critic.mi_loss_and_gradient(&data_batch, &ref_batch, selection, grad_ema.as_mut());
        let step = match step {
            Ok(s) => s,
            Err(e) => return Err(step_failure(e, t, recorder)),
        };
        if let Err(e) = adam_step(critic.values_mut(), &step.grad, &mut adam) {
            return Err(step_failure(e.into(), t, recorder));
        }
        if t % config.eval_every == 0 || t == config.iterations {
            let estimate = match (&eval_ref, &marginals) {
                (Some(eval_ref), _) => {
                    mi_estimate(&critic.evaluate(&data)?, &critic.evaluate(eval_ref)?).value
                }
                (None, Some(marginals)) => {
                    let shuffled = marginals.sample_with(config.n_samples, &mut eval_rng);
                    mine_estimate(
                        &critic.evaluate_head(Head::Joint, &data)?,
                        &critic.evaluate_head(Head::Joint, &shuffled)?,
                    )
                }
                (None, None) => unreachable!("every mode has an evaluation reference"),
            };
            if !estimate.is_finite() {
                return Err(diverged(t, format!("non-finite estimate {estimate}"), recorder));
            }
            recorder.push(t, estimate, step.loss);
        }
    }
    Ok(RunOutput {
        trace: recorder.into_trace(),
        critic,
    })
}

/// Result of an entropy run.
#[derive(Debug, Clone)]
pub struct EntropyOutput {
    pub trace: Trace,
    pub params: ParameterSet,
    pub reference: UniformBoxReference,
}

/// Estimates the differential entropy of `data` against the uniform box
/// around it with a scalar critic.
pub fn run_entropy_estimation(
    config: &EntropyConfig,
    data: &SampleBatch,
) -> Result<EntropyOutput, TrainError> {
    if data.is_empty() || config.batch_size == 0 || config.ref_factor == 0 || config.eval_every == 0 {
        return Err(TrainError::InvalidConfig(
            "data, batch_size, ref_factor and eval_every must be non-empty".into(),
        ));
    }
    let spec = NetworkSpec::new(
        data.cols(),
        config.network.hidden_widths.clone(),
        1,
        config.network.activation,
    )
    .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    let reference = UniformBoxReference::from_samples(data, config.box_margin)?;
    let n = data.rows();
    let batch = config.batch_size.min(n);
    let (mut references, eval_ref) = uniform_reference_stream(
        &reference,
        config.ref_factor * n,
        config.ref_factor * batch,
        config.ref_fresh_each_step,
        config.seed,
    );
    let mut params = init_params(&spec, config.seed);
    let mut adam = AdamState::new(params.len(), AdamConfig::with_learning_rate(config.learning_rate));
    let mut batches = EpochSampler::new(n, batch, stream(config.seed, 2));
    let mut ref_rng = stream(config.seed, 3);
    let mut recorder = TraceRecorder::new(config.estimate_ema_rate);

    for t in 1..=config.iterations {
        let data_batch = data.select_rows(batches.next_batch());
        let ref_batch = references.next(&mut ref_rng);
        let step = match dv_loss_and_gradient(params.view(), &data_batch, &ref_batch, None) {
            Ok(s) => s,
            Err(e) => return Err(step_failure(e, t, recorder)),
        };
        if let Err(e) = adam_step(params.values_mut(), &step.grad, &mut adam) {
            return Err(step_failure(e.into(), t, recorder));
        }
        if t % config.eval_every == 0 || t == config.iterations {
            let f_data = forward(&params, data)?.into_vec();
            let f_ref = forward(&params, &eval_ref)?.into_vec();
            let h = entropy_estimate(&reference, data, &f_data, &f_ref)?;
            if !h.is_finite() {
                return Err(diverged(t, format!("non-finite estimate {h}"), recorder));
            }
            recorder.push(t, h, step.loss);
        }
    }
    Ok(EntropyOutput {
        trace: recorder.into_trace(),
        params,
        reference,
    })
}

impl From<NnError> for TrainError {
    fn from(e: NnError) -> Self {
        TrainError::Estimator(e.into())
    }
}

/// Full-sample entropy estimate of `data` for a fixed critic.
pub fn entropy_with_critic(
    params: &ParameterSet,
    reference: &UniformBoxReference,
    data: &SampleBatch,
    reference_sample: &Matrix,
) -> Result<f64, TrainError> {
    let f_data = forward(params, data)?.into_vec();
    let f_ref = forward(params, reference_sample)?.into_vec();
    Ok(entropy_estimate(reference, data, &f_data, &f_ref)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{CorrelatedGaussianModel, MixedGaussianModel, SyntheticModel};

    fn tiny_config(mode: Mode) -> RunConfig {
        RunConfig {
            mode,
            model: SyntheticModel::Mg(MixedGaussianModel::new(0.9).unwrap()),
            n_samples: 40,
            batch_size: 10,
            learning_rate: 1e-3,
            ref_factor: 3,
            ref_fresh_each_step: true,
            grad_ema_rate: 0.01,
            estimate_ema_rate: 0.01,
            iterations: 30,
            seed: 5,
            network: NetworkShape {
                hidden_widths: vec![8, 8],
                activation: crate::nn::Activation::Elu,
            },
            eval_every: 10,
            box_margin: 0.0,
        }
    }

    #[test]
    fn epoch_covers_every_index_once() {
        for (n, b) in [(10, 3), (12, 4), (7, 7)] {
            let mut s = EpochSampler::new(n, b, stream(1, 2));
            for _ in 0..3 {
                let mut seen = Vec::new();
                while seen.len() < n {
                    seen.extend_from_slice(s.next_batch());
                }
                assert_eq!(seen.len(), n, "batches must not straddle epochs");
                seen.sort_unstable();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn zero_iterations_gives_empty_trace_and_initial_params() {
        let mut c = tiny_config(Mode::Minee);
        c.iterations = 0;
        let out = run_estimation(&c).unwrap();
        assert!(out.trace.is_empty());
        let init = MiCritic::init(out.critic.spec().clone(), c.seed);
        assert_eq!(out.critic, init);
    }

    #[test]
    fn runs_are_deterministic() {
        for mode in [Mode::Minee, Mode::Mine] {
            let c = tiny_config(mode);
            let a = run_estimation(&c).unwrap();
            let b = run_estimation(&c).unwrap();
            assert_eq!(a.trace, b.trace);
            assert_eq!(a.critic, b.critic);
            let iters: Vec<u64> = a.trace.rows.iter().map(|r| r.iteration).collect();
            assert_eq!(iters, vec![10, 20, 30]);
        }
    }

    #[test]
    fn trailing_partial_eval_is_recorded() {
        let mut c = tiny_config(Mode::Minee);
        c.iterations = 25;
        let out = run_estimation(&c).unwrap();
        let iters: Vec<u64> = out.trace.rows.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, vec![10, 20, 25]);
    }

    #[test]
    fn mine_mode_leaves_marginal_heads_untouched() {
        let c = tiny_config(Mode::Mine);
        let out = run_estimation(&c).unwrap();
        let init = MiCritic::init(out.critic.spec().clone(), c.seed);
        for h in [Head::X, Head::Y] {
            let r = out.critic.head_range(h);
            assert_eq!(&out.critic.values()[r.clone()], &init.values()[r]);
        }
        let r = out.critic.head_range(Head::Joint);
        assert_ne!(&out.critic.values()[r.clone()], &init.values()[r]);
    }

    #[test]
    fn fixed_pool_mode_runs_and_differs_from_fresh() {
        let fresh = tiny_config(Mode::Minee);
        let mut pooled = fresh.clone();
        pooled.ref_fresh_each_step = false;
        let a = run_estimation(&fresh).unwrap();
        let b = run_estimation(&pooled).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        assert_ne!(a.trace, b.trace);
    }

    #[test]
    fn hg_layout_is_handled() {
        let mut c = tiny_config(Mode::Minee);
        c.model = SyntheticModel::Hg(CorrelatedGaussianModel::new(0.5, 3).unwrap());
        let out = run_estimation(&c).unwrap();
        assert_eq!(out.critic.head(Head::X).spec.input_dim, 3);
        assert!(out.trace.rows.iter().all(|r| r.raw_estimate.is_finite()));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut c = tiny_config(Mode::Minee);
        c.batch_size = 41;
        assert!(matches!(run_estimation(&c), Err(TrainError::InvalidConfig(_))));
        let mut c = tiny_config(Mode::Mine);
        c.grad_ema_rate = 0.0;
        assert!(matches!(run_estimation(&c), Err(TrainError::InvalidConfig(_))));
    }

    #[test]
    fn divergence_preserves_the_partial_trace() {
        let mut c = tiny_config(Mode::Mine);
        c.learning_rate = 1e200;
        c.iterations = 2000;
        match run_estimation(&c) {
            Err(TrainError::Diverged { iteration, trace, .. }) => {
                assert!(iteration >= 1);
                assert!(trace.rows.iter().all(|r| r.iteration < iteration));
            }
            other => panic!("expected divergence, got {:?}", other.map(|o| o.trace.len())),
        }
    }

    #[test]
    fn entropy_run_with_zero_iterations_and_trivial_critic() {
        let b = UniformBoxReference::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let data = b.sample(200, 1);
        let cfg = EntropyConfig {
            iterations: 0,
            ..EntropyConfig::default()
        };
        let out = run_entropy_estimation(&cfg, &data).unwrap();
        assert!(out.trace.is_empty());
        let zero = ParameterSet::zeros(out.params.spec().clone());
        let pts = b.sample(50, 2);
        let h = entropy_with_critic(&zero, &out.reference, &data, &pts).unwrap();
        assert_eq!(h, out.reference.log_volume());
    }
}
