//! Fully connected networks with exact reverse-mode gradients.
//!
//! Parameters are one flat `Vec<f64>`. For each layer the weight matrix
//! (`fan_in x fan_out`, row-major, so a layer computes `x W + b`) is followed
//! by its bias vector. Hidden layers apply the configured activation; the output
//! layer is affine.

mod activation;
mod adam;
pub(crate) mod gemm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use gemm::{gemm, View};

pub use activation::Activation;
pub use adam::{adam_step, AdamConfig, AdamState};

/// Rows pushed through the network at once when no tape is needed.
const FORWARD_CHUNK_ROWS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite gradient at optimizer step {step}")]
    NonFiniteGradient { step: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

/// Position of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }

    pub fn param_count(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }
}

impl NetworkSpec {
    pub const DEFAULT_HIDDEN: [usize; 3] = [100, 100, 100];

    pub fn new(
        input_dim: usize,
        hidden_widths: Vec<usize>,
        output_dim: usize,
        activation: Activation,
    ) -> Result<Self, NnError> {
        let spec = Self {
            input_dim,
            hidden_widths,
            output_dim,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Scalar-output network with the default hidden stack.
    pub fn scalar(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_widths: Self::DEFAULT_HIDDEN.to_vec(),
            output_dim: 1,
            activation: Activation::Elu,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 {
            return Err(NnError::InvalidSpec("input_dim must be >= 1".into()));
        }
        if self.output_dim == 0 {
            return Err(NnError::InvalidSpec("output_dim must be >= 1".into()));
        }
        if self.hidden_widths.contains(&0) {
            return Err(NnError::InvalidSpec("hidden widths must be >= 1".into()));
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_widths);
        dims.push(self.output_dim);
        let mut offset = 0;
        dims.windows(2)
            .map(|w| {
                let layer = LayerShape {
                    fan_in: w[0],
                    fan_out: w[1],
                    offset,
                };
                offset += layer.param_count();
                layer
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(LayerShape::param_count).sum()
    }
}

/// Network weights `θ` together with the architecture they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    spec: NetworkSpec,
    values: Vec<f64>,
}

impl ParameterSet {
    pub fn new(spec: NetworkSpec, values: Vec<f64>) -> Result<Self, NnError> {
        spec.validate()?;
        if values.len() != spec.param_count() {
            return Err(NnError::DimensionMismatch {
                what: "parameter vector length",
                expected: spec.param_count(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NnError::InvalidSpec("parameters must be finite".into()));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: NetworkSpec) -> Self {
        let n = spec.param_count();
        Self {
            spec,
            values: vec![0.0; n],
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
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

    pub fn view(&self) -> ParamView<'_> {
        ParamView {
            spec: &self.spec,
            values: &self.values,
        }
    }
}

/// Borrowed `(spec, θ)` pair; lets several networks share one flat buffer.
#[derive(Debug, Clone, Copy)]
pub struct ParamView<'a> {
    pub spec: &'a NetworkSpec,
    pub values: &'a [f64],
}

impl ParamView<'_> {
    fn check_input(&self, inputs: &Matrix) -> Result<(), NnError> {
        if self.values.len() != self.spec.param_count() {
            return Err(NnError::DimensionMismatch {
                what: "parameter vector length",
                expected: self.spec.param_count(),
                found: self.values.len(),
            });
        }
        if inputs.cols() != self.spec.input_dim {
            return Err(NnError::DimensionMismatch {
                what: "input columns",
                expected: self.spec.input_dim,
                found: inputs.cols(),
            });
        }
        Ok(())
    }
}

/// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> ParameterSet {
    let mut rng = init_stream(seed);
    let mut values = vec![0.0; spec.param_count()];
    init_into(spec, &mut values, &mut rng);
    ParameterSet {
        spec: spec.clone(),
        values,
    }
}

/// Initialization draws from stream 1 of the seed so that a seed shared with
/// data generation (stream 0) does not reuse the same random bits.
pub(crate) fn init_stream(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub(crate) fn init_into<R: Rng>(spec: &NetworkSpec, values: &mut [f64], rng: &mut R) {
    for layer in spec.layers() {
        let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
        for w in &mut values[layer.weight_range()] {
            *w = rng.random_range(-limit..limit);
        }
        values[layer.bias_range()].iter_mut().for_each(|b| *b = 0.0);
    }
}

fn affine(inputs: &[f64], rows: usize, layer: &LayerShape, params: &[f64]) -> Vec<f64> {
    let bias = &params[layer.bias_range()];
    let mut out = Vec::with_capacity(rows * layer.fan_out);
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    gemm(
        View::row_major(inputs, rows, layer.fan_in),
        View::row_major(&params[layer.weight_range()], layer.fan_in, layer.fan_out),
        1.0,
        &mut out,
    );
    out
}

/// Network outputs `φ_z(θ)`, one row per input row.
pub fn forward(params: &ParameterSet, inputs: &Matrix) -> Result<Matrix, NnError> {
    forward_view(params.view(), inputs)
}

/// [`forward`] on a borrowed parameter view. Large batches are processed in
/// row chunks; the result does not depend on the chunking.
pub fn forward_view(params: ParamView<'_>, inputs: &Matrix) -> Result<Matrix, NnError> {
    params.check_input(inputs)?;
    let layers = params.spec.layers();
    let out_dim = params.spec.output_dim;
    let mut output = Vec::with_capacity(inputs.rows() * out_dim);
    let chunk = FORWARD_CHUNK_ROWS * inputs.cols().max(1);
    for block in inputs.as_slice().chunks(chunk) {
        let rows = block.len() / inputs.cols();
        let mut act: Vec<f64> = Vec::new();
        for (l, layer) in layers.iter().enumerate() {
            let src = if l == 0 { block } else { act.as_slice() };
            let mut next = affine(src, rows, layer, params.values);
            if l + 1 < layers.len() {
                params.spec.activation.apply_in_place(&mut next);
            }
            act = next;
        }
        output.extend_from_slice(&act);
    }
    Ok(Matrix::from_vec(inputs.rows(), out_dim, output).expect("shape tracked above"))
}

/// A forward evaluation that keeps every hidden activation for a later
/// reverse pass.
pub struct ForwardPass<'a> {
    params: ParamView<'a>,
    input: &'a Matrix,
    layers: Vec<LayerShape>,
    hidden: Vec<Vec<f64>>,
    output: Matrix,
}

impl<'a> ForwardPass<'a> {
    pub fn run(params: ParamView<'a>, input: &'a Matrix) -> Result<Self, NnError> {
        params.check_input(input)?;
        let layers = params.spec.layers();
        let rows = input.rows();
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(layers.len() - 1);
        let mut output = Vec::new();
        for (l, layer) in layers.iter().enumerate() {
            let src = if l == 0 {
                input.as_slice()
            } else {
                hidden[l - 1].as_slice()
            };
            let mut next = affine(src, rows, layer, params.values);
            if l + 1 < layers.len() {
                params.spec.activation.apply_in_place(&mut next);
                hidden.push(next);
            } else {
                output = next;
            }
        }
        let output = Matrix::from_vec(rows, params.spec.output_dim, output).expect("shape");
        Ok(Self {
            params,
            input,
            layers,
            hidden,
            output,
        })
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }

    /// Adds `∂(Σ cotangent ⊙ φ)/∂θ` into `grad`.
    pub fn backward_into(&self, cotangent: &Matrix, grad: &mut [f64]) -> Result<(), NnError> {
        if cotangent.rows() != self.output.rows() || cotangent.cols() != self.output.cols() {
            return Err(NnError::DimensionMismatch {
                what: "cotangent shape (rows x cols flattened)",
                expected: self.output.rows() * self.output.cols(),
                found: cotangent.rows() * cotangent.cols(),
            });
        }
        if grad.len() != self.params.values.len() {
            return Err(NnError::DimensionMismatch {
                what: "gradient buffer length",
                expected: self.params.values.len(),
                found: grad.len(),
            });
        }
        let rows = self.input.rows();
        let mut delta = cotangent.as_slice().to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let src = if l == 0 {
                self.input.as_slice()
            } else {
                self.hidden[l - 1].as_slice()
            };
            let delta_view = View::row_major(&delta, rows, layer.fan_out);
            gemm(
                View::row_major(src, rows, layer.fan_in).t(),
                delta_view,
                1.0,
                &mut grad[layer.weight_range()],
            );
            let gb = &mut grad[layer.bias_range()];
            for row in delta.chunks_exact(layer.fan_out) {
                gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
            }
            if l > 0 {
                let mut prev = vec![0.0; rows * layer.fan_in];
                gemm(
                    delta_view,
                    View::row_major(
                        &self.params.values[layer.weight_range()],
                        layer.fan_in,
                        layer.fan_out,
                    )
                    .t(),
                    0.0,
                    &mut prev,
                );
                self.params
                    .spec
                    .activation
                    .scale_by_derivative(&mut prev, &self.hidden[l - 1]);
                delta = prev;
            }
        }
        Ok(())
    }
}

/// Gradient of `Σ_{rows, outputs} cotangent ⊙ φ` with respect to `θ`.
pub fn backward(
    params: &ParameterSet,
    inputs: &Matrix,
    output_cotangent: &Matrix,
) -> Result<Vec<f64>, NnError> {
    let pass = ForwardPass::run(params.view(), inputs)?;
    let mut grad = vec![0.0; params.len()];
    pass.backward_into(output_cotangent, &mut grad)?;
    Ok(grad)
}
