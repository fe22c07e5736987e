//! Synthetic benchmark models, reference distributions and ground-truth
//! mutual information.

mod ground_truth;
mod models;
mod reference;

use thiserror::Error;

pub use ground_truth::{
    bivariate_entropies, ground_truth_mi_hg, ground_truth_mi_mg, mi_by_quadrature,
    BivariateEntropies, GroundTruth, GroundTruthMethod, QuadratureMi, DEFAULT_MG_RESOLUTION,
    QUADRATURE_HALF_WIDTH, QUADRATURE_TOLERANCE,
};
pub use models::{CorrelatedGaussianModel, MixedGaussianModel, SyntheticModel};
pub use reference::{LogDensities, ReferenceSampler, ResampledMarginalReference, UniformBoxReference};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("rho must lie in [0, 1), got {0}")]
    InvalidRho(f64),
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("box has zero or invalid extent in column {column}")]
    DegenerateBox { column: usize },
    #[error("box margin must be a non-negative finite number, got {0}")]
    InvalidMargin(f64),
    #[error("no samples")]
    EmptySamples,
    #[error("marginal pools differ in size: {x_rows} x-rows vs {y_rows} y-rows")]
    PoolMismatch { x_rows: usize, y_rows: usize },
    #[error("{} point(s) outside the reference support, first at row {}", rows.len(), rows[0])]
    OutOfSupport { rows: Vec<usize> },
    #[error(
        "quadrature not converged at resolution {resolution}: {coarse} vs {fine} nats after doubling"
    )]
    UnconvergedQuadrature {
        coarse: f64,
        fine: f64,
        resolution: usize,
    },
}
