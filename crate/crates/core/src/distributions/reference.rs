//! Reference distributions `p_Z'`: the uniform bounding box, which has an
//! exact density, and the resampled-marginal product, which can only be
//! sampled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DistributionError;
use crate::matrix::{JointLayout, Matrix, SampleBatch};

/// Something that can draw i.i.d. reference samples.
pub trait ReferenceSampler {
    fn dim(&self) -> usize;

    fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SampleBatch;

    fn sample(&self, n: usize, seed: u64) -> SampleBatch {
        self.sample_with(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Uniform distribution on an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBoxReference {
    lower: Vec<f64>,
    upper: Vec<f64>,
    log_volume: f64,
}

/// Reference log-densities, with the rows that fall outside the support.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensities {
    /// `-log_volume` inside the box, `-inf` outside.
    pub values: Vec<f64>,
    pub out_of_support: Vec<usize>,
}

impl LogDensities {
    pub fn into_result(self) -> Result<Vec<f64>, DistributionError> {
        if self.out_of_support.is_empty() {
            Ok(self.values)
        } else {
            Err(DistributionError::OutOfSupport {
                rows: self.out_of_support,
            })
        }
    }
}

impl UniformBoxReference {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DistributionError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(DistributionError::InvalidDimension(lower.len()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(DistributionError::DegenerateBox { column: i });
            }
        }
        let log_volume = lower.iter().zip(&upper).map(|(lo, hi)| (hi - lo).ln()).sum::<f64>();
        if !log_volume.is_finite() {
            return Err(DistributionError::DegenerateBox { column: 0 });
        }
        Ok(Self {
            lower,
            upper,
            log_volume,
        })
    }

    /// Elementwise bounding box of the samples, widened on each side by
    /// `margin` times the column range.
    pub fn from_samples(samples: &SampleBatch, margin: f64) -> Result<Self, DistributionError> {
        if samples.is_empty() || samples.cols() == 0 {
            return Err(DistributionError::EmptySamples);
        }
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(DistributionError::InvalidMargin(margin));
        }
        let d = samples.cols();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for row in samples.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                lower[j] = lower[j].min(v);
                upper[j] = upper[j].max(v);
            }
        }
        for j in 0..d {
            let range = upper[j] - lower[j];
            if !(range > 0.0) {
                return Err(DistributionError::DegenerateBox { column: j });
            }
            lower[j] -= margin * range;
            upper[j] += margin * range;
        }
        Self::new(lower, upper)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn log_volume(&self) -> f64 {
        self.log_volume
    }

    /// Inclusive bounds.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.lower.len()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn log_density(&self, points: &SampleBatch) -> LogDensities {
        let mut values = Vec::with_capacity(points.rows());
        let mut out_of_support = Vec::new();
        for (i, row) in points.iter_rows().enumerate() {
            if self.contains(row) {
                values.push(-self.log_volume);
            } else {
                values.push(f64::NEG_INFINITY);
                out_of_support.push(i);
            }
        }
        LogDensities {
            values,
            out_of_support,
        }
    }

    /// The box restricted to the given columns.
    pub fn project(&self, cols: std::ops::Range<usize>) -> Self {
        Self::new(self.lower[cols.clone()].to_vec(), self.upper[cols].to_vec())
            .expect("sub-box of a valid box is valid")
    }

    /// Splits a joint box into its x- and y-boxes.
    pub fn split(&self, layout: JointLayout) -> (Self, Self) {
        (self.project(layout.x_range()), self.project(layout.y_range()))
    }
}

impl ReferenceSampler for UniformBoxReference {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SampleBatch {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            for (lo, hi) in self.lower.iter().zip(&self.upper) {
                let u: f64 = rng.random();
                data.push(lo + (hi - lo) * u);
            }
        }
        Matrix::from_vec(n, d, data).expect("n rows of width d")
    }
}

/// Product of the empirical marginals: pairs an x-row and a y-row chosen
/// independently, uniformly and with replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledMarginalReference {
    x_pool: Matrix,
    y_pool: Matrix,
}

impl ResampledMarginalReference {
    pub fn new(x_pool: Matrix, y_pool: Matrix) -> Result<Self, DistributionError> {
        if x_pool.is_empty() || y_pool.is_empty() {
            return Err(DistributionError::EmptySamples);
        }
        if x_pool.rows() != y_pool.rows() {
            return Err(DistributionError::PoolMismatch {
                x_rows: x_pool.rows(),
                y_rows: y_pool.rows(),
            });
        }
        Ok(Self { x_pool, y_pool })
    }

    pub fn from_joint(samples: &SampleBatch, layout: JointLayout) -> Result<Self, DistributionError> {
        Self::new(
            samples.select_columns(layout.x_range()),
            samples.select_columns(layout.y_range()),
        )
    }

    pub fn layout(&self) -> JointLayout {
        JointLayout::new(self.x_pool.cols(), self.y_pool.cols())
    }
}

impl ReferenceSampler for ResampledMarginalReference {
    fn dim(&self) -> usize {
        self.x_pool.cols() + self.y_pool.cols()
    }

    fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SampleBatch {
        let pool = self.x_pool.rows();
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            let i = rng.random_range(0..pool);
            let j = rng.random_range(0..pool);
            data.extend_from_slice(self.x_pool.row(i));
            data.extend_from_slice(self.y_pool.row(j));
        }
        Matrix::from_vec(n, self.dim(), data).expect("joint rows")
    }
}
