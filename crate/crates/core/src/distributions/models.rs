use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ground_truth::{ground_truth_mi_hg, ground_truth_mi_mg, GroundTruth};
use super::DistributionError;
use crate::matrix::{JointLayout, Matrix, SampleBatch};

fn check_rho(rho: f64) -> Result<(), DistributionError> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(DistributionError::InvalidRho(rho))
    }
}

/// `MG(ρ)`: an equal mixture of two zero-mean bivariate Gaussians with unit
/// variances and correlations `+ρ` and `-ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedGaussianModel {
    pub rho: f64,
}

impl MixedGaussianModel {
    pub fn new(rho: f64) -> Result<Self, DistributionError> {
        check_rho(rho)?;
        Ok(Self { rho })
    }

    pub fn validate(&self) -> Result<(), DistributionError> {
        check_rho(self.rho)
    }

    /// Component covariance matrices `[[1, ±ρ], [±ρ, 1]]`.
    pub fn component_covariances(&self) -> [[[f64; 2]; 2]; 2] {
        let r = self.rho;
        [[[1.0, r], [r, 1.0]], [[1.0, -r], [-r, 1.0]]]
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        0.5 * (bivariate_normal_density(x, y, self.rho) + bivariate_normal_density(x, y, -self.rho))
    }

    pub fn sample(&self, n: usize, seed: u64) -> SampleBatch {
        self.sample_with(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SampleBatch {
        let s = (1.0 - self.rho * self.rho).sqrt();
        let mut data = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            data.push(z1);
            data.push(sign * self.rho * z1 + s * z2);
        }
        Matrix::from_vec(n, 2, data).expect("2 columns per row")
    }
}

/// `HG(ρ, d)`: `d` independent pairs `(x_i, y_i)`, each a standard bivariate
/// Gaussian with correlation `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedGaussianModel {
    pub rho: f64,
    pub d: usize,
}

impl CorrelatedGaussianModel {
    pub fn new(rho: f64, d: usize) -> Result<Self, DistributionError> {
        let m = Self { rho, d };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DistributionError> {
        check_rho(self.rho)?;
        if self.d == 0 {
            return Err(DistributionError::InvalidDimension(self.d));
        }
        Ok(())
    }

    pub fn sample(&self, n: usize, seed: u64) -> SampleBatch {
        self.sample_with(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Rows are laid out `(x_1..x_d, y_1..y_d)`.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SampleBatch {
        let d = self.d;
        let s = (1.0 - self.rho * self.rho).sqrt();
        let mut m = Matrix::zeros(n, 2 * d);
        for r in 0..n {
            let row = m.row_mut(r);
            for i in 0..d {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                row[i] = z1;
                row[d + i] = self.rho * z1 + s * z2;
            }
        }
        m
    }
}

pub(crate) fn bivariate_normal_density(x: f64, y: f64, rho: f64) -> f64 {
    let det = 1.0 - rho * rho;
    let q = (x * x - 2.0 * rho * x * y + y * y) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

/// One of the two synthetic benchmark models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SyntheticModel {
    Mg(MixedGaussianModel),
    Hg(CorrelatedGaussianModel),
}

impl SyntheticModel {
    pub fn validate(&self) -> Result<(), DistributionError> {
        match self {
            SyntheticModel::Mg(m) => m.validate(),
            SyntheticModel::Hg(m) => m.validate(),
        }
    }

    pub fn layout(&self) -> JointLayout {
        match self {
            SyntheticModel::Mg(_) => JointLayout::new(1, 1),
            SyntheticModel::Hg(m) => JointLayout::new(m.d, m.d),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> SampleBatch {
        match self {
            SyntheticModel::Mg(m) => m.sample(n, seed),
            SyntheticModel::Hg(m) => m.sample(n, seed),
        }
    }

    /// Mutual information between the x- and y-blocks in nats.
    pub fn ground_truth(&self) -> Result<GroundTruth, DistributionError> {
        match self {
            SyntheticModel::Mg(m) => ground_truth_mi_mg(m, super::ground_truth::DEFAULT_MG_RESOLUTION)
                .map(GroundTruth::from),
            SyntheticModel::Hg(m) => Ok(GroundTruth::closed_form(ground_truth_mi_hg(m))),
        }
    }

    pub fn rho(&self) -> f64 {
        match self {
            SyntheticModel::Mg(m) => m.rho,
            SyntheticModel::Hg(m) => m.rho,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn cov(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        cov(a, b) / (cov(a, a) * cov(b, b)).sqrt()
    }

    #[test]
    fn rho_bounds_are_enforced() {
        assert!(MixedGaussianModel::new(1.0).is_err());
        assert!(MixedGaussianModel::new(-0.1).is_err());
        assert!(CorrelatedGaussianModel::new(0.5, 0).is_err());
        assert!(CorrelatedGaussianModel::new(0.999, 3).is_ok());
    }

    #[test]
    fn mg_zero_rho_is_uncorrelated() {
        let s = MixedGaussianModel::new(0.0).unwrap().sample(100_000, 1);
        let c = cov(&s.column_values(0), &s.column_values(1));
        assert!(c.abs() < 0.05, "{c}");
    }

    #[test]
    fn mg_moments() {
        for rho in [0.0, 0.5, 0.9] {
            let s = MixedGaussianModel::new(rho).unwrap().sample(100_000, 2);
            let (x, y) = (s.column_values(0), s.column_values(1));
            let exy = mean(&x.iter().zip(&y).map(|(a, b)| a * b).collect::<Vec<_>>());
            assert!(exy.abs() < 0.02, "rho {rho}: E[XY] = {exy}");
            for col in [&x, &y] {
                assert!(mean(col).abs() < 0.02);
                assert!((cov(col, col) - 1.0).abs() < 0.05);
            }
        }
    }

    #[test]
    fn mg_components_have_opposite_correlations() {
        let m = MixedGaussianModel::new(0.9).unwrap();
        let s = m.sample(50_000, 9);
        // |E[XY | same sign quadrant]| reflects |ρ| even though E[XY] = 0
        let abs_prod = mean(&s.iter_rows().map(|r| (r[0] * r[1]).abs()).collect::<Vec<_>>());
        assert!(abs_prod > 0.6);
        assert_eq!(m.component_covariances()[1][0][1], -0.9);
    }

    #[test]
    fn hg_correlation_structure() {
        let m = CorrelatedGaussianModel::new(0.9, 6).unwrap();
        let s = m.sample(100_000, 3);
        assert_eq!(s.cols(), 12);
        let cols: Vec<Vec<f64>> = (0..12).map(|j| s.column_values(j)).collect();
        for i in 0..6 {
            for j in 0..6 {
                let c = corr(&cols[i], &cols[6 + j]);
                let target = if i == j { 0.9 } else { 0.0 };
                assert!((c - target).abs() < 0.02, "x{i} y{j}: {c}");
            }
        }
    }

    #[test]
    fn hg_zero_rho_columns_independent() {
        let s = CorrelatedGaussianModel::new(0.0, 2).unwrap().sample(100_000, 4);
        let cols: Vec<Vec<f64>> = (0..4).map(|j| s.column_values(j)).collect();
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!(corr(&cols[i], &cols[j]).abs() < 0.05);
            }
        }
    }

    #[test]
    fn samplers_are_seed_deterministic() {
        let m = SyntheticModel::Hg(CorrelatedGaussianModel::new(0.3, 2).unwrap());
        assert_eq!(m.sample(50, 5), m.sample(50, 5));
        assert_ne!(m.sample(50, 5), m.sample(50, 6));
        let g = SyntheticModel::Mg(MixedGaussianModel::new(0.3).unwrap());
        assert!(g.sample(1000, 1).all_finite());
    }

    #[test]
    fn density_integrates_to_one() {
        let m = MixedGaussianModel::new(0.9).unwrap();
        let h = 0.02;
        let mut total = 0.0;
        let mut x = -8.0;
        while x <= 8.0 {
            let mut y = -8.0;
            while y <= 8.0 {
                total += m.density(x, y) * h * h;
                y += h;
            }
            x += h;
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }
}
