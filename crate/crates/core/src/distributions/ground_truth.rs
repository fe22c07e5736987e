//! Exact mutual information of the synthetic models.
//!
//! `HG(ρ, d)` has a closed form. `MG(ρ)` does not, so its value comes from
//! tensor-product Simpson quadrature of the mixture density on `[-8, 8]²`
//! (eight marginal standard deviations), checked by halving the step.

use serde::{Deserialize, Serialize};

use super::models::{CorrelatedGaussianModel, MixedGaussianModel};
use super::DistributionError;

/// Simpson intervals per axis used when no resolution is requested.
pub const DEFAULT_MG_RESOLUTION: usize = 400;
/// Half-width of the square integration domain.
pub const QUADRATURE_HALF_WIDTH: f64 = 8.0;
/// Maximum change in nats allowed when the resolution doubles.
pub const QUADRATURE_TOLERANCE: f64 = 1e-4;

/// `I = -(d/2) ln(1 - ρ²)`.
pub fn ground_truth_mi_hg(model: &CorrelatedGaussianModel) -> f64 {
    // abs: ρ = 0 would otherwise give -0.0
    (-0.5 * model.d as f64 * (1.0 - model.rho * model.rho).ln()).abs()
}

/// Entropies of a bivariate density, its marginals computed by integrating
/// out the other coordinate on the same grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateEntropies {
    pub h_x: f64,
    pub h_y: f64,
    pub h_xy: f64,
}

impl BivariateEntropies {
    pub fn mutual_information(&self) -> f64 {
        self.h_x + self.h_y - self.h_xy
    }
}

fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    assert!(intervals >= 2 && intervals.is_multiple_of(2), "Simpson needs an even interval count");
    (0..=intervals)
        .map(|i| {
            let c = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

fn neg_p_ln_p(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Entropies of `density` on `[-half_width, half_width]²` with `intervals`
/// Simpson intervals per axis (rounded up to even).
pub fn bivariate_entropies<F>(density: F, half_width: f64, intervals: usize) -> BivariateEntropies
where
    F: Fn(f64, f64) -> f64,
{
    let n = intervals.max(2).next_multiple_of(2);
    let h = 2.0 * half_width / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|i| -half_width + i as f64 * h).collect();
    let w = simpson_weights(n, h);
    let mut marginal_x = vec![0.0; n + 1];
    let mut marginal_y = vec![0.0; n + 1];
    let mut h_xy = 0.0;
    for (i, &x) in nodes.iter().enumerate() {
        for (j, &y) in nodes.iter().enumerate() {
            let p = density(x, y);
            marginal_x[i] += w[j] * p;
            marginal_y[j] += w[i] * p;
            h_xy += w[i] * w[j] * neg_p_ln_p(p);
        }
    }
    let h_x = w.iter().zip(&marginal_x).map(|(wi, &p)| wi * neg_p_ln_p(p)).sum();
    let h_y = w.iter().zip(&marginal_y).map(|(wi, &p)| wi * neg_p_ln_p(p)).sum();
    BivariateEntropies { h_x, h_y, h_xy }
}

/// A quadrature estimate together with its convergence evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureMi {
    /// Value at the refined resolution, in nats.
    pub value: f64,
    /// Value at the requested resolution.
    pub coarse_value: f64,
    pub resolution: usize,
    pub refined_resolution: usize,
    pub half_width: f64,
    pub entropies: BivariateEntropies,
}

/// Mutual information of a bivariate density by quadrature, accepted only if
/// doubling the resolution moves it by less than [`QUADRATURE_TOLERANCE`].
pub fn mi_by_quadrature<F>(density: F, resolution: usize) -> Result<QuadratureMi, DistributionError>
where
    F: Fn(f64, f64) -> f64,
{
    let resolution = resolution.max(2).next_multiple_of(2);
    let coarse = bivariate_entropies(&density, QUADRATURE_HALF_WIDTH, resolution);
    let fine = bivariate_entropies(&density, QUADRATURE_HALF_WIDTH, 2 * resolution);
    let (c, f) = (coarse.mutual_information(), fine.mutual_information());
    if (c - f).abs() >= QUADRATURE_TOLERANCE {
        return Err(DistributionError::UnconvergedQuadrature {
            coarse: c,
            fine: f,
            resolution,
        });
    }
    Ok(QuadratureMi {
        value: f,
        coarse_value: c,
        resolution,
        refined_resolution: 2 * resolution,
        half_width: QUADRATURE_HALF_WIDTH,
        entropies: fine,
    })
}

pub fn ground_truth_mi_mg(
    model: &MixedGaussianModel,
    grid_resolution: usize,
) -> Result<QuadratureMi, DistributionError> {
    model.validate()?;
    mi_by_quadrature(|x, y| model.density(x, y), grid_resolution)
}

/// How a ground-truth value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GroundTruthMethod {
    ClosedForm,
    Quadrature {
        resolution: usize,
        refined_resolution: usize,
        coarse_value: f64,
        half_width: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub value: f64,
    pub oracle: GroundTruthMethod,
}

impl GroundTruth {
    pub fn closed_form(value: f64) -> Self {
        Self {
            value,
            oracle: GroundTruthMethod::ClosedForm,
        }
    }
}

impl From<QuadratureMi> for GroundTruth {
    fn from(q: QuadratureMi) -> Self {
        Self {
            value: q.value,
            oracle: GroundTruthMethod::Quadrature {
                resolution: q.resolution,
                refined_resolution: q.refined_resolution,
                coarse_value: q.coarse_value,
                half_width: q.half_width,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::models::bivariate_normal_density;

    #[test]
    fn hg_closed_form_values() {
        let hg = |rho, d| ground_truth_mi_hg(&CorrelatedGaussianModel::new(rho, d).unwrap());
        assert_eq!(hg(0.0, 4), 0.0);
        assert!((hg(0.9, 1) - 0.83037).abs() < 1e-5);
        assert!((hg(0.9, 6) - 4.98219).abs() < 1e-5);
        for d in 1..8 {
            assert_eq!(hg(0.7, d), d as f64 * hg(0.7, 1));
        }
    }

    #[test]
    fn hg_closed_form_agrees_with_quadrature() {
        for rho in [0.3, 0.9] {
            let q = mi_by_quadrature(|x, y| bivariate_normal_density(x, y, rho), 400).unwrap();
            let exact = ground_truth_mi_hg(&CorrelatedGaussianModel::new(rho, 1).unwrap());
            assert!((q.value - exact).abs() < 1e-5, "rho {rho}: {} vs {exact}", q.value);
        }
    }

    #[test]
    fn mg_zero_rho_has_zero_information() {
        let q = ground_truth_mi_mg(&MixedGaussianModel::new(0.0).unwrap(), 200).unwrap();
        assert!(q.value.abs() < 1e-6);
    }

    #[test]
    fn mg_marginals_are_standard_normal() {
        let q = ground_truth_mi_mg(&MixedGaussianModel::new(0.9).unwrap(), 400).unwrap();
        let h_std = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((q.entropies.h_x - h_std).abs() < 1e-5);
        assert!((q.entropies.h_y - h_std).abs() < 1e-5);
        assert!((q.value - q.coarse_value).abs() < QUADRATURE_TOLERANCE);
        assert!(q.value > 0.0);
    }

    #[test]
    fn coarse_grid_is_reported_unconverged() {
        match ground_truth_mi_mg(&MixedGaussianModel::new(0.9).unwrap(), 4) {
            Err(DistributionError::UnconvergedQuadrature { coarse, fine, .. }) => {
                assert!((coarse - fine).abs() >= QUADRATURE_TOLERANCE)
            }
            other => panic!("expected unconverged error, got {other:?}"),
        }
    }
}
