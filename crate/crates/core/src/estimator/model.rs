//! Empirical fit of the large-`D` variance model
//! `N_U Var = c_0/D + c_1/N_M + c_2 D/N_M^2 + c_3 D^2/N_M^3`.
//!
//! The constants depend on the state family and are fitted rather than assumed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Shots;
use crate::error::{Error, Result};

/// One measured point: total dimension `D`, shots `N_M` and single-round variance `N_U Var`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub dim: usize,
    pub n_m: Shots,
    pub round_variance: f64,
}

/// Fitted constants `c_0..c_3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub c: [f64; 4],
}

fn features(dim: usize, n_m: Shots) -> [f64; 4] {
    let d = dim as f64;
    match n_m {
        Shots::Exact => [1.0 / d, 0.0, 0.0, 0.0],
        Shots::Finite(n) => {
            let n = n as f64;
            [1.0 / d, 1.0 / n, d / (n * n), d * d / (n * n * n)]
        }
    }
}

impl ErrorModel {
    /// Least-squares fit in relative error (each point weighted by `1 / round_variance`).
    pub fn fit(points: &[VariancePoint]) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 points, got {}",
                points.len()
            )));
        }
        if points
            .iter()
            .any(|p| p.round_variance.is_nan() || p.round_variance <= 0.0)
        {
            return Err(Error::InvalidParameter("variances must be positive".into()));
        }
        let a = DMatrix::from_fn(points.len(), 4, |i, j| {
            features(points[i].dim, points[i].n_m)[j] / points[i].round_variance
        });
        let b = DVector::from_element(points.len(), 1.0);
        let x = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::Singular(e.to_string()))?;
        Ok(Self {
            c: [x[0], x[1], x[2], x[3]],
        })
    }

    /// Predicted single-round variance `N_U Var`.
    pub fn round_variance(&self, dim: usize, n_m: Shots) -> f64 {
        features(dim, n_m)
            .iter()
            .zip(&self.c)
            .map(|(f, c)| f * c)
            .sum()
    }

    /// Predicted variance of the `N_U`-round estimate.
    pub fn variance(&self, dim: usize, n_m: Shots, n_u: u64) -> f64 {
        self.round_variance(dim, n_m) / n_u as f64
    }

    /// Largest relative deviation of the model from the points.
    pub fn max_relative_residual(&self, points: &[VariancePoint]) -> f64 {
        points
            .iter()
            .map(|p| {
                (self.round_variance(p.dim, p.n_m) - p.round_variance).abs() / p.round_variance
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{estimate, ProtocolConfig, Scheme};
    use crate::qstate;

    #[test]
    fn recovers_synthetic_constants() {
        let truth = ErrorModel {
            c: [0.5, 2.0, 0.3, 0.05],
        };
        let mut pts = Vec::new();
        for dim in [4, 9, 16, 25] {
            for n_m in [
                Shots::Finite(5),
                Shots::Finite(10),
                Shots::Finite(40),
                Shots::Exact,
            ] {
                pts.push(VariancePoint {
                    dim,
                    n_m,
                    round_variance: truth.round_variance(dim, n_m),
                });
            }
        }
        let fit = ErrorModel::fit(&pts).unwrap();
        for (a, b) in fit.c.iter().zip(&truth.c) {
            assert!((a - b).abs() < 1e-9, "{fit:?}");
        }
        assert!(fit.max_relative_residual(&pts) < 1e-9);
        assert!(
            (fit.variance(9, Shots::Finite(10), 100) * 100.0
                - truth.round_variance(9, Shots::Finite(10)))
            .abs()
                < 1e-9
        );
    }

    #[test]
    fn rejects_degenerate_input() {
        let p = VariancePoint {
            dim: 4,
            n_m: Shots::Exact,
            round_variance: 1.0,
        };
        assert!(ErrorModel::fit(&[p; 3]).is_err());
        let bad = VariancePoint {
            round_variance: 0.0,
            ..p
        };
        assert!(ErrorModel::fit(&[p, p, p, bad]).is_err());
    }

    #[test]
    fn fits_noisy_bell_negativity() {
        // per-round variance of the composite is the sum of its component variances
        let mut pts = Vec::new();
        for d in [2usize, 3, 4] {
            let rho = qstate::noisy_bell(d, 0.3).unwrap();
            for n_m in [
                Shots::Finite(8),
                Shots::Finite(16),
                Shots::Finite(48),
                Shots::Exact,
            ] {
                let cfg =
                    ProtocolConfig::new(Scheme::Neg, d, d, 3000, n_m, d as u64).with_aux(3000, n_m);
                let r = estimate(&rho, &cfg).unwrap();
                let v: f64 = r
                    .components
                    .iter()
                    .map(|c| (c.weight * c.std_error).powi(2) * c.n_u as f64)
                    .sum();
                pts.push(VariancePoint {
                    dim: d * d,
                    n_m,
                    round_variance: v,
                });
            }
        }
        let fit = ErrorModel::fit(&pts).unwrap();
        let worst = fit.max_relative_residual(&pts);
        assert!(worst < 0.5, "{fit:?} residual {worst}");
    }
}
