//! Gaussian noise models and whitening.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Zero-mean Gaussian with covariance `Σ`.
///
/// Whitening multiplies by `Lᵀ` where `L Lᵀ = Σ⁻¹` is the Cholesky factor of
/// the information matrix, so `‖Lᵀ e‖² = eᵀ Σ⁻¹ e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    covariance: DMatrix<f64>,
    sqrt_information: DMatrix<f64>,
}

impl Gaussian {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() == 0 {
            return Err(Error::BadNoiseModel("covariance must be square and non-empty"));
        }
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadNoiseModel("covariance has non-finite entries"));
        }
        let scale = covariance.amax();
        if (&covariance - covariance.transpose()).amax() > 1e-12 * scale {
            return Err(Error::BadNoiseModel("covariance is not symmetric"));
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or(Error::BadNoiseModel("covariance is not positive definite"))?;
        let n = covariance.nrows();
        let information = chol.solve(&DMatrix::identity(n, n));
        let information = (&information + information.transpose()) * 0.5;
        let info_chol = information
            .cholesky()
            .ok_or(Error::BadNoiseModel("information is not positive definite"))?;
        Ok(Gaussian {
            covariance,
            sqrt_information: info_chol.l().transpose(),
        })
    }

    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        Self::diagonal(&alloc::vec![sigma; dim])
    }

    /// Independent components with the given standard deviations.
    pub fn diagonal(sigmas: &[f64]) -> Result<Self> {
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::BadNoiseModel("standard deviations must be positive"));
        }
        let n = sigmas.len();
        if n == 0 {
            return Err(Error::BadNoiseModel("covariance must be square and non-empty"));
        }
        Ok(Gaussian {
            covariance: DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                sigmas.iter().map(|s| s * s),
            )),
            sqrt_information: DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                sigmas.iter().map(|s| 1.0 / s),
            )),
        })
    }

    /// Already-whitened rows.
    pub fn unit(dim: usize) -> Self {
        Gaussian {
            covariance: DMatrix::identity(dim, dim),
            sqrt_information: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Upper-triangular `Σ^{-1/2}`.
    pub fn sqrt_information(&self) -> &DMatrix<f64> {
        &self.sqrt_information
    }

    pub fn whiten(&self, error: &DVector<f64>) -> DVector<f64> {
        &self.sqrt_information * error
    }

    pub fn whiten_jacobian(&self, jacobian: &DMatrix<f64>) -> DMatrix<f64> {
        &self.sqrt_information * jacobian
    }

    pub fn mahalanobis_sq(&self, error: &DVector<f64>) -> f64 {
        self.whiten(error).norm_squared()
    }
}
