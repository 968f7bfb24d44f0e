//! Principal components from available-cases or complete-cases covariances.
//!
//! The available-cases covariance is not guaranteed to be positive
//! semidefinite. An eigenvalue below `-1e-10 × (largest eigenvalue)` is
//! reported as [`Error::NegativeEigenvalue`]; smaller negative round-off is
//! clamped to zero and counted in [`PcaFit::clamped`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{complete_rows, NumericFrame};
use crate::error::{Error, Result};
use crate::moments::{pairwise_correlation, pairwise_moments, DenominatorPolicy};
use crate::regression::Method;

pub use crate::eigen::{symmetric_eigen, SymmetricEigen};

const NEGATIVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaFit {
    /// Square roots of the eigenvalues, descending.
    pub sdev: DVector<f64>,
    pub rotation: DMatrix<f64>,
    pub scaled: bool,
    pub method: Method,
    /// Tiny negative eigenvalues set to zero.
    pub clamped: usize,
}

impl PcaFit {
    /// The simulation estimand: the square root of the largest eigenvalue.
    pub fn max_sdev(&self) -> f64 {
        self.sdev[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaOptions {
    pub scale: bool,
}

fn pca_from_matrix(m: &DMatrix<f64>, scaled: bool, method: Method) -> Result<PcaFit> {
    let eig = symmetric_eigen(m)?;
    let largest = eig.values[0].max(0.0);
    let smallest = eig.values[eig.values.len() - 1];
    if smallest < -NEGATIVE_TOL * largest || (largest == 0.0 && smallest < 0.0) {
        return Err(Error::NegativeEigenvalue { value: smallest });
    }
    let clamped = eig.values.iter().filter(|&&v| v < 0.0).count();
    Ok(PcaFit {
        sdev: eig.values.map(|v| v.max(0.0).sqrt()),
        rotation: eig.vectors,
        scaled,
        method,
        clamped,
    })
}

/// PCA of the pairwise covariance (or correlation, with `scale`).
pub fn fit_pca_ac(frame: &NumericFrame, scale: bool) -> Result<PcaFit> {
    let pm = pairwise_moments(frame, DenominatorPolicy::Sample)?;
    let m = if scale { pairwise_correlation(&pm)? } else { pm.cov };
    pca_from_matrix(&m, scale, Method::Ac)
}

/// PCA of the covariance (or correlation) of the complete rows.
pub fn fit_pca_cc(frame: &NumericFrame, scale: bool) -> Result<PcaFit> {
    let p = frame.n_cols();
    let all: Vec<usize> = (0..p).collect();
    let view = complete_rows(frame, &all)?;
    if view.len() < p + 1 {
        return Err(Error::TooFewCompleteRows {
            have: view.len(),
            need: p + 1,
        });
    }
    let pm = pairwise_moments(&view.to_frame()?, DenominatorPolicy::Sample)?;
    let m = if scale { pairwise_correlation(&pm)? } else { pm.cov };
    pca_from_matrix(&m, scale, Method::Cc)
}
