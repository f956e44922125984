//! Core dataset and parameter containers.
//!
//! A dataset is a list of `m` views, each a `p x n` matrix whose columns are
//! samples observed simultaneously across views. Model parameters hold one
//! square matrix per view (mixing or unmixing, depending on `direction`)
//! together with per-view diagonal noise variances.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShicaError};
use crate::linalg::Matrix;

/// Whether `ModelParams::matrices` maps latents to observations (`Mixing`,
/// the `A_i`) or observations to latents (`Unmixing`, the `W_i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Mixing,
    Unmixing,
}

/// `m` views of `p x n` observations sharing the sample axis.
///
/// Immutable after construction; all views are validated to share the same
/// shape. Storage accepts any `m >= 1`; the estimators themselves require at
/// least three views.
#[derive(Debug, Clone)]
pub struct MultiViewData {
    views: Vec<Matrix>,
}

impl MultiViewData {
    pub fn new(views: Vec<Matrix>) -> Result<Self> {
        if views.is_empty() {
            return Err(ShicaError::Format("dataset needs at least one view".into()));
        }
        let (p, n) = (views[0].nrows(), views[0].ncols());
        for (i, v) in views.iter().enumerate() {
            if v.nrows() != p || v.ncols() != n {
                return Err(ShicaError::Shape(format!(
                    "view {i} is {}x{}, expected {p}x{n}",
                    v.nrows(),
                    v.ncols()
                )));
            }
        }
        Ok(Self { views })
    }

    /// Number of views.
    pub fn m(&self) -> usize {
        self.views.len()
    }

    /// Number of components (rows per view).
    pub fn p(&self) -> usize {
        self.views[0].nrows()
    }

    /// Number of samples (columns per view).
    pub fn n(&self) -> usize {
        self.views[0].ncols()
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, i: usize) -> &Matrix {
        &self.views[i]
    }
}

/// Per-view square matrices plus diagonal noise variances.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub direction: Direction,
    /// One `p x p` matrix per view (`A_i` when mixing, `W_i` when unmixing).
    pub matrices: Vec<Matrix>,
    /// One length-`p` vector of noise variances per view.
    pub noise_vars: Vec<Vec<f64>>,
}

impl ModelParams {
    pub fn new(direction: Direction, matrices: Vec<Matrix>, noise_vars: Vec<Vec<f64>>) -> Self {
        Self {
            direction,
            matrices,
            noise_vars,
        }
    }

    pub fn m(&self) -> usize {
        self.matrices.len()
    }

    pub fn p(&self) -> usize {
        self.matrices.first().map_or(0, Matrix::nrows)
    }

    /// Checks the structural invariants: square matrices of one shared size,
    /// invertible within working precision, matching strictly positive noise
    /// variances. Used when loading parameters from disk.
    pub fn validate(&self) -> Result<()> {
        if self.matrices.is_empty() {
            return Err(ShicaError::Format("parameter set has no views".into()));
        }
        if self.noise_vars.len() != self.matrices.len() {
            return Err(ShicaError::Shape(format!(
                "{} matrices but {} noise vectors",
                self.matrices.len(),
                self.noise_vars.len()
            )));
        }
        let p = self.matrices[0].nrows();
        for (i, mat) in self.matrices.iter().enumerate() {
            if mat.nrows() != p || mat.ncols() != p {
                return Err(ShicaError::Shape(format!(
                    "matrix {i} is {}x{}, expected {p}x{p}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if !mat.iter().all(|v| v.is_finite()) {
                return Err(ShicaError::Data(format!("matrix {i} has non-finite entries")));
            }
            if mat.determinant().abs() <= f64::MIN_POSITIVE {
                return Err(ShicaError::Data(format!("matrix {i} is singular")));
            }
        }
        for (i, vars) in self.noise_vars.iter().enumerate() {
            if vars.len() != p {
                return Err(ShicaError::Shape(format!(
                    "noise vector {i} has length {}, expected {p}",
                    vars.len()
                )));
            }
            if !vars.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(ShicaError::Data(format!(
                    "noise vector {i} must be strictly positive and finite"
                )));
            }
        }
        Ok(())
    }
}

/// Applies one unmixing matrix per view: returns `W_i x_i` stacked as a new
/// dataset in latent coordinates.
pub fn apply_unmixing(unmixing: &[Matrix], data: &MultiViewData) -> Result<MultiViewData> {
    if unmixing.len() != data.m() {
        return Err(ShicaError::Shape(format!(
            "{} unmixing matrices for {} views",
            unmixing.len(),
            data.m()
        )));
    }
    let views = unmixing
        .iter()
        .zip(data.views())
        .map(|(w, x)| w * x)
        .collect();
    MultiViewData::new(views)
}
