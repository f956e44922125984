//! Symmetric-definite generalized eigensolver and spectrum diagnostics.
//!
//! The pencil `(C, D)` is reduced through a Cholesky factorization of `D`:
//! with `D = L L^T`, the problem becomes a standard symmetric
//! eigendecomposition of `L^{-1} C L^{-T}`, and eigenvectors are mapped back
//! through `L^{-T}`. The returned vectors are `D`-orthonormal.
//!
//! For the shared-components model with identity mixing, the top eigenvalues
//! are roots of a per-component secular equation in the noise variances;
//! `theoretical_eigenvalues` solves it independently of the dense solver so
//! the two routes can be cross-checked.

use crate::error::{Result, ShicaError};
use crate::linalg::{cholesky_lower, sym_eig_desc, symmetrize, Matrix};

/// Full solution of `C u = lambda D u` with descending eigenvalues and
/// `D`-orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct GevSolution {
    pub eigenvalues: Vec<f64>,
    pub vectors: Matrix,
}

impl GevSolution {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Solves the symmetric-definite generalized eigenvalue problem.
///
/// `C` must be symmetric and `D` symmetric positive definite; a Cholesky
/// failure on `D` is reported as a numerical error. The sign of each
/// eigenvector is fixed by making its largest-magnitude entry positive so
/// results are reproducible across runs.
pub fn solve_gev(c: &Matrix, d: &Matrix) -> Result<GevSolution> {
    let dim = c.nrows();
    if c.ncols() != dim || d.nrows() != dim || d.ncols() != dim {
        return Err(ShicaError::Shape(format!(
            "pencil blocks must be square and matching, got {}x{} and {}x{}",
            c.nrows(),
            c.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    let l = cholesky_lower(d, "solve_gev")?;
    // M = L^{-1} C L^{-T}
    let s1 = l
        .solve_lower_triangular(c)
        .ok_or_else(|| ShicaError::numerical("solve_gev", "triangular solve failed"))?;
    let mut reduced = l
        .solve_lower_triangular(&s1.transpose())
        .ok_or_else(|| ShicaError::numerical("solve_gev", "triangular solve failed"))?;
    symmetrize(&mut reduced);
    let (eigenvalues, z) = sym_eig_desc(&reduced);
    // back-transform: u = L^{-T} z, so that u_a^T D u_b = z_a^T z_b
    let lt = l.transpose();
    let mut vectors = lt
        .solve_upper_triangular(&z)
        .ok_or_else(|| ShicaError::numerical("solve_gev", "back-substitution failed"))?;
    for k in 0..dim {
        let col = vectors.column(k);
        let (imax, _) = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("nonempty column");
        if col[imax] < 0.0 {
            let flipped = -vectors.column(k);
            vectors.set_column(k, &flipped);
        }
    }
    Ok(GevSolution {
        eigenvalues,
        vectors,
    })
}

/// Sum over views of `1 / (lambda (1 + k_i) - k_i)`; the secular function
/// whose unit level set pins the leading eigenvalue for one component.
fn secular(lambda: f64, ks: &[f64]) -> f64 {
    ks.iter().map(|k| 1.0 / (lambda * (1.0 + k) - k)).sum()
}

fn secular_deriv(lambda: f64, ks: &[f64]) -> f64 {
    ks.iter()
        .map(|k| {
            let d = lambda * (1.0 + k) - k;
            -(1.0 + k) / (d * d)
        })
        .sum()
}

/// Largest root of `secular(lambda) = 1` for one component.
///
/// All poles of the secular function sit strictly below 1 while
/// `secular(1) = m > 1`, so the root is bracketed by `[1, m + max k]`.
/// Bisection runs to 1e-13 absolute width, then two Newton steps polish the
/// root.
fn secular_root(ks: &[f64]) -> Result<f64> {
    let m = ks.len();
    let kmax = ks.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut lo = 1.0;
    let mut hi = m as f64 + kmax;
    if secular(lo, ks) < 1.0 || secular(hi, ks) > 1.0 {
        return Err(ShicaError::numerical(
            "theoretical_eigenvalues",
            format!("secular root not bracketed for variances {ks:?}"),
        ));
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if secular(mid, ks) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut root = 0.5 * (lo + hi);
    for _ in 0..2 {
        let g = secular(root, ks) - 1.0;
        let dg = secular_deriv(root, ks);
        if dg.abs() > 0.0 {
            let next = root - g / dg;
            if next.is_finite() && next >= lo - 1e-12 && next <= hi + 1e-12 {
                root = next;
            }
        }
    }
    Ok(root)
}

/// Predicted top-`p` pencil eigenvalues from per-view noise variances
/// (`noise_vars[i][j]` is the variance of component `j` in view `i`),
/// sorted descending. Requires at least two views.
pub fn theoretical_eigenvalues(noise_vars: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = noise_vars.len();
    if m < 2 {
        return Err(ShicaError::Data(format!(
            "need at least 2 views of noise variances, got {m}"
        )));
    }
    let p = noise_vars[0].len();
    if noise_vars.iter().any(|v| v.len() != p) {
        return Err(ShicaError::Shape(
            "noise variance rows have inconsistent lengths".into(),
        ));
    }
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let ks: Vec<f64> = noise_vars.iter().map(|v| v[j]).collect();
        out.push(secular_root(&ks)?);
    }
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Bounds on the spectrum split: a lower bound on the smallest of the top-`p`
/// eigenvalues and an upper bound on the largest of the rest, from the
/// largest noise variance.
///
/// The non-leading eigenvalues of each per-component reduced problem
/// interlace its secular poles `k / (1 + k)`, all of which are at most
/// `sigma_max / (1 + sigma_max)`; hence the upper bound. Together the two
/// bounds give a split of at least `m / (1 + sigma_max)`.
pub fn eigen_gap_bounds(noise_vars: &[Vec<f64>]) -> (f64, f64) {
    let m = noise_vars.len() as f64;
    let sigma_max = noise_vars
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lower = 1.0 + (m - 1.0) / (1.0 + sigma_max);
    let upper = 1.0 - 1.0 / (1.0 + sigma_max);
    (lower, upper)
}
