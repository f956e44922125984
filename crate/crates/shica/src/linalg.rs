//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, ShicaError};

/// Dense row-ordered container used throughout the crate: 64-bit floats only.
pub type Matrix = DMatrix<f64>;

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// Returns `(eigenvalues, eigenvectors)` where column `k` of the eigenvector
/// matrix matches `eigenvalues[k]`.
pub fn sym_eig_desc(mat: &Matrix) -> (Vec<f64>, Matrix) {
    let eig = nalgebra::SymmetricEigen::new(mat.clone());
    let n = mat.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Cholesky factor `L` with `mat = L L^T`, or a numerical error if `mat` is
/// not positive definite.
pub fn cholesky_lower(mat: &Matrix, stage: &str) -> Result<Matrix> {
    nalgebra::Cholesky::new(mat.clone())
        .map(|c| c.unpack())
        .ok_or_else(|| ShicaError::numerical(stage, "matrix is not positive definite"))
}

/// log of the determinant of a symmetric positive definite matrix.
pub fn log_det_spd(mat: &Matrix, stage: &str) -> Result<f64> {
    let l = cholesky_lower(mat, stage)?;
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

pub fn try_inverse(mat: &Matrix, stage: &str) -> Result<Matrix> {
    mat.clone()
        .try_inverse()
        .ok_or_else(|| ShicaError::numerical(stage, "matrix is singular"))
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm_sym(mat: &Matrix) -> f64 {
    let (values, _) = sym_eig_desc(mat);
    values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_offdiag(mat: &Matrix) -> f64 {
    let mut out = 0.0f64;
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            if i != j {
                out = out.max(mat[(i, j)].abs());
            }
        }
    }
    out
}

/// `(m + m^T) / 2`, in place.
pub fn symmetrize(mat: &mut Matrix) {
    let t = mat.transpose();
    *mat = (&*mat + t) * 0.5;
}

pub fn random_gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random orthogonal matrix: QR of a Gaussian matrix with the signs of
/// `diag(R)` folded into `Q` so the draw is uniform over rotations.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let g = random_gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    q
}

/// Random matrix with standard normal entries, redrawn until comfortably
/// invertible (`|det| > 1e-3 * n`).
pub fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    loop {
        let a = random_gaussian_matrix(rng, n, n);
        if a.determinant().abs() > 1e-3 * n as f64 {
            return a;
        }
    }
}

/// Per-row mean of a matrix.
pub fn row_means(mat: &Matrix) -> DVector<f64> {
    let n = mat.ncols() as f64;
    DVector::from_iterator(mat.nrows(), mat.row_iter().map(|r| r.sum() / n))
}
