//! Multiset CCA: the generalized eigenproblem estimator for per-view
//! unmixing matrices, plus a seeded covariance perturbation used to probe its
//! sensitivity to the eigen-gap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::covariance::{assemble_full, BlockCovariance};
use crate::eig::solve_gev;
use crate::error::Result;
use crate::linalg::{random_orthogonal, Matrix};

/// Threshold below which the gap between the last kept eigenvalue and the
/// first discarded one is reported as near-degenerate.
pub const NEAR_DEGENERATE_GAP: f64 = 1e-8;

/// Output of the eigenproblem estimator.
#[derive(Debug, Clone)]
pub struct MccaFit {
    /// One `p x p` unmixing matrix per view, read off the leading
    /// eigenvector blocks.
    pub unmixing: Vec<Matrix>,
    /// The `p` leading eigenvalues, descending.
    pub top_eigenvalues: Vec<f64>,
    /// Gap between the last kept eigenvalue and the next one.
    pub gap: f64,
    /// Non-fatal conditions observed during the fit.
    pub warnings: Vec<String>,
}

/// Solves the covariance pencil and slices the `p` leading eigenvectors into
/// per-view unmixing matrices.
///
/// The eigenvectors, ranked by decreasing eigenvalue, are stacked as an
/// `mp x p` matrix; block `i` of its rows transposed is the unmixing matrix
/// of view `i`. Fewer than three views and a near-degenerate eigenvalue gap
/// are reported as warnings, not failures.
pub fn fit_mcca(bc: &BlockCovariance) -> Result<MccaFit> {
    let m = bc.m();
    let p = bc.p();
    let mut warnings = Vec::new();
    if m < 3 {
        warnings.push(format!(
            "only {m} views: the shared-components model needs 3 for full identifiability"
        ));
    }
    let (full, diag) = assemble_full(bc);
    let solution = solve_gev(&full, &diag)?;
    let gap = if m * p > p {
        solution.eigenvalues[p - 1] - solution.eigenvalues[p]
    } else {
        0.0
    };
    if gap.abs() < NEAR_DEGENERATE_GAP {
        warnings.push(format!(
            "near-degenerate eigenvalue gap {gap:.3e} between ranks {p} and {}: \
             component recovery is unreliable",
            p + 1
        ));
    }
    // duplicated eigenvalues inside the leading block leave the associated
    // eigenvectors determined only up to rotation
    let min_spacing = solution.eigenvalues[..p]
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    if p > 1 && min_spacing < NEAR_DEGENERATE_GAP {
        warnings.push(format!(
            "near-degenerate spacing {min_spacing:.3e} among the leading {p} eigenvalues: \
             the affected components are determined only up to rotation"
        ));
    }
    let mut unmixing = Vec::with_capacity(m);
    for i in 0..m {
        let block = solution.vectors.view((i * p, 0), (p, p));
        unmixing.push(block.transpose());
    }
    Ok(MccaFit {
        unmixing,
        top_eigenvalues: solution.eigenvalues[..p].to_vec(),
        gap,
        warnings,
    })
}

/// Adds a seeded symmetric positive perturbation of spectral norm `delta` to
/// the full covariance grid.
///
/// The perturbation is `delta * S` with `S = V diag(u) V^T`, `V` a random
/// orthogonal matrix and `u` uniform weights rescaled so the largest equals
/// one, which pins the spectral norm of `S` to exactly one.
pub fn perturb_covariance(bc: &BlockCovariance, delta: f64, seed: u64) -> BlockCovariance {
    let m = bc.m();
    let p = bc.p();
    if delta == 0.0 {
        return bc.clone();
    }
    let dim = m * p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = random_orthogonal(&mut rng, dim);
    let mut weights: Vec<f64> = (0..dim).map(|_| rand::Rng::gen_range(&mut rng, 0.0..1.0)).collect();
    let max = weights.iter().fold(f64::MIN_POSITIVE, |a, &b| a.max(b));
    for w in &mut weights {
        *w /= max;
    }
    let lam = Matrix::from_diagonal(&nalgebra::DVector::from_vec(weights));
    let mut s = &v * lam * v.transpose();
    crate::linalg::symmetrize(&mut s);

    let mut out = bc.clone();
    for i in 0..m {
        for j in 0..m {
            let block = bc.block(i, j) + s.view((i * p, j * p), (p, p)) * delta;
            out.set_block(i, j, block);
        }
    }
    out
}
