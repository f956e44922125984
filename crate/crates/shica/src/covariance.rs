//! Cross-covariance blocks between views and their assembly into the dense
//! pencil matrices consumed by the generalized eigensolver.

use rayon::prelude::*;

use crate::data::{Direction, ModelParams, MultiViewData};
use crate::error::{Result, ShicaError};
use crate::linalg::{row_means, symmetrize, Matrix};

/// The `m x m` grid of `p x p` blocks `C_ij`, with `C_ij = C_ji^T` enforced
/// exactly and diagonal blocks symmetric.
#[derive(Debug, Clone)]
pub struct BlockCovariance {
    m: usize,
    p: usize,
    blocks: Vec<Matrix>,
}

impl BlockCovariance {
    /// Builds a grid from row-major blocks, checking shapes and pairwise
    /// transpose symmetry (relative tolerance 1e-12).
    pub fn from_blocks(m: usize, p: usize, blocks: Vec<Matrix>) -> Result<Self> {
        if blocks.len() != m * m {
            return Err(ShicaError::Shape(format!(
                "{} blocks for an {m}x{m} grid",
                blocks.len()
            )));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.nrows() != p || b.ncols() != p {
                return Err(ShicaError::Shape(format!(
                    "block {k} is {}x{}, expected {p}x{p}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        let scale = blocks.iter().map(Matrix::norm).fold(0.0f64, f64::max);
        for i in 0..m {
            for j in i..m {
                let diff = (&blocks[i * m + j] - blocks[j * m + i].transpose()).norm();
                if diff > 1e-12 * scale.max(1.0) {
                    return Err(ShicaError::Data(format!(
                        "blocks ({i},{j}) and ({j},{i}) are not transposes (|diff| = {diff:e})"
                    )));
                }
            }
        }
        Ok(Self { m, p, blocks })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn block(&self, i: usize, j: usize) -> &Matrix {
        &self.blocks[i * self.m + j]
    }

    pub(crate) fn set_block(&mut self, i: usize, j: usize, b: Matrix) {
        self.blocks[i * self.m + j] = b;
    }
}

/// Sample cross-covariances `C_ij = X_i X_j^T / n`, optionally removing the
/// per-row mean of each view first.
///
/// Blocks are symmetrized (`C_ij <- (C_ij + C_ji^T)/2`) so the assembled
/// pencil is exactly symmetric. Normalization is by `n`, matching the
/// population expectation the estimators are written against.
pub fn sample_covariance(data: &MultiViewData, centered: bool) -> Result<BlockCovariance> {
    let n = data.n();
    if n < 2 {
        return Err(ShicaError::Data(format!(
            "need at least 2 samples for a covariance, got {n}"
        )));
    }
    let m = data.m();
    let p = data.p();
    let views: Vec<Matrix> = if centered {
        data.views()
            .iter()
            .map(|x| {
                let mu = row_means(x);
                let mut c = x.clone();
                for t in 0..c.ncols() {
                    let mut col = c.column_mut(t);
                    col -= &mu;
                }
                c
            })
            .collect()
    } else {
        data.views().to_vec()
    };

    // Upper-triangular pairs are independent; compute them in parallel.
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let inv_n = 1.0 / n as f64;
    let computed: Vec<((usize, usize), Matrix)> = pairs
        .into_par_iter()
        .map(|(i, j)| {
            let mut c = &views[i] * views[j].transpose() * inv_n;
            if i == j {
                symmetrize(&mut c);
            }
            ((i, j), c)
        })
        .collect();

    let mut blocks = vec![Matrix::zeros(p, p); m * m];
    for ((i, j), c) in computed {
        if i != j {
            blocks[j * m + i] = c.transpose();
        }
        blocks[i * m + j] = c;
    }
    BlockCovariance::from_blocks(m, p, blocks)
}

/// Population covariance blocks `C_ij = A_i (I + delta_ij Sigma_i) A_j^T`
/// for parameters in mixing direction. Exact within float arithmetic; used
/// as the noiseless reference in tests and benchmarks.
pub fn model_covariance(params: &ModelParams) -> Result<BlockCovariance> {
    if params.direction != Direction::Mixing {
        return Err(ShicaError::Data(
            "model covariance requires parameters in mixing direction".into(),
        ));
    }
    let m = params.m();
    let p = params.p();
    let mut blocks = vec![Matrix::zeros(p, p); m * m];
    for i in 0..m {
        for j in i..m {
            let c = if i == j {
                let mut scaled = params.matrices[i].clone();
                for col in 0..p {
                    let factor = 1.0 + params.noise_vars[i][col];
                    let mut column = scaled.column_mut(col);
                    column *= factor;
                }
                let mut c = scaled * params.matrices[i].transpose();
                symmetrize(&mut c);
                c
            } else {
                &params.matrices[i] * params.matrices[j].transpose()
            };
            if i != j {
                blocks[j * m + i] = c.transpose();
            }
            blocks[i * m + j] = c;
        }
    }
    BlockCovariance::from_blocks(m, p, blocks)
}

/// Assembles the dense pencil: the full `pm x pm` covariance and its
/// block-diagonal counterpart (off-diagonal blocks zeroed).
pub fn assemble_full(bc: &BlockCovariance) -> (Matrix, Matrix) {
    let (m, p) = (bc.m(), bc.p());
    let dim = m * p;
    let mut full = Matrix::zeros(dim, dim);
    let mut diag = Matrix::zeros(dim, dim);
    for i in 0..m {
        for j in 0..m {
            let block = bc.block(i, j);
            full.view_mut((i * p, j * p), (p, p)).copy_from(block);
            if i == j {
                diag.view_mut((i * p, j * p), (p, p)).copy_from(block);
            }
        }
    }
    (full, diag)
}
