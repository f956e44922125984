//! Second-order pipeline: eigenproblem estimate, joint-diagonalization
//! rotation correction, per-view scale alignment and closed-form noise EM.
//!
//! The pipeline is cheap because after the covariance pass every stage works
//! on `p x p` blocks only; sample count enters the cost once.

use crate::covariance::{sample_covariance, BlockCovariance};
use crate::data::{apply_unmixing, MultiViewData};
use crate::error::{Result, ShicaError};
use crate::jointdiag::{joint_diagonalize, JdProblem};
use crate::linalg::{symmetrize, Matrix};
use crate::mcca::fit_mcca;

/// Which fixed-point update aligns the per-view scales.
///
/// `GammaWeighted` is the exact per-coordinate minimizer of the alignment
/// objective `sum_{i != j} || Phi_i diag(Gamma_ij) Phi_j - I ||_F^2` and is
/// the default. `Unweighted` drops the diagonal weight from the numerator;
/// it shares the same fixed points on symmetric instances and is kept for
/// comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingUpdate {
    GammaWeighted,
    Unweighted,
}

/// Options for the scale fixed point.
#[derive(Debug, Clone)]
pub struct ScalingOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub update: ScalingUpdate,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-9,
            update: ScalingUpdate::GammaWeighted,
        }
    }
}

/// Options for the Gaussian noise EM.
#[derive(Debug, Clone)]
pub struct EmOptions {
    /// Remove per-row means before forming covariances.
    pub centered: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            centered: false,
            max_iter: 1000,
            tol: 1e-10,
        }
    }
}

/// Options for the full pipeline.
#[derive(Debug, Clone, Default)]
pub struct JOptions {
    /// Remove per-row means before forming covariances. Off by default;
    /// the command-line tool turns it on for real data.
    pub centered: bool,
    pub scaling: ScalingOptions,
    pub em: EmOptions,
    pub jd_max_iter: usize,
    pub jd_tol: f64,
}

impl JOptions {
    fn jd_max_iter(&self) -> usize {
        if self.jd_max_iter == 0 {
            1000
        } else {
            self.jd_max_iter
        }
    }

    fn jd_tol(&self) -> f64 {
        if self.jd_tol == 0.0 {
            1e-10
        } else {
            self.jd_tol
        }
    }
}

/// Diagnostics accumulated along the pipeline.
#[derive(Debug, Clone)]
pub struct JDiagnostics {
    pub mcca_gap: f64,
    pub mcca_warnings: Vec<String>,
    pub jd_iterations: usize,
    pub jd_converged: bool,
    pub scaling_sweeps: usize,
    pub em_loglik_trace: Vec<f64>,
}

/// Fitted unmixing matrices and noise variances.
#[derive(Debug, Clone)]
pub struct ShicaJFit {
    pub unmixing: Vec<Matrix>,
    pub noise_vars: Vec<Vec<f64>>,
    pub diagnostics: JDiagnostics,
}

/// Posterior of the shared components under the Gaussian model: per-sample
/// means and a per-component variance (sample-independent in this case).
#[derive(Debug, Clone)]
pub struct SharedPosterior {
    /// `p x n` posterior means.
    pub mean: Matrix,
    /// Per-component posterior variance, in `(0, 1]`.
    pub variance: Vec<f64>,
}

fn infer_grid_side(len: usize) -> Result<usize> {
    let m = (len as f64).sqrt().round() as usize;
    if m * m != len {
        return Err(ShicaError::Shape(format!(
            "{len} blocks do not form a square grid"
        )));
    }
    Ok(m)
}

/// Alignment objective `sum_{i != j} sum_c (phi_ic g_ijc phi_jc - 1)^2`
/// where `g_ijc` is the `c`-th diagonal entry of block `(i, j)`.
pub fn scaling_objective(gamma: &[Matrix], phis: &[Vec<f64>]) -> Result<f64> {
    let m = infer_grid_side(gamma.len())?;
    let p = gamma[0].nrows();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            for c in 0..p {
                let r = phis[i][c] * gamma[i * m + j][(c, c)] * phis[j][c] - 1.0;
                total += r * r;
            }
        }
    }
    Ok(total)
}

/// Cyclic fixed-point alignment of per-view diagonal scales.
///
/// `gamma` is the row-major `m x m` grid of `p x p` blocks
/// `Gamma_ij = U_i C_ij U_j^T`; only diagonals are read. Sweeps cycle over
/// views until the largest relative change drops below `tol`. Returns the
/// per-view scale vectors and the number of sweeps used.
pub fn scaling_fixed_point(
    gamma: &[Matrix],
    opts: &ScalingOptions,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let m = infer_grid_side(gamma.len())?;
    let p = gamma[0].nrows();
    for (k, g) in gamma.iter().enumerate() {
        if g.nrows() != p || g.ncols() != p {
            return Err(ShicaError::Shape(format!(
                "grid block {k} is {}x{}, expected {p}x{p}",
                g.nrows(),
                g.ncols()
            )));
        }
    }
    let diag = |i: usize, j: usize, c: usize| gamma[i * m + j][(c, c)];
    let mut phis = vec![vec![1.0f64; p]; m];
    let mut sweeps = 0usize;
    for _ in 0..opts.max_iter {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for i in 0..m {
            for c in 0..p {
                let mut num = 0.0;
                let mut den = 0.0;
                for j in 0..m {
                    if j == i {
                        continue;
                    }
                    let g = diag(i, j, c);
                    let phi_j = phis[j][c];
                    match opts.update {
                        ScalingUpdate::GammaWeighted => {
                            num += g * phi_j;
                            den += g * g * phi_j * phi_j;
                        }
                        ScalingUpdate::Unweighted => {
                            num += phi_j;
                            den += g * phi_j * phi_j;
                        }
                    }
                }
                if den == 0.0 {
                    return Err(ShicaError::DegenerateScale {
                        component: c,
                        msg: "zero denominator in scale update".into(),
                    });
                }
                let next = num / den;
                let change = (next - phis[i][c]).abs() / phis[i][c].abs().max(1e-30);
                max_change = max_change.max(change);
                phis[i][c] = next;
            }
        }
        if max_change < opts.tol {
            break;
        }
    }
    Ok((phis, sweeps))
}

/// Diagonals of the unmixed covariance blocks `W_i C_ij W_j^T`: entry
/// `[i][j][c]` is component `c` of block `(i, j)`.
fn unmixed_cov_diagonals(bc: &BlockCovariance, unmixing: &[Matrix]) -> Vec<Vec<Vec<f64>>> {
    let m = bc.m();
    let p = bc.p();
    let mut out = vec![vec![vec![0.0; p]; m]; m];
    for i in 0..m {
        for j in 0..m {
            let block = &unmixing[i] * bc.block(i, j) * unmixing[j].transpose();
            for c in 0..p {
                out[i][j][c] = block[(c, c)];
            }
        }
    }
    out
}

/// Observed-data log-likelihood per sample of the Gaussian model, computed
/// from covariance diagonals only. Per component the views are jointly
/// Gaussian with covariance `ones + diag(sigma)`, inverted in closed form.
fn gaussian_loglik(diagonals: &[Vec<Vec<f64>>], noise: &[Vec<f64>], logdet_w: f64) -> f64 {
    let m = noise.len();
    let p = noise[0].len();
    let mut total = logdet_w;
    for c in 0..p {
        let mut sum_inv = 0.0;
        let mut logdet = 0.0;
        for i in 0..m {
            sum_inv += 1.0 / noise[i][c];
            logdet += noise[i][c].ln();
        }
        let denom = 1.0 + sum_inv;
        logdet += denom.ln();
        let mut tr_plain = 0.0;
        let mut tr_outer = 0.0;
        for j in 0..m {
            tr_plain += diagonals[j][j][c] / noise[j][c];
            for l in 0..m {
                tr_outer += diagonals[j][l][c] / (noise[j][c] * noise[l][c]);
            }
        }
        let trace = tr_plain - tr_outer / denom;
        total += -0.5 * (m as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + trace);
    }
    total
}

const NOISE_FLOOR: f64 = 1e-8;

fn em_gaussian_noise_from_cov(
    bc: &BlockCovariance,
    unmixing: &[Matrix],
    opts: &EmOptions,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let m = bc.m();
    let p = bc.p();
    if unmixing.len() != m {
        return Err(ShicaError::Shape(format!(
            "{} unmixing matrices for {m} views",
            unmixing.len()
        )));
    }
    let diagonals = unmixed_cov_diagonals(bc, unmixing);
    let logdet_w: f64 = unmixing
        .iter()
        .map(|w| w.determinant().abs().ln())
        .sum();
    let mut noise: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..p).map(|c| diagonals[i][i][c].max(1e-6)).collect())
        .collect();
    let mut trace = Vec::with_capacity(opts.max_iter + 1);
    trace.push(gaussian_loglik(&diagonals, &noise, logdet_w));
    for _ in 0..opts.max_iter {
        let mut next = vec![vec![0.0f64; p]; m];
        for c in 0..p {
            let sum_inv: f64 = (0..m).map(|j| 1.0 / noise[j][c]).sum();
            let v = 1.0 / (sum_inv + 1.0);
            let cross: f64 = (0..m)
                .flat_map(|j| (0..m).map(move |l| (j, l)))
                .map(|(j, l)| diagonals[j][l][c] / (noise[j][c] * noise[l][c]))
                .sum();
            for i in 0..m {
                let mixed: f64 = (0..m).map(|j| diagonals[j][i][c] / noise[j][c]).sum();
                let value = diagonals[i][i][c] - 2.0 * v * mixed + v * v * cross + v;
                next[i][c] = value.max(NOISE_FLOOR);
            }
        }
        noise = next;
        let ll = gaussian_loglik(&diagonals, &noise, logdet_w);
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if ll - prev < opts.tol * prev.abs().max(1.0) {
            break;
        }
    }
    Ok((noise, trace))
}

/// Expectation-maximization for per-view noise variances with the unmixing
/// matrices held fixed.
///
/// Works entirely on the diagonals of the unmixed covariances, so the cost
/// per iteration is independent of the sample count. Returns the variances
/// and the per-iteration observed log-likelihood (per sample), which is
/// non-decreasing. Variances are floored at 1e-8.
pub fn em_gaussian_noise(
    data: &MultiViewData,
    unmixing: &[Matrix],
    opts: &EmOptions,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let bc = sample_covariance(data, opts.centered)?;
    em_gaussian_noise_from_cov(&bc, unmixing, opts)
}

/// Posterior mean and variance of the shared components under the Gaussian
/// model, given data already in unmixed coordinates.
///
/// The posterior precision of component `c` is `1 + sum_i 1/sigma_ic`, so the
/// variance lies in `(0, 1]`; the mean is the precision-weighted view average
/// shrunk toward zero.
pub fn mmse_gaussian(unmixed: &MultiViewData, noise_vars: &[Vec<f64>]) -> Result<SharedPosterior> {
    let m = unmixed.m();
    let p = unmixed.p();
    let n = unmixed.n();
    if noise_vars.len() != m || noise_vars.iter().any(|v| v.len() != p) {
        return Err(ShicaError::Shape(
            "noise variance grid does not match the dataset".into(),
        ));
    }
    if noise_vars.iter().flatten().any(|v| !(*v > 0.0)) {
        return Err(ShicaError::Data("noise variances must be positive".into()));
    }
    let mut variance = Vec::with_capacity(p);
    for c in 0..p {
        let sum_inv: f64 = (0..m).map(|i| 1.0 / noise_vars[i][c]).sum();
        variance.push(1.0 / (sum_inv + 1.0));
    }
    let mut mean = Matrix::zeros(p, n);
    for i in 0..m {
        let y = unmixed.view(i);
        for c in 0..p {
            let w = 1.0 / noise_vars[i][c];
            for t in 0..n {
                mean[(c, t)] += w * y[(c, t)];
            }
        }
    }
    for c in 0..p {
        for t in 0..n {
            mean[(c, t)] *= variance[c];
        }
    }
    Ok(SharedPosterior { mean, variance })
}

/// Component-wise skewness of each row.
fn row_skewness(mat: &Matrix) -> Vec<f64> {
    let n = mat.ncols() as f64;
    (0..mat.nrows())
        .map(|c| {
            let row = mat.row(c);
            let m2: f64 = row.iter().map(|v| v * v).sum::<f64>() / n;
            let m3: f64 = row.iter().map(|v| v * v * v).sum::<f64>() / n;
            if m2 > 0.0 {
                m3 / m2.powf(1.5)
            } else {
                0.0
            }
        })
        .collect()
}

/// Flips component signs globally (the same flip in every view) so that the
/// cross-view average component has positive skewness, falling back to a
/// positive largest-magnitude sample when skewness is negligible.
fn fix_component_signs(unmixing: &mut [Matrix], data: &MultiViewData) {
    use rayon::prelude::*;
    let m = unmixing.len();
    let p = data.p();
    let n = data.n();
    let unmixed: Vec<Matrix> = unmixing
        .par_iter()
        .zip(data.views().par_iter())
        .map(|(w, x)| w * x)
        .collect();
    let mut pooled = Matrix::zeros(p, n);
    for y in &unmixed {
        pooled += y;
    }
    pooled /= m as f64;
    let skews = row_skewness(&pooled);
    for c in 0..p {
        let flip = if skews[c].abs() >= 0.05 {
            skews[c] < 0.0
        } else {
            let row = pooled.row(c);
            let (imax, _) = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("nonempty row");
            row[imax] < 0.0
        };
        if flip {
            for w in unmixing.iter_mut() {
                let negated = -w.row(c);
                w.set_row(c, &negated);
            }
        }
    }
}

/// Full second-order fit.
///
/// Stages: sample covariances, eigenproblem estimate, joint diagonalization
/// of the unmixed view covariances to undo the rotation left by a small
/// eigen-gap, scale alignment, a global sign convention, and the Gaussian
/// noise EM on the final unmixing.
pub fn fit_shica_j(data: &MultiViewData, opts: &JOptions) -> Result<ShicaJFit> {
    if data.m() < 3 {
        return Err(ShicaError::Data(format!(
            "shared-components estimation needs at least 3 views, got {}",
            data.m()
        )));
    }
    if data.n() < data.p() {
        return Err(ShicaError::Data(format!(
            "need at least as many samples as components, got n={} < p={}",
            data.n(),
            data.p()
        )));
    }
    let bc = sample_covariance(data, opts.centered)?;
    let mcca = fit_mcca(&bc)?;
    let m = bc.m();
    let p = bc.p();

    let mats: Vec<Matrix> = (0..m)
        .map(|i| {
            let mut k = &mcca.unmixing[i] * bc.block(i, i) * mcca.unmixing[i].transpose();
            symmetrize(&mut k);
            k
        })
        .collect();
    let jd = joint_diagonalize(&JdProblem::new(mats)?, opts.jd_max_iter(), opts.jd_tol())?;

    let rotated: Vec<Matrix> = mcca.unmixing.iter().map(|w| &jd.b * w).collect();
    let mut gamma = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            gamma.push(&rotated[i] * bc.block(i, j) * rotated[j].transpose());
        }
    }
    let (phis, scaling_sweeps) = scaling_fixed_point(&gamma, &opts.scaling)?;

    let mut unmixing: Vec<Matrix> = rotated
        .iter()
        .zip(&phis)
        .map(|(u, phi)| {
            let mut w = u.clone();
            for c in 0..p {
                let mut row = w.row_mut(c);
                row *= phi[c];
            }
            w
        })
        .collect();
    fix_component_signs(&mut unmixing, data);

    let (noise_vars, em_loglik_trace) = em_gaussian_noise_from_cov(&bc, &unmixing, &opts.em)?;

    Ok(ShicaJFit {
        unmixing,
        noise_vars,
        diagnostics: JDiagnostics {
            mcca_gap: mcca.gap,
            mcca_warnings: mcca.warnings,
            jd_iterations: jd.iterations,
            jd_converged: jd.converged,
            scaling_sweeps,
            em_loglik_trace,
        },
    })
}

/// Unmixes the data with a fitted model and returns the Gaussian posterior
/// of the shared components.
pub fn shared_posterior(fit: &ShicaJFit, data: &MultiViewData) -> Result<SharedPosterior> {
    let unmixed = apply_unmixing(&fit.unmixing, data)?;
    mmse_gaussian(&unmixed, &fit.noise_vars)
}
