//! Maximum-likelihood estimation with a two-component Gaussian scale-mixture
//! source prior, fitted by generalized EM.
//!
//! Each shared component is modeled as `s ~ (N(0, 1/2) + N(0, 3/2)) / 2`, a
//! unit-variance, heavier-than-Gaussian density. The E-step is closed form:
//! pooling the unmixed views by noise precision reduces the posterior of each
//! component to a two-branch conjugate mixture. Noise updates are closed
//! form; unmixing matrices take one quasi-Newton step per cycle with a
//! backtracking line search, which keeps the observed log-likelihood
//! non-decreasing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{apply_unmixing, MultiViewData};
use crate::error::{Result, ShicaError};
use crate::linalg::{random_invertible, Matrix};
use crate::shica_j::{fit_shica_j, JOptions, ShicaJFit};

/// Variances of the two mixture branches.
pub const MIXTURE_VARS: (f64, f64) = (0.5, 1.5);

const NOISE_FLOOR: f64 = 1e-8;
const RESP_FLOOR: f64 = 1e-300;

/// Per-sample posterior statistics of the shared components under the
/// mixture prior.
#[derive(Debug, Clone)]
pub struct MixturePosterior {
    /// `p x n` posterior means.
    pub mean: Matrix,
    /// `p x n` posterior variances (sample-dependent through the branch
    /// weights; includes the spread between branch means).
    pub variance: Matrix,
    /// Normalized branch weights, one `p x n` matrix per mixture branch.
    pub responsibilities: [Matrix; 2],
}

/// Options for the maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct MlOptions {
    pub max_iter: usize,
    /// Relative tolerance on the observed log-likelihood change.
    pub tol: f64,
    /// Draw a random initial unmixing from this seed instead of running the
    /// second-order pipeline first.
    pub random_init: Option<u64>,
    /// Options for the second-order initialization fit.
    pub j_options: JOptions,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-9,
            random_init: None,
            j_options: JOptions::default(),
        }
    }
}

/// Fitted state of the maximum-likelihood estimator.
#[derive(Debug, Clone)]
pub struct MlState {
    pub unmixing: Vec<Matrix>,
    pub noise_vars: Vec<Vec<f64>>,
    /// Observed log-likelihood per sample at the start of each EM cycle.
    pub loglik_trace: Vec<f64>,
    /// The fixed mixture branch variances.
    pub mixture_vars: (f64, f64),
    /// Number of quasi-Newton updates that failed their line search.
    pub stalled_updates: usize,
    pub converged: bool,
    pub iterations: usize,
}

/// Precision-pooled statistics of the unmixed views.
struct Pooled {
    /// Per-component pooled variance `1 / sum_i (1 / sigma_ic)`.
    sbar: Vec<f64>,
    /// `p x n` pooled means.
    ybar: Matrix,
}

fn pool_views(views: &[&Matrix], noise: &[Vec<f64>]) -> Pooled {
    let m = views.len();
    let p = views[0].nrows();
    let n = views[0].ncols();
    let mut ybar = Matrix::zeros(p, n);
    let mut sbar = vec![0.0f64; p];
    for i in 0..m {
        let weights: Vec<f64> = (0..p).map(|c| 1.0 / noise[i][c]).collect();
        for c in 0..p {
            sbar[c] += weights[c];
        }
        // column-major storage: one contiguous chunk per sample
        let y = views[i].as_slice();
        let zs = ybar.as_mut_slice();
        for (t, col) in y.chunks_exact(p).enumerate() {
            let zc = &mut zs[t * p..(t + 1) * p];
            for c in 0..p {
                zc[c] += weights[c] * col[c];
            }
        }
    }
    for s in &mut sbar {
        *s = 1.0 / *s;
    }
    for (t, col) in ybar.as_mut_slice().chunks_exact_mut(p).enumerate() {
        let _ = t;
        for c in 0..p {
            col[c] *= sbar[c];
        }
    }
    Pooled { sbar, ybar }
}

fn validate_noise(noise: &[Vec<f64>], m: usize, p: usize) -> Result<()> {
    if noise.len() != m || noise.iter().any(|v| v.len() != p) {
        return Err(ShicaError::Shape(
            "noise variance grid does not match the dataset".into(),
        ));
    }
    if noise.iter().flatten().any(|v| !(*v > 0.0)) {
        return Err(ShicaError::Data("noise variances must be positive".into()));
    }
    Ok(())
}

/// Per-component constants of the posterior mixture, precomputed from the
/// pooled noise variance so the per-sample work is a handful of flops and a
/// single exponential (plus one logarithm when the marginal likelihood is
/// also requested).
struct BranchConsts {
    /// difference of the branch log-normalizers
    log_ratio: f64,
    /// difference of the half inverse branch evidence variances
    inv_diff: f64,
    /// branch log-normalizers and half inverse evidence variances
    base0: f64,
    base1: f64,
    inv0: f64,
    inv1: f64,
    /// shrinkage coefficients `alpha / (alpha + sbar)`
    c0: f64,
    c1: f64,
    /// conditional branch variances `alpha sbar / (alpha + sbar)`
    v0: f64,
    v1: f64,
}

impl BranchConsts {
    fn new(sbar: f64) -> Self {
        let (a0, a1) = MIXTURE_VARS;
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let e0 = sbar + a0;
        let e1 = sbar + a1;
        let base0 = -0.5 * (ln_2pi + e0.ln());
        let base1 = -0.5 * (ln_2pi + e1.ln());
        let inv0 = 0.5 / e0;
        let inv1 = 0.5 / e1;
        Self {
            log_ratio: base0 - base1,
            inv_diff: inv0 - inv1,
            base0,
            base1,
            inv0,
            inv1,
            c0: a0 / e0,
            c1: a1 / e1,
            v0: a0 * sbar / e0,
            v1: a1 * sbar / e1,
        }
    }

    /// Posterior `(mean, variance, weight of the small branch, weight of the
    /// large branch)` at one pooled observation. The weights come from a
    /// stable sigmoid of the branch log-odds; the variance is the full
    /// law-of-total-variance value including the spread of branch means.
    fn stats(&self, ybar: f64) -> (f64, f64, f64, f64) {
        let (mean, var, r0, r1, _) = self.stats_with_evidence(ybar);
        (mean, var, r0, r1)
    }

    /// Posterior statistics plus the log marginal density of the pooled
    /// observation (without the 1/2 mixture weight), sharing the single
    /// exponential between the two.
    fn stats_with_evidence(&self, ybar: f64) -> (f64, f64, f64, f64, f64) {
        let y2 = ybar * ybar;
        let d = self.log_ratio - self.inv_diff * y2;
        let e = (-d.abs()).exp();
        let denom = 1.0 + e;
        let (r0, r1, lmax) = if d >= 0.0 {
            (1.0 / denom, e / denom, self.base0 - self.inv0 * y2)
        } else {
            (e / denom, 1.0 / denom, self.base1 - self.inv1 * y2)
        };
        let evidence = lmax + e.ln_1p();
        let r0 = r0.clamp(RESP_FLOOR, 1.0);
        let r1 = r1.clamp(RESP_FLOOR, 1.0);
        let mu0 = self.c0 * ybar;
        let mu1 = self.c1 * ybar;
        let mean = r0 * mu0 + r1 * mu1;
        let second = r0 * (self.v0 + mu0 * mu0) + r1 * (self.v1 + mu1 * mu1);
        (mean, second - mean * mean, r0, r1, evidence)
    }
}

/// Posterior statistics for one pooled observation of one component.
///
/// The posterior of `s` given a pooled mean `ybar` with pooled noise
/// variance `sbar` is a two-branch mixture; branch `alpha` has weight
/// proportional to `N(ybar; 0, sbar + alpha)`, mean
/// `alpha ybar / (alpha + sbar)` and variance `alpha sbar / (alpha + sbar)`.
pub fn mixture_stats(ybar: f64, sbar: f64) -> (f64, f64, f64, f64) {
    BranchConsts::new(sbar).stats(ybar)
}

fn estep_pooled(pooled: &Pooled) -> MixturePosterior {
    let p = pooled.ybar.nrows();
    let n = pooled.ybar.ncols();
    let mut mean = Matrix::zeros(p, n);
    let mut variance = Matrix::zeros(p, n);
    let mut r0 = Matrix::zeros(p, n);
    let mut r1 = Matrix::zeros(p, n);
    let consts: Vec<BranchConsts> = pooled.sbar.iter().map(|&s| BranchConsts::new(s)).collect();
    let ys = pooled.ybar.as_slice();
    let ms = mean.as_mut_slice();
    let vs = variance.as_mut_slice();
    let r0s = r0.as_mut_slice();
    let r1s = r1.as_mut_slice();
    for t in 0..n {
        for c in 0..p {
            let k = t * p + c;
            let (m, v, a, b) = consts[c].stats(ys[k]);
            ms[k] = m;
            vs[k] = v;
            r0s[k] = a;
            r1s[k] = b;
        }
    }
    MixturePosterior {
        mean,
        variance,
        responsibilities: [r0, r1],
    }
}

/// Closed-form E-step: posterior statistics of every component at every
/// sample, from unmixed data and per-view noise variances.
pub fn estep_ml(unmixed: &MultiViewData, noise_vars: &[Vec<f64>]) -> Result<MixturePosterior> {
    validate_noise(noise_vars, unmixed.m(), unmixed.p())?;
    let views: Vec<&Matrix> = unmixed.views().iter().collect();
    let pooled = pool_views(&views, noise_vars);
    Ok(estep_pooled(&pooled))
}

/// Closed-form noise update: per view and component, the sample mean of the
/// squared posterior residual plus the posterior variance, floored at 1e-8.
pub fn noise_mstep_ml(unmixed: &MultiViewData, posterior: &MixturePosterior) -> Vec<Vec<f64>> {
    unmixed
        .views()
        .iter()
        .map(|y| noise_update_for_view(y, posterior))
        .collect()
}

fn noise_update_for_view(y: &Matrix, posterior: &MixturePosterior) -> Vec<f64> {
    noise_update_for_view_raw(y, &posterior.mean, &posterior.variance)
}

fn noise_update_for_view_raw(y: &Matrix, mean: &Matrix, variance: &Matrix) -> Vec<f64> {
    let p = y.nrows();
    let n = y.ncols() as f64;
    let mut acc = vec![0.0f64; p];
    for ((yc, ec), vc) in y
        .as_slice()
        .chunks_exact(p)
        .zip(mean.as_slice().chunks_exact(p))
        .zip(variance.as_slice().chunks_exact(p))
    {
        for c in 0..p {
            let r = yc[c] - ec[c];
            acc[c] += r * r + vc[c];
        }
    }
    acc.into_iter().map(|v| (v / n).max(NOISE_FLOOR)).collect()
}

/// Relative gradient of the per-view surrogate objective: `-I` plus the
/// noise-whitened cross-moment of the posterior residual with the unmixed
/// signal.
pub fn w_gradient(y: &Matrix, posterior_mean: &Matrix, noise: &[f64]) -> Matrix {
    let p = y.nrows();
    let n = y.ncols() as f64;
    let residual = y - posterior_mean;
    let mut grad = residual * y.transpose() / n;
    for a in 0..p {
        let sigma = noise[a];
        for b in 0..p {
            grad[(a, b)] /= sigma;
        }
    }
    for a in 0..p {
        grad[(a, a)] -= 1.0;
    }
    grad
}

/// Solves the approximate-Hessian system for the relative quasi-Newton
/// direction. Entries `(a, b)` and `(b, a)` couple through a 2x2 block with
/// diagonal `E[y_b^2] / sigma_a`; a near-singular block falls back to its
/// diagonal, which turns that pair into a damped gradient step.
pub fn quasi_newton_direction(grad: &Matrix, second_moments: &[f64], noise: &[f64]) -> Matrix {
    let p = grad.nrows();
    let mut dir = Matrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let h_ab = (second_moments[b] / noise[a]).max(1e-12);
            if a == b {
                dir[(a, a)] = grad[(a, a)] / (1.0 + h_ab);
                continue;
            }
            let h_ba = (second_moments[a] / noise[b]).max(1e-12);
            let det = h_ab * h_ba - 1.0;
            dir[(a, b)] = if det > 1e-9 {
                (grad[(a, b)] * h_ba - grad[(b, a)]) / det
            } else {
                grad[(a, b)] / h_ab
            };
        }
    }
    dir
}

/// Per-view surrogate objective up to terms constant in `W`:
/// `-ln |det W| + (1/2n) sum_{a,t} (y_at - E_at)^2 / sigma_a`.
pub fn surrogate(det_abs: f64, y: &Matrix, posterior_mean: &Matrix, noise: &[f64]) -> f64 {
    let p = y.nrows();
    let n = y.ncols() as f64;
    let inv: Vec<f64> = noise.iter().map(|v| 1.0 / v).collect();
    let mut quad = 0.0;
    for (yc, ec) in y
        .as_slice()
        .chunks_exact(p)
        .zip(posterior_mean.as_slice().chunks_exact(p))
    {
        for c in 0..p {
            let r = yc[c] - ec[c];
            quad += inv[c] * r * r;
        }
    }
    -det_abs.ln() + 0.5 * quad / n
}

/// Result of one quasi-Newton unmixing update.
#[derive(Debug, Clone)]
pub struct WUpdate {
    pub unmixing: Matrix,
    /// The unmixed view under the returned matrix.
    pub unmixed: Matrix,
    /// Accepted step length, 0 when the search stalled.
    pub rho: f64,
    pub stalled: bool,
}

/// One quasi-Newton step on an unmixing matrix with a halving line search on
/// the surrogate objective (step lengths 1, 1/2, ..., 2^-12). A search with
/// no decrease returns the input unchanged and flags a stall.
pub fn w_update(
    w: &Matrix,
    gradient: &Matrix,
    y: &Matrix,
    posterior_mean: &Matrix,
    noise: &[f64],
) -> WUpdate {
    let p = w.nrows();
    let n = y.ncols() as f64;
    let mut second_moments = vec![0.0f64; p];
    for col in y.as_slice().chunks_exact(p) {
        for c in 0..p {
            second_moments[c] += col[c] * col[c];
        }
    }
    for m2 in &mut second_moments {
        *m2 /= n;
    }
    w_step(w, gradient, &second_moments, y, posterior_mean, noise)
}

/// The quasi-Newton step given precomputed per-component second moments.
fn w_step(
    w: &Matrix,
    gradient: &Matrix,
    second_moments: &[f64],
    y: &Matrix,
    posterior_mean: &Matrix,
    noise: &[f64],
) -> WUpdate {
    let p = w.nrows();
    let n = y.ncols() as f64;
    let direction = quasi_newton_direction(gradient, second_moments, noise);
    let dy = &direction * y;

    // The quadratic part of the surrogate along the search path is
    // quad(rho) = a - 2 rho b + rho^2 c, so only the log-determinant needs
    // reevaluation per candidate step.
    let inv: Vec<f64> = noise.iter().map(|v| 1.0 / v).collect();
    let (mut qa, mut qb, mut qc) = (0.0f64, 0.0f64, 0.0f64);
    for ((yc, ec), dc) in y
        .as_slice()
        .chunks_exact(p)
        .zip(posterior_mean.as_slice().chunks_exact(p))
        .zip(dy.as_slice().chunks_exact(p))
    {
        for c in 0..p {
            let r = yc[c] - ec[c];
            qa += inv[c] * r * r;
            qb += inv[c] * r * dc[c];
            qc += inv[c] * dc[c] * dc[c];
        }
    }
    let base_log_det = w.determinant().abs().ln();
    let base = -base_log_det + 0.5 * qa / n;
    let mut rho = 1.0f64;
    while rho >= 2f64.powi(-12) {
        let trans = Matrix::identity(p, p) - &direction * rho;
        let det = trans.determinant();
        if det.abs() > 0.0 && det.is_finite() {
            let value = -(det.abs().ln() + base_log_det)
                + 0.5 * (qa - 2.0 * rho * qb + rho * rho * qc) / n;
            if value < base {
                return WUpdate {
                    unmixing: &trans * w,
                    unmixed: y - &dy * rho,
                    rho,
                    stalled: false,
                };
            }
        }
        rho *= 0.5;
    }
    WUpdate {
        unmixing: w.clone(),
        unmixed: y.clone(),
        rho: 0.0,
        stalled: true,
    }
}

/// One fused pass over all views at the start of an EM cycle: the observed
/// log-likelihood, the posterior mean, and the per-view accumulators the
/// M-step consumes. The product of per-view Gaussians collapses onto the
/// precision-weighted pooled mean, leaving per-component mixture marginals;
/// everything shares one exponential per component and sample.
struct CycleStats {
    loglik: f64,
    /// posterior means, `p x n`
    mean: Matrix,
    /// per view and component: `sum_t (y - E)^2 + V`
    noise_acc: Vec<Vec<f64>>,
    /// per view and component: `sum_t y^2`
    moment_acc: Vec<Vec<f64>>,
    /// per view: `sum_t (y - E) y^T`, the unnormalized residual cross-moment
    cross: Vec<Matrix>,
}

fn cycle_stats(views: &[&Matrix], noise: &[Vec<f64>], logdet_w: f64) -> CycleStats {
    let m = views.len();
    let p = views[0].nrows();
    let n = views[0].ncols();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();

    let mut weights = vec![0.0f64; m * p];
    let mut sbar = vec![0.0f64; p];
    let mut sum_log_noise = 0.0;
    for i in 0..m {
        for c in 0..p {
            let w = 1.0 / noise[i][c];
            weights[i * p + c] = w;
            sbar[c] += w;
            sum_log_noise += noise[i][c].ln();
        }
    }
    let mut total = logdet_w - 0.5 * (sum_log_noise + (m * p) as f64 * ln_2pi);
    for s in &mut sbar {
        *s = 1.0 / *s;
        total += 0.5 * (ln_2pi + s.ln()) + 0.5f64.ln();
    }
    let consts: Vec<BranchConsts> = sbar.iter().map(|&s| BranchConsts::new(s)).collect();

    let slices: Vec<&[f64]> = views.iter().map(|v| v.as_slice()).collect();
    let mut mean = Matrix::zeros(p, n);
    let ms = mean.as_mut_slice();
    let mut noise_acc = vec![vec![0.0f64; p]; m];
    let mut moment_acc = vec![vec![0.0f64; p]; m];
    let mut cross = vec![vec![0.0f64; p * p]; m];
    let mut z = vec![0.0f64; p];
    let mut q = vec![0.0f64; p];
    let mut post_var = vec![0.0f64; p];
    let mut acc = 0.0;
    for t in 0..n {
        let off = t * p;
        z.iter_mut().for_each(|v| *v = 0.0);
        q.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let col = &slices[i][off..off + p];
            let w = &weights[i * p..(i + 1) * p];
            for c in 0..p {
                let wv = w[c] * col[c];
                z[c] += wv;
                q[c] += wv * col[c];
            }
        }
        let e = &mut ms[off..off + p];
        for c in 0..p {
            let ybar = sbar[c] * z[c];
            let quad = q[c] - ybar * z[c];
            let (me, va, _, _, evidence) = consts[c].stats_with_evidence(ybar);
            e[c] = me;
            post_var[c] = va;
            acc += evidence - 0.5 * quad;
        }
        for i in 0..m {
            let col = &slices[i][off..off + p];
            let na = &mut noise_acc[i];
            let ma = &mut moment_acc[i];
            let cr = &mut cross[i];
            for a in 0..p {
                let r = col[a] - e[a];
                na[a] += r * r + post_var[a];
                ma[a] += col[a] * col[a];
                let row = &mut cr[a * p..(a + 1) * p];
                for (b, y_b) in col.iter().enumerate() {
                    row[b] += r * y_b;
                }
            }
        }
    }
    let cross = cross
        .into_iter()
        .map(|flat| Matrix::from_fn(p, p, |a, b| flat[a * p + b]))
        .collect();
    CycleStats {
        loglik: total + acc / n as f64,
        mean,
        noise_acc,
        moment_acc,
        cross,
    }
}

/// Maximum-likelihood fit by generalized EM.
///
/// `init` supplies a warm start; without one the second-order pipeline runs
/// first (or a seeded random unmixing when `opts.random_init` is set). Each
/// cycle performs one closed-form E-step, then per view one noise update and
/// one quasi-Newton unmixing step. The run stops when the observed
/// log-likelihood change falls below `opts.tol` (relative) or after
/// `opts.max_iter` cycles.
pub fn fit_shica_ml(
    data: &MultiViewData,
    init: Option<&ShicaJFit>,
    opts: &MlOptions,
) -> Result<MlState> {
    let m = data.m();
    let p = data.p();
    if m < 3 {
        return Err(ShicaError::Data(format!(
            "shared-components estimation needs at least 3 views, got {m}"
        )));
    }
    let (mut unmixing, mut noise): (Vec<Matrix>, Vec<Vec<f64>>) = match (init, opts.random_init) {
        (Some(fit), _) => (
            fit.unmixing.clone(),
            fit.noise_vars
                .iter()
                .map(|v| v.iter().map(|x| x.max(NOISE_FLOOR)).collect())
                .collect(),
        ),
        (None, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (
                (0..m).map(|_| random_invertible(&mut rng, p)).collect(),
                vec![vec![1.0; p]; m],
            )
        }
        (None, None) => {
            let fit = fit_shica_j(data, &opts.j_options)?;
            (
                fit.unmixing.clone(),
                fit.noise_vars
                    .iter()
                    .map(|v| v.iter().map(|x| x.max(NOISE_FLOOR)).collect())
                    .collect(),
            )
        }
    };

    let mut unmixed: Vec<Matrix> = unmixing
        .iter()
        .zip(data.views())
        .map(|(w, x)| w * x)
        .collect();
    let mut trace: Vec<f64> = Vec::new();
    let mut stalled_updates = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    let n_samples = data.n() as f64;
    for it in 0..opts.max_iter {
        let views: Vec<&Matrix> = unmixed.iter().collect();
        let logdet_w: f64 = unmixing.iter().map(|w| w.determinant().abs().ln()).sum();
        let stats = cycle_stats(&views, &noise, logdet_w);
        let ll = stats.loglik;
        if let Some(prev) = trace.last() {
            if ll - *prev < opts.tol * prev.abs().max(1.0) {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        iterations = it + 1;

        for i in 0..m {
            noise[i] = stats.noise_acc[i]
                .iter()
                .map(|acc| (acc / n_samples).max(NOISE_FLOOR))
                .collect();
            let moments: Vec<f64> = stats.moment_acc[i].iter().map(|v| v / n_samples).collect();
            let mut grad = &stats.cross[i] / n_samples;
            for a in 0..p {
                let inv = 1.0 / noise[i][a];
                for b in 0..p {
                    grad[(a, b)] *= inv;
                }
                grad[(a, a)] -= 1.0;
            }
            let update = w_step(
                &unmixing[i],
                &grad,
                &moments,
                &unmixed[i],
                &stats.mean,
                &noise[i],
            );
            if update.stalled {
                stalled_updates += 1;
            } else {
                unmixing[i] = update.unmixing;
                unmixed[i] = update.unmixed;
            }
        }
    }

    Ok(MlState {
        unmixing,
        noise_vars: noise,
        loglik_trace: trace,
        mixture_vars: MIXTURE_VARS,
        stalled_updates,
        converged,
        iterations,
    })
}

/// Unmixes the data with a fitted model and returns the mixture posterior of
/// the shared components.
pub fn shared_posterior_ml(state: &MlState, data: &MultiViewData) -> Result<MixturePosterior> {
    let unmixed = apply_unmixing(&state.unmixing, data)?;
    estep_ml(&unmixed, &state.noise_vars)
}
