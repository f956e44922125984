//! Approximate joint diagonalization of symmetric positive-definite
//! matrices.
//!
//! The criterion for a candidate diagonalizer `B` is the weighted sum over
//! matrices of `(log det diag(B K B^T) - log det(B K B^T)) / 2`. It is
//! non-negative and vanishes exactly when every transformed matrix is
//! diagonal. Minimization uses a relative quasi-Newton iteration with a
//! diagonal Hessian approximation and a halving line search; pairwise
//! coordinate updates serve as a fallback when the full step stalls.

use crate::error::{Result, ShicaError};
use crate::linalg::{log_det_spd, max_abs_offdiag, Matrix};

/// A set of symmetric positive-definite matrices to diagonalize, with
/// optional positive weights (default 1).
#[derive(Debug, Clone)]
pub struct JdProblem {
    mats: Vec<Matrix>,
    weights: Vec<f64>,
}

impl JdProblem {
    pub fn new(mats: Vec<Matrix>) -> Result<Self> {
        let n = mats.len();
        Self::with_weights(mats, vec![1.0; n])
    }

    pub fn with_weights(mats: Vec<Matrix>, weights: Vec<f64>) -> Result<Self> {
        if mats.is_empty() {
            return Err(ShicaError::Data("no matrices to diagonalize".into()));
        }
        if weights.len() != mats.len() {
            return Err(ShicaError::Shape(format!(
                "{} weights for {} matrices",
                weights.len(),
                mats.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(ShicaError::Data("weights must be strictly positive".into()));
        }
        let p = mats[0].nrows();
        for (k, m) in mats.iter().enumerate() {
            if m.nrows() != p || m.ncols() != p {
                return Err(ShicaError::Shape(format!(
                    "matrix {k} is {}x{}, expected {p}x{p}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let scale = m.norm().max(1.0);
            if max_abs_offdiag(&(m - m.transpose())) > 1e-10 * scale {
                return Err(ShicaError::Data(format!("matrix {k} is not symmetric")));
            }
        }
        Ok(Self { mats, weights })
    }

    pub fn mats(&self) -> &[Matrix] {
        &self.mats
    }

    pub fn p(&self) -> usize {
        self.mats[0].nrows()
    }
}

/// Outcome of the joint diagonalization.
#[derive(Debug, Clone)]
pub struct JdResult {
    /// The approximate joint diagonalizer.
    pub b: Matrix,
    /// Criterion value after each accepted iteration (index 0 = start).
    pub criterion_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Joint-diagonality criterion at `B`: non-negative, zero exactly when every
/// `B K B^T` is diagonal. Invariant to rescaling the rows of `B`.
pub fn pham_criterion(b: &Matrix, problem: &JdProblem) -> Result<f64> {
    let mut total = 0.0;
    for (k, (mat, w)) in problem.mats.iter().zip(&problem.weights).enumerate() {
        let d = b * mat * b.transpose();
        let mut log_diag = 0.0;
        for a in 0..d.nrows() {
            let v = d[(a, a)];
            if v <= 0.0 {
                return Err(ShicaError::numerical(
                    "pham_criterion",
                    format!("matrix {k}: transform has non-positive diagonal"),
                ));
            }
            log_diag += v.ln();
        }
        let log_det = log_det_spd(&d, "pham_criterion")?;
        total += w * 0.5 * (log_diag - log_det);
    }
    Ok(total)
}

struct JdState<'a> {
    problem: &'a JdProblem,
    weight_sum: f64,
    b: Matrix,
    transformed: Vec<Matrix>,
    /// criterion minus the search objective; fixed by the input matrices
    offset: f64,
}

impl<'a> JdState<'a> {
    fn new(problem: &'a JdProblem) -> Result<Self> {
        let weight_sum: f64 = problem.weights.iter().sum();
        let mut offset = 0.0;
        for (k, (mat, w)) in problem.mats.iter().zip(&problem.weights).enumerate() {
            let ld = log_det_spd(mat, "joint_diagonalize").map_err(|_| {
                ShicaError::numerical(
                    "joint_diagonalize",
                    format!("input matrix {k} is not positive definite"),
                )
            })?;
            offset += w * 0.5 * ld;
        }
        let p = problem.p();
        Ok(Self {
            problem,
            weight_sum,
            b: Matrix::identity(p, p),
            transformed: problem.mats.to_vec(),
            offset,
        })
    }

    /// Search objective: weighted sum of half log-diagonal products minus
    /// `sum(w) log |det B|`. Differs from the criterion by a constant.
    fn search_loss(b: &Matrix, transformed: &[Matrix], problem: &JdProblem, wsum: f64) -> Option<f64> {
        let mut loss = 0.0;
        for (d, w) in transformed.iter().zip(&problem.weights) {
            for a in 0..d.nrows() {
                let v = d[(a, a)];
                if v <= 0.0 {
                    return None;
                }
                loss += w * 0.5 * v.ln();
            }
        }
        let det = b.determinant().abs();
        if det <= 0.0 || !det.is_finite() {
            return None;
        }
        Some(loss - wsum * det.ln())
    }

    fn loss(&self) -> f64 {
        Self::search_loss(&self.b, &self.transformed, self.problem, self.weight_sum)
            .expect("current iterate is valid")
    }

    fn criterion(&self) -> f64 {
        self.loss() - self.offset
    }

    /// Weighted relative gradient and the diagonal-ratio matrix
    /// `h[a][b] = mean_k D_bb / D_aa`.
    fn gradient_and_ratios(&self) -> (Matrix, Matrix) {
        let p = self.problem.p();
        let mut grad = Matrix::zeros(p, p);
        let mut h = Matrix::zeros(p, p);
        for (d, w) in self.transformed.iter().zip(&self.problem.weights) {
            for a in 0..p {
                let da = d[(a, a)];
                for bcol in 0..p {
                    grad[(a, bcol)] += w * d[(a, bcol)] / da;
                    h[(a, bcol)] += w * d[(bcol, bcol)] / da;
                }
            }
        }
        grad /= self.weight_sum;
        h /= self.weight_sum;
        for a in 0..p {
            grad[(a, a)] -= 1.0;
        }
        (grad, h)
    }

    /// Applies `B <- (I - step * direction) B` if a halving line search finds
    /// a decrease; returns the accepted loss or `None` on a stall.
    fn try_step(&mut self, direction: &Matrix, current_loss: f64) -> Option<f64> {
        let p = self.problem.p();
        let mut step = 1.0f64;
        while step >= 2f64.powi(-20) {
            let trans = Matrix::identity(p, p) - direction * step;
            let b_new = &trans * &self.b;
            let d_new: Vec<Matrix> = self
                .transformed
                .iter()
                .map(|d| &trans * d * trans.transpose())
                .collect();
            if let Some(loss) =
                Self::search_loss(&b_new, &d_new, self.problem, self.weight_sum)
            {
                if loss < current_loss {
                    self.b = b_new;
                    self.transformed = d_new;
                    return Some(loss);
                }
            }
            step *= 0.5;
        }
        None
    }
}

/// Quasi-Newton direction from the pairwise 2x2 Hessian blocks.
fn newton_direction(grad: &Matrix, h: &Matrix) -> Matrix {
    let p = grad.nrows();
    let mut dir = Matrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            if a == b {
                continue;
            }
            let det = (h[(a, b)] * h[(b, a)] - 1.0).max(1e-12);
            dir[(a, b)] = (grad[(a, b)] * h[(b, a)] - grad[(b, a)]) / det;
        }
    }
    dir
}

/// Minimizes the joint-diagonality criterion starting from the identity.
///
/// Stops when the relative criterion decrease drops below `tol`, when the
/// gradient norm drops below `tol`, or after `max_iter` accepted iterations.
/// If the full quasi-Newton step stalls for five iterations, one sweep of
/// pairwise coordinate updates is attempted before giving up; a run that
/// still cannot decrease returns the best iterate with `converged = false`.
pub fn joint_diagonalize(problem: &JdProblem, max_iter: usize, tol: f64) -> Result<JdResult> {
    let mut state = JdState::new(problem)?;
    let mut loss = state.loss();
    let mut trace = vec![state.criterion()];
    let mut stalls = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    for _ in 0..max_iter {
        let (grad, h) = state.gradient_and_ratios();
        if grad.norm() < tol {
            converged = true;
            break;
        }
        let direction = newton_direction(&grad, &h);
        let accepted = state.try_step(&direction, loss);
        let new_loss = match accepted {
            Some(l) => {
                stalls = 0;
                l
            }
            None => {
                stalls += 1;
                if stalls >= 5 {
                    stalls = 0;
                    match jacobi_sweep(&mut state, loss) {
                        Some(l) => l,
                        None => break,
                    }
                } else {
                    continue;
                }
            }
        };
        iterations += 1;
        let decrease = loss - new_loss;
        loss = new_loss;
        trace.push(state.criterion());
        if decrease < tol * loss.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(JdResult {
        b: state.b.clone(),
        criterion_trace: trace,
        iterations,
        converged,
    })
}

/// One pass of pairwise updates: for every index pair, a 2x2 quasi-Newton
/// step restricted to that pair with its own line search.
fn jacobi_sweep(state: &mut JdState, mut loss: f64) -> Option<f64> {
    let p = state.problem.p();
    let mut improved = false;
    for a in 0..p {
        for b in (a + 1)..p {
            let (grad, h) = state.gradient_and_ratios();
            let det = (h[(a, b)] * h[(b, a)] - 1.0).max(1e-12);
            let mut dir = Matrix::zeros(p, p);
            dir[(a, b)] = (grad[(a, b)] * h[(b, a)] - grad[(b, a)]) / det;
            dir[(b, a)] = (grad[(b, a)] * h[(a, b)] - grad[(a, b)]) / det;
            if let Some(l) = state.try_step(&dir, loss) {
                loss = l;
                improved = true;
            }
        }
    }
    improved.then_some(loss)
}
