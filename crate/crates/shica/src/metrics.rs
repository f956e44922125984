//! Evaluation metrics: scale/permutation-invariant unmixing error, R²
//! reconstruction score and optimal component matching.

use crate::error::{Result, ShicaError};
use crate::linalg::Matrix;

/// Scale- and permutation-invariant distance between an estimated unmixing
/// matrix and a true mixing matrix.
///
/// With `M = W * A`, returns
/// `(1 / (2 p (p - 1))) * [ sum_rows (sum|M| / max|M| - 1) + sum_cols (...) ]`,
/// which is zero exactly when `M` is a scaled permutation. For `p = 1` any
/// nonzero product is a perfect recovery, so the distance is zero.
pub fn amari_distance(w: &Matrix, a: &Matrix) -> Result<f64> {
    let p = w.nrows();
    if w.ncols() != p || a.nrows() != p || a.ncols() != p {
        return Err(ShicaError::Shape(format!(
            "expected matching square matrices, got {}x{} and {}x{}",
            w.nrows(),
            w.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let m = w * a;
    if !m.iter().all(|v| v.is_finite()) {
        return Err(ShicaError::numerical("amari_distance", "non-finite product"));
    }
    if p == 1 {
        return if m[(0, 0)].abs() > 0.0 {
            Ok(0.0)
        } else {
            Err(ShicaError::numerical("amari_distance", "zero product"))
        };
    }
    let mut total = 0.0;
    for i in 0..p {
        let row = m.row(i);
        let max = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if max == 0.0 {
            return Err(ShicaError::numerical("amari_distance", "zero row in product"));
        }
        total += row.iter().map(|v| v.abs()).sum::<f64>() / max - 1.0;
    }
    for j in 0..p {
        let col = m.column(j);
        let max = col.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if max == 0.0 {
            return Err(ShicaError::numerical(
                "amari_distance",
                "zero column in product",
            ));
        }
        total += col.iter().map(|v| v.abs()).sum::<f64>() / max - 1.0;
    }
    Ok(total / (2.0 * p as f64 * (p as f64 - 1.0)))
}

/// Mean Amari distance across views between estimated unmixing matrices and
/// true mixing matrices.
pub fn mean_amari(unmixing: &[Matrix], mixing: &[Matrix]) -> Result<f64> {
    if unmixing.len() != mixing.len() {
        return Err(ShicaError::Shape(format!(
            "{} estimates vs {} references",
            unmixing.len(),
            mixing.len()
        )));
    }
    let mut total = 0.0;
    for (w, a) in unmixing.iter().zip(mixing) {
        total += amari_distance(w, a)?;
    }
    Ok(total / unmixing.len() as f64)
}

/// Per-row coefficient of determination. Rows of `truth` with zero variance
/// are undefined and excluded from the mean.
#[derive(Debug, Clone)]
pub struct R2Score {
    /// One entry per row; `None` when the truth row has zero variance.
    pub per_row: Vec<Option<f64>>,
    /// Mean across defined rows.
    pub mean: f64,
}

pub fn r2_score(predicted: &Matrix, truth: &Matrix) -> Result<R2Score> {
    if predicted.shape() != truth.shape() {
        return Err(ShicaError::Shape(format!(
            "predicted is {:?}, truth is {:?}",
            predicted.shape(),
            truth.shape()
        )));
    }
    let n = truth.ncols();
    if n < 2 {
        return Err(ShicaError::Data("R2 needs at least 2 samples".into()));
    }
    let mut per_row = Vec::with_capacity(truth.nrows());
    let mut sum = 0.0;
    let mut defined = 0usize;
    for i in 0..truth.nrows() {
        let t = truth.row(i);
        let mean = t.sum() / n as f64;
        let ss_tot: f64 = t.iter().map(|v| (v - mean) * (v - mean)).sum();
        if ss_tot == 0.0 {
            per_row.push(None);
            continue;
        }
        let ss_res: f64 = t
            .iter()
            .zip(predicted.row(i).iter())
            .map(|(tv, pv)| (tv - pv) * (tv - pv))
            .sum();
        let r2 = 1.0 - ss_res / ss_tot;
        per_row.push(Some(r2));
        sum += r2;
        defined += 1;
    }
    let mean = if defined > 0 {
        sum / defined as f64
    } else {
        f64::NAN
    };
    Ok(R2Score { per_row, mean })
}

/// Result of matching estimated component rows to reference rows.
#[derive(Debug, Clone)]
pub struct ComponentMatch {
    /// `permutation[a] = b`: estimated row `a` matches reference row `b`.
    pub permutation: Vec<usize>,
    /// Sign applied to estimated row `a` for the best match.
    pub signs: Vec<f64>,
    /// L2 distance between the unit-normalized matched rows.
    pub distances: Vec<f64>,
    pub total: f64,
}

/// Optimal assignment (over permutations and per-row signs) between the rows
/// of `est` and `reference`, minimizing the total L2 distance of
/// unit-normalized rows.
pub fn match_components(est: &Matrix, reference: &Matrix) -> Result<ComponentMatch> {
    if est.shape() != reference.shape() {
        return Err(ShicaError::Shape(format!(
            "estimate is {:?}, reference is {:?}",
            est.shape(),
            reference.shape()
        )));
    }
    let p = est.nrows();
    let normalize = |m: &Matrix| -> Matrix {
        let mut out = m.clone();
        for i in 0..p {
            let norm = out.row(i).norm();
            if norm > 0.0 {
                let mut row = out.row_mut(i);
                row /= norm;
            }
        }
        out
    };
    let e = normalize(est);
    let r = normalize(reference);
    let mut cost = Matrix::zeros(p, p);
    let mut sign_choice = vec![vec![1.0f64; p]; p];
    for a in 0..p {
        for b in 0..p {
            let minus = (e.row(a) - r.row(b)).norm();
            let plus = (e.row(a) + r.row(b)).norm();
            if plus < minus {
                cost[(a, b)] = plus;
                sign_choice[a][b] = -1.0;
            } else {
                cost[(a, b)] = minus;
            }
        }
    }
    let permutation = hungarian(&cost);
    let mut signs = Vec::with_capacity(p);
    let mut distances = Vec::with_capacity(p);
    for a in 0..p {
        let b = permutation[a];
        signs.push(sign_choice[a][b]);
        distances.push(cost[(a, b)]);
    }
    let total = distances.iter().sum();
    Ok(ComponentMatch {
        permutation,
        signs,
        distances,
        total,
    })
}

/// Minimum-cost assignment on a square cost matrix via shortest augmenting
/// paths with potentials; returns `assign[row] = col`.
fn hungarian(cost: &Matrix) -> Vec<usize> {
    let n = cost.nrows();
    // 1-indexed Kuhn-Munkres with column 0 as the virtual source
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1]; // matched[col] = row
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for col in 1..=n {
        if matched[col] > 0 {
            assign[matched[col] - 1] = col - 1;
        }
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_gaussian_matrix, random_invertible, try_inverse};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scale_permutation(rng: &mut ChaCha8Rng, p: usize) -> Matrix {
        let mut cols: Vec<usize> = (0..p).collect();
        cols.shuffle(rng);
        let mut m = Matrix::zeros(p, p);
        for (i, &j) in cols.iter().enumerate() {
            let s: f64 = rng.gen_range(0.2..3.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            m[(i, j)] = s * sign;
        }
        m
    }

    #[test]
    fn inverse_has_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_invertible(&mut rng, 4);
        let w = try_inverse(&a, "test").unwrap();
        assert!(amari_distance(&w, &a).unwrap() < 1e-12);
    }

    #[test]
    fn scaled_permutation_of_inverse_has_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_invertible(&mut rng, 5);
        let w = scale_permutation(&mut rng, 5) * try_inverse(&a, "test").unwrap();
        assert!(amari_distance(&w, &a).unwrap() < 1e-12);
    }

    #[test]
    fn hand_computed_two_by_two() {
        // M = [[1,1],[0,1]] -> (1/4) * (1 + 0 + 0 + 1) = 0.5
        let w = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let a = Matrix::identity(2, 2);
        assert_relative_eq!(amari_distance(&w, &a).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn nonzero_distance_for_generic_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random_invertible(&mut rng, 4);
        let a = random_invertible(&mut rng, 4);
        assert!(amari_distance(&w, &a).unwrap() > 1e-3);
    }

    #[test]
    fn r2_perfect_and_mean_predictor() {
        let truth = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.0, 1.0]);
        let score = r2_score(&truth, &truth).unwrap();
        assert_relative_eq!(score.mean, 1.0, epsilon = 1e-14);

        let means = Matrix::from_row_slice(2, 3, &[2.0, 2.0, 2.0, 0.0, 0.0, 0.0]);
        let score = r2_score(&means, &truth).unwrap();
        assert_relative_eq!(score.mean, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn r2_hand_computed() {
        let truth = Matrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let pred = Matrix::from_row_slice(1, 3, &[1.0, 2.0, 4.0]);
        let score = r2_score(&pred, &truth).unwrap();
        assert_relative_eq!(score.mean, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn r2_excludes_constant_truth_rows() {
        let truth = Matrix::from_row_slice(2, 3, &[5.0, 5.0, 5.0, 1.0, 2.0, 3.0]);
        let pred = truth.clone();
        let score = r2_score(&pred, &truth).unwrap();
        assert!(score.per_row[0].is_none());
        assert_relative_eq!(score.mean, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn matching_recovers_permutation_and_sign() {
        let reference = Matrix::from_row_slice(
            3,
            4,
            &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, -1.0, -1.0],
        );
        let mut est = Matrix::zeros(3, 4);
        est.set_row(0, &(-reference.row(2)));
        est.set_row(1, &reference.row(0).into_owned());
        est.set_row(2, &reference.row(1).into_owned());
        let m = match_components(&est, &reference).unwrap();
        assert_eq!(m.permutation, vec![2, 0, 1]);
        assert_eq!(m.signs, vec![-1.0, 1.0, 1.0]);
        for d in &m.distances {
            assert!(*d < 1e-12);
        }
    }

    #[test]
    fn assignment_cost_not_worse_than_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let est = random_gaussian_matrix(&mut rng, 3, 100);
        let reference = random_gaussian_matrix(&mut rng, 3, 100);
        let m = match_components(&est, &reference).unwrap();
        let normalize = |m: &Matrix| -> Matrix {
            let mut out = m.clone();
            for i in 0..3 {
                let norm = out.row(i).norm();
                let mut row = out.row_mut(i);
                row /= norm;
            }
            out
        };
        let e = normalize(&est);
        let r = normalize(&reference);
        let identity_cost: f64 = (0..3)
            .map(|i| {
                let d = (e.row(i) - r.row(i)).norm();
                let s = (e.row(i) + r.row(i)).norm();
                d.min(s)
            })
            .sum();
        assert!(m.total <= identity_cost + 1e-12);
    }

    fn brute_force_assignment(cost: &Matrix) -> f64 {
        fn go(cost: &Matrix, row: usize, used: &mut Vec<bool>) -> f64 {
            let n = cost.nrows();
            if row == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for col in 0..n {
                if !used[col] {
                    used[col] = true;
                    best = best.min(cost[(row, col)] + go(cost, row + 1, used));
                    used[col] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost.ncols()])
    }

    proptest! {
        #[test]
        fn hungarian_matches_brute_force(n in 1usize..6, raw in proptest::collection::vec(0.0f64..10.0, 36)) {
            let cost = Matrix::from_fn(n, n, |i, j| raw[i * 6 + j]);
            let assign = hungarian(&cost);
            let mut seen = vec![false; n];
            for &c in &assign {
                prop_assert!(!seen[c]);
                seen[c] = true;
            }
            let total: f64 = assign.iter().enumerate().map(|(r, &c)| cost[(r, c)]).sum();
            let best = brute_force_assignment(&cost);
            prop_assert!((total - best).abs() < 1e-9, "hungarian {total} vs brute {best}");
        }

        #[test]
        fn amari_zero_iff_scale_permutation(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = 4;
            let a = random_invertible(&mut rng, p);
            let w = scale_permutation(&mut rng, p) * try_inverse(&a, "test").unwrap();
            prop_assert!(amari_distance(&w, &a).unwrap() < 1e-10);
            // generic perturbation away from a scale-permutation is detected
            let mut w2 = w;
            w2[(0, 1)] += 0.5 * w2[(0, 0)].abs().max(1.0);
            prop_assert!(amari_distance(&w2, &a).unwrap() > 1e-6);
        }
    }
}
