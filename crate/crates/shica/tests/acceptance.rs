//! Acceptance suite: one test per headline guarantee, each printing a
//! PASS line (visible with `--nocapture`). Heavy cases serialize on a lock
//! so each gets the full thread pool and its own wall-clock budget.
//!
//! Run with: `cargo test --test acceptance -- --nocapture`

use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use shica::bench::{median, perturbation_sweep, scenario_by_name, separation_sweep, Algo};
use shica::linalg::random_invertible;
use shica::shica_j::{scaling_objective, ScalingOptions};
use shica::shica_ml::{mixture_stats, quasi_newton_direction, surrogate, w_gradient};
use shica::{
    amari_distance, assemble_full, eigen_gap_bounds, em_gaussian_noise, fit_mcca, fit_shica_ml,
    generate, mean_amari, model_covariance, scaling_fixed_point, solve_gev,
    theoretical_eigenvalues, Direction, Matrix, MlOptions, ModelParams,
    NoiseScheme, ScenarioSpec, SourceKind, SourceSpec,
};

static HEAVY: Mutex<()> = Mutex::new(());

fn pass(tag: &str, detail: String) {
    println!("[{tag}] PASS  {detail}");
}

/// Noise grid with all predicted eigenvalue spacings at least `min_gap`.
fn diverse_noise(rng: &mut ChaCha8Rng, m: usize, p: usize, min_gap: f64) -> Vec<Vec<f64>> {
    loop {
        let noise: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..p).map(|_| rng.gen_range(0.05..1.0)).collect())
            .collect();
        let lambdas = theoretical_eigenvalues(&noise).unwrap();
        if lambdas.windows(2).all(|w| w[0] - w[1] >= min_gap) {
            return noise;
        }
    }
}

#[test]
fn a01_exact_covariance_recovery() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (m, p) = (5, 4);
    let noise = diverse_noise(&mut rng, m, p, 1e-3);
    let matrices: Vec<Matrix> = (0..m).map(|_| random_invertible(&mut rng, p)).collect();
    let params = ModelParams::new(Direction::Mixing, matrices, noise);
    let bc = model_covariance(&params).unwrap();
    let fit = fit_mcca(&bc).unwrap();
    let mut worst = 0.0f64;
    for i in 0..m {
        let d = amari_distance(&fit.unmixing[i], &params.matrices[i]).unwrap();
        assert!(d < 1e-8, "view {i}: amari {d}");
        worst = worst.max(d);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "took {elapsed:.2}s, budget 1s");
    pass(
        "A01 exact-covariance-recovery",
        format!("worst amari {worst:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn a02_secular_equation_matches_dense_solver() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.gen_range(3..=10);
        let p = rng.gen_range(1..=6);
        let noise: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..p).map(|_| rng.gen_range(0.01..2.0)).collect())
            .collect();
        let params = ModelParams::new(
            Direction::Mixing,
            vec![Matrix::identity(p, p); m],
            noise.clone(),
        );
        let (c, d) = assemble_full(&model_covariance(&params).unwrap());
        let solution = solve_gev(&c, &d).unwrap();
        let predicted = theoretical_eigenvalues(&noise).unwrap();
        for (a, b) in predicted.iter().zip(&solution.eigenvalues) {
            let rel = (a - b).abs() / b.abs();
            assert!(rel < 1e-8, "relative error {rel}");
            worst = worst.max(rel);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "took {elapsed:.2}s, budget 10s");
    pass(
        "A02 secular-vs-dense",
        format!("worst relative error {worst:.2e} over 100 configs, {elapsed:.2}s"),
    );
}

#[test]
fn a03_duplicated_eigenvalue_breaks_second_order_not_ml() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    // two components whose noise sequences are cyclic shifts of each other
    let m = 3;
    let base = [0.25, 0.55, 0.95];
    let noise: Vec<Vec<f64>> = (0..m).map(|i| vec![base[i], base[(i + 1) % m]]).collect();
    let lambdas = theoretical_eigenvalues(&noise).unwrap();
    let dup_gap = (lambdas[0] - lambdas[1]).abs();
    assert!(dup_gap < 1e-10, "duplicate gap {dup_gap}");

    let seeds = 11u64;
    let results: Vec<(f64, f64)> = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
            let matrices: Vec<Matrix> = (0..m).map(|_| random_invertible(&mut rng, 2)).collect();
            let params = ModelParams::new(Direction::Mixing, matrices, noise.clone());

            // exact covariances: the degenerate pair is recovered only up
            // to an arbitrary rotation
            let bc = model_covariance(&params).unwrap();
            let fit = fit_mcca(&bc).unwrap();
            assert!(fit.warnings.iter().any(|w| w.contains("near-degenerate")));
            let mcca = mean_amari(&fit.unmixing, &params.matrices).unwrap();

            // heavy-tailed sources restore identifiability for the ML fit
            let spec = ScenarioSpec {
                m,
                p: 2,
                n: 100_000,
                sources: SourceSpec::Uniform(SourceKind::Laplace),
                noise: NoiseScheme::PermutedPair,
                seed: 7000 + seed,
            };
            let g = generate(&spec).unwrap();
            let pred = theoretical_eigenvalues(&g.params.noise_vars).unwrap();
            assert!((pred[0] - pred[1]).abs() < 1e-10);
            let state = fit_shica_ml(&g.data, None, &MlOptions::default()).unwrap();
            let ml = mean_amari(&state.unmixing, &g.params.matrices).unwrap();
            (mcca, ml)
        })
        .collect();
    let mcca_err: Vec<f64> = results.iter().map(|r| r.0).collect();
    let ml_err: Vec<f64> = results.iter().map(|r| r.1).collect();
    let mcca_median = median(&mcca_err);
    let ml_median = median(&ml_err);
    assert!(mcca_median > 0.1, "second-order median amari {mcca_median}");
    assert!(ml_median < 5e-2, "ML median amari {ml_median}");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "took {elapsed:.2}s, budget 120s");
    pass(
        "A03 degenerate-pair",
        format!(
            "duplicate gap {dup_gap:.1e}, second-order {mcca_median:.3}, ML {ml_median:.3}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn a04_spectrum_split_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..100 {
        let m = rng.gen_range(3..=8);
        let p = rng.gen_range(1..=5);
        let noise: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..p).map(|_| rng.gen_range(0.01..2.0)).collect())
            .collect();
        let params = ModelParams::new(
            Direction::Mixing,
            vec![Matrix::identity(p, p); m],
            noise.clone(),
        );
        let (c, d) = assemble_full(&model_covariance(&params).unwrap());
        let solution = solve_gev(&c, &d).unwrap();
        let (lower, upper) = eigen_gap_bounds(&noise);
        assert!(
            solution.eigenvalues[p - 1] >= lower - 1e-10,
            "rank-{p} eigenvalue {} below {lower}",
            solution.eigenvalues[p - 1]
        );
        assert!(
            solution.eigenvalues[p] <= upper + 1e-10,
            "rank-{} eigenvalue {} above {upper}",
            p + 1,
            solution.eigenvalues[p]
        );
    }
    pass("A04 spectrum-split-bounds", "100 random configurations".into());
}

#[test]
fn a05_perturbation_sensitivity_and_repair() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let gaps = [1e-4, 1e-2, 1.0];
    let deltas = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 3e-2, 1e-1];
    let seeds = 50;
    let cells = perturbation_sweep(&gaps, &deltas, seeds, true).unwrap();

    let medians = |gap: f64, delta: f64| -> (f64, f64) {
        let raw: Vec<f64> = cells
            .iter()
            .filter(|c| c.gap == gap && c.delta == delta)
            .map(|c| c.raw_amari)
            .collect();
        let corrected: Vec<f64> = cells
            .iter()
            .filter(|c| c.gap == gap && c.delta == delta)
            .map(|c| c.corrected_amari)
            .collect();
        (median(&raw), median(&corrected))
    };

    // (a) correction never hurts (tiny absolute slack covers float jitter
    // when both errors sit at solver precision)
    for &gap in &gaps {
        for &delta in &deltas {
            let (raw, corrected) = medians(gap, delta);
            assert!(
                corrected <= raw + 1e-10,
                "gap {gap}, delta {delta}: corrected {corrected} > raw {raw}"
            );
        }
    }
    // (b) an order of magnitude at the critical cell
    let (raw_key, corrected_key) = medians(1e-4, 1e-3);
    assert!(
        corrected_key <= 0.1 * raw_key,
        "critical cell: corrected {corrected_key} vs raw {raw_key}"
    );
    // (c) raw sensitivity is ordered by eigen-gap wherever no curve has
    // saturated (all raw medians below 0.15)
    for &delta in &deltas {
        let r: Vec<f64> = gaps.iter().map(|&g| medians(g, delta).0).collect();
        if r.iter().all(|v| *v < 0.15) {
            assert!(
                r[0] >= r[1] - 1e-12 && r[1] >= r[2] - 1e-12,
                "delta {delta}: raw medians not ordered by gap: {r:?}"
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "took {elapsed:.2}s, budget 120s");
    pass(
        "A05 perturbation-repair",
        format!(
            "critical cell raw {raw_key:.3} -> corrected {corrected_key:.4}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn a06_separation_accuracy_across_scenarios() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let ns = [1_000usize, 10_000, 100_000];
    let seeds = 20;

    let med = |records: &[shica::bench::SeparationRecord], algo: Algo, n: usize| -> f64 {
        let vals: Vec<f64> = records
            .iter()
            .filter(|r| r.algo == algo && r.n == n && r.status == "ok")
            .map(|r| r.amari)
            .collect();
        assert_eq!(vals.len(), seeds as usize, "missing runs for {algo} at {n}");
        median(&vals)
    };

    // (a) Gaussian sources with diverse noise
    let gauss = separation_sweep("gauss", &ns, seeds, &Algo::ALL, true).unwrap();
    for algo in [Algo::ShicaJ, Algo::ShicaMl] {
        let at_best = med(&gauss, algo, 100_000);
        assert!(at_best < 1e-2, "{algo} at n=1e5: {at_best}");
        for &n in &ns {
            let own = med(&gauss, algo, n);
            let reference = med(&gauss, Algo::Mcca, n);
            assert!(own < reference, "{algo} at n={n}: {own} vs mcca {reference}");
        }
    }

    // (b) heavy-tailed sources, equal noise: only the ML fit separates
    let nongauss = separation_sweep("nongauss", &ns, seeds, &[Algo::ShicaJ, Algo::ShicaMl], true)
        .unwrap();
    let ml = med(&nongauss, Algo::ShicaMl, 100_000);
    let j = med(&nongauss, Algo::ShicaJ, 100_000);
    assert!(ml <= 0.2 * j, "nongauss at n=1e5: ML {ml} vs second-order {j}");

    // (c) hybrid: half Gaussian diverse, half heavy-tailed equal
    let hybrid = separation_sweep("hybrid", &ns, seeds, &Algo::ALL, true).unwrap();
    let ml_h = med(&hybrid, Algo::ShicaMl, 100_000);
    let j_h = med(&hybrid, Algo::ShicaJ, 100_000);
    let mcca_h = med(&hybrid, Algo::Mcca, 100_000);
    assert!(ml_h < 5e-2, "hybrid ML {ml_h}");
    // Known calibration defect in these two thresholds: a second-order
    // failure confined to the 2 degenerate components of 4 contributes at
    // most tan(45 deg)*4/(2*4*3) ~ 0.167 to this normalized distance, and
    // the sample kurtosis of heavy-tailed sources biases the plain
    // eigenproblem's arbitrary rotation toward alignment (measured medians
    // across equal-noise levels: mcca 0.02-0.04, corrected second-order
    // 0.09-0.11, ML 0.002). The 1e-1 level matches an unnormalized distance
    // convention; the separation structure itself (ML an order of magnitude
    // below both) is asserted above and below.
    assert!(
        j_h > 1e-1,
        "hybrid second-order median {j_h:.3} not above 1e-1 (ML {ml_h:.4}, ratio {:.0}x; \
         bounded at ~0.167 by the 2-of-4-component geometry)",
        j_h / ml_h
    );
    assert!(
        mcca_h > 1e-1,
        "hybrid plain-eigenproblem median {mcca_h:.3} not above 1e-1 (ML {ml_h:.4}, ratio {:.0}x; \
         sample-kurtosis alignment keeps the degenerate rotation small, see notes above)",
        mcca_h / ml_h
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1200.0, "took {elapsed:.1}s, budget 1200s");
    pass(
        "A06 separation-scenarios",
        format!(
            "n=1e5 medians: gauss ML {:.1e}, nongauss ML {ml:.1e} vs J {j:.1e}, hybrid ML {ml_h:.1e} (J {j_h:.2}, mcca {mcca_h:.2}), {elapsed:.0}s",
            med(&gauss, Algo::ShicaMl, 100_000)
        ),
    );
}

#[test]
fn a07_fit_time_profile() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let seeds = 7;
    // sequential run for clean timing
    let records =
        separation_sweep("power", &[1_000, 10_000], seeds, &[Algo::ShicaJ, Algo::ShicaMl], false)
            .unwrap();
    let times = |algo: Algo, n: usize| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.algo == algo && r.n == n && r.status == "ok")
            .map(|r| r.wall_time_seconds)
            .collect()
    };
    let j_small = median(&times(Algo::ShicaJ, 1_000));
    let j_big = median(&times(Algo::ShicaJ, 10_000));
    let ml_big = median(&times(Algo::ShicaMl, 10_000));
    assert!(
        j_big < 0.2 * ml_big,
        "second-order {j_big:.4}s not well under ML {ml_big:.4}s"
    );
    let ratio = j_big.max(j_small) / j_big.min(j_small);
    assert!(
        ratio < 2.0,
        "second-order fit time varies {ratio:.2}x between n=1e3 and n=1e4 ({j_small:.4}s vs {j_big:.4}s)"
    );
    let elapsed = start.elapsed().as_secs_f64();
    pass(
        "A07 fit-time-profile",
        format!("J {j_small:.4}s/{j_big:.4}s (ratio {ratio:.2}), ML {ml_big:.3}s at n=1e4, {elapsed:.0}s"),
    );
}

#[test]
fn a08_em_monotonicity() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut runs = 0;
    let mut seed = 0u64;
    while runs < 50 {
        let scenario = match runs % 3 {
            0 => "gauss",
            1 => "nongauss",
            _ => "hybrid",
        };
        let spec = scenario_by_name(scenario, 3_000, 8000 + seed).unwrap();
        seed += 1;
        let g = generate(&spec).unwrap();
        if runs % 2 == 0 {
            // Gaussian-model EM with the true unmixing held fixed
            let unmixing: Vec<Matrix> = g
                .params
                .matrices
                .iter()
                .map(|a| shica::linalg::try_inverse(a, "test").unwrap())
                .collect();
            let (_, trace) =
                em_gaussian_noise(&g.data, &unmixing, &Default::default()).unwrap();
            for w in trace.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-8 * w[0].abs().max(1.0),
                    "{scenario}: gaussian EM dropped {:?}",
                    w
                );
            }
        } else {
            let state = fit_shica_ml(
                &g.data,
                None,
                &MlOptions {
                    max_iter: 300,
                    ..MlOptions::default()
                },
            )
            .unwrap();
            for w in state.loglik_trace.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-8 * w[0].abs().max(1.0),
                    "{scenario}: ML trace dropped {:?}",
                    w
                );
            }
        }
        runs += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass("A08 em-monotonicity", format!("50 runs, {elapsed:.0}s"));
}

#[test]
fn a09_posterior_matches_quadrature() {
    let start = Instant::now();
    // trapezoid quadrature over the exact posterior density
    let quadrature = |ybar: f64, sbar: f64| -> (f64, f64) {
        let points = 10_000;
        let (lo, hi) = (-12.0f64, 12.0f64);
        let h = (hi - lo) / (points - 1) as f64;
        let gauss =
            |x: f64, v: f64| (-0.5 * x * x / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for k in 0..points {
            let s = lo + k as f64 * h;
            let w = if k == 0 || k == points - 1 { 0.5 } else { 1.0 };
            let density = gauss(ybar - s, sbar) * 0.5 * (gauss(s, 0.5) + gauss(s, 1.5));
            z += w * density;
            m1 += w * density * s;
            m2 += w * density * s * s;
        }
        let mean = m1 / z;
        (mean, m2 / z - mean * mean)
    };
    let mut worst = 0.0f64;
    for i in 0..21 {
        let ybar = -5.0 + 0.5 * i as f64;
        for j in 0..21 {
            // log-spaced pooled variances across [1e-3, 10]
            let sbar = 10f64.powf(-3.0 + 4.0 * j as f64 / 20.0);
            let (mean, var, _, _) = mixture_stats(ybar, sbar);
            let (qm, qv) = quadrature(ybar, sbar);
            let err = (mean - qm).abs().max((var - qv).abs());
            assert!(err < 1e-8, "ybar {ybar}, sbar {sbar}: error {err}");
            worst = worst.max(err);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "took {elapsed:.2}s, budget 5s");
    pass(
        "A09 posterior-quadrature",
        format!("21x21 grid, worst error {worst:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn a10_gradient_and_newton_step_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let p = 4;
    let n = 500;
    let y = Matrix::from_fn(p, n, |_, _| rng.gen_range(-2.0..2.0));
    let mean = Matrix::from_fn(p, n, |_, _| rng.gen_range(-1.0..1.0));
    let noise: Vec<f64> = (0..p).map(|_| rng.gen_range(0.3..1.5)).collect();

    // finite differences on the surrogate through the relative
    // parameterization
    let grad = w_gradient(&y, &mean, &noise);
    let h = 1e-6;
    for _ in 0..5 {
        let dir = Matrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        let eval = |step: f64| {
            let trans = Matrix::identity(p, p) + &dir * step;
            surrogate(trans.determinant().abs(), &(&trans * &y), &mean, &noise)
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let analytic: f64 = grad.iter().zip(dir.iter()).map(|(g, d)| g * d).sum();
        let rel = (fd - analytic).abs() / analytic.abs().max(1e-12);
        assert!(rel < 1e-4, "finite-difference mismatch {rel}");
    }

    // the pairwise solve inverts the dense approximate Hessian exactly
    let moments: Vec<f64> = (0..p)
        .map(|c| y.row(c).iter().map(|v| v * v).sum::<f64>() / n as f64)
        .collect();
    let step = quasi_newton_direction(&grad, &moments, &noise);
    let mut worst = 0.0f64;
    for a in 0..p {
        for b in 0..p {
            let applied = step[(b, a)]
                + if a == b {
                    moments[a] / noise[a] * step[(a, a)]
                } else {
                    moments[b] / noise[a] * step[(a, b)]
                };
            let residual = (applied - grad[(a, b)]).abs();
            assert!(residual < 1e-10, "entry ({a},{b}): residual {residual}");
            worst = worst.max(residual);
        }
    }
    pass(
        "A10 gradient-hessian-checks",
        format!("5 directions, Newton residual {worst:.2e}"),
    );
}

#[test]
fn a11_scale_alignment_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    // convergence within the sweep budget on random grids
    for _ in 0..100 {
        let m = rng.gen_range(3..=6);
        let p = rng.gen_range(1..=4);
        let mut grid = Vec::with_capacity(m * m);
        for _ in 0..m * m {
            let d: Vec<f64> = (0..p).map(|_| rng.gen_range(0.2..3.0)).collect();
            grid.push(Matrix::from_diagonal(&nalgebra::DVector::from_vec(d)));
        }
        let opts = ScalingOptions::default();
        let (_, sweeps) = scaling_fixed_point(&grid, &opts).unwrap();
        assert!(sweeps <= 100, "no convergence in {sweeps} sweeps");
    }

    // the converged objective matches a brute-force per-coordinate scan
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut grid = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let v = if i == j { 1.0 } else { rng.gen_range(0.3..3.0) };
                grid.push(Matrix::from_element(1, 1, v));
            }
        }
        // symmetrize the off-diagonal entries like a real covariance grid
        let grid: Vec<Matrix> = (0..9)
            .map(|k| {
                let (i, j) = (k / 3, k % 3);
                let v = 0.5 * (grid[i * 3 + j][(0, 0)] + grid[j * 3 + i][(0, 0)]);
                Matrix::from_element(1, 1, v)
            })
            .collect();
        let (phis, _) = scaling_fixed_point(&grid, &ScalingOptions::default()).unwrap();
        let fixed_point = scaling_objective(&grid, &phis).unwrap();

        // coordinate descent by dense scan plus progressively finer local
        // refinement around the incumbent
        let mut scan = vec![vec![1.0f64]; 3];
        for _ in 0..100 {
            for i in 0..3 {
                let objective_at = |scan: &Vec<Vec<f64>>, v: f64| -> f64 {
                    let mut candidate = scan.clone();
                    candidate[i][0] = v;
                    scaling_objective(&grid, &candidate).unwrap()
                };
                let mut best = (objective_at(&scan, scan[i][0]), scan[i][0]);
                for k in 0..4000 {
                    let v = 1e-3 + k as f64 * (5.0 - 1e-3) / 3999.0;
                    let obj = objective_at(&scan, v);
                    if obj < best.0 {
                        best = (obj, v);
                    }
                }
                for window in [2e-3, 2e-6, 2e-9] {
                    let center = best.1;
                    for k in 0..2000 {
                        let v = center * (1.0 - window / 2.0 + window * k as f64 / 1999.0);
                        let obj = objective_at(&scan, v);
                        if obj < best.0 {
                            best = (obj, v);
                        }
                    }
                }
                scan[i][0] = best.1;
            }
        }
        let brute = scaling_objective(&grid, &scan).unwrap();
        let diff = (fixed_point - brute).abs();
        assert!(diff < 1e-6, "fixed point {fixed_point} vs scan {brute}");
        worst = worst.max(diff);
    }
    pass(
        "A11 scale-alignment",
        format!("100 random grids converged; objective gap to scan <= {worst:.2e}"),
    );
}

#[test]
fn a12_tail_weight_sweep() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let seeds = 10u64;
    let mut report = String::new();
    for &exponent in &[0.8, 1.0, 1.2] {
        let mut j_err = Vec::new();
        let mut ml_err = Vec::new();
        let runs: Vec<(f64, f64)> = (0..seeds)
            .into_par_iter()
            .map(|seed| {
                let spec = ScenarioSpec {
                    m: 5,
                    p: 4,
                    n: 100_000,
                    sources: SourceSpec::Uniform(SourceKind::Power { exponent }),
                    noise: NoiseScheme::DiverseUniform,
                    seed: 12_000 + seed,
                };
                let g = generate(&spec).unwrap();
                let j = shica::fit_shica_j(&g.data, &Default::default()).unwrap();
                let j_amari = mean_amari(&j.unmixing, &g.params.matrices).unwrap();
                let ml = fit_shica_ml(&g.data, Some(&j), &MlOptions::default()).unwrap();
                let ml_amari = mean_amari(&ml.unmixing, &g.params.matrices).unwrap();
                (j_amari, ml_amari)
            })
            .collect();
        for (j, ml) in runs {
            j_err.push(j);
            ml_err.push(ml);
        }
        let j_med = median(&j_err);
        let ml_med = median(&ml_err);
        if (exponent - 1.0f64).abs() < 1e-12 {
            // Gaussian sources: noise diversity alone must suffice
            assert!(j_med < 1e-2, "exponent 1.0: second-order {j_med}");
            assert!(ml_med < 1e-2, "exponent 1.0: ML {ml_med}");
        }
        if exponent > 1.0 {
            assert!(
                ml_med <= j_med,
                "exponent {exponent}: ML {ml_med} worse than second-order {j_med}"
            );
        }
        report.push_str(&format!("alpha {exponent}: J {j_med:.1e} ML {ml_med:.1e}; "));
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass("A12 tail-weight-sweep", format!("{report}{elapsed:.0}s"));
}
