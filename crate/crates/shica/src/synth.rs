//! Seeded synthetic-data generation for the benchmark scenarios.
//!
//! All randomness flows through a counter-based ChaCha8 stream keyed by the
//! 64-bit scenario seed, so every dataset is reproducible bit for bit on a
//! given platform. Normal variates use the ziggurat sampler from
//! `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::data::{Direction, ModelParams, MultiViewData};
use crate::error::{Result, ShicaError};
use crate::linalg::{random_invertible, Matrix};

/// Marginal law of one shared component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Standard normal.
    Gaussian,
    /// Unit-variance Laplace (scale 1/sqrt(2)).
    Laplace,
    /// `x |x|^(exponent - 1)` with `x` standard normal, rescaled to unit
    /// variance. Exponent 1 is Gaussian, above 1 is heavier-tailed.
    Power { exponent: f64 },
}

impl SourceKind {
    fn is_gaussian(&self) -> bool {
        matches!(self, SourceKind::Gaussian)
    }
}

/// Either one law for every component or one per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceSpec {
    Uniform(SourceKind),
    PerComponent(Vec<SourceKind>),
}

impl SourceSpec {
    pub fn kinds(&self, p: usize) -> Result<Vec<SourceKind>> {
        match self {
            SourceSpec::Uniform(k) => Ok(vec![*k; p]),
            SourceSpec::PerComponent(v) => {
                if v.len() != p {
                    return Err(ShicaError::Config(format!(
                        "{} source kinds for {p} components",
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
        }
    }
}

/// How per-view, per-component noise variances are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScheme {
    /// Noise standard deviations drawn uniformly from (0, 1), independently
    /// per view and component.
    DiverseUniform,
    /// One shared standard deviation for every view and component.
    Equal { sigma: f64 },
    /// Components 0 and 1 receive variance sequences that are cyclic shifts
    /// of each other across views, which forces a duplicated pencil
    /// eigenvalue; remaining components are diverse.
    PermutedPair,
    /// Per-component variances chosen so the predicted pencil eigenvalues
    /// hit the given targets (each must lie in `(1, m]`; the upper end means
    /// a noiseless component). A random diverse profile across views is
    /// drawn first, then rescaled per component until the largest root of
    /// the eigenvalue equation matches the target.
    TargetEigvals { eigvals: Vec<f64> },
    /// Gaussian components get diverse uniform noise, non-Gaussian components
    /// get one shared standard deviation.
    ByKind { equal_sigma: f64 },
}

/// Full description of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub sources: SourceSpec,
    pub noise: NoiseScheme,
    pub seed: u64,
}

/// A generated dataset together with its ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub data: MultiViewData,
    pub params: ModelParams,
    /// The shared components, `p x n`.
    pub sources: Matrix,
}

fn sample_laplace<R: Rng>(rng: &mut R) -> f64 {
    // inverse CDF; scale 1/sqrt(2) gives unit variance
    let u: f64 = rng.gen_range(-0.5..0.5);
    let b = std::f64::consts::FRAC_1_SQRT_2;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Standard deviation of `x |x|^(a-1)` for standard normal `x`:
/// `E|x|^(2a) = 2^a Gamma(a + 1/2) / sqrt(pi)`.
fn power_std(exponent: f64) -> f64 {
    (2f64.powf(exponent) * gamma(exponent + 0.5) / std::f64::consts::PI.sqrt()).sqrt()
}

/// Rescales a positive variance profile across views so the predicted
/// leading eigenvalue of that component equals `target`.
///
/// The leading root of the eigenvalue equation decreases strictly from `m`
/// (zero noise) toward 1 as the profile is scaled up, so a bisection on the
/// scale always lands on the target.
fn scale_profile_to_eigenvalue(profile: &[f64], target: f64) -> Result<Vec<f64>> {
    let m = profile.len();
    let root = |beta: f64| -> Result<f64> {
        let grid: Vec<Vec<f64>> = profile.iter().map(|u| vec![beta * u]).collect();
        Ok(crate::eig::theoretical_eigenvalues(&grid)?[0])
    };
    if (m as f64 - target).abs() < 1e-12 {
        return Ok(vec![0.0; m]);
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while root(hi)? > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(ShicaError::Config(format!(
                "cannot reach eigenvalue {target} by scaling the noise profile"
            )));
        }
    }
    while hi - lo > 1e-14 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if root(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    Ok(profile.iter().map(|u| beta * u).collect())
}

fn sample_sources<R: Rng>(rng: &mut R, kinds: &[SourceKind], n: usize) -> Matrix {
    let p = kinds.len();
    let mut s = Matrix::zeros(p, n);
    for (j, kind) in kinds.iter().enumerate() {
        match kind {
            SourceKind::Gaussian => {
                for t in 0..n {
                    s[(j, t)] = rng.sample(StandardNormal);
                }
            }
            SourceKind::Laplace => {
                for t in 0..n {
                    s[(j, t)] = sample_laplace(rng);
                }
            }
            SourceKind::Power { exponent } => {
                let scale = 1.0 / power_std(*exponent);
                for t in 0..n {
                    let x: f64 = rng.sample(StandardNormal);
                    s[(j, t)] = scale * x * x.abs().powf(exponent - 1.0);
                }
            }
        }
    }
    s
}

fn noise_variances<R: Rng>(
    rng: &mut R,
    scheme: &NoiseScheme,
    kinds: &[SourceKind],
    m: usize,
) -> Result<Vec<Vec<f64>>> {
    let p = kinds.len();
    let diverse = |rng: &mut R| -> f64 {
        let std: f64 = rng.gen_range(0.0..1.0);
        (std * std).max(1e-12)
    };
    match scheme {
        NoiseScheme::DiverseUniform => Ok((0..m)
            .map(|_| (0..p).map(|_| diverse(rng)).collect())
            .collect()),
        NoiseScheme::Equal { sigma } => {
            if *sigma <= 0.0 {
                return Err(ShicaError::Config("equal noise sigma must be > 0".into()));
            }
            Ok(vec![vec![sigma * sigma; p]; m])
        }
        NoiseScheme::PermutedPair => {
            if p < 2 {
                return Err(ShicaError::Config(
                    "permuted_pair noise needs at least 2 components".into(),
                ));
            }
            let base: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let mut vars = vec![vec![0.0; p]; m];
            for i in 0..m {
                vars[i][0] = base[i];
                vars[i][1] = base[(i + 1) % m];
                for j in 2..p {
                    vars[i][j] = diverse(rng);
                }
            }
            Ok(vars)
        }
        NoiseScheme::TargetEigvals { eigvals } => {
            if eigvals.len() != p {
                return Err(ShicaError::Config(format!(
                    "{} target eigenvalues for {p} components",
                    eigvals.len()
                )));
            }
            let mut vars = vec![vec![0.0f64; p]; m];
            for (j, &lambda) in eigvals.iter().enumerate() {
                if lambda <= 1.0 || lambda > m as f64 {
                    return Err(ShicaError::Config(format!(
                        "target eigenvalue {lambda} outside (1, {m}]"
                    )));
                }
                let profile: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
                let scaled = scale_profile_to_eigenvalue(&profile, lambda)?;
                for i in 0..m {
                    vars[i][j] = scaled[i];
                }
            }
            Ok(vars)
        }
        NoiseScheme::ByKind { equal_sigma } => {
            if *equal_sigma <= 0.0 {
                return Err(ShicaError::Config("by_kind sigma must be > 0".into()));
            }
            let shared = equal_sigma * equal_sigma;
            Ok((0..m)
                .map(|_| {
                    kinds
                        .iter()
                        .map(|k| if k.is_gaussian() { diverse(rng) } else { shared })
                        .collect()
                })
                .collect())
        }
    }
}

/// Generates a dataset from the scenario description.
///
/// Draw order is fixed (mixing matrices, then noise variances, then sources,
/// then per-view noise), so a `(spec, seed)` pair always produces the same
/// dataset.
pub fn generate(spec: &ScenarioSpec) -> Result<GeneratedData> {
    if spec.m < 1 || spec.p < 1 || spec.n < 1 {
        return Err(ShicaError::Config(format!(
            "m, p, n must be positive, got ({}, {}, {})",
            spec.m, spec.p, spec.n
        )));
    }
    let kinds = spec.sources.kinds(spec.p)?;
    if kinds
        .iter()
        .any(|k| matches!(k, SourceKind::Power { exponent } if *exponent <= 0.0))
    {
        return Err(ShicaError::Config("power exponent must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let matrices: Vec<Matrix> = (0..spec.m)
        .map(|_| random_invertible(&mut rng, spec.p))
        .collect();
    let noise_vars = noise_variances(&mut rng, &spec.noise, &kinds, spec.m)?;
    let sources = sample_sources(&mut rng, &kinds, spec.n);
    let mut views = Vec::with_capacity(spec.m);
    for i in 0..spec.m {
        let mut latent = sources.clone();
        for j in 0..spec.p {
            let std = noise_vars[i][j].sqrt();
            for t in 0..spec.n {
                let e: f64 = rng.sample(StandardNormal);
                latent[(j, t)] += std * e;
            }
        }
        views.push(&matrices[i] * latent);
    }
    Ok(GeneratedData {
        data: MultiViewData::new(views)?,
        params: ModelParams::new(Direction::Mixing, matrices, noise_vars),
        sources,
    })
}

/// Samples observations from explicit model parameters with standard normal
/// shared components. Used by consistency tests that need data matching a
/// fixed parameter set.
pub fn sample_model_data(params: &ModelParams, n: usize, seed: u64) -> Result<MultiViewData> {
    if params.direction != Direction::Mixing {
        return Err(ShicaError::Data(
            "sampling requires parameters in mixing direction".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = params.p();
    let sources = sample_sources(&mut rng, &vec![SourceKind::Gaussian; p], n);
    let mut views = Vec::with_capacity(params.m());
    for i in 0..params.m() {
        let mut latent = sources.clone();
        for j in 0..p {
            let std = params.noise_vars[i][j].sqrt();
            for t in 0..n {
                let e: f64 = rng.sample(StandardNormal);
                latent[(j, t)] += std * e;
            }
        }
        views.push(&params.matrices[i] * latent);
    }
    MultiViewData::new(views)
}
