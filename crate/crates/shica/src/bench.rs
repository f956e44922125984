//! Seeded benchmark sweeps: eigen-gap sensitivity of the second-order
//! estimator, and separation accuracy and timing across estimators and
//! sample counts. Results are written as versioned CSV for external
//! plotting.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::covariance::{model_covariance, sample_covariance};
use crate::data::ModelParams;
use crate::error::{Result, ShicaError};
use crate::jointdiag::{joint_diagonalize, JdProblem};
use crate::linalg::{symmetrize, Matrix};
use crate::mcca::{fit_mcca, perturb_covariance};
use crate::metrics::mean_amari;
use crate::shica_j::{fit_shica_j, JOptions};
use crate::shica_ml::{fit_shica_ml, MlOptions};
use crate::synth::{generate, NoiseScheme, ScenarioSpec, SourceKind, SourceSpec};

/// One sensitivity measurement: unmixing error of the raw eigenproblem
/// estimate and of its joint-diagonalization correction, on an exactly known
/// covariance perturbed at scale `delta`.
#[derive(Debug, Clone)]
pub struct PerturbationCell {
    pub gap: f64,
    pub delta: f64,
    pub seed: u64,
    pub raw_amari: f64,
    pub corrected_amari: f64,
}

/// One separation measurement.
#[derive(Debug, Clone)]
pub struct SeparationRecord {
    pub scenario: String,
    pub algo: Algo,
    pub seed: u64,
    pub n: usize,
    pub amari: f64,
    pub wall_time_seconds: f64,
    pub threads: usize,
    pub status: String,
}

/// The three estimators the sweeps compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Mcca,
    ShicaJ,
    ShicaMl,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::Mcca, Algo::ShicaJ, Algo::ShicaMl];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mcca" => Ok(Algo::Mcca),
            "shica-j" => Ok(Algo::ShicaJ),
            "shica-ml" => Ok(Algo::ShicaMl),
            other => Err(ShicaError::Config(format!(
                "unknown algorithm '{other}' (expected mcca, shica-j or shica-ml)"
            ))),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Algo::Mcca => "mcca",
            Algo::ShicaJ => "shica-j",
            Algo::ShicaMl => "shica-ml",
        };
        f.write_str(name)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Model with two components whose predicted top eigenvalues are `2 + gap`
/// and `2`, over three views with random mixing and diverse noise profiles
/// rescaled to peg the eigenvalues exactly.
fn gap_controlled_params(gap: f64, seed: u64) -> Result<ModelParams> {
    let spec = ScenarioSpec {
        m: 3,
        p: 2,
        n: 1,
        sources: SourceSpec::Uniform(SourceKind::Gaussian),
        noise: NoiseScheme::TargetEigvals {
            eigvals: vec![2.0 + gap, 2.0],
        },
        seed,
    };
    Ok(generate(&spec)?.params)
}

/// Runs one perturbation cell: exact model covariances plus a seeded
/// positive perturbation of spectral norm `delta`, estimated raw and with
/// the rotation correction.
pub fn perturbation_run(gap: f64, delta: f64, seed: u64) -> Result<(f64, f64)> {
    let params = gap_controlled_params(gap, splitmix64(seed))?;
    let bc = model_covariance(&params)?;
    let perturbed = perturb_covariance(&bc, delta, splitmix64(seed ^ 0xD1F3_5A7B));
    let fit = fit_mcca(&perturbed)?;
    let raw = mean_amari(&fit.unmixing, &params.matrices)?;

    let mats: Vec<Matrix> = (0..3)
        .map(|i| {
            let mut k = &fit.unmixing[i] * perturbed.block(i, i) * fit.unmixing[i].transpose();
            symmetrize(&mut k);
            k
        })
        .collect();
    let jd = joint_diagonalize(&JdProblem::new(mats)?, 1000, 1e-10)?;
    let corrected_unmixing: Vec<Matrix> = fit.unmixing.iter().map(|w| &jd.b * w).collect();
    let corrected = mean_amari(&corrected_unmixing, &params.matrices)?;
    Ok((raw, corrected))
}

/// Full sensitivity sweep over eigen-gaps, perturbation scales and seeds.
pub fn perturbation_sweep(
    gaps: &[f64],
    deltas: &[f64],
    seeds: u64,
    parallel: bool,
) -> Result<Vec<PerturbationCell>> {
    let cells: Vec<(f64, f64, u64)> = gaps
        .iter()
        .flat_map(|&g| {
            deltas
                .iter()
                .flat_map(move |&d| (0..seeds).map(move |s| (g, d, s)))
        })
        .collect();
    let run = |&(gap, delta, seed): &(f64, f64, u64)| -> Result<PerturbationCell> {
        let (raw_amari, corrected_amari) = perturbation_run(gap, delta, seed)?;
        Ok(PerturbationCell {
            gap,
            delta,
            seed,
            raw_amari,
            corrected_amari,
        })
    };
    if parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    }
}

/// Named separation scenarios; all use five views of four components.
pub fn scenario_by_name(name: &str, n: usize, seed: u64) -> Result<ScenarioSpec> {
    let (sources, noise) = match name {
        "gauss" => (
            SourceSpec::Uniform(SourceKind::Gaussian),
            NoiseScheme::DiverseUniform,
        ),
        "nongauss" => (
            SourceSpec::Uniform(SourceKind::Laplace),
            NoiseScheme::Equal { sigma: 1.0 },
        ),
        "hybrid" => (
            SourceSpec::PerComponent(vec![
                SourceKind::Gaussian,
                SourceKind::Gaussian,
                SourceKind::Laplace,
                SourceKind::Laplace,
            ]),
            NoiseScheme::ByKind { equal_sigma: 1.0 },
        ),
        "power" => (
            SourceSpec::Uniform(SourceKind::Power { exponent: 1.2 }),
            NoiseScheme::DiverseUniform,
        ),
        other => {
            return Err(ShicaError::Config(format!(
                "unknown scenario '{other}' (expected gauss, nongauss, hybrid or power)"
            )))
        }
    };
    Ok(ScenarioSpec {
        m: 5,
        p: 4,
        n,
        sources,
        noise,
        seed,
    })
}

/// Fits one estimator on one generated dataset, timing the fit only.
pub fn separation_run(spec: &ScenarioSpec, scenario: &str, algo: Algo) -> SeparationRecord {
    let threads = rayon::current_num_threads();
    let base = SeparationRecord {
        scenario: scenario.to_string(),
        algo,
        seed: spec.seed,
        n: spec.n,
        amari: f64::NAN,
        wall_time_seconds: 0.0,
        threads,
        status: "ok".to_string(),
    };
    let generated = match generate(spec) {
        Ok(g) => g,
        Err(e) => {
            return SeparationRecord {
                status: format!("generate: {e}"),
                ..base
            }
        }
    };
    let start = Instant::now();
    let unmixing = match algo {
        Algo::Mcca => sample_covariance(&generated.data, false)
            .and_then(|bc| fit_mcca(&bc))
            .map(|fit| fit.unmixing),
        Algo::ShicaJ => fit_shica_j(&generated.data, &JOptions::default()).map(|fit| fit.unmixing),
        Algo::ShicaMl => {
            fit_shica_ml(&generated.data, None, &MlOptions::default()).map(|s| s.unmixing)
        }
    };
    let wall_time_seconds = start.elapsed().as_secs_f64();
    match unmixing.and_then(|w| mean_amari(&w, &generated.params.matrices)) {
        Ok(amari) => SeparationRecord {
            amari,
            wall_time_seconds,
            ..base
        },
        Err(e) => SeparationRecord {
            wall_time_seconds,
            status: format!("fit: {e}"),
            ..base
        },
    }
}

/// Sweep over sample counts, seeds and estimators for one named scenario.
/// Per-run failures become records with a non-`ok` status instead of
/// aborting the sweep.
pub fn separation_sweep(
    scenario: &str,
    ns: &[usize],
    seeds: u64,
    algos: &[Algo],
    parallel: bool,
) -> Result<Vec<SeparationRecord>> {
    // validate the scenario name up front
    scenario_by_name(scenario, 2, 0)?;
    let cells: Vec<(usize, u64, Algo)> = ns
        .iter()
        .flat_map(|&n| {
            (0..seeds).flat_map(move |s| algos.iter().map(move |&a| (n, s, a)))
        })
        .collect();
    let run = |&(n, seed, algo): &(usize, u64, Algo)| -> SeparationRecord {
        let spec = scenario_by_name(scenario, n, seed).expect("validated scenario");
        separation_run(&spec, scenario, algo)
    };
    let records = if parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    };
    Ok(records)
}

/// Median of a non-empty slice; NaN-free inputs assumed.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

pub fn write_perturbation_csv(cells: &[PerturbationCell], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("# shica-perturbation-csv v1\ngap,delta,seed,method,amari\n");
    for c in cells {
        out.push_str(&format!("{},{},{},raw,{}\n", c.gap, c.delta, c.seed, c.raw_amari));
        out.push_str(&format!(
            "{},{},{},corrected,{}\n",
            c.gap, c.delta, c.seed, c.corrected_amari
        ));
    }
    fs::write(path, out).map_err(|e| ShicaError::io(path, e))
}

/// Per-(gap, delta, method) medians across seeds.
pub fn write_perturbation_summary_csv(
    cells: &[PerturbationCell],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for c in cells {
        if !keys.iter().any(|&(g, d)| g == c.gap && d == c.delta) {
            keys.push((c.gap, c.delta));
        }
    }
    let mut out = String::from("# shica-perturbation-summary-csv v1\ngap,delta,method,median_amari\n");
    for (gap, delta) in keys {
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
        out.push_str(&format!("{},{},raw,{}\n", gap, delta, median(&raw)));
        out.push_str(&format!("{},{},corrected,{}\n", gap, delta, median(&corrected)));
    }
    fs::write(path, out).map_err(|e| ShicaError::io(path, e))
}

pub fn write_separation_csv(records: &[SeparationRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out =
        String::from("# shica-separation-csv v1\nscenario,algo,seed,n,amari,wall_time_seconds,threads,status\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.scenario, r.algo, r.seed, r.n, r.amari, r.wall_time_seconds, r.threads, r.status
        ));
    }
    fs::write(path, out).map_err(|e| ShicaError::io(path, e))
}
