//! Command-line front end: generate synthetic datasets, fit estimators,
//! evaluate results and run the benchmark sweeps. Everything dispatches to
//! the library; see the crate examples for programmatic use.
//!
//! Exit codes: 0 success, 1 usage or configuration problem, 2 numerical
//! failure, 3 I/O failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use shica::bench::{
    perturbation_sweep, separation_sweep, write_perturbation_csv, write_perturbation_summary_csv,
    write_separation_csv, Algo,
};
use shica::error::{Result, ShicaError};
use shica::shica_j::{EmOptions, JDiagnostics, JOptions, ScalingOptions, ScalingUpdate};
use shica::shica_ml::MlOptions;
use shica::{
    em_gaussian_noise, fit_mcca, fit_shica_j, fit_shica_ml, io, match_components, mean_amari,
    r2_score, sample_covariance, Direction, ModelParams, ShicaJFit,
};

#[derive(Parser)]
#[command(name = "shica", version, about = "Shared-component analysis of multi-view data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a scenario file
    Generate(GenerateArgs),
    /// Fit an estimator on a dataset manifest
    Fit(FitArgs),
    /// Evaluate fitted parameters or reconstructed signals
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run a benchmark sweep
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario description (JSON)
    #[arg(long)]
    spec: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Override the seed stored in the scenario file
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Mcca,
    #[value(name = "shica-j")]
    ShicaJ,
    #[value(name = "shica-ml")]
    ShicaMl,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ScalingUpdateArg {
    Weighted,
    Unweighted,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset manifest (JSON listing view files)
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    algo: AlgoArg,
    /// Output directory for params.json and diagnostics.json
    #[arg(long)]
    out: PathBuf,
    /// Remove per-row means before forming covariances (on by default;
    /// disable for synthetic zero-mean data)
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    center: bool,
    /// Iteration cap for the iterative stages
    #[arg(long)]
    max_iter: Option<usize>,
    /// Convergence tolerance for the iterative stages
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Warm-start parameter file for the maximum-likelihood fit
    #[arg(long)]
    init: Option<PathBuf>,
    /// Random unmixing initialization for the maximum-likelihood fit
    #[arg(long, conflicts_with = "init")]
    random_init: Option<u64>,
    /// Scale-alignment update rule
    #[arg(long, value_enum, default_value = "weighted")]
    scaling_update: ScalingUpdateArg,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Scale/permutation-invariant distance between fitted unmixing and true mixing
    Amari {
        /// Fitted parameters (params.json)
        #[arg(long)]
        params: PathBuf,
        /// Ground-truth parameters (truth.json)
        #[arg(long)]
        truth: PathBuf,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coefficient of determination between two view files
    R2 {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal component matching between two view files
    Match {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Sensitivity of the eigenproblem estimator to covariance perturbations
    Perturbation {
        /// Comma-separated eigen-gaps
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-4, 1e-2, 1.0])]
        gaps: Vec<f64>,
        /// Comma-separated perturbation scales
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1])]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        /// Output directory for the CSV files
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Run cells one at a time (for clean timing)
        #[arg(long)]
        sequential: bool,
    },
    /// Separation accuracy and fitting time across estimators
    Separation {
        /// gauss, nongauss, hybrid or power
        #[arg(long)]
        scenario: String,
        /// Comma-separated sample counts
        #[arg(long = "n-grid", value_delimiter = ',', default_values_t = vec![1000, 10000, 100000])]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Comma-separated algorithms
        #[arg(long, value_delimiter = ',', default_value = "mcca,shica-j,shica-ml")]
        algos: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        sequential: bool,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(err: &ShicaError) -> i32 {
    match err {
        ShicaError::Numerical { .. } | ShicaError::DegenerateScale { .. } => 2,
        ShicaError::Io { .. } => 3,
        _ => 1,
    }
}

fn configure_threads(threads: Option<usize>) {
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(cmd) => cmd_eval(cmd),
        Command::Bench(cmd) => cmd_bench(cmd),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec).map_err(|e| ShicaError::io(&args.spec, e))?;
    let mut spec: shica::ScenarioSpec = serde_json::from_str(&text).map_err(|e| {
        ShicaError::Config(format!("{}: {e}", args.spec.display()))
    })?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let generated = shica::generate(&spec)?;
    std::fs::create_dir_all(&args.out).map_err(|e| ShicaError::io(&args.out, e))?;
    let manifest = io::save_dataset(&generated.data, &args.out)?;
    io::write_params(&generated.params, args.out.join("truth.json"))?;
    io::write_view_file(&generated.sources, args.out.join("sources.shv"))?;
    println!(
        "wrote {} views ({} x {}) to {}",
        generated.data.m(),
        generated.data.p(),
        generated.data.n(),
        args.out.display()
    );
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn load_init(path: &Path) -> Result<ShicaJFit> {
    let params = io::read_params(path)?;
    let unmixing = match params.direction {
        Direction::Unmixing => params.matrices,
        Direction::Mixing => params
            .matrices
            .iter()
            .map(|a| shica::linalg::try_inverse(a, "init"))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(ShicaJFit {
        unmixing,
        noise_vars: params.noise_vars,
        diagnostics: JDiagnostics {
            mcca_gap: f64::NAN,
            mcca_warnings: vec![],
            jd_iterations: 0,
            jd_converged: true,
            scaling_sweeps: 0,
            em_loglik_trace: vec![],
        },
    })
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    configure_threads(args.threads);
    let data = io::load_manifest(&args.manifest)?;
    if data.m() < 3 {
        return Err(ShicaError::Data(format!(
            "estimation needs at least 3 views, manifest has {}",
            data.m()
        )));
    }
    let scaling_update = match args.scaling_update {
        ScalingUpdateArg::Weighted => ScalingUpdate::GammaWeighted,
        ScalingUpdateArg::Unweighted => ScalingUpdate::Unweighted,
    };
    let j_options = JOptions {
        centered: args.center,
        scaling: ScalingOptions {
            update: scaling_update,
            ..ScalingOptions::default()
        },
        em: EmOptions {
            centered: args.center,
            max_iter: args.max_iter.unwrap_or(1000),
            tol: args.tol.unwrap_or(1e-10),
        },
        jd_max_iter: args.max_iter.unwrap_or(1000),
        jd_tol: args.tol.unwrap_or(1e-10),
    };

    std::fs::create_dir_all(&args.out).map_err(|e| ShicaError::io(&args.out, e))?;
    let threads = rayon::current_num_threads();
    let (params, diagnostics) = match args.algo {
        AlgoArg::Mcca => {
            let start = Instant::now();
            let bc = sample_covariance(&data, args.center)?;
            let fit = fit_mcca(&bc)?;
            // the eigenproblem itself does not estimate noise; read it off
            // with the unmixing held fixed
            let (noise, trace) = em_gaussian_noise(&data, &fit.unmixing, &j_options.em)?;
            let wall = start.elapsed().as_secs_f64();
            (
                ModelParams::new(Direction::Unmixing, fit.unmixing, noise),
                json!({
                    "algo": "mcca",
                    "gap": fit.gap,
                    "top_eigenvalues": fit.top_eigenvalues,
                    "warnings": fit.warnings,
                    "em_loglik_trace": trace,
                    "wall_time_seconds": wall,
                    "threads": threads,
                }),
            )
        }
        AlgoArg::ShicaJ => {
            let start = Instant::now();
            let fit = fit_shica_j(&data, &j_options)?;
            let wall = start.elapsed().as_secs_f64();
            let d = &fit.diagnostics;
            (
                ModelParams::new(Direction::Unmixing, fit.unmixing.clone(), fit.noise_vars.clone()),
                json!({
                    "algo": "shica-j",
                    "gap": d.mcca_gap,
                    "warnings": d.mcca_warnings,
                    "jd_iterations": d.jd_iterations,
                    "jd_converged": d.jd_converged,
                    "scaling_sweeps": d.scaling_sweeps,
                    "em_loglik_trace": d.em_loglik_trace,
                    "wall_time_seconds": wall,
                    "threads": threads,
                }),
            )
        }
        AlgoArg::ShicaMl => {
            let init = args.init.as_deref().map(load_init).transpose()?;
            let opts = MlOptions {
                max_iter: args.max_iter.unwrap_or(10_000),
                tol: args.tol.unwrap_or(1e-9),
                random_init: args.random_init,
                j_options,
            };
            let start = Instant::now();
            let state = fit_shica_ml(&data, init.as_ref(), &opts)?;
            let wall = start.elapsed().as_secs_f64();
            (
                ModelParams::new(Direction::Unmixing, state.unmixing.clone(), state.noise_vars.clone()),
                json!({
                    "algo": "shica-ml",
                    "loglik_trace": state.loglik_trace,
                    "iterations": state.iterations,
                    "converged": state.converged,
                    "stalled_updates": state.stalled_updates,
                    "wall_time_seconds": wall,
                    "threads": threads,
                }),
            )
        }
    };
    let params_path = args.out.join("params.json");
    io::write_params(&params, &params_path)?;
    let diag_path = args.out.join("diagnostics.json");
    std::fs::write(&diag_path, serde_json::to_string_pretty(&diagnostics).unwrap())
        .map_err(|e| ShicaError::io(&diag_path, e))?;
    println!("wrote {}", params_path.display());
    println!("wrote {}", diag_path.display());
    Ok(())
}

fn emit(report: serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&report).unwrap();
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| ShicaError::io(path, e))?;
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_eval(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Amari { params, truth, out } => {
            let est = io::read_params(&params)?;
            let reference = io::read_params(&truth)?;
            let unmixing = match est.direction {
                Direction::Unmixing => est.matrices,
                Direction::Mixing => est
                    .matrices
                    .iter()
                    .map(|a| shica::linalg::try_inverse(a, "eval"))
                    .collect::<Result<Vec<_>>>()?,
            };
            let mixing = match reference.direction {
                Direction::Mixing => reference.matrices,
                Direction::Unmixing => reference
                    .matrices
                    .iter()
                    .map(|w| shica::linalg::try_inverse(w, "eval"))
                    .collect::<Result<Vec<_>>>()?,
            };
            let per_view = unmixing
                .iter()
                .zip(&mixing)
                .map(|(w, a)| shica::amari_distance(w, a))
                .collect::<Result<Vec<_>>>()?;
            let mean = mean_amari(&unmixing, &mixing)?;
            emit(json!({"per_view": per_view, "mean": mean}), out.as_deref())
        }
        EvalCommand::R2 { predicted, truth, out } => {
            let pred = io::read_view_file(&predicted)?;
            let reference = io::read_view_file(&truth)?;
            let score = r2_score(&pred, &reference)?;
            emit(
                json!({"per_row": score.per_row, "mean": score.mean}),
                out.as_deref(),
            )
        }
        EvalCommand::Match { est, reference, out } => {
            let estimated = io::read_view_file(&est)?;
            let re = io::read_view_file(&reference)?;
            let m = match_components(&estimated, &re)?;
            emit(
                json!({
                    "permutation": m.permutation,
                    "signs": m.signs,
                    "distances": m.distances,
                    "total": m.total,
                }),
                out.as_deref(),
            )
        }
    }
}

fn cmd_bench(cmd: BenchCommand) -> Result<()> {
    match cmd {
        BenchCommand::Perturbation {
            gaps,
            deltas,
            seeds,
            out,
            threads,
            sequential,
        } => {
            configure_threads(threads);
            let cells = perturbation_sweep(&gaps, &deltas, seeds, !sequential)?;
            std::fs::create_dir_all(&out).map_err(|e| ShicaError::io(&out, e))?;
            let raw = out.join("perturbation.csv");
            write_perturbation_csv(&cells, &raw)?;
            let summary = out.join("perturbation_summary.csv");
            write_perturbation_summary_csv(&cells, &summary)?;
            println!("wrote {}", raw.display());
            println!("wrote {}", summary.display());
            Ok(())
        }
        BenchCommand::Separation {
            scenario,
            n_grid,
            seeds,
            algos,
            out,
            threads,
            sequential,
        } => {
            configure_threads(threads);
            let algos = algos
                .iter()
                .map(|a| Algo::parse(a))
                .collect::<Result<Vec<_>>>()?;
            let records = separation_sweep(&scenario, &n_grid, seeds, &algos, !sequential)?;
            std::fs::create_dir_all(&out).map_err(|e| ShicaError::io(&out, e))?;
            let path = out.join(format!("separation_{scenario}.csv"));
            write_separation_csv(&records, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
