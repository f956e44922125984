//! Shared independent component analysis for multi-view data.
//!
//! Each of `m` views is modeled as an invertible linear mix of `p` shared
//! components plus view-specific Gaussian noise with diagonal covariance:
//! `x_i = A_i (s + n_i)`. The crate provides three estimators of the per-view
//! unmixing matrices and of the noise variances, plus posterior inference of
//! the shared components:
//!
//! - [`mcca::fit_mcca`]: second-order estimation through a generalized
//!   eigenproblem on the grid of cross-covariances;
//! - [`shica_j::fit_shica_j`]: the eigenproblem estimate corrected by joint
//!   diagonalization, rescaled by a fixed point, and completed with a
//!   closed-form EM for noise variances;
//! - [`shica_ml::fit_shica_ml`]: maximum likelihood under a Gaussian
//!   scale-mixture source prior, fitted by generalized EM with quasi-Newton
//!   unmixing updates.
//!
//! [`synth`] generates the seeded benchmark scenarios, [`metrics`] scores
//! results, and [`bench`] runs the sweeps behind the `shica` command-line
//! tool. See the `examples/` directory for one runnable walk-through per
//! capability.

pub mod bench;
pub mod covariance;
pub mod data;
pub mod eig;
pub mod error;
pub mod io;
pub mod jointdiag;
pub mod linalg;
pub mod mcca;
pub mod metrics;
pub mod shica_j;
pub mod shica_ml;
pub mod synth;

pub use covariance::{assemble_full, model_covariance, sample_covariance, BlockCovariance};
pub use data::{apply_unmixing, Direction, ModelParams, MultiViewData};
pub use eig::{eigen_gap_bounds, solve_gev, theoretical_eigenvalues, GevSolution};
pub use error::{Result, ShicaError};
pub use jointdiag::{joint_diagonalize, pham_criterion, JdProblem, JdResult};
pub use linalg::Matrix;
pub use mcca::{fit_mcca, perturb_covariance, MccaFit};
pub use metrics::{amari_distance, match_components, mean_amari, r2_score, ComponentMatch, R2Score};
pub use shica_j::{
    em_gaussian_noise, fit_shica_j, mmse_gaussian, scaling_fixed_point, JOptions, ScalingUpdate,
    SharedPosterior, ShicaJFit,
};
pub use shica_ml::{
    estep_ml, fit_shica_ml, noise_mstep_ml, w_gradient, w_update, MixturePosterior, MlOptions,
    MlState,
};
pub use synth::{generate, sample_model_data, GeneratedData, NoiseScheme, ScenarioSpec, SourceKind, SourceSpec};
