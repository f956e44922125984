//! On exact model covariances with diverse noise, the eigenproblem estimator
//! recovers every mixing matrix up to scale and permutation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shica::linalg::random_invertible;
use shica::{
    amari_distance, fit_mcca, model_covariance, theoretical_eigenvalues, Direction, ModelParams,
};

fn main() -> shica::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (m, p) = (5, 4);
    let noise: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..p).map(|_| rng.gen_range(0.05..1.0)).collect())
        .collect();
    let matrices = (0..m).map(|_| random_invertible(&mut rng, p)).collect();
    let params = ModelParams::new(Direction::Mixing, matrices, noise.clone());

    let bc = model_covariance(&params)?;
    let fit = fit_mcca(&bc)?;

    println!("predicted eigenvalues: {:?}", theoretical_eigenvalues(&noise)?);
    println!("solver eigenvalues:    {:?}", fit.top_eigenvalues);
    println!("gap to the rest: {:.4}", fit.gap);
    for i in 0..m {
        let d = amari_distance(&fit.unmixing[i], &params.matrices[i])?;
        println!("view {i}: amari distance {d:.2e}");
    }
    Ok(())
}
