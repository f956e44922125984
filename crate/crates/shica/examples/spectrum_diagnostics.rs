//! The pencil spectrum splits at 1: the leading `p` eigenvalues carry the
//! shared components and are bounded away from the rest. This example checks
//! the secular-equation predictions and the split bounds against the dense
//! solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shica::{
    assemble_full, eigen_gap_bounds, model_covariance, solve_gev, theoretical_eigenvalues,
    Direction, Matrix, ModelParams,
};

fn main() -> shica::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, p) = (6, 3);
    let noise: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..p).map(|_| rng.gen_range(0.1..1.5)).collect())
        .collect();
    let params = ModelParams::new(
        Direction::Mixing,
        vec![Matrix::identity(p, p); m],
        noise.clone(),
    );
    let (c, d) = assemble_full(&model_covariance(&params)?);
    let solution = solve_gev(&c, &d)?;
    let predicted = theoretical_eigenvalues(&noise)?;

    println!("rank  solver      predicted");
    for k in 0..m * p {
        let pred = predicted
            .get(k)
            .map(|v| format!("{v:.9}"))
            .unwrap_or_else(|| "-".into());
        println!("{k:>4}  {:\u{20}<10.9}  {}", solution.eigenvalues[k], pred);
    }

    let (lower, upper) = eigen_gap_bounds(&noise);
    println!("\nbound on eigenvalue {p}: >= {lower:.4} (observed {:.4})", solution.eigenvalues[p - 1]);
    println!("bound on eigenvalue {}: <= {upper:.4} (observed {:.4})", p + 1, solution.eigenvalues[p]);
    Ok(())
}
