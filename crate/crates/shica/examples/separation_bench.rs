//! A miniature separation sweep: median unmixing error and fitting time per
//! estimator as the sample count grows.

use shica::bench::{median, separation_sweep, Algo};

fn main() -> shica::Result<()> {
    let ns = [1_000usize, 10_000];
    let seeds = 5;
    let records = separation_sweep("gauss", &ns, seeds, &Algo::ALL, true)?;

    println!("gaussian sources, diverse noise, median over {seeds} seeds");
    println!("{:>9} {:>10} {:>14} {:>14}", "n", "algo", "amari", "seconds");
    for &n in &ns {
        for algo in Algo::ALL {
            let amari: Vec<f64> = records
                .iter()
                .filter(|r| r.n == n && r.algo == algo && r.status == "ok")
                .map(|r| r.amari)
                .collect();
            let time: Vec<f64> = records
                .iter()
                .filter(|r| r.n == n && r.algo == algo && r.status == "ok")
                .map(|r| r.wall_time_seconds)
                .collect();
            println!(
                "{n:>9} {:>10} {:>14.3e} {:>14.4}",
                algo.to_string(),
                median(&amari),
                median(&time)
            );
        }
    }
    Ok(())
}
