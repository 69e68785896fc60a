//! Myopic next-best-view against path planning on Ackley with uncertainty sampling.
//!
//! ```text
//! cargo run --release --example next_best_view -- 5
//! ```

use anomaly_ipp::acquisition::AcquisitionKind;
use anomaly_ipp::environments::make_benchmark;
use anomaly_ipp::metrics::{MetricEvaluator, ProbeSet};
use anomaly_ipp::mission::{run_mission_with, run_next_best_view_with, MissionConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anomaly_ipp::Result<()> {
    let runs: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let env = make_benchmark("ackley")?.calibrated(1e-3, 100_000, &mut rng)?;
    let metrics = MetricEvaluator::new(&env, ProbeSet::uniform(20_000, 1));

    println!("{:>4} {:>14} {:>14} {:>8} {:>8}", "seed", "rmse (NBV)", "rmse (path)", "n NBV", "n path");
    let mut wins = 0;
    for seed in 0..runs {
        let cfg = MissionConfig {
            acquisition: AcquisitionKind::Us,
            seed,
            ..MissionConfig::default()
        };
        let nbv = run_next_best_view_with(&env, &cfg, &metrics)?;
        let path = run_mission_with(&env, &cfg, &metrics)?;
        let a = nbv.trace.last().unwrap();
        let b = path.trace.last().unwrap();
        wins += usize::from(b.metrics.rmse < a.metrics.rmse);
        println!(
            "{:>4} {:>14.4e} {:>14.4e} {:>8} {:>8}",
            seed, a.metrics.rmse, b.metrics.rmse, a.dataset_size, b.dataset_size
        );
    }
    println!("path planning ends with lower rmse in {wins} of {runs} runs");
    Ok(())
}
