//! One informative-path-planning mission on Michalewicz, printing the metric trace.
//!
//! ```text
//! cargo run --release --example single_mission -- IVR-LW 7
//! ```

use std::time::Instant;

use anomaly_ipp::acquisition::AcquisitionKind;
use anomaly_ipp::environments::make_benchmark;
use anomaly_ipp::mission::{run_mission, MissionConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anomaly_ipp::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: AcquisitionKind = args.next().as_deref().unwrap_or("IVR-LW").parse()?;
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = make_benchmark("michalewicz")?.calibrated(1e-3, 100_000, &mut rng)?;
    let cfg = MissionConfig {
        acquisition: kind,
        seed,
        ..MissionConfig::default()
    };

    let started = Instant::now();
    let out = run_mission(&env, &cfg)?;
    println!("{:>5} {:>7} {:>5} {:>10} {:>10} {:>10} {:>10}", "epoch", "clock", "n", "rmse", "pdfe", "dist", "regret");
    for r in &out.trace {
        let m = r.metrics;
        println!(
            "{:>5} {:>7.3} {:>5} {:>10.4e} {:>10.4e} {:>10.4e} {:>10.4e}",
            r.epoch, r.clock, r.dataset_size, m.rmse, m.pdfe, m.dist_to_min, m.regret
        );
    }
    let p = out.model.params();
    println!("final lengthscales {:?}, noise {:.3e}", p.lengthscales, p.noise_variance);
    println!("{} epochs in {:.1} s", out.trace.len(), started.elapsed().as_secs_f64());
    Ok(())
}
