//! A noise-free survey of the shipped trench lattice with likelihood-weighted IVR.
//!
//! ```text
//! cargo run --release --example trench_survey -- 3
//! ```

use anomaly_ipp::acquisition::AcquisitionKind;
use anomaly_ipp::environments::{trench_env, trench_fixture_text, GridField};
use anomaly_ipp::mission::{run_mission, MissionConfig};

fn main() -> anomaly_ipp::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let grid = GridField::parse(trench_fixture_text())?;
    let (zmin, fmin) = grid.lattice_argmin();
    println!("lattice minimum {:.3} at native {:?}, domain {:?}", fmin, zmin, grid.native_domain());

    let env = trench_env();
    let cfg = MissionConfig {
        acquisition: AcquisitionKind::IvrLw,
        seed,
        ..MissionConfig::default()
    };
    let out = run_mission(&env, &cfg)?;
    let last = out.trace.len() - 1;
    for r in out.trace.iter().filter(|r| r.epoch % 8 == 0 || r.epoch == last) {
        println!(
            "epoch {:>3} t {:>6.3} at ({:.3}, {:.3})  dist to min {:.3e}  regret {:.3e}",
            r.epoch, r.clock, r.pose.z[0], r.pose.z[1], r.metrics.dist_to_min, r.metrics.regret
        );
    }
    let best = out.trace.iter().map(|r| r.metrics.dist_to_min).fold(f64::INFINITY, f64::min);
    println!("best squared distance to the trench minimizer: {best:.3e}");
    Ok(())
}
