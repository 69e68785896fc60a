//! Write a mission trace as JSON Lines, read it back, and replay the decisions.
//!
//! ```text
//! cargo run --release --example trace_replay
//! ```

use anomaly_ipp::acquisition::AcquisitionKind;
use anomaly_ipp::environments::make_benchmark;
use anomaly_ipp::mission::{read_trace, replay_mismatches, run_mission, trace_to_string, MissionConfig};

fn main() -> anomaly_ipp::Result<()> {
    let env = make_benchmark("bukin06")?;
    let cfg = MissionConfig {
        acquisition: AcquisitionKind::Ivr,
        duration: 4.0,
        seed: 11,
        ..MissionConfig::default()
    };
    let out = run_mission(&env, &cfg)?;
    let text = trace_to_string(&out.trace);
    println!("{} epochs, {} bytes of trace; first record:", out.trace.len(), text.len());
    println!("{}", text.lines().next().unwrap_or_default());

    let back = read_trace(text.as_bytes())?;
    assert_eq!(back, out.trace);
    let mismatches = replay_mismatches(&env, &cfg, &back)?;
    println!("replay reproduced {} of {} destinations", back.len() - mismatches.len(), back.len());
    Ok(())
}
