//! A small replicated experiment built in code, with aggregate curves and the manifest.
//!
//! ```text
//! cargo run --release --example experiment_harness -- /tmp/ipp-demo
//! ```

use std::path::PathBuf;

use anomaly_ipp::experiment::{run_experiment, ExperimentSpec, RunOptions};
use anomaly_ipp::metrics::Metric;

const SPEC: &str = r#"
name = "demo"
acquisitions = ["US", "IVR-LW"]
replicates = 3
seed_base = 100
output_dir = "demo"

[environment]
kind = "benchmark"
name = "michalewicz"

[mission]
duration = 3.0
probes = 20000
"#;

fn main() -> anomaly_ipp::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let spec = ExperimentSpec::from_toml_str(SPEC, &[])?;
    let report = run_experiment(
        &spec,
        &RunOptions {
            jobs: None,
            output_root: Some(root),
        },
    )?;
    println!("noise variance {:.3e}", report.noise_variance);
    for r in &report.results {
        let series = r.aggregates.iter().find(|s| s.metric == Metric::DistToMin).expect("aggregated");
        println!("\n{} median cumulative-min distance to minimizer (± MAD/4):", r.kind);
        for row in series.rows.iter().step_by(4) {
            println!("  epoch {:>3} t {:>5.2}  {:.3e} ± {:.1e}", row.epoch, row.clock, row.median, row.band);
        }
    }
    println!("\nartifacts under {}", report.output_dir.display());
    print!("{}", std::fs::read_to_string(&report.manifest)?.lines().take(12).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
