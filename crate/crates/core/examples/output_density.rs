//! Kernel density of posterior-mean outputs and the log-pdf error between two fields.
//!
//! ```text
//! cargo run --release --example output_density
//! ```

use anomaly_ipp::density::{silverman_bandwidth, OutputDensity};
use anomaly_ipp::environments::make_benchmark;
use anomaly_ipp::metrics::{pdfe_of, ProbeSet};

fn main() -> anomaly_ipp::Result<()> {
    let env = make_benchmark("michalewicz")?;
    let probes = ProbeSet::uniform(100_000, 0);
    let f: Vec<f64> = probes.points.iter().map(|z| env.eval(*z, 0.0)).collect();
    let density = OutputDensity::from_samples(&f);
    println!("Michalewicz outputs: bandwidth {:.4e} (Silverman {:.4e})", density.bandwidth, silverman_bandwidth(&f));
    println!("grid [{:.3}, {:.3}] with {} nodes, mass {:.6}", density.lo, density.hi(), density.values.len(), density.mass());

    println!("\n{:>8} {:>12}", "y", "p(y)");
    for y in [-1.8, -1.5, -1.0, -0.5, -0.1, 0.0] {
        println!("{:>8.2} {:>12.4e}", y, density.eval(y));
    }

    println!("\nlog-pdf error of a surrogate offset by a constant:");
    for offset in [0.0, 0.02, 0.1, 0.3] {
        let mu: Vec<f64> = f.iter().map(|v| v + offset).collect();
        println!("  offset {:.2}: pdfe {:.4}", offset, pdfe_of(&f, &mu));
    }
    Ok(())
}
