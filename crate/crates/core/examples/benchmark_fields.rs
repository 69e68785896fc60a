//! The five analytic benchmarks on the unit square, their minima, and the moving variant.
//!
//! ```text
//! cargo run --release --example benchmark_fields
//! ```

use anomaly_ipp::environments::{benchmark_env, dynamic_shift, make_dynamic, to_native, Benchmark};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anomaly_ipp::Result<()> {
    let n = 400;
    println!("{:<22} {:>28} {:>12} {:>14} {:>12}", "benchmark", "native domain", "grid min", "at (unit)", "noise var");
    for b in Benchmark::ALL {
        let env = benchmark_env(b);
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for j in 0..=n {
            for i in 0..=n {
                let z = [i as f64 / n as f64, j as f64 / n as f64];
                let v = env.eval(z, 0.0);
                if v < best.0 {
                    best = (v, z);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let noisy = env.calibrated(1e-3, 100_000, &mut rng)?;
        println!(
            "{:<22} {:>28} {:>12.4} {:>14} {:>12.3e}",
            b.name(),
            {
                let d = b.native_domain();
                format!("[{:.2}, {:.2}] x [{:.2}, {:.2}]", d[0][0], d[0][1], d[1][0], d[1][1])
            },
            best.0,
            format!("({:.3}, {:.3})", best.1[0], best.1[1]),
            noisy.noise_variance
        );
    }

    println!("\nAckley(0, 0) = {}", Benchmark::Ackley.native(0.0, 0.0));
    let u = [0.5, 0.5];
    println!("unit (0.5, 0.5) is native {:?} for Michalewicz", to_native(Benchmark::Michalewicz.native_domain(), u));

    let moving = make_dynamic(benchmark_env(Benchmark::Michalewicz));
    println!("\n{:>6} {:>20} {:>12}", "t", "shifted (0.5, 0.5)", "f(0.5,0.5,t)");
    for t in [0.0, 3.75, 7.5, 11.25, 15.0] {
        let s = dynamic_shift(u, t);
        println!("{:>6.2} {:>20} {:>12.4}", t, format!("({:.3}, {:.3})", s[0], s[1]), moving.eval(u, t));
    }
    Ok(())
}
