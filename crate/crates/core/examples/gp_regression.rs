//! Fit an anisotropic GP to noisy samples of the Bird function and query its posterior.
//!
//! ```text
//! cargo run --release --example gp_regression
//! ```

use anomaly_ipp::environments::make_benchmark;
use anomaly_ipp::gp::{fit, Dataset, KernelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anomaly_ipp::Result<()> {
    let env = make_benchmark("bird")?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs: Vec<Vec<f64>> = (0..250).map(|_| vec![rng.gen(), rng.gen()]).collect();
    let outputs: Vec<f64> = inputs
        .iter()
        .map(|x| env.eval([x[0], x[1]], 0.0) + 2.0 * (rng.gen::<f64>() - 0.5))
        .collect();
    let data = Dataset::new(inputs, outputs)?;

    let model = fit(&data, &KernelParams::isotropic(2, 1.0, 0.2, 1e-2), 5)?;
    let p = model.params();
    println!("signal variance {:.3}", p.signal_variance);
    println!("lengthscales    {:.3?}", p.lengthscales);
    println!("noise variance  {:.3e}", p.noise_variance);
    println!("log marginal likelihood {:.3}", model.log_marginal_likelihood());

    println!("\n{:>6} {:>6} {:>10} {:>10} {:>10}", "z1", "z2", "truth", "mean", "sd");
    for z in [[0.1, 0.1], [0.5, 0.5], [0.3, 0.8], [0.9, 0.2]] {
        let (m, v) = model.posterior(&z)?;
        println!("{:>6.2} {:>6.2} {:>10.3} {:>10.3} {:>10.3}", z[0], z[1], env.eval(z, 0.0), m, v.sqrt());
    }
    Ok(())
}
