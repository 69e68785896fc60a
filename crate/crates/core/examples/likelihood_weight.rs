//! The likelihood ratio p_x / p_μ of a trained surrogate, its Gaussian-mixture fit, and raw EM.
//!
//! ```text
//! cargo run --release --example likelihood_weight
//! ```

use anomaly_ipp::density::{fit_gmm, likelihood_ratio, refresh_weight, InputPrior, WeightConfig};
use anomaly_ipp::validation::trained_model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> anomaly_ipp::Result<()> {
    let model = trained_model(4, 40)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for prior in [InputPrior::Uniform, InputPrior::isotropic([0.25, 0.75], 0.01)?] {
        let w = refresh_weight(&model, &prior, 0.0, &WeightConfig::default(), &mut rng)?;
        println!("prior {:?}", prior);
        println!("  mixture mass {:.4}", w.gmm.total_weight());
        for c in &w.gmm.components {
            println!("  weight {:.3} mean ({:.3}, {:.3}) cov [{:.2e}, {:.2e}, {:.2e}]", c.weight, c.mean[0], c.mean[1], c.cov[0][0], c.cov[0][1], c.cov[1][1]);
        }
        for z in [[0.1, 0.1], [0.5, 0.5], [0.25, 0.75]] {
            println!(
                "  z = {:?}: ratio {:.3e}, mixture {:.3e}",
                z,
                likelihood_ratio(&w, &model, &z)?,
                w.gmm.eval(z)
            );
        }
    }

    let a = Normal::new(0.3, 0.05).expect("valid");
    let b = Normal::new(0.7, 0.08).expect("valid");
    let points: Vec<[f64; 2]> = (0..2000)
        .map(|i| if i % 3 == 0 { [a.sample(&mut rng), a.sample(&mut rng)] } else { [b.sample(&mut rng), b.sample(&mut rng)] })
        .collect();
    let weights: Vec<f64> = points.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
    let fit = fit_gmm(&points, &weights, 2, 200, &mut rng)?;
    println!("\nEM on two clusters: {} iterations, log-likelihood {:.2} -> {:.2}", fit.log_likelihood.len() - 1, fit.log_likelihood[0], fit.log_likelihood.last().unwrap());
    for c in &fit.gmm.components {
        println!("  weight {:.3} mean ({:.3}, {:.3})", c.weight, c.mean[0], c.mean[1]);
    }
    Ok(())
}
