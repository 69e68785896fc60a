//! Every acquisition function evaluated on one trained model, and the κ → ∞ limit of UCB/PI/EI.
//!
//! ```text
//! cargo run --release --example acquisition_functions
//! ```

use anomaly_ipp::acquisition::{argmax, AcquisitionContext, AcquisitionKind, Evaluator};
use anomaly_ipp::density::{refresh_weight, InputPrior, WeightConfig};
use anomaly_ipp::validation::trained_model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anomaly_ipp::Result<()> {
    let model = trained_model(1, 30)?;
    let prior = InputPrior::isotropic([0.5, 0.5], 0.01)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let weight = refresh_weight(&model, &prior, 0.0, &WeightConfig::default(), &mut rng)?;
    let ctx = AcquisitionContext::new(&model, &prior, 0.0).with_weight(&weight);

    let probes: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.gen(), rng.gen()]).collect();
    println!("{:<12} {:>12} {:>18}", "acquisition", "max score", "argmax");
    let kinds = AcquisitionKind::VARIANCE_KINDS.into_iter().chain([
        AcquisitionKind::Ucb { kappa: 1e6 },
        AcquisitionKind::Pi { kappa: 1e6 },
        AcquisitionKind::Ei { kappa: 1e6 },
    ]);
    for kind in kinds {
        let scores = Evaluator::new(ctx, kind)?.scores(&probes)?;
        let i = argmax(&scores).expect("nonempty probe set");
        println!(
            "{:<12} {:>12.4e} {:>18}",
            kind.to_string(),
            scores[i],
            format!("({:.3}, {:.3})", probes[i][0], probes[i][1])
        );
    }
    println!("\nUCB, PI and EI at κ = 1e6 pick the same point as US.");
    Ok(())
}
