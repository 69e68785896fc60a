use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gmm::{fit_gmm, GmmSurrogate};
use super::kde::OutputDensity;
use super::prior::InputPrior;
use crate::error::{contract, Result};
use crate::gp::GpModel;
use crate::space::{trapezoid_grid, InputMap};

/// Sample counts and mixture size used when refreshing the likelihood weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    /// Uniform spatial samples feeding the output-density estimate.
    pub n_samples: usize,
    /// Importance-resampled points fed to EM.
    pub n_resample: usize,
    pub n_components: usize,
    pub max_em_iter: usize,
    /// Nodes per axis of the trapezoid grid that estimates the mass of `w`.
    pub mass_grid: usize,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            n_resample: 10_000,
            n_components: 2,
            max_em_iter: 200,
            mass_grid: 33,
        }
    }
}

/// The likelihood ratio `w(z) = p_z(z) / p_μ(μ(z, t))` at a fixed decision time,
/// with its Gaussian-mixture surrogate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LikelihoodWeight {
    pub prior: InputPrior,
    pub out_density: OutputDensity,
    pub gmm: GmmSurrogate,
    pub sample_count: usize,
    pub time: f64,
}

impl LikelihoodWeight {
    /// Ratio given an already-computed posterior mean at `z`.
    #[inline]
    pub fn ratio_from_mean(&self, z: [f64; 2], mean: f64) -> f64 {
        self.prior.pdf(z) / self.out_density.eval(mean).max(self.out_density.floor)
    }
}

/// Likelihood ratio at an input `x` (spatial part first).
pub fn likelihood_ratio(lw: &LikelihoodWeight, m: &GpModel, x: &[f64]) -> Result<f64> {
    let mu = m.posterior_mean(x)?;
    Ok(lw.ratio_from_mean(InputMap::spatial(x), mu))
}

/// KDE of the posterior mean over uniformly drawn spatial points at time `t`.
pub fn estimate_output_density<R: Rng>(
    m: &GpModel,
    n_samples: usize,
    t: f64,
    rng: &mut R,
) -> Result<OutputDensity> {
    Ok(sample_posterior_means(m, n_samples, t, rng)?.1)
}

fn sample_posterior_means<R: Rng>(
    m: &GpModel,
    n_samples: usize,
    t: f64,
    rng: &mut R,
) -> Result<(Vec<[f64; 2]>, OutputDensity, Vec<f64>)> {
    if n_samples < 100 {
        return Err(contract(format!("need at least 100 samples, got {n_samples}")));
    }
    let zs: Vec<[f64; 2]> = (0..n_samples).map(|_| [rng.gen(), rng.gen()]).collect();
    let mus = m.posterior_mean_at(&zs, t);
    let density = OutputDensity::from_samples(&mus);
    Ok((zs, density, mus))
}

/// Rebuilds the likelihood weight for model `m` at time `t`.
///
/// Draws uniform spatial samples, estimates `p_μ`, evaluates `w` on the same samples,
/// resamples proportionally to `w`, and fits the mixture surrogate by EM. Mixture
/// weights are scaled to the trapezoid estimate of `∫ w` over the unit square.
pub fn refresh_weight<R: Rng>(
    m: &GpModel,
    prior: &InputPrior,
    t: f64,
    cfg: &WeightConfig,
    rng: &mut R,
) -> Result<LikelihoodWeight> {
    prior.validate()?;
    let (zs, density, mus) = sample_posterior_means(m, cfg.n_samples, t, rng)?;
    let mut lw = LikelihoodWeight {
        prior: prior.clone(),
        out_density: density,
        gmm: GmmSurrogate { components: vec![] },
        sample_count: cfg.n_samples,
        time: t,
    };
    let w: Vec<f64> = zs
        .iter()
        .zip(&mus)
        .map(|(z, mu)| lw.ratio_from_mean(*z, *mu))
        .collect();

    // systematic resampling proportional to w
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(contract("likelihood ratio has no positive mass on the samples"));
    }
    let step = total / cfg.n_resample as f64;
    let mut u = rng.gen::<f64>() * step;
    let mut acc = 0.0;
    let mut resampled = Vec::with_capacity(cfg.n_resample);
    for (z, wi) in zs.iter().zip(&w) {
        acc += wi;
        while u < acc && resampled.len() < cfg.n_resample {
            resampled.push(*z);
            u += step;
        }
    }
    while resampled.len() < cfg.n_resample {
        resampled.push(*zs.last().unwrap());
    }
    let ones = vec![1.0; resampled.len()];
    let fit = fit_gmm(&resampled, &ones, cfg.n_components, cfg.max_em_iter, rng)?;

    let nodes = trapezoid_grid(cfg.mass_grid);
    let zs: Vec<[f64; 2]> = nodes.iter().map(|(z, _)| *z).collect();
    let mass: f64 = nodes
        .iter()
        .zip(m.posterior_mean_at(&zs, t))
        .map(|((z, wt), mu)| wt * lw.ratio_from_mean(*z, mu))
        .sum();
    lw.gmm = fit.gmm.scaled(mass);
    Ok(lw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Dataset, KernelParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear_model() -> GpModel {
        // dense noiseless samples of μ(z) = z₁ reproduce it closely
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for i in 0..=10 {
            for j in 0..=10 {
                let z = [i as f64 / 10.0, j as f64 / 10.0];
                inputs.push(z.to_vec());
                outputs.push(z[0]);
            }
        }
        let p = KernelParams::isotropic(2, 1.0, 0.6, 1e-8);
        GpModel::new(p, Dataset::new(inputs, outputs).unwrap()).unwrap()
    }

    #[test]
    fn constant_mean_gives_constant_ratio() {
        let p = KernelParams::isotropic(2, 1.0, 0.2, 1e-3);
        let m = GpModel::with_offset(p, Dataset::default(), 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lw = refresh_weight(&m, &InputPrior::Uniform, 0.0, &WeightConfig::default(), &mut rng).unwrap();
        let a = likelihood_ratio(&lw, &m, &[0.1, 0.2]).unwrap();
        let b = likelihood_ratio(&lw, &m, &[0.8, 0.9]).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite() && a > 0.0);
    }

    #[test]
    fn pushforward_of_linear_mean_is_uniform() {
        let m = linear_model();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = estimate_output_density(&m, 100_000, 0.0, &mut rng).unwrap();
        let err = (0..=80)
            .map(|i| 0.1 + 0.01 * i as f64)
            .map(|y| (d.eval(y) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.1, "{err}");
    }

    #[test]
    fn tail_values_get_heavier_weight() {
        let m = linear_model();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = WeightConfig {
            n_samples: 20_000,
            ..WeightConfig::default()
        };
        // skewed mean: most mass near 0, rare values near 1
        let p = KernelParams::isotropic(2, 1.0, 0.6, 1e-8);
        let mut data = m.data().clone();
        for y in data.outputs.iter_mut() {
            *y = y.powi(6);
        }
        let skewed = GpModel::new(p, data).unwrap();
        let lw = refresh_weight(&skewed, &InputPrior::Uniform, 0.0, &cfg, &mut rng).unwrap();
        let common = likelihood_ratio(&lw, &skewed, &[0.1, 0.5]).unwrap();
        let rare = likelihood_ratio(&lw, &skewed, &[0.98, 0.5]).unwrap();
        assert!(rare > common);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let m = linear_model();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(estimate_output_density(&m, 10, 0.0, &mut rng).is_err());
    }
}
