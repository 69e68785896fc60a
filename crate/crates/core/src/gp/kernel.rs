use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Hyperparameters of the anisotropic squared-exponential (ARD) kernel.
///
/// `k(x, x') = σ_f² exp(-½ Σ_d (x_d - x'_d)² / ℓ_d²)`; the diagonal scale matrix
/// holds the squared lengthscales `ℓ_d²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let p = Self {
            signal_variance,
            lengthscales,
            noise_variance,
        };
        p.validate()?;
        Ok(p)
    }

    /// Isotropic parameters in `dims` dimensions.
    pub fn isotropic(dims: usize, signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Self {
        Self {
            signal_variance,
            lengthscales: vec![lengthscale; dims],
            noise_variance,
        }
    }

    pub fn dims(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(contract(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if self.lengthscales.is_empty() {
            return Err(contract("at least one lengthscale is required"));
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(contract(format!("lengthscales must be positive, got {l}")));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(contract(format!(
                "noise variance must be nonnegative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    /// Kernel value without dimension checks; callers guarantee matching lengths.
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut q = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let d = (x - y) / l;
            q += d * d;
        }
        self.signal_variance * (-0.5 * q).exp()
    }
}

/// Checked kernel evaluation.
pub fn kernel_eval(p: &KernelParams, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    if x.len() != p.dims() || x_prime.len() != p.dims() {
        return Err(contract(format!(
            "kernel expects {}-dimensional inputs, got {} and {}",
            p.dims(),
            x.len(),
            x_prime.len()
        )));
    }
    Ok(p.eval(x, x_prime))
}
