use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::KernelParams;
use crate::error::{contract, Error, Result};
use crate::special::gaussian_sum;

/// Relative jitter added to the kernel diagonal, escalated ×10 until the factorization succeeds.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-4;

/// Variance floor (relative to `σ_f²`) below which a point counts as fully explained.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Training inputs and scalar observations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(contract(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|x| x.len() != first.len()) {
                return Err(contract("inputs have inconsistent dimensions"));
            }
        }
        Ok(Self { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) {
        self.inputs.push(x);
        self.outputs.push(y);
    }

    pub fn mean_output(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.outputs.iter().sum::<f64>() / self.len() as f64
        }
    }

    /// Sample variance (population form) of the outputs.
    pub fn output_variance(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let m = self.mean_output();
        self.outputs.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / self.len() as f64
    }
}

/// Kernel matrix `k(X, X)` without noise or jitter.
pub(crate) fn gram(params: &KernelParams, inputs: &[Vec<f64>]) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.signal_variance;
        for j in 0..i {
            let v = params.eval(&inputs[i], &inputs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky factor of `base + jitter·I`, escalating the jitter until the factorization succeeds.
/// Returns the lower factor and the absolute jitter used.
pub(crate) fn factor_with_jitter(base: &DMatrix<f64>, scale: f64) -> Result<(DMatrix<f64>, f64)> {
    let mut rel = JITTER_START;
    loop {
        let jitter = rel * scale;
        let mut m = base.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            return Ok((ch.unpack(), jitter));
        }
        rel *= 10.0;
        if rel > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite { jitter: rel / 10.0 * scale });
        }
    }
}

/// A Gaussian-process posterior conditioned on a dataset with fixed hyperparameters.
///
/// Observations are modeled around a constant `offset` (zero-mean prior on the residuals).
/// The model is immutable; conditioning on new data builds a new model.
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    data: Dataset,
    offset: f64,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    /// Zero-mean posterior (no output centering).
    pub fn new(params: KernelParams, data: Dataset) -> Result<Self> {
        Self::with_offset(params, data, 0.0)
    }

    /// Posterior for observations modeled as `offset + GP`.
    pub fn with_offset(params: KernelParams, data: Dataset, offset: f64) -> Result<Self> {
        params.validate()?;
        if let Some(x) = data.inputs.first() {
            if x.len() != params.dims() {
                return Err(contract(format!(
                    "data is {}-dimensional but kernel is {}-dimensional",
                    x.len(),
                    params.dims()
                )));
            }
        }
        let n = data.len();
        if n == 0 {
            return Ok(Self {
                params,
                data,
                offset,
                chol: DMatrix::zeros(0, 0),
                alpha: DVector::zeros(0),
                jitter: 0.0,
            });
        }
        let mut k = gram(&params, &data.inputs);
        for i in 0..n {
            k[(i, i)] += params.noise_variance;
        }
        let (chol, jitter) = factor_with_jitter(&k, params.signal_variance)?;
        let y = DVector::from_iterator(n, data.outputs.iter().map(|y| y - offset));
        let mut alpha = y;
        chol.solve_lower_triangular_mut(&mut alpha);
        chol.tr_solve_lower_triangular_mut(&mut alpha);
        Ok(Self {
            params,
            data,
            offset,
            chol,
            alpha,
            jitter,
        })
    }

    /// Same hyperparameters and offset, new data.
    pub fn condition_on(&self, data: Dataset) -> Result<Self> {
        Self::with_offset(self.params.clone(), data, self.offset)
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dims(&self) -> usize {
        self.params.dims()
    }

    /// Absolute jitter that was added to the kernel diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower Cholesky factor of `k(X,X) + (σ_n² + jitter) I`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Weights `K⁻¹ (y - offset)`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Log marginal likelihood of the (offset-removed) observations.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.data.len();
        if n == 0 {
            return 0.0;
        }
        let y = DVector::from_iterator(n, self.data.outputs.iter().map(|y| y - self.offset));
        let logdet: f64 = (0..n).map(|i| self.chol[(i, i)].ln()).sum();
        -0.5 * y.dot(&self.alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(contract(format!(
                "query is {}-dimensional but model is {}-dimensional",
                x.len(),
                self.dims()
            )));
        }
        Ok(())
    }

    /// `k(X, x)` as a column vector.
    pub fn kernel_column(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.data.len(),
            self.data.inputs.iter().map(|xi| self.params.eval(xi, x)),
        )
    }

    /// `L⁻¹ k(X, x)`.
    pub fn whitened_column(&self, x: &[f64]) -> DVector<f64> {
        let mut v = self.kernel_column(x);
        if !v.is_empty() {
            self.chol.solve_lower_triangular_mut(&mut v);
        }
        v
    }

    /// Cross-covariance block `k(X, P)` (n × m) for a batch of points.
    pub fn cross_kernel(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = self.data.len();
        DMatrix::from_fn(n, points.len(), |i, j| {
            self.params.eval(&self.data.inputs[i], &points[j])
        })
    }

    /// `L⁻¹ k(X, P)` for a batch of points.
    pub fn whitened_block(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let mut v = self.cross_kernel(points);
        if !self.data.is_empty() {
            self.chol.solve_lower_triangular_mut(&mut v);
        }
        v
    }

    pub(crate) fn mean_unchecked(&self, x: &[f64]) -> f64 {
        let mut acc = self.offset;
        for (xi, a) in self.data.inputs.iter().zip(self.alpha.iter()) {
            acc += a * self.params.eval(xi, x);
        }
        acc
    }

    pub(crate) fn var_unchecked(&self, x: &[f64]) -> f64 {
        let prior = self.params.signal_variance;
        if self.data.is_empty() {
            return prior;
        }
        let v = self.whitened_column(x);
        (prior - v.norm_squared()).clamp(0.0, prior)
    }

    /// Posterior mean `offset + k(x,X) K⁻¹ (y - offset)`.
    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.mean_unchecked(x))
    }

    /// Posterior variance, clamped to `[0, σ_f²]`.
    pub fn posterior_var(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.var_unchecked(x))
    }

    /// Posterior mean and variance together (one triangular solve).
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check(x)?;
        let prior = self.params.signal_variance;
        if self.data.is_empty() {
            return Ok((self.offset, prior));
        }
        let k = self.kernel_column(x);
        let mean = self.offset + k.dot(&self.alpha);
        let mut v = k;
        self.chol.solve_lower_triangular_mut(&mut v);
        Ok((mean, (prior - v.norm_squared()).clamp(0.0, prior)))
    }

    /// Posterior means for many points.
    pub fn posterior_mean_batch(&self, points: &[Vec<f64>]) -> Vec<f64> {
        points.iter().map(|p| self.mean_unchecked(p)).collect()
    }

    /// Posterior means at spatial points `zs`, all at time `t` (ignored for 2-D models).
    ///
    /// Time factors are folded into the weights once, leaving one exponential per
    /// point pair.
    pub fn posterior_mean_at(&self, zs: &[[f64; 2]], t: f64) -> Vec<f64> {
        const BLOCK: usize = 512;
        let ls = &self.params.lengthscales;
        let (s1, s2) = (1.0 / ls[0], 1.0 / ls[1]);
        let terms: Vec<(f64, f64, f64)> = self
            .data
            .inputs
            .iter()
            .zip(self.alpha.iter())
            .map(|(x, a)| {
                let mut w = a * self.params.signal_variance;
                if self.dims() == 3 {
                    let u = (x[2] - t) / ls[2];
                    w *= (-0.5 * u * u).exp();
                }
                (x[0] * s1, x[1] * s2, w)
            })
            .filter(|(_, _, w)| *w != 0.0)
            .collect();
        let mut out = Vec::with_capacity(zs.len());
        let mut p1 = [0.0; BLOCK];
        let mut p2 = [0.0; BLOCK];
        let mut acc = [0.0; BLOCK];
        for chunk in zs.chunks(BLOCK) {
            let m = chunk.len();
            for (i, z) in chunk.iter().enumerate() {
                p1[i] = z[0] * s1;
                p2[i] = z[1] * s2;
            }
            acc[..m].fill(0.0);
            gaussian_sum(&mut acc[..m], &p1[..m], &p2[..m], &terms);
            out.extend(acc[..m].iter().map(|v| self.offset + v));
        }
        out
    }

    /// Posterior covariance `k(x,x') - k(x,X) K⁻¹ k(X,x')`.
    pub fn posterior_cov(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.check(x_prime)?;
        let prior = self.params.eval(x, x_prime);
        if self.data.is_empty() {
            return Ok(prior);
        }
        if x == x_prime {
            return Ok(self.var_unchecked(x));
        }
        let a = self.whitened_column(x);
        let b = self.whitened_column(x_prime);
        Ok(prior - a.dot(&b))
    }

    /// Predictive variance at `x_prime` had a noiseless observation been made at `ghost`.
    pub fn conditional_var(&self, x_prime: &[f64], ghost: &[f64]) -> Result<f64> {
        let var_target = self.posterior_var(x_prime)?;
        let var_ghost = self.posterior_var(ghost)?;
        if var_ghost <= VARIANCE_FLOOR * self.params.signal_variance {
            return Ok(var_target);
        }
        let c = self.posterior_cov(ghost, x_prime)?;
        Ok((var_target - c * c / var_ghost).clamp(0.0, var_target))
    }
}
