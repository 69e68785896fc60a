//! Maximum-likelihood training of kernel hyperparameters.
//!
//! The objective is the log marginal likelihood of the centered observations,
//! `-½ yᵀK⁻¹y - ½ log|K| - (n/2) log 2π`, optimized in log-hyperparameter space
//! by projected BFGS under box bounds, with multiple restarts.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::KernelParams;
use super::model::{factor_with_jitter, gram, Dataset, GpModel};
use crate::error::{contract, Error, Result};

/// Box bounds in natural units, relative to the output variance where noted.
pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const SIGNAL_BOUNDS_REL: (f64, f64) = (1e-6, 1e3);
pub const NOISE_BOUNDS_REL: (f64, f64) = (1e-8, 1.0);

/// Lengthscale at which a dimension is considered frozen out of the model.
pub const FROZEN_LENGTHSCALE: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Number of optimizer starts; the first one starts from the supplied initial parameters.
    pub restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on the sup-norm of the projected gradient (log-parameter space).
    pub grad_tol: f64,
    pub seed: u64,
    /// Lengthscales excluded from optimization (kept at their initial value).
    pub frozen: Vec<bool>,
    /// Log-uniform sampling range for lengthscales at random restarts, per dimension.
    pub restart_lengthscales: Vec<(f64, f64)>,
    /// Subtract the output mean before fitting and re-add it in the posterior mean.
    pub center: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 200,
            grad_tol: 1e-6,
            seed: 0,
            frozen: Vec::new(),
            restart_lengthscales: Vec::new(),
            center: true,
        }
    }
}

/// Result of a multi-start fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: GpModel,
    pub log_likelihood: f64,
    /// Objective value at each restart's (clamped) starting point.
    pub initial_log_likelihoods: Vec<f64>,
    /// Sup-norm of the projected gradient at the returned point.
    pub projected_grad_norm: f64,
    pub iterations: usize,
}

/// Fit with default options and the given number of restarts.
pub fn fit(data: &Dataset, init: &KernelParams, restarts: usize) -> Result<GpModel> {
    let opts = FitOptions {
        restarts,
        ..FitOptions::default()
    };
    fit_with(data, init, &opts).map(|r| r.model)
}

/// Packs `(σ_f², ℓ_1..ℓ_D, σ_n²)` into log space.
pub fn to_log(p: &KernelParams) -> Vec<f64> {
    let mut v = Vec::with_capacity(p.dims() + 2);
    v.push(p.signal_variance.ln());
    v.extend(p.lengthscales.iter().map(|l| l.ln()));
    v.push(p.noise_variance.max(1e-300).ln());
    v
}

pub fn from_log(v: &[f64]) -> KernelParams {
    let d = v.len() - 2;
    KernelParams {
        signal_variance: v[0].exp(),
        lengthscales: v[1..=d].iter().map(|x| x.exp()).collect(),
        noise_variance: v[d + 1].exp(),
    }
}

/// Log marginal likelihood and its gradient with respect to the log parameters
/// `(log σ_f², log ℓ_1.., log σ_n²)`, for observations `y` (already centered).
pub fn log_marginal_likelihood(
    params: &KernelParams,
    inputs: &[Vec<f64>],
    y: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = y.len();
    let d = params.dims();
    if inputs.len() != n {
        return Err(contract("inputs and outputs differ in length"));
    }
    if n == 0 {
        return Ok((0.0, vec![0.0; d + 2]));
    }
    let kf = gram(params, inputs);
    let mut k = kf.clone();
    for i in 0..n {
        k[(i, i)] += params.noise_variance;
    }
    let (l, jitter) = factor_with_jitter(&k, params.signal_variance)?;
    let yv = DVector::from_column_slice(y);
    let mut alpha = yv.clone();
    l.solve_lower_triangular_mut(&mut alpha);
    l.tr_solve_lower_triangular_mut(&mut alpha);
    let logdet: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let value =
        -0.5 * yv.dot(&alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    let mut linv = DMatrix::identity(n, n);
    l.solve_lower_triangular_mut(&mut linv);
    let kinv = linv.transpose() * &linv;
    // W = ααᵀ - K⁻¹ ; ∂L/∂θ = ½ tr(W ∂K/∂θ)
    let w = &alpha * alpha.transpose() - kinv;

    let mut grad = vec![0.0; d + 2];
    let inv_l2: Vec<f64> = params.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
    let mut g_sf = 0.0;
    let mut trace_w = 0.0;
    for i in 0..n {
        let wii = w[(i, i)];
        trace_w += wii;
        g_sf += wii * (kf[(i, i)] + jitter);
        for j in 0..i {
            let wk = 2.0 * w[(i, j)] * kf[(i, j)];
            g_sf += wk;
            let (xi, xj) = (&inputs[i], &inputs[j]);
            for dd in 0..d {
                let delta = xi[dd] - xj[dd];
                grad[1 + dd] += wk * delta * delta * inv_l2[dd];
            }
        }
    }
    grad[0] = 0.5 * g_sf;
    for g in grad.iter_mut().take(d + 1).skip(1) {
        *g *= 0.5;
    }
    grad[d + 1] = 0.5 * params.noise_variance * trace_w;
    Ok((value, grad))
}

struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn output_scale(data: &Dataset) -> f64 {
    let v = data.output_variance();
    let m = data.mean_output();
    if v > 1e-12 * (1.0 + m * m) {
        v
    } else {
        1.0
    }
}

/// Multi-start maximum-likelihood fit.
pub fn fit_with(data: &Dataset, init: &KernelParams, opts: &FitOptions) -> Result<FitReport> {
    init.validate()?;
    if data.is_empty() {
        return Err(contract("cannot fit hyperparameters to an empty dataset"));
    }
    if opts.restarts == 0 {
        return Err(contract("restarts must be at least 1"));
    }
    let d = init.dims();
    if data.inputs[0].len() != d {
        return Err(contract(format!(
            "data is {}-dimensional but kernel is {}-dimensional",
            data.inputs[0].len(),
            d
        )));
    }
    let offset = if opts.center { data.mean_output() } else { 0.0 };
    let y: Vec<f64> = data.outputs.iter().map(|v| v - offset).collect();
    let scale = output_scale(data);

    let mut bounds = Bounds {
        lo: vec![0.0; d + 2],
        hi: vec![0.0; d + 2],
    };
    bounds.lo[0] = (SIGNAL_BOUNDS_REL.0 * scale).ln();
    bounds.hi[0] = (SIGNAL_BOUNDS_REL.1 * scale).ln();
    for i in 0..d {
        bounds.lo[1 + i] = LENGTHSCALE_BOUNDS.0.ln();
        bounds.hi[1 + i] = LENGTHSCALE_BOUNDS.1.ln();
    }
    bounds.lo[d + 1] = (NOISE_BOUNDS_REL.0 * scale).ln();
    bounds.hi[d + 1] = (NOISE_BOUNDS_REL.1 * scale).ln();

    let frozen: Vec<bool> = (0..d + 2)
        .map(|i| i >= 1 && i <= d && opts.frozen.get(i - 1).copied().unwrap_or(false))
        .collect();
    // frozen coordinates are pinned to their initial value regardless of bounds
    let init_log = to_log(init);
    for i in 0..d + 2 {
        if frozen[i] {
            bounds.lo[i] = init_log[i];
            bounds.hi[i] = init_log[i];
        }
    }

    let objective = |v: &[f64]| -> Option<(f64, Vec<f64>)> {
        let p = from_log(v);
        match log_marginal_likelihood(&p, &data.inputs, &y) {
            Ok((val, g)) if val.is_finite() && g.iter().all(|x| x.is_finite()) => {
                Some((-val, g.into_iter().map(|x| -x).collect()))
            }
            _ => None,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64, f64, usize)> = None;
    let mut initial_values = Vec::with_capacity(opts.restarts);
    for r in 0..opts.restarts {
        let start: Vec<f64> = if r == 0 {
            init_log.clone()
        } else {
            let mut s = init_log.clone();
            s[0] = scale.ln() + rng.gen_range(-1.0..1.0) * std::f64::consts::LN_10;
            for i in 0..d {
                if !frozen[1 + i] {
                    let (a, b) = opts.restart_lengthscales.get(i).copied().unwrap_or((0.03, 1.0));
                    s[1 + i] = rng.gen_range(a.ln()..=b.ln());
                }
            }
            s[d + 1] = scale.ln() + rng.gen_range(-6.0..-1.0) * std::f64::consts::LN_10;
            s
        };
        let start = clamp(&start, &bounds);
        match minimize(&objective, &start, &bounds, &frozen, opts.max_iter, opts.grad_tol) {
            Some(run) => {
                initial_values.push(-run.f0);
                if best.as_ref().is_none_or(|b| run.fx < b.1) {
                    best = Some((run.x, run.fx, run.pg_norm, run.iters));
                }
            }
            None => initial_values.push(f64::NEG_INFINITY),
        }
    }
    let (x, fx, pg, iters) = best.ok_or_else(|| {
        Error::Optimization(format!("all {} restarts failed to evaluate", opts.restarts))
    })?;
    let mut params = from_log(&x);
    for (i, f) in frozen.iter().enumerate().take(d + 1).skip(1) {
        if *f {
            params.lengthscales[i - 1] = init.lengthscales[i - 1];
        }
    }
    let model = GpModel::with_offset(params, data.clone(), offset)?;
    Ok(FitReport {
        model,
        log_likelihood: -fx,
        initial_log_likelihoods: initial_values,
        projected_grad_norm: pg,
        iterations: iters,
    })
}

fn clamp(x: &[f64], b: &Bounds) -> Vec<f64> {
    x.iter()
        .zip(b.lo.iter().zip(&b.hi))
        .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
        .collect()
}

struct Run {
    x: Vec<f64>,
    fx: f64,
    f0: f64,
    pg_norm: f64,
    iters: usize,
}

fn projected_gradient(x: &[f64], g: &[f64], b: &Bounds, frozen: &[bool]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let blocked = frozen[i]
                || (x[i] <= b.lo[i] && g[i] > 0.0)
                || (x[i] >= b.hi[i] && g[i] < 0.0);
            if blocked {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

/// Projected BFGS minimization with Armijo backtracking.
fn minimize<F>(f: &F, x0: &[f64], b: &Bounds, frozen: &[bool], max_iter: usize, tol: f64) -> Option<Run>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x)?;
    let f0 = fx;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iters = 0;
    let mut pg = projected_gradient(&x, &g, b, frozen);
    while iters < max_iter {
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) < tol {
            break;
        }
        iters += 1;
        let pgv = DVector::from_column_slice(&pg);
        let mut dir = -(&h * &pgv);
        for i in 0..n {
            if pg[i] == 0.0 {
                dir[i] = 0.0;
            }
        }
        if dir.dot(&pgv) >= 0.0 {
            h = DMatrix::identity(n, n);
            fresh = true;
            dir = -pgv.clone();
        }
        let dmax = dir.amax();
        if dmax > 2.0 {
            dir *= 2.0 / dmax;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..n).map(|i| x[i] + step * dir[i]).collect();
            let trial = clamp(&trial, b);
            if let Some((ft, gt)) = f(&trial) {
                let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - x[i])).sum();
                if ft <= fx + 1e-4 * decrease {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if fresh {
                break;
            }
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        let s = DVector::from_iterator(n, (0..n).map(|i| xn[i] - x[i]));
        let yv = DVector::from_iterator(n, (0..n).map(|i| gn[i] - g[i]));
        let sy = s.dot(&yv);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let a = &eye - rho * &s * yv.transpose();
            let bm = &eye - rho * &yv * s.transpose();
            h = &a * &h * &bm + rho * &s * s.transpose();
            fresh = false;
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        pg = projected_gradient(&x, &g, b, frozen);
        if improvement.abs() < 1e-12 * (1.0 + fx.abs()) && s.amax() < 1e-10 {
            break;
        }
    }
    let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Some(Run {
        x,
        fx,
        f0,
        pg_norm,
        iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_dataset(seed: u64, n: usize, d: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen()).collect()).collect();
        let outputs = inputs
            .iter()
            .map(|x| (4.0 * x[0]).cos() + x[d - 1] * x[d - 1] + 0.1 * rng.gen::<f64>())
            .collect();
        Dataset::new(inputs, outputs).unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..4u64 {
            let data = random_dataset(seed, 10, 2);
            let y: Vec<f64> = data.outputs.iter().map(|v| v - data.mean_output()).collect();
            let p = KernelParams::new(0.8, vec![0.3, 0.6], 0.05).unwrap();
            let (_, g) = log_marginal_likelihood(&p, &data.inputs, &y).unwrap();
            let base = to_log(&p);
            let h = 1e-5;
            for i in 0..base.len() {
                let mut up = base.clone();
                up[i] += h;
                let mut dn = base.clone();
                dn[i] -= h;
                let fu = log_marginal_likelihood(&from_log(&up), &data.inputs, &y).unwrap().0;
                let fd = log_marginal_likelihood(&from_log(&dn), &data.inputs, &y).unwrap().0;
                let fdg = (fu - fd) / (2.0 * h);
                let rel = (g[i] - fdg).abs() / fdg.abs().max(1e-6);
                assert!(rel < 1e-4, "seed {seed} param {i}: {} vs {}", g[i], fdg);
            }
        }
    }

    #[test]
    fn fit_improves_on_every_start() {
        let data = random_dataset(1, 25, 2);
        let init = KernelParams::new(1.0, vec![0.5, 0.5], 0.01).unwrap();
        let opts = FitOptions {
            restarts: 4,
            ..FitOptions::default()
        };
        let rep = fit_with(&data, &init, &opts).unwrap();
        for v in &rep.initial_log_likelihoods {
            assert!(rep.log_likelihood >= *v - 1e-9);
        }
        assert!((rep.model.log_marginal_likelihood() - rep.log_likelihood).abs() < 1e-6);
    }

    #[test]
    fn single_observation_is_finite() {
        let data = Dataset::new(vec![vec![0.2, 0.3]], vec![4.0]).unwrap();
        let init = KernelParams::isotropic(2, 1.0, 0.2, 1e-3);
        let m = fit(&data, &init, 3).unwrap();
        let p = m.params();
        assert!(p.signal_variance.is_finite() && p.noise_variance.is_finite());
        assert!(p.lengthscales.iter().all(|l| l.is_finite()));
        assert!((m.posterior_mean(&[0.2, 0.3]).unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn frozen_lengthscale_is_kept() {
        let data = random_dataset(2, 15, 3);
        let init = KernelParams::new(1.0, vec![0.4, 0.4, FROZEN_LENGTHSCALE], 0.01).unwrap();
        let opts = FitOptions {
            restarts: 2,
            frozen: vec![false, false, true],
            ..FitOptions::default()
        };
        let rep = fit_with(&data, &init, &opts).unwrap();
        assert_eq!(rep.model.params().lengthscales[2], FROZEN_LENGTHSCALE);
    }

    #[test]
    fn recovers_lengthscale_from_prior_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 200;
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let truth = KernelParams::isotropic(2, 1.0, 0.2, 1e-2);
        let mut k = gram(&truth, &inputs);
        for i in 0..n {
            k[(i, i)] += truth.noise_variance;
        }
        let l = k.cholesky().unwrap().unpack();
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let y = l * z;
        let data = Dataset::new(inputs, y.iter().copied().collect()).unwrap();
        let init = KernelParams::isotropic(2, 1.0, 0.5, 0.1);
        let rep = fit_with(
            &data,
            &init,
            &FitOptions {
                restarts: 3,
                ..FitOptions::default()
            },
        )
        .unwrap();
        for l in &rep.model.params().lengthscales {
            assert!(*l > 0.1 && *l < 0.4, "lengthscale {l}");
        }
        let yc: Vec<f64> = data.outputs.iter().map(|v| v - data.mean_output()).collect();
        let at_truth = log_marginal_likelihood(&truth, &data.inputs, &yc).unwrap().0;
        assert!(rep.log_likelihood >= at_truth);
    }
}
