//! Fast self-checks that compare the production code paths against independent oracles.
//!
//! Each check returns a [`CheckResult`]; [`run_all`] runs the whole suite. A
//! [`Fault`] can be injected to confirm that a check is able to fail.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{argmax, AcquisitionContext, AcquisitionKind, Evaluator};
use crate::density::{refresh_weight, InputPrior, WeightConfig};
use crate::error::{Error, Result};
use crate::gp::{fit, Dataset, GpModel, KernelParams};
use crate::planner::{shortest_dubins, Pose};

/// Deliberate corruption applied before a check runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Scales the closed-form likelihood-weighted IVR integral by 1.01.
    IvrLw,
}

impl FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ivr-lw" => Ok(Fault::IvrLw),
            other => Err(Error::Config(format!("unknown fault {other:?}; known faults: ivr-lw"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed discrepancy and the tolerance it was held to.
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<20} {:<4} {:>7.2}s  {}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

pub const CHECK_NAMES: [&str; 4] = ["gp-dense-oracle", "ivr-lw-quadrature", "dubins-brute-force", "kappa-limit"];

/// Runs every check in order.
pub fn run_all(fault: Option<Fault>) -> Vec<CheckResult> {
    vec![
        timed("gp-dense-oracle", gp_dense_oracle),
        timed("ivr-lw-quadrature", || ivr_lw_quadrature(fault == Some(Fault::IvrLw))),
        timed("dubins-brute-force", dubins_brute_force),
        timed("kappa-limit", kappa_limit),
    ]
}

fn timed(name: &'static str, check: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = match check() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> Result<Dataset> {
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..dims).map(|_| rng.gen()).collect()).collect();
    let outputs = inputs
        .iter()
        .map(|x| (5.0 * x[0]).sin() + (4.0 * x[1]).cos() * x.get(2).map_or(1.0, |t| 1.0 + t) + 0.01 * rng.gen::<f64>())
        .collect();
    Dataset::new(inputs, outputs)
}

fn random_params(rng: &mut ChaCha8Rng, dims: usize) -> KernelParams {
    let ls = (0..dims).map(|_| rng.gen_range(0.1..0.6)).collect();
    KernelParams {
        signal_variance: rng.gen_range(0.5..2.0),
        lengthscales: ls,
        noise_variance: rng.gen_range(1e-4..1e-2),
    }
}

/// Posterior mean, variance and covariance against an explicit inverse of the noisy Gram matrix.
pub fn gp_dense_oracle() -> Result<(bool, String)> {
    const TOL: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let dims = 2 + case % 2;
        let n = rng.gen_range(1..=50);
        let p = random_params(&mut rng, dims);
        let model = GpModel::new(p.clone(), random_dataset(&mut rng, n, dims)?)?;
        let inputs = &model.data().inputs;
        let mut k = DMatrix::from_fn(n, n, |i, j| dense_kernel(&p, &inputs[i], &inputs[j]));
        for i in 0..n {
            k[(i, i)] += p.noise_variance + model.jitter();
        }
        let kinv = k
            .try_inverse()
            .ok_or_else(|| Error::Contract("dense oracle matrix is singular".into()))?;
        let y = DVector::from_iterator(n, model.data().outputs.iter().map(|v| v - model.offset()));
        let a: Vec<f64> = (0..dims).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..dims).map(|_| rng.gen()).collect();
        let ka = DVector::from_iterator(n, inputs.iter().map(|xi| dense_kernel(&p, xi, &a)));
        let kb = DVector::from_iterator(n, inputs.iter().map(|xi| dense_kernel(&p, xi, &b)));
        let mean = model.offset() + ka.dot(&(&kinv * &y));
        let var = p.signal_variance - ka.dot(&(&kinv * &ka));
        let cov = dense_kernel(&p, &a, &b) - ka.dot(&(&kinv * &kb));
        let (m, v) = model.posterior(&a)?;
        let c = model.posterior_cov(&a, &b)?;
        let scale = p.signal_variance.max(1.0);
        worst = worst
            .max((m - mean).abs() / (1.0 + mean.abs()))
            .max((v - var).abs() / scale)
            .max((c - cov).abs() / scale);
    }
    Ok((worst < TOL, format!("max error {worst:.2e} (tol {TOL:.0e}, 50 datasets)")))
}

fn dense_kernel(p: &KernelParams, a: &[f64], b: &[f64]) -> f64 {
    let q: f64 = a
        .iter()
        .zip(b)
        .zip(&p.lengthscales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    p.signal_variance * (-0.5 * q).exp()
}

/// Model with hyperparameters fitted to `n` noisy samples of a smooth two-bump field.
pub fn trained_model(seed: u64, n: usize) -> Result<GpModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
    let outputs = inputs
        .iter()
        .map(|x| (5.0 * x[0]).sin() * (4.0 * x[1]).cos() + 0.01 * (rng.gen::<f64>() - 0.5))
        .collect();
    let init = KernelParams::isotropic(2, 1.0, 0.2, 1e-3);
    fit(&Dataset::new(inputs, outputs)?, &init, 3)
}

/// Gauss-Legendre rule on `[0, 1]` from the eigenpairs of the Jacobi matrix; weights sum to 1.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (0.5 * (eig.eigenvalues[i] + 1.0), eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Closed-form likelihood-weighted IVR against 128×128 tensor Gauss-Legendre quadrature on trained models.
pub fn ivr_lw_quadrature(corrupt: bool) -> Result<(bool, String)> {
    const TOL: f64 = 1e-3;
    const NQ: usize = 128;
    let (abscissae, weights) = gauss_legendre_unit(NQ);
    let nodes: Vec<Vec<f64>> = (0..NQ * NQ).map(|k| vec![abscissae[k % NQ], abscissae[k / NQ]]).collect();
    let node_weight: Vec<f64> = (0..NQ * NQ).map(|k| weights[k % NQ] * weights[k / NQ]).collect();
    let prior = InputPrior::Uniform;
    let cfg = WeightConfig {
        n_samples: 4000,
        n_resample: 4000,
        ..WeightConfig::default()
    };
    let mut worst = 0.0f64;
    for case in 0..5u64 {
        let model = trained_model(200 + case, 25 + 5 * case as usize)?;
        let mut rng = ChaCha8Rng::seed_from_u64(300 + case);
        let weight = refresh_weight(&model, &prior, 0.0, &cfg, &mut rng)?;
        let ctx = AcquisitionContext::new(&model, &prior, 0.0).with_weight(&weight);
        let mut ev = Evaluator::new(ctx, AcquisitionKind::IvrLw)?;
        if corrupt {
            ev.corrupt_analytic_constant(1.01);
        }
        let gmm_at: Vec<f64> = nodes
            .iter()
            .zip(&node_weight)
            .map(|(g, q)| q * weight.gmm.eval([g[0], g[1]]))
            .collect();
        let wn = model.whitened_block(&nodes);
        let xs: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let analytic = ev.utilities(&xs)?;
        for (x, got) in xs.iter().zip(analytic) {
            let var = model.posterior_var(x)?;
            let wx = model.whitened_column(x);
            let mut sum = 0.0;
            for (j, gw) in gmm_at.iter().enumerate() {
                let prior_cov = dense_kernel(model.params(), x, &nodes[j]);
                let cov = prior_cov - wx.dot(&wn.column(j));
                sum += cov * cov * gw;
            }
            let quad = sum / var;
            worst = worst.max((got - quad).abs() / quad.abs().max(1e-300));
        }
    }
    Ok((worst < TOL, format!("max relative error {worst:.2e} (tol {TOL:.0e}, 5 models × 8 points)")))
}

/// Shortest Dubins length by root-finding along the first-arc angle for every word.
///
/// The first arc angle is swept on a `1e-4` grid; between grid points where the
/// closing condition changes sign the root is located by linear interpolation and
/// the remaining two segments follow from plane geometry.
pub fn brute_force_dubins_length(start: Pose, end: Pose, r: f64) -> Option<f64> {
    const STEP: f64 = 1e-4;
    let n = (2.0 * PI / STEP).ceil() as usize;
    let normal = |th: f64| [-th.sin(), th.cos()];
    let wrap = |a: f64| {
        let v = a.rem_euclid(2.0 * PI);
        if v > 2.0 * PI - 1e-9 {
            0.0
        } else {
            v
        }
    };
    let end_center = |s: f64| {
        let nn = normal(end.theta);
        [end.z[0] + s * r * nn[0], end.z[1] + s * r * nn[1]]
    };
    let mut best: Option<f64> = None;
    for s1 in [1.0, -1.0] {
        let c1 = {
            let nn = normal(start.theta);
            [start.z[0] + s1 * r * nn[0], start.z[1] + s1 * r * nn[1]]
        };
        let after_first = |t: f64| {
            let th = start.theta + s1 * t;
            let nn = normal(th);
            ([c1[0] - s1 * r * nn[0], c1[1] - s1 * r * nn[1]], th)
        };
        // Straight middle segment, last arc either way.
        for s3 in [1.0, -1.0] {
            let ce = end_center(s3);
            let residual = |t: f64| {
                let (p, th) = after_first(t);
                let nn = normal(th);
                let target = [ce[0] - s3 * r * nn[0] - p[0], ce[1] - s3 * r * nn[1] - p[1]];
                let u = [th.cos(), th.sin()];
                (u[0] * target[1] - u[1] * target[0], u[0] * target[0] + u[1] * target[1])
            };
            let close = |t: f64| {
                let (_, th) = after_first(t);
                let (_, lambda) = residual(t);
                (lambda >= -1e-9).then(|| r * (t + wrap(s3 * (end.theta - th))) + lambda.max(0.0))
            };
            for_each_root(n, STEP, |t| residual(t).0, |t| {
                if let Some(len) = close(t) {
                    best = Some(best.map_or(len, |b: f64| b.min(len)));
                }
            });
        }
        // Arc-arc-arc with the middle arc turning the other way.
        let s2 = -s1;
        let ce = end_center(s1);
        let residual = |t: f64| {
            let (p, th) = after_first(t);
            let nn = normal(th);
            let c2 = [p[0] + s2 * r * nn[0], p[1] + s2 * r * nn[1]];
            (c2[0] - ce[0]).hypot(c2[1] - ce[1]) - 2.0 * r
        };
        let close = |t: f64| {
            let (p, th) = after_first(t);
            let nn = normal(th);
            let c2 = [p[0] + s2 * r * nn[0], p[1] + s2 * r * nn[1]];
            let mid = [0.5 * (c2[0] + ce[0]), 0.5 * (c2[1] + ce[1])];
            let nm = [(c2[0] - mid[0]) / (s2 * r), (c2[1] - mid[1]) / (s2 * r)];
            let th2 = (-nm[0]).atan2(nm[1]);
            r * (t + wrap(s2 * (th2 - th)) + wrap(s1 * (end.theta - th2)))
        };
        for_each_root(n, STEP, residual, |t| {
            let len = close(t);
            best = Some(best.map_or(len, |b: f64| b.min(len)));
        });
    }
    best
}

fn for_each_root(n: usize, step: f64, g: impl Fn(f64) -> f64, mut visit: impl FnMut(f64)) {
    let mut prev = g(0.0);
    if prev == 0.0 {
        visit(0.0);
    }
    for k in 1..=n {
        let t = (k as f64 * step).min(2.0 * PI);
        let cur = g(t);
        if cur == 0.0 {
            visit(t);
        } else if prev != 0.0 && prev.signum() != cur.signum() {
            let t0 = t - step;
            visit(t0 + step * prev / (prev - cur));
        }
        prev = cur;
    }
}

/// Closed-form shortest Dubins length against the geometric sweep on 200 random pose pairs.
pub fn dubins_brute_force() -> Result<(bool, String)> {
    const TOL: f64 = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut shorter_than_chord = 0;
    let mut unmatched = 0;
    for _ in 0..200 {
        let a = Pose::new([rng.gen(), rng.gen()], rng.gen_range(-PI..PI));
        let b = Pose::new([rng.gen(), rng.gen()], rng.gen_range(-PI..PI));
        let r = rng.gen_range(0.05..0.5);
        let got = shortest_dubins(a, b, r)?.length();
        let chord = (a.z[0] - b.z[0]).hypot(a.z[1] - b.z[1]);
        if got < chord - 1e-12 {
            shorter_than_chord += 1;
        }
        match brute_force_dubins_length(a, b, r) {
            Some(oracle) => worst = worst.max((got - oracle).abs() / oracle),
            None => unmatched += 1,
        }
    }
    let passed = worst < TOL && shorter_than_chord == 0 && unmatched == 0;
    Ok((
        passed,
        format!(
            "max relative error {worst:.2e} (tol {TOL:.0e}), {shorter_than_chord} below chord, {unmatched} without oracle"
        ),
    ))
}

/// UCB, PI and EI at large `κ` pick the same probe as uncertainty sampling.
pub fn kappa_limit() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let probes: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen(), rng.gen()]).collect();
    let prior = InputPrior::Uniform;
    let mut failures = Vec::new();
    for case in 0..20u64 {
        let model = trained_model(500 + case, 8 + case as usize)?;
        let ctx = AcquisitionContext::new(&model, &prior, 0.0);
        let us = argmax(&Evaluator::new(ctx, AcquisitionKind::Us)?.scores(&probes)?);
        for kappa in [1e3, 1e6] {
            for kind in [
                AcquisitionKind::Ucb { kappa },
                AcquisitionKind::Pi { kappa },
                AcquisitionKind::Ei { kappa },
            ] {
                let got = argmax(&Evaluator::new(ctx, kind)?.scores(&probes)?);
                if got != us {
                    failures.push(format!("model {case} {kind}"));
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        "120 comparisons agree".to_string()
    } else {
        format!("{} mismatches: {}", failures.len(), failures.join(", "))
    };
    Ok((failures.is_empty(), detail))
}
