//! Acquisition functions.
//!
//! Every function here returns a utility where larger means more informative.
//! Destination selection minimizes the negated score, see [`Evaluator::scores`].

pub mod analytic;
mod kind;
pub mod quadrature;


pub use analytic::{LwIntegral, PairIntegrals};
pub use kind::AcquisitionKind;
pub use quadrature::IvrGrid;

use crate::density::{InputPrior, LikelihoodWeight};
use crate::error::{contract, Error, Result};
use crate::gp::{GpModel, VARIANCE_FLOOR};
use crate::space::InputMap;
use crate::special::{log_ei_bracket, log_norm_cdf, norm_cdf, norm_pdf};

pub const DEFAULT_QUADRATURE: usize = 64;

/// Everything an acquisition needs at one decision epoch.
#[derive(Debug, Clone, Copy)]
pub struct AcquisitionContext<'a> {
    pub model: &'a GpModel,
    pub weight: Option<&'a LikelihoodWeight>,
    pub prior: &'a InputPrior,
    /// Decision time; IVR integrals are taken over space at this time.
    pub t: f64,
    /// Smallest observation so far.
    pub y_star: f64,
    /// Nodes per axis of the IVR quadrature grid.
    pub quad: usize,
}

impl<'a> AcquisitionContext<'a> {
    pub fn new(model: &'a GpModel, prior: &'a InputPrior, t: f64) -> Self {
        let y_star = model
            .data()
            .outputs
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        Self {
            model,
            weight: None,
            prior,
            t,
            y_star,
            quad: DEFAULT_QUADRATURE,
        }
    }

    pub fn with_weight(mut self, weight: &'a LikelihoodWeight) -> Self {
        self.weight = Some(weight);
        self
    }

    pub fn with_quadrature(mut self, n: usize) -> Self {
        self.quad = n;
        self
    }

    fn floor(&self) -> f64 {
        VARIANCE_FLOOR * self.model.params().signal_variance
    }

    fn require_weight(&self) -> Result<&'a LikelihoodWeight> {
        self.weight
            .ok_or_else(|| Error::Config("likelihood-weighted acquisition needs a likelihood weight".into()))
    }
}

/// Input-weighted or likelihood-weighted variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Iw,
    Lw,
}

/// Classic Bayesian-optimization criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classic {
    Ucb,
    Pi,
    Ei,
}

/// Acquisition evaluator with per-epoch precomputation done once.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    ctx: AcquisitionContext<'a>,
    kind: AcquisitionKind,
    grid: Option<IvrGrid>,
    lw: Option<LwIntegral>,
}

impl<'a> Evaluator<'a> {
    pub fn new(ctx: AcquisitionContext<'a>, kind: AcquisitionKind) -> Result<Self> {
        if ctx.quad < 2 {
            return Err(contract("quadrature needs at least 2 nodes per axis"));
        }
        let mut grid = None;
        let mut lw = None;
        match kind {
            AcquisitionKind::UsLw => {
                ctx.require_weight()?;
            }
            AcquisitionKind::Ivr => grid = Some(IvrGrid::new(ctx.model, ctx.quad, ctx.t, |_| 1.0)),
            AcquisitionKind::IvrIw => {
                let prior = ctx.prior;
                grid = Some(IvrGrid::new(ctx.model, ctx.quad, ctx.t, |z| prior.pdf(z)));
            }
            AcquisitionKind::IvrLw => {
                let w = ctx.require_weight()?;
                lw = Some(LwIntegral::new(ctx.model, &w.gmm, ctx.t));
            }
            AcquisitionKind::Ucb { .. } | AcquisitionKind::Pi { .. } | AcquisitionKind::Ei { .. } => {
                if !ctx.y_star.is_finite() {
                    return Err(Error::Config(
                        "classic criteria need at least one observation".into(),
                    ));
                }
            }
            AcquisitionKind::Us | AcquisitionKind::UsIw | AcquisitionKind::Flat => {}
        }
        Ok(Self { ctx, kind, grid, lw })
    }

    pub fn kind(&self) -> AcquisitionKind {
        self.kind
    }

    pub fn context(&self) -> &AcquisitionContext<'a> {
        &self.ctx
    }

    /// Multiplies the analytic likelihood-weighted integral by `factor`.
    #[doc(hidden)]
    pub fn corrupt_analytic_constant(&mut self, factor: f64) {
        if let Some(lw) = self.lw.as_mut() {
            lw.scale(factor);
        }
    }

    /// Acquisition values `a(x)`.
    pub fn utilities(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.eval(points, false)
    }

    /// Values used for ranking: `a(x)`, except `log a(x)` for PI and EI so that
    /// comparisons survive underflow at large `κ`.
    pub fn scores(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.eval(points, true)
    }

    pub fn utility(&self, x: &[f64]) -> Result<f64> {
        Ok(self.utilities(&[x.to_vec()])?[0])
    }

    fn eval(&self, points: &[Vec<f64>], log_scale: bool) -> Result<Vec<f64>> {
        let m = self.ctx.model;
        for x in points {
            if x.len() != m.dims() {
                return Err(contract(format!(
                    "query is {}-dimensional but model is {}-dimensional",
                    x.len(),
                    m.dims()
                )));
            }
        }
        let floor = self.ctx.floor();
        let out = match self.kind {
            AcquisitionKind::Flat => vec![0.0; points.len()],
            AcquisitionKind::Us => points.iter().map(|x| m.var_unchecked(x)).collect(),
            AcquisitionKind::UsIw => points
                .iter()
                .map(|x| m.var_unchecked(x) * self.ctx.prior.pdf(InputMap::spatial(x)))
                .collect(),
            AcquisitionKind::UsLw => {
                let w = self.ctx.require_weight()?;
                points
                    .iter()
                    .map(|x| {
                        let (mu, var) = mean_var(m, x);
                        var * w.ratio_from_mean(InputMap::spatial(x), mu)
                    })
                    .collect()
            }
            AcquisitionKind::Ivr | AcquisitionKind::IvrIw => {
                self.grid.as_ref().expect("grid built in new").ivr(m, points, floor)
            }
            AcquisitionKind::IvrLw => {
                self.lw.as_ref().expect("integral built in new").ivr_batch(m, points, floor)
            }
            AcquisitionKind::Ucb { kappa } => points
                .iter()
                .map(|x| classic_value(m, x, Classic::Ucb, kappa, self.ctx.y_star, floor, false))
                .collect(),
            AcquisitionKind::Pi { kappa } => points
                .iter()
                .map(|x| classic_value(m, x, Classic::Pi, kappa, self.ctx.y_star, floor, log_scale))
                .collect(),
            AcquisitionKind::Ei { kappa } => points
                .iter()
                .map(|x| classic_value(m, x, Classic::Ei, kappa, self.ctx.y_star, floor, log_scale))
                .collect(),
        };
        Ok(out)
    }
}

fn mean_var(m: &GpModel, x: &[f64]) -> (f64, f64) {
    let prior = m.params().signal_variance;
    if m.data().is_empty() {
        return (m.offset(), prior);
    }
    let k = m.kernel_column(x);
    let mean = m.offset() + k.dot(m.alpha());
    let mut v = k;
    m.chol().solve_lower_triangular_mut(&mut v);
    (mean, (prior - v.norm_squared()).clamp(0.0, prior))
}

fn classic_value(
    m: &GpModel,
    x: &[f64],
    which: Classic,
    kappa: f64,
    y_star: f64,
    floor: f64,
    log_scale: bool,
) -> f64 {
    let (mu, var) = mean_var(m, x);
    let sigma = var.sqrt();
    if which == Classic::Ucb {
        return -mu + kappa * sigma;
    }
    let gap = y_star - mu - kappa;
    let value = if var <= floor {
        match which {
            Classic::Pi => {
                if gap > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => gap.max(0.0),
        }
    } else {
        let lambda = gap / sigma;
        match (which, log_scale) {
            (Classic::Pi, true) => return log_norm_cdf(lambda),
            (Classic::Pi, false) => norm_cdf(lambda),
            (_, true) => return sigma.ln() + log_ei_bracket(lambda),
            (_, false) => sigma * (lambda * norm_cdf(lambda) + norm_pdf(lambda)),
        }
    };
    if log_scale {
        value.ln()
    } else {
        value
    }
}

/// Uncertainty sampling: `σ²(x)`.
pub fn acq_us(ctx: &AcquisitionContext, x: &[f64]) -> Result<f64> {
    ctx.model.posterior_var(x)
}

/// `σ²(x) p_x(x)` (IW) or `σ²(x) w(x)` with the raw likelihood ratio (LW).
pub fn acq_us_weighted(ctx: &AcquisitionContext, x: &[f64], mode: WeightMode) -> Result<f64> {
    let kind = match mode {
        WeightMode::Iw => AcquisitionKind::UsIw,
        WeightMode::Lw => AcquisitionKind::UsLw,
    };
    Evaluator::new(*ctx, kind)?.utility(x)
}

/// `∫ cov²(x, x') dx' / σ²(x)` over the unit square at the decision time, by midpoint quadrature.
pub fn acq_ivr(ctx: &AcquisitionContext, x: &[f64]) -> Result<f64> {
    Evaluator::new(*ctx, AcquisitionKind::Ivr)?.utility(x)
}

/// IW: `∫ cov² p_x / σ²(x)` by quadrature. LW: `∫ cov² w_GMM / σ²(x)` in closed form.
pub fn acq_ivr_weighted(ctx: &AcquisitionContext, x: &[f64], mode: WeightMode) -> Result<f64> {
    let kind = match mode {
        WeightMode::Iw => AcquisitionKind::IvrIw,
        WeightMode::Lw => AcquisitionKind::IvrLw,
    };
    Evaluator::new(*ctx, kind)?.utility(x)
}

/// Minimization-form UCB, PI or EI with `λ(x) = (y* - μ(x) - κ)/σ(x)`.
pub fn acq_classic(ctx: &AcquisitionContext, x: &[f64], which: Classic, kappa: f64) -> Result<f64> {
    let kind = match which {
        Classic::Ucb => AcquisitionKind::Ucb { kappa },
        Classic::Pi => AcquisitionKind::Pi { kappa },
        Classic::Ei => AcquisitionKind::Ei { kappa },
    };
    Evaluator::new(*ctx, kind)?.utility(x)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if !(*v > values[b]) => {}
            _ if v.is_nan() => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{GmmComponent, GmmSurrogate, OutputDensity};
    use crate::gp::{Dataset, KernelParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64, n: usize, dims: usize) -> GpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..dims).map(|_| rng.gen()).collect()).collect();
        let outputs = inputs.iter().map(|x| (5.0 * x[0]).sin() * (3.0 * x[1]).cos()).collect();
        let mut ls = vec![0.2, 0.25];
        if dims == 3 {
            ls.push(0.8);
        }
        let p = KernelParams::new(1.3, ls, 1e-4).unwrap();
        GpModel::new(p, Dataset::new(inputs, outputs).unwrap()).unwrap()
    }

    fn flat_weight(prior: &InputPrior) -> LikelihoodWeight {
        LikelihoodWeight {
            prior: prior.clone(),
            out_density: OutputDensity::tabulate(-10.0, 10.0, 64, |_| 0.05, 1e-9),
            gmm: GmmSurrogate {
                components: vec![GmmComponent {
                    weight: 2.0,
                    mean: [0.4, 0.6],
                    cov: [[0.05, 0.01], [0.01, 0.08]],
                }],
            },
            sample_count: 0,
            time: 0.0,
        }
    }

    #[test]
    fn us_is_posterior_variance() {
        let m = model(0, 12, 2);
        let prior = InputPrior::Uniform;
        let ctx = AcquisitionContext::new(&m, &prior, 0.0);
        let ev = Evaluator::new(ctx, AcquisitionKind::Us).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let vals = ev.utilities(&pts).unwrap();
        for (p, v) in pts.iter().zip(vals) {
            assert_eq!(v, m.posterior_var(p).unwrap());
        }
    }

    #[test]
    fn missing_weight_is_a_config_error() {
        let m = model(1, 5, 2);
        let prior = InputPrior::Uniform;
        let ctx = AcquisitionContext::new(&m, &prior, 0.0);
        assert!(matches!(
            Evaluator::new(ctx, AcquisitionKind::IvrLw),
            Err(Error::Config(_))
        ));
        assert!(acq_us_weighted(&ctx, &[0.5, 0.5], WeightMode::Lw).is_err());
    }

    #[test]
    fn ivr_matches_direct_sum_of_conditional_variance_drop() {
        for dims in [2, 3] {
            let m = model(2, 15, dims);
            let prior = InputPrior::Uniform;
            let ctx = AcquisitionContext::new(&m, &prior, 0.4).with_quadrature(16);
            let x: Vec<f64> = if dims == 3 { vec![0.3, 0.7, 0.1] } else { vec![0.3, 0.7] };
            let got = acq_ivr(&ctx, &x).unwrap();
            let var = m.posterior_var(&x).unwrap();
            let mut direct = 0.0;
            for j in 0..16 {
                for i in 0..16 {
                    let g = InputMap::for_dims(dims).point([(i as f64 + 0.5) / 16.0, (j as f64 + 0.5) / 16.0], 0.4);
                    let c = m.posterior_cov(&x, &g).unwrap();
                    direct += c * c / var / 256.0;
                }
            }
            assert!((got - direct).abs() < 1e-10 * direct, "{got} vs {direct}");
        }
    }

    #[test]
    fn ivr_lw_analytic_matches_quadrature() {
        for dims in [2, 3] {
            let m = model(3, 20, dims);
            let prior = InputPrior::Uniform;
            let w = flat_weight(&prior);
            let ctx = AcquisitionContext::new(&m, &prior, 0.5).with_weight(&w);
            let ev = Evaluator::new(ctx, AcquisitionKind::IvrLw).unwrap();
            let x: Vec<f64> = if dims == 3 { vec![0.6, 0.2, 0.35] } else { vec![0.6, 0.2] };
            let got = ev.utility(&x).unwrap();
            let var = m.posterior_var(&x).unwrap();
            let n = 200;
            let mut quad = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let z = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
                    let c = m.posterior_cov(&x, &InputMap::for_dims(dims).point(z, 0.5)).unwrap();
                    quad += c * c * w.gmm.eval(z);
                }
            }
            quad /= (n * n) as f64 * var;
            assert!((got - quad).abs() < 1e-4 * quad, "{dims}: {got} vs {quad}");
        }
    }

    #[test]
    fn classic_limits_at_observed_point() {
        let p = KernelParams::isotropic(2, 1.0, 0.3, 1e-10);
        let m = GpModel::new(p, Dataset::new(vec![vec![0.5, 0.5], vec![0.1, 0.1]], vec![1.0, 2.0]).unwrap()).unwrap();
        let prior = InputPrior::Uniform;
        let ctx = AcquisitionContext::new(&m, &prior, 0.0);
        let ei = acq_classic(&ctx, &[0.5, 0.5], Classic::Ei, 0.0).unwrap();
        assert!(ei.abs() < 1e-4, "{ei}");
        let ucb_a = acq_classic(&ctx, &[0.5, 0.5], Classic::Ucb, 0.0).unwrap();
        let ucb_b = acq_classic(&ctx, &[0.1, 0.1], Classic::Ucb, 0.0).unwrap();
        assert!(ucb_a > ucb_b);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax(&[f64::NAN, 0.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }
}
