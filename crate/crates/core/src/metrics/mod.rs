//! Reconstruction metrics and their aggregation across replicated missions.

mod aggregate;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use aggregate::{
    aggregate, cumulative_min, final_summary, median, median_absolute_deviation, AggregateRow,
    AggregateSeries, FinalSummary, Metric, write_csv as write_aggregate_csv,
};

use crate::density::{kde_on_grid, OutputDensity};
use crate::environments::Environment;
use crate::gp::GpModel;

pub const DEFAULT_PROBES: usize = 100_000;
/// Densities below this are excluded from the log-pdf error.
pub const PDFE_FLOOR: f64 = 1e-12;
const PDFE_GRID: usize = 1024;

/// Metric values at one decision epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub clock: f64,
    pub rmse: f64,
    pub pdfe: f64,
    /// Squared distance between the true and the predicted minimizer.
    pub dist_to_min: f64,
    /// `|f(z*) - f(z⁺)|`.
    pub regret: f64,
}

impl MetricSnapshot {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Rmse => self.rmse,
            Metric::Pdfe => self.pdfe,
            Metric::DistToMin => self.dist_to_min,
            Metric::Regret => self.regret,
        }
    }
}

/// Frozen set of uniform spatial probe points.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub points: Vec<[f64; 2]>,
    pub seed: u64,
}

impl ProbeSet {
    pub fn uniform(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
        Self { points, seed }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `√ mean (f - μ)²`.
pub fn rmse_of(f: &[f64], mu: &[f64]) -> f64 {
    let s: f64 = f.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
    (s / f.len() as f64).sqrt()
}

/// Squared minimizer distance and absolute regret from field values on the probes.
pub fn extremum_of(points: &[[f64; 2]], f: &[f64], mu: &[f64]) -> (f64, f64) {
    let argmin = |v: &[f64]| {
        v.iter()
            .enumerate()
            .fold(0, |best, (i, x)| if *x < v[best] { i } else { best })
    };
    let star = argmin(f);
    let plus = argmin(mu);
    let d0 = points[star][0] - points[plus][0];
    let d1 = points[star][1] - points[plus][1];
    (d0 * d0 + d1 * d1, (f[star] - f[plus]).abs())
}

/// `∫ |log p_f - log p_μ| dy` over the grid nodes where both densities exceed `floor`.
///
/// Both tables must share `lo`, `step` and length. Intervals with either endpoint below
/// the floor are skipped.
pub fn log_pdf_distance(p_f: &[f64], p_mu: &[f64], step: f64, floor: f64) -> f64 {
    let g: Vec<Option<f64>> = p_f
        .iter()
        .zip(p_mu)
        .map(|(a, b)| (*a > floor && *b > floor).then(|| (a.ln() - b.ln()).abs()))
        .collect();
    g.windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => 0.5 * (a + b) * step,
            _ => 0.0,
        })
        .sum()
}

/// Same integrand with both densities floored, over the whole grid.
fn floored_log_pdf_distance(p_f: &[f64], p_mu: &[f64], step: f64, floor: f64) -> f64 {
    let g: Vec<f64> = p_f
        .iter()
        .zip(p_mu)
        .map(|(a, b)| (a.max(floor).ln() - b.max(floor).ln()).abs())
        .collect();
    g.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum()
}

/// Log-pdf error between tabulated densities that share a grid.
pub fn pdfe_of_densities(p_f: &OutputDensity, p_mu: &OutputDensity) -> f64 {
    assert_eq!(p_f.values.len(), p_mu.values.len());
    log_pdf_distance(&p_f.values, &p_mu.values, p_f.step, PDFE_FLOOR)
}

/// Log-pdf error from field samples: both KDEs on a common 1024-node grid.
///
/// Constant samples on either side switch to the floored integrand over the whole grid
/// (zero when both are the same constant).
pub fn pdfe_of(f: &[f64], mu: &[f64]) -> f64 {
    let range = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
    };
    let (f_lo, f_hi) = range(f);
    let (m_lo, m_hi) = range(mu);
    let f_const = f_hi - f_lo <= 0.0;
    let m_const = m_hi - m_lo <= 0.0;
    if f_const && m_const && f_lo == m_lo {
        return 0.0;
    }
    let h_f = crate::density::silverman_bandwidth(f).max(1e-12);
    let h_m = crate::density::silverman_bandwidth(mu).max(1e-12);
    let pad = 3.0 * h_f.max(h_m);
    let lo = f_lo.min(m_lo) - pad;
    let hi = f_hi.max(m_hi) + pad;
    let step = (hi - lo) / (PDFE_GRID - 1) as f64;
    let (pf, _) = kde_on_grid(f, lo, step, PDFE_GRID);
    let (pm, _) = kde_on_grid(mu, lo, step, PDFE_GRID);
    if f_const || m_const {
        floored_log_pdf_distance(&pf, &pm, step, PDFE_FLOOR)
    } else {
        log_pdf_distance(&pf, &pm, step, PDFE_FLOOR)
    }
}

/// Root-mean-square error of the surrogate mean at time `t`.
pub fn rmse(env: &Environment, model: &GpModel, t: f64, probes: &ProbeSet) -> f64 {
    let (f, mu) = field_pair(env, model, t, probes);
    rmse_of(&f, &mu)
}

pub fn pdfe(env: &Environment, model: &GpModel, t: f64, probes: &ProbeSet) -> f64 {
    let (f, mu) = field_pair(env, model, t, probes);
    pdfe_of(&f, &mu)
}

/// `(ℓ, r)` over the probe set.
pub fn extremum_metrics(env: &Environment, model: &GpModel, t: f64, probes: &ProbeSet) -> (f64, f64) {
    let (f, mu) = field_pair(env, model, t, probes);
    extremum_of(&probes.points, &f, &mu)
}

fn field_pair(env: &Environment, model: &GpModel, t: f64, probes: &ProbeSet) -> (Vec<f64>, Vec<f64>) {
    let f = probes.points.iter().map(|z| env.eval(*z, t)).collect();
    (f, model.posterior_mean_at(&probes.points, t))
}

/// All four metrics from field and surrogate values on the probes.
pub fn snapshot_of(clock: f64, points: &[[f64; 2]], f: &[f64], mu: &[f64]) -> MetricSnapshot {
    let (dist_to_min, regret) = extremum_of(points, f, mu);
    MetricSnapshot {
        clock,
        rmse: rmse_of(f, mu),
        pdfe: pdfe_of(f, mu),
        dist_to_min,
        regret,
    }
}

/// Computes snapshots for one mission, caching the true field when it does not move.
#[derive(Debug, Clone)]
pub struct MetricEvaluator {
    probes: ProbeSet,
    static_field: Option<Vec<f64>>,
}

impl MetricEvaluator {
    pub fn new(env: &Environment, probes: ProbeSet) -> Self {
        let static_field =
            (!env.is_dynamic()).then(|| probes.points.iter().map(|z| env.eval(*z, 0.0)).collect());
        Self {
            probes,
            static_field,
        }
    }

    pub fn probes(&self) -> &ProbeSet {
        &self.probes
    }

    pub fn snapshot(&self, env: &Environment, model: &GpModel, t: f64) -> MetricSnapshot {
        let mu = model.posterior_mean_at(&self.probes.points, t);
        match &self.static_field {
            Some(f) => snapshot_of(t, &self.probes.points, f, &mu),
            None => {
                let f: Vec<f64> = self.probes.points.iter().map(|z| env.eval(*z, t)).collect();
                snapshot_of(t, &self.probes.points, &f, &mu)
            }
        }
    }
}
