//! Weighted expectation-maximization for two-dimensional Gaussian mixtures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::prior::gaussian_pdf;
use crate::error::{contract, Result};

/// Smallest eigenvalue allowed for a component covariance.
pub const COVARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

/// `Σ_i α_i N(z; ω_i, Σ_i)`; the `α_i` need not sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSurrogate {
    pub components: Vec<GmmComponent>,
}

impl GmmSurrogate {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, z: [f64; 2]) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * gaussian_pdf(z, c.mean, c.cov))
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Same shape with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| GmmComponent {
                    weight: c.weight * factor,
                    ..c.clone()
                })
                .collect(),
        }
    }
}

/// Output of [`fit_gmm`].
#[derive(Debug, Clone)]
pub struct GmmFit {
    /// Mixture with weights summing to one.
    pub gmm: GmmSurrogate,
    /// Weighted log-likelihood after each EM iteration (index 0 is the initialization).
    pub log_likelihood: Vec<f64>,
    /// Iterations at which a collapsed component was re-seeded.
    pub reinitialized_at: Vec<usize>,
}

fn floor_cov(c: [[f64; 2]; 2]) -> ([[f64; 2]; 2], bool) {
    let tr = c[0][0] + c[1][1];
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let lmin = 0.5 * tr - disc;
    if lmin >= COVARIANCE_FLOOR {
        (c, false)
    } else {
        let add = COVARIANCE_FLOOR - lmin;
        ([[c[0][0] + add, c[0][1]], [c[1][0], c[1][1] + add]], true)
    }
}

fn weighted_moments(points: &[[f64; 2]], weights: &[f64]) -> ([f64; 2], [[f64; 2]; 2]) {
    let total: f64 = weights.iter().sum();
    let mut m = [0.0; 2];
    for (p, w) in points.iter().zip(weights) {
        m[0] += w * p[0];
        m[1] += w * p[1];
    }
    m[0] /= total;
    m[1] /= total;
    let mut c = [[0.0; 2]; 2];
    for (p, w) in points.iter().zip(weights) {
        let d = [p[0] - m[0], p[1] - m[1]];
        c[0][0] += w * d[0] * d[0];
        c[0][1] += w * d[0] * d[1];
        c[1][1] += w * d[1] * d[1];
    }
    c[0][0] /= total;
    c[0][1] /= total;
    c[1][1] /= total;
    c[1][0] = c[0][1];
    (m, floor_cov(c).0)
}

/// Fills responsibilities for `comps` and returns the weighted log-likelihood of `comps`.
fn e_step(points: &[[f64; 2]], weights: &[f64], comps: &[GmmComponent], resp: &mut [f64]) -> f64 {
    let k = comps.len();
    let pre: Vec<([f64; 2], [[f64; 2]; 2], f64)> = comps
        .iter()
        .map(|c| {
            let det = c.cov[0][0] * c.cov[1][1] - c.cov[0][1] * c.cov[1][0];
            let inv = [
                [c.cov[1][1] / det, -c.cov[0][1] / det],
                [-c.cov[1][0] / det, c.cov[0][0] / det],
            ];
            (c.mean, inv, c.weight / (2.0 * std::f64::consts::PI * det.sqrt()))
        })
        .collect();
    let mut ll = 0.0;
    for ((p, w), row) in points.iter().zip(weights).zip(resp.chunks_mut(k)) {
        let mut s = 0.0;
        for (r, (m, inv, norm)) in row.iter_mut().zip(&pre) {
            let d = [p[0] - m[0], p[1] - m[1]];
            let q = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
            *r = norm * (-0.5 * q).exp();
            s += *r;
        }
        if s > 0.0 {
            row.iter_mut().for_each(|r| *r /= s);
        } else {
            row.iter_mut().for_each(|r| *r = 1.0 / k as f64);
        }
        ll += w * s.max(1e-300).ln();
    }
    ll
}

/// Weighted EM fit of an `n_components` mixture.
///
/// Means are seeded by weighted k-means++; covariances start at the global weighted covariance.
/// A component whose covariance collapses below the floor is re-seeded once at the
/// worst-explained sample; after that its covariance is floored.
pub fn fit_gmm<R: Rng>(
    points: &[[f64; 2]],
    weights: &[f64],
    n_components: usize,
    max_iter: usize,
    rng: &mut R,
) -> Result<GmmFit> {
    if n_components == 0 {
        return Err(contract("a mixture needs at least one component"));
    }
    if points.len() != weights.len() {
        return Err(contract("points and weights differ in length"));
    }
    if points.len() < 10 * n_components {
        return Err(contract(format!(
            "{} samples is too few for {} components",
            points.len(),
            n_components
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(contract("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(contract("total sample weight must be positive"));
    }
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
    let (_, global_cov) = weighted_moments(points, &w);

    // weighted k-means++ seeding
    let mut means: Vec<[f64; 2]> = Vec::with_capacity(n_components);
    means.push(points[sample_index(&w, rng)]);
    while means.len() < n_components {
        let d2: Vec<f64> = points
            .iter()
            .zip(&w)
            .map(|(p, wi)| {
                let m = means
                    .iter()
                    .map(|m| (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2))
                    .fold(f64::INFINITY, f64::min);
                wi * m
            })
            .collect();
        let idx = if d2.iter().sum::<f64>() > 0.0 {
            sample_index(&d2, rng)
        } else {
            sample_index(&w, rng)
        };
        means.push(points[idx]);
    }
    let mut comps: Vec<GmmComponent> = means
        .into_iter()
        .map(|mean| GmmComponent {
            weight: 1.0 / n_components as f64,
            mean,
            cov: global_cov,
        })
        .collect();

    let k = n_components;
    let mut resp = vec![0.0; points.len() * k];
    let mut trace = vec![e_step(points, &w, &comps, &mut resp)];
    let mut reinit_used = vec![false; n_components];
    let mut reinitialized_at = Vec::new();
    for it in 1..=max_iter {
        // M step
        let mut reseeded = false;
        for j in 0..k {
            let rw: Vec<f64> = (0..points.len()).map(|i| w[i] * resp[i * k + j]).collect();
            let nk: f64 = rw.iter().sum();
            let collapsed = nk <= 1e-12;
            let (mean, cov, floored) = if collapsed {
                (comps[j].mean, comps[j].cov, true)
            } else {
                let (m, _) = weighted_moments(points, &rw);
                let mut c = [[0.0; 2]; 2];
                for (p, r) in points.iter().zip(&rw) {
                    let d = [p[0] - m[0], p[1] - m[1]];
                    c[0][0] += r * d[0] * d[0];
                    c[0][1] += r * d[0] * d[1];
                    c[1][1] += r * d[1] * d[1];
                }
                c[0][0] /= nk;
                c[0][1] /= nk;
                c[1][1] /= nk;
                c[1][0] = c[0][1];
                let (c, fl) = floor_cov(c);
                (m, c, fl)
            };
            if (collapsed || floored) && !reinit_used[j] {
                reinit_used[j] = true;
                reseeded = true;
                let worst = points
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| w[*i] > 0.0)
                    .map(|(i, p)| {
                        let d: f64 =
                            comps.iter().map(|c| c.weight * gaussian_pdf(*p, c.mean, c.cov)).sum();
                        (i, d)
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                comps[j] = GmmComponent {
                    weight: 1.0 / k as f64,
                    mean: points[worst],
                    cov: global_cov,
                };
            } else {
                comps[j] = GmmComponent {
                    weight: nk.max(1e-300),
                    mean,
                    cov,
                };
            }
        }
        let s: f64 = comps.iter().map(|c| c.weight).sum();
        comps.iter_mut().for_each(|c| c.weight /= s);
        let ll = e_step(points, &w, &comps, &mut resp);
        if reseeded {
            reinitialized_at.push(it);
        }
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if !reseeded && (ll - prev).abs() <= 1e-10 * (1.0 + ll.abs()) {
            break;
        }
    }
    Ok(GmmFit {
        gmm: GmmSurrogate { components: comps },
        log_likelihood: trace,
        reinitialized_at,
    })
}

fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 && *w > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn monotone(trace: &[f64]) -> bool {
        trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0))
    }

    #[test]
    fn single_gaussian_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let nx = Normal::new(0.4, 0.1).unwrap();
        let ny = Normal::new(0.6, 0.05).unwrap();
        let pts: Vec<[f64; 2]> = (0..10_000).map(|_| [nx.sample(&mut rng), ny.sample(&mut rng)]).collect();
        let w = vec![1.0; pts.len()];
        let fit = fit_gmm(&pts, &w, 1, 100, &mut rng).unwrap();
        let c = &fit.gmm.components[0];
        assert!((c.mean[0] - 0.4).abs() < 0.02 && (c.mean[1] - 0.6).abs() < 0.02);
        assert!((c.cov[0][0] / 0.01 - 1.0).abs() < 0.1);
        assert!((c.cov[1][1] / 0.0025 - 1.0).abs() < 0.1);
        assert!(monotone(&fit.log_likelihood));
    }

    #[test]
    fn two_clusters_are_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = Normal::new(0.0, 0.04).unwrap();
        let mut pts = Vec::new();
        for i in 0..4000 {
            let c = if i % 2 == 0 { [0.2, 0.3] } else { [0.75, 0.8] };
            pts.push([c[0] + n.sample(&mut rng), c[1] + n.sample(&mut rng)]);
        }
        let w = vec![1.0; pts.len()];
        let fit = fit_gmm(&pts, &w, 2, 200, &mut rng).unwrap();
        for target in [[0.2, 0.3], [0.75, 0.8]] {
            let best = fit
                .gmm
                .components
                .iter()
                .map(|c| ((c.mean[0] - target[0]).powi(2) + (c.mean[1] - target[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.05, "{best}");
        }
        assert!(monotone(&fit.log_likelihood));
    }

    #[test]
    fn uniform_weights_stay_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<[f64; 2]> = (0..3000).map(|_| [rng.gen(), rng.gen()]).collect();
        let w: Vec<f64> = (0..3000).map(|_| rng.gen::<f64>()).collect();
        let fit = fit_gmm(&pts, &w, 2, 300, &mut rng).unwrap();
        assert!(fit.reinitialized_at.is_empty());
        assert!(monotone(&fit.log_likelihood));
        let total = fit.gmm.total_weight();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = vec![[0.5, 0.5]; 5];
        assert!(fit_gmm(&pts, &[1.0; 5], 1, 10, &mut rng).is_err());
        let pts = vec![[0.5, 0.5]; 50];
        assert!(fit_gmm(&pts, &[0.0; 50], 1, 10, &mut rng).is_err());
        assert!(fit_gmm(&pts, &[1.0; 50], 0, 10, &mut rng).is_err());
    }

    #[test]
    fn identical_points_do_not_break() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = vec![[0.5, 0.5]; 100];
        let fit = fit_gmm(&pts, &[1.0; 100], 2, 50, &mut rng).unwrap();
        for c in &fit.gmm.components {
            assert!(c.cov[0][0] >= COVARIANCE_FLOOR * 0.999);
            assert!(c.weight > 0.0);
        }
    }
}
