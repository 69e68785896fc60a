//! Closed-form `∫_{[0,1]²} cov²(x, z') w_GMM(z') dz'` for the RBF kernel.
//!
//! Writing `cov(x, ·) = Σ_p c_p k(P_p, ·)` with `P_0 = x, c_0 = 1` and
//! `P_i = X_i, c_i = -b_i` where `b = K⁻¹ k(X, x)`, the squared covariance is a
//! double sum of products of two Gaussians in `z'`. Each product times one mixture
//! component integrates over the box to
//!
//! ```text
//! α exp(-¼|a-b|²_{A⁻¹}) (|B|/|B+Σ|)^{1/2} exp(-½|m-ω|²_{(B+Σ)⁻¹}) P_box(N(c, C))
//! ```
//!
//! with `A = diag(ℓ²)`, `B = A/2`, `m = (a+b)/2`, `C = (B⁻¹+Σ⁻¹)⁻¹` and
//! `c = C(B⁻¹m + Σ⁻¹ω)`.

use nalgebra::{DMatrix, DVector};

use crate::density::GmmSurrogate;
use crate::gp::GpModel;
use crate::space::InputMap;
use crate::special::{bvn_box, norm_cdf};

/// Standardized distance beyond which a box edge is treated as infinitely far.
const BOX_EDGE_SIGMAS: f64 = 8.5;
/// Pair terms whose Gaussian envelope falls below this are dropped.
const ENVELOPE_CUTOFF: f64 = 1e-18;

type M2 = [[f64; 2]; 2];

fn inv2(m: M2) -> (M2, f64) {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    (
        [
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ],
        det,
    )
}

fn mul2(a: M2, b: M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn apply2(a: M2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn quad2(a: M2, v: [f64; 2]) -> f64 {
    let w = apply2(a, v);
    v[0] * w[0] + v[1] * w[1]
}

#[derive(Debug, Clone)]
struct Component {
    weight: f64,
    mean: [f64; 2],
    /// `(B+Σ)⁻¹`
    s_inv: M2,
    /// `α (|B|/|B+Σ|)^{1/2}`
    scale: f64,
    /// `C B⁻¹`
    p: M2,
    /// `C Σ⁻¹ ω`
    q: [f64; 2],
    c: M2,
    sd: [f64; 2],
}

/// Per-epoch precomputation for the box integrals against a fixed mixture.
#[derive(Debug, Clone)]
pub struct PairIntegrals {
    inv_a: [f64; 2],
    comps: Vec<Component>,
}

impl PairIntegrals {
    /// `lengthscales` are the two spatial lengthscales `ℓ₁, ℓ₂`.
    pub fn new(lengthscales: [f64; 2], gmm: &GmmSurrogate) -> Self {
        let b = [
            [0.5 * lengthscales[0].powi(2), 0.0],
            [0.0, 0.5 * lengthscales[1].powi(2)],
        ];
        let (b_inv, b_det) = inv2(b);
        let comps = gmm
            .components
            .iter()
            .map(|g| {
                let s = [
                    [b[0][0] + g.cov[0][0], g.cov[0][1]],
                    [g.cov[1][0], b[1][1] + g.cov[1][1]],
                ];
                let (s_inv, s_det) = inv2(s);
                let (sig_inv, _) = inv2(g.cov);
                let prec = [
                    [b_inv[0][0] + sig_inv[0][0], sig_inv[0][1]],
                    [sig_inv[1][0], b_inv[1][1] + sig_inv[1][1]],
                ];
                let (c, _) = inv2(prec);
                Component {
                    weight: g.weight,
                    mean: g.mean,
                    s_inv,
                    scale: g.weight * (b_det / s_det).sqrt(),
                    p: mul2(c, b_inv),
                    q: apply2(mul2(c, sig_inv), g.mean),
                    c,
                    sd: [c[0][0].sqrt(), c[1][1].sqrt()],
                }
            })
            .collect();
        Self {
            inv_a: [1.0 / lengthscales[0].powi(2), 1.0 / lengthscales[1].powi(2)],
            comps,
        }
    }

    /// `∫_{[0,1]²} exp(-½|z'-a|²_{A⁻¹}) exp(-½|z'-b|²_{A⁻¹}) w_GMM(z') dz'`.
    pub fn pair(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = [a[0] - b[0], a[1] - b[1]];
        let envelope = (-0.25 * (d[0] * d[0] * self.inv_a[0] + d[1] * d[1] * self.inv_a[1])).exp();
        if envelope < ENVELOPE_CUTOFF {
            return 0.0;
        }
        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let mut acc = 0.0;
        for g in &self.comps {
            if g.weight == 0.0 {
                continue;
            }
            let dm = [m[0] - g.mean[0], m[1] - g.mean[1]];
            let gauss = g.scale * (-0.5 * quad2(g.s_inv, dm)).exp();
            if gauss * envelope < ENVELOPE_CUTOFF * g.scale {
                continue;
            }
            let pm = apply2(g.p, m);
            let c = [pm[0] + g.q[0], pm[1] + g.q[1]];
            let inside = |k: usize| c[k] / g.sd[k] > BOX_EDGE_SIGMAS && (1.0 - c[k]) / g.sd[k] > BOX_EDGE_SIGMAS;
            let edge = |k: usize| norm_cdf((1.0 - c[k]) / g.sd[k]) - norm_cdf(-c[k] / g.sd[k]);
            let p_box = match (inside(0), inside(1)) {
                (true, true) => 1.0,
                (true, false) => edge(1),
                (false, true) => edge(0),
                (false, false) => bvn_box(c, g.c, 0.0, 1.0),
            };
            acc += gauss * p_box;
        }
        envelope * acc
    }
}

/// Precomputed data-side terms of the likelihood-weighted IVR integral for one epoch.
#[derive(Debug, Clone)]
pub struct LwIntegral {
    pairs: PairIntegrals,
    /// Spatial part of every training input.
    zs: Vec<[f64; 2]>,
    /// Time factors `g_i` of every training input against the decision time.
    g: Vec<f64>,
    /// `M_ik = g_i g_k J(X_i, X_k)`.
    m: DMatrix<f64>,
    time: Option<(f64, f64)>,
    signal_sq: f64,
}

impl LwIntegral {
    pub fn new(model: &GpModel, gmm: &GmmSurrogate, t_dec: f64) -> Self {
        let p = model.params();
        let ls = &p.lengthscales;
        let pairs = PairIntegrals::new([ls[0], ls[1]], gmm);
        let map = InputMap::for_dims(model.dims());
        let time = match map {
            InputMap::SpaceTime => Some((t_dec, ls[2])),
            InputMap::Space => None,
        };
        let inputs = &model.data().inputs;
        let zs: Vec<[f64; 2]> = inputs.iter().map(|x| InputMap::spatial(x)).collect();
        let g: Vec<f64> = inputs.iter().map(|x| time_factor(time, x)).collect();
        let n = zs.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in 0..=i {
                let v = g[i] * g[k] * pairs.pair(zs[i], zs[k]);
                m[(i, k)] = v;
                m[(k, i)] = v;
            }
        }
        Self {
            pairs,
            zs,
            g,
            m,
            time,
            signal_sq: p.signal_variance * p.signal_variance,
        }
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.signal_sq *= factor;
    }

    /// `∫ cov²(x, (z', t_dec)) w_GMM(z') dz'` over the unit square.
    ///
    /// `b` must be `K⁻¹ k(X, x)`.
    pub fn integral(&self, x: &[f64], b: &DVector<f64>) -> f64 {
        let z = InputMap::spatial(x);
        let g0 = time_factor(self.time, x);
        let self_term = g0 * g0 * self.pairs.pair(z, z);
        if self.zs.is_empty() {
            return self.signal_sq * self_term.max(0.0);
        }
        let mut cross = 0.0;
        for ((zi, gi), bi) in self.zs.iter().zip(&self.g).zip(b.iter()) {
            if *bi != 0.0 && *gi != 0.0 {
                cross += bi * gi * self.pairs.pair(z, *zi);
            }
        }
        let quad = b.dot(&(&self.m * b));
        (self.signal_sq * (self_term - 2.0 * g0 * cross + quad)).max(0.0)
    }
}

impl LwIntegral {
    /// `∫ cov²(x, ·) w_GMM / σ²(x)` for many points, or 0 where `σ²(x)` is at most `floor`.
    pub fn ivr_batch(&self, model: &GpModel, points: &[Vec<f64>], floor: f64) -> Vec<f64> {
        const BLOCK: usize = 256;
        let prior = model.params().signal_variance;
        let mut out = Vec::with_capacity(points.len());
        if self.zs.is_empty() {
            for x in points {
                out.push(if prior <= floor { 0.0 } else { self.integral(x, &DVector::zeros(0)) / prior });
            }
            return out;
        }
        for block in points.chunks(BLOCK) {
            let mut b = model.whitened_block(block);
            let var: Vec<f64> = b
                .column_iter()
                .map(|c| (prior - c.norm_squared()).clamp(0.0, prior))
                .collect();
            model.chol().tr_solve_lower_triangular_mut(&mut b);
            let mb = &self.m * &b;
            for (j, x) in block.iter().enumerate() {
                if var[j] <= floor {
                    out.push(0.0);
                    continue;
                }
                let bj = b.column(j);
                let quad = bj.dot(&mb.column(j));
                let z = InputMap::spatial(x);
                let g0 = time_factor(self.time, x);
                let self_term = g0 * g0 * self.pairs.pair(z, z);
                let mut cross = 0.0;
                for ((zi, gi), bi) in self.zs.iter().zip(&self.g).zip(bj.iter()) {
                    if *bi != 0.0 && *gi != 0.0 {
                        cross += bi * gi * self.pairs.pair(z, *zi);
                    }
                }
                let v = (self.signal_sq * (self_term - 2.0 * g0 * cross + quad)).max(0.0);
                out.push(v / var[j]);
            }
        }
        out
    }
}

fn time_factor(time: Option<(f64, f64)>, x: &[f64]) -> f64 {
    match time {
        Some((t_dec, ell)) => {
            let d = (x[2] - t_dec) / ell;
            (-0.5 * d * d).exp()
        }
        None => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::GmmComponent;

    fn mixture() -> GmmSurrogate {
        GmmSurrogate {
            components: vec![
                GmmComponent {
                    weight: 0.7,
                    mean: [0.3, 0.6],
                    cov: [[0.02, 0.008], [0.008, 0.03]],
                },
                GmmComponent {
                    weight: 1.9,
                    mean: [0.95, 0.1],
                    cov: [[0.01, -0.004], [-0.004, 0.05]],
                },
            ],
        }
    }

    fn midpoint(f: impl Fn([f64; 2]) -> f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += f([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
            }
        }
        acc * h * h
    }

    #[test]
    fn pair_integral_matches_quadrature() {
        let ls = [0.15, 0.3];
        let gmm = mixture();
        let pi = PairIntegrals::new(ls, &gmm);
        let k = |a: [f64; 2], z: [f64; 2]| {
            (-0.5 * ((a[0] - z[0]).powi(2) / ls[0].powi(2) + (a[1] - z[1]).powi(2) / ls[1].powi(2))).exp()
        };
        for (a, b) in [
            ([0.5, 0.5], [0.5, 0.5]),
            ([0.1, 0.9], [0.2, 0.7]),
            ([0.9, 0.05], [0.99, 0.2]),
            ([0.0, 0.0], [1.0, 1.0]),
        ] {
            let oracle = midpoint(|z| k(a, z) * k(b, z) * gmm.eval(z), 2400);
            let got = pi.pair(a, b);
            assert!((got - oracle).abs() <= 1e-6 * oracle.abs().max(1e-12), "{a:?} {b:?}: {got} vs {oracle}");
        }
    }

    #[test]
    fn narrow_component_samples_the_kernels() {
        let gmm = GmmSurrogate {
            components: vec![GmmComponent {
                weight: 1.0,
                mean: [0.5, 0.5],
                cov: [[1e-4, 0.0], [0.0, 1e-4]],
            }],
        };
        let pi = PairIntegrals::new([0.2, 0.2], &gmm);
        // narrow mixture: integral ≈ product of kernels at the mixture mean
        let a = [0.45, 0.52];
        let expect = (-0.5 * (0.05f64.powi(2) + 0.02f64.powi(2)) / 0.04 * 2.0).exp();
        assert!((pi.pair(a, a) / expect - 1.0).abs() < 5e-3);
    }
}
