//! Midpoint-rule integration of `cov²(x, ·)` over the unit square, batched over query points.

use nalgebra::DMatrix;

use crate::gp::GpModel;
use crate::space::InputMap;

/// Query points are processed in blocks of this size to bound memory.
const BLOCK: usize = 256;

/// Tensor midpoint grid at a fixed time with whitened cross-covariances precomputed.
#[derive(Debug, Clone)]
pub struct IvrGrid {
    n: usize,
    nodes: Vec<f64>,
    /// Quadrature weight of each grid point (cell area times any input weight).
    weights: Vec<f64>,
    /// `L⁻¹ k(X, G)`, one column per grid point.
    vg: DMatrix<f64>,
    t_dec: f64,
    map: InputMap,
}

impl IvrGrid {
    /// `weight(z)` multiplies the integrand; pass `|_| 1.0` for plain IVR.
    pub fn new(model: &GpModel, n: usize, t_dec: f64, weight: impl Fn([f64; 2]) -> f64) -> Self {
        let h = 1.0 / n as f64;
        let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let mut weights = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                weights.push(h * h * weight([nodes[i], nodes[j]]));
            }
        }
        let map = InputMap::for_dims(model.dims());
        let data = &model.data().inputs;
        let mut vg = DMatrix::zeros(data.len(), n * n);
        for (r, x) in data.iter().enumerate() {
            let row = separable_row(model, &nodes, x, t_dec, map);
            for (c, v) in row.into_iter().enumerate() {
                vg[(r, c)] = v;
            }
        }
        if !data.is_empty() {
            model.chol().solve_lower_triangular_mut(&mut vg);
        }
        Self {
            n,
            nodes,
            weights,
            vg,
            t_dec,
            map,
        }
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    /// `∫ cov²(x, x') weight(x') dx' / σ²(x)` for each point, or 0 where `σ²(x)` is below `floor`.
    pub fn ivr(&self, model: &GpModel, points: &[Vec<f64>], floor: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(points.len());
        let prior = model.params().signal_variance;
        for block in points.chunks(BLOCK) {
            let g = self.n * self.n;
            let mut cov = DMatrix::zeros(block.len(), g);
            for (r, x) in block.iter().enumerate() {
                let row = separable_row(model, &self.nodes, x, self.t_dec, self.map);
                for (c, v) in row.into_iter().enumerate() {
                    cov[(r, c)] = v;
                }
            }
            let var: Vec<f64> = if model.data().is_empty() {
                vec![prior; block.len()]
            } else {
                let wp = model.whitened_block(block);
                cov.gemm(-1.0, &wp.transpose(), &self.vg, 1.0);
                wp.column_iter()
                    .map(|c| (prior - c.norm_squared()).clamp(0.0, prior))
                    .collect()
            };
            for (r, v) in var.into_iter().enumerate() {
                if v <= floor {
                    out.push(0.0);
                    continue;
                }
                let row = cov.row(r);
                let s: f64 = row
                    .iter()
                    .zip(&self.weights)
                    .map(|(c, w)| w * c * c)
                    .sum();
                out.push(s / v);
            }
        }
        out
    }
}

/// `k(x, (g, t_dec))` for every grid point `g`, in grid order, using the
/// separability of the RBF kernel over axes.
fn separable_row(model: &GpModel, nodes: &[f64], x: &[f64], t_dec: f64, map: InputMap) -> Vec<f64> {
    let p = model.params();
    let ls = &p.lengthscales;
    let axis = |d: usize| -> Vec<f64> {
        nodes
            .iter()
            .map(|g| {
                let u = (x[d] - g) / ls[d];
                (-0.5 * u * u).exp()
            })
            .collect()
    };
    let e1 = axis(0);
    let e2 = axis(1);
    let gt = match map {
        InputMap::SpaceTime => {
            let u = (x[2] - t_dec) / ls[2];
            (-0.5 * u * u).exp()
        }
        InputMap::Space => 1.0,
    };
    let mut row = Vec::with_capacity(nodes.len() * nodes.len());
    for b in &e2 {
        let s = p.signal_variance * gt * b;
        row.extend(e1.iter().map(|a| s * a));
    }
    row
}
