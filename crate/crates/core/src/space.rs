//! How physical coordinates `(z, t)` become GP inputs.

use serde::{Deserialize, Serialize};

/// Whether the surrogate sees time as an input coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputMap {
    /// Inputs are `(z₁, z₂, t)`.
    SpaceTime,
    /// Inputs are `(z₁, z₂)`.
    Space,
}

impl InputMap {
    pub fn dims(self) -> usize {
        match self {
            InputMap::SpaceTime => 3,
            InputMap::Space => 2,
        }
    }

    /// Layout matching a model's input dimension.
    pub fn for_dims(dims: usize) -> Self {
        if dims >= 3 {
            InputMap::SpaceTime
        } else {
            InputMap::Space
        }
    }

    #[inline]
    pub fn point(self, z: [f64; 2], t: f64) -> Vec<f64> {
        match self {
            InputMap::SpaceTime => vec![z[0], z[1], t],
            InputMap::Space => vec![z[0], z[1]],
        }
    }

    /// Spatial part of an input vector.
    #[inline]
    pub fn spatial(x: &[f64]) -> [f64; 2] {
        [x[0], x[1]]
    }
}

/// Midpoints of an `n × n` tensor grid over the unit square, row-major in `z₂`.
pub fn midpoint_grid(n: usize) -> Vec<[f64; 2]> {
    let h = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
        }
    }
    out
}

/// Nodes of an `n × n` grid including the unit-square boundary, with trapezoid weights.
pub fn trapezoid_grid(n: usize) -> Vec<([f64; 2], f64)> {
    assert!(n >= 2);
    let h = 1.0 / (n - 1) as f64;
    let w1 = |i: usize| if i == 0 || i == n - 1 { 0.5 * h } else { h };
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(([i as f64 * h, j as f64 * h], w1(i) * w1(j)));
        }
    }
    out
}

pub fn in_unit_square(z: [f64; 2]) -> bool {
    (0.0..=1.0).contains(&z[0]) && (0.0..=1.0).contains(&z[1])
}
