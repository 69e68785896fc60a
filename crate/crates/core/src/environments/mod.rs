//! Ground-truth maps on the unit square: analytic benchmarks, their moving variants,
//! and gridded terrain.

mod benchmarks;
mod grid;

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use benchmarks::{to_native, to_unit, Benchmark, ACKLEY_A, ACKLEY_B, ACKLEY_C, MICHALEWICZ_M};
pub use grid::{GridField, GridHeader};

use crate::error::{contract, Result};

/// Period of the moving transformation.
pub const DYNAMIC_PERIOD: f64 = 15.0;
/// Time window used when calibrating noise against a field's variance.
pub const CALIBRATION_HORIZON: f64 = 15.0;

/// Name, native domain and kind of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub name: String,
    /// `[[z₁_lo, z₁_hi], [z₂_lo, z₂_hi]]` mapped affinely onto the unit square.
    pub native_domain: [[f64; 2]; 2],
    pub dynamic: bool,
    pub gridded: bool,
}

#[derive(Clone)]
enum Field {
    Benchmark(Benchmark),
    Grid(Arc<GridField>),
    Dynamic(Box<Field>),
    Custom(Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>),
}

impl Field {
    fn eval(&self, u: [f64; 2], t: f64) -> f64 {
        match self {
            Field::Benchmark(b) => {
                let z = to_native(b.native_domain(), u);
                b.native(z[0], z[1])
            }
            Field::Grid(g) => g.eval(u),
            Field::Dynamic(base) => base.eval(dynamic_shift(u, t), t),
            Field::Custom(f) => f(u, t),
        }
    }
}

/// `((z₁ + 0.1 sin(2πt/15)) mod 1, (z₂ + 0.4t/15) mod 1)`.
pub fn dynamic_shift(z: [f64; 2], t: f64) -> [f64; 2] {
    let s1 = 0.1 * (2.0 * PI * t.rem_euclid(DYNAMIC_PERIOD) / DYNAMIC_PERIOD).sin();
    let s2 = 0.4 * t / DYNAMIC_PERIOD;
    [(z[0] + s1).rem_euclid(1.0), (z[1] + s2).rem_euclid(1.0)]
}

/// A scalar field `f(z, t)` on the unit square with its observation-noise variance.
#[derive(Clone)]
pub struct Environment {
    pub descriptor: Descriptor,
    field: Field,
    pub noise_variance: f64,
}

impl fmt::Debug for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Environment")
            .field("descriptor", &self.descriptor)
            .field("noise_variance", &self.noise_variance)
            .finish()
    }
}

impl Environment {
    /// Wraps an arbitrary closure over unit-square coordinates and time.
    pub fn from_fn(name: &str, f: impl Fn([f64; 2], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            descriptor: Descriptor {
                name: name.to_string(),
                native_domain: [[0.0, 1.0], [0.0, 1.0]],
                dynamic: false,
                gridded: false,
            },
            field: Field::Custom(Arc::new(f)),
            noise_variance: 0.0,
        }
    }

    /// Noise-free value; `z` is clamped to the unit square.
    pub fn eval(&self, z: [f64; 2], t: f64) -> f64 {
        self.field.eval([z[0].clamp(0.0, 1.0), z[1].clamp(0.0, 1.0)], t)
    }

    /// `f(z, t) + ε` with `ε ~ N(0, noise_variance)`.
    pub fn observe<R: Rng + ?Sized>(&self, z: [f64; 2], t: f64, rng: &mut R) -> f64 {
        let f = self.eval(z, t);
        if self.noise_variance > 0.0 {
            let n = Normal::new(0.0, self.noise_variance.sqrt()).expect("finite noise");
            f + n.sample(rng)
        } else {
            f
        }
    }

    pub fn is_dynamic(&self) -> bool {
        self.descriptor.dynamic
    }

    pub fn with_noise_variance(mut self, v: f64) -> Self {
        self.noise_variance = v.max(0.0);
        self
    }

    /// Replaces the noise variance with the calibrated value.
    pub fn calibrated<R: Rng + ?Sized>(self, base_variance: f64, n: usize, rng: &mut R) -> Result<Self> {
        let v = calibrate_noise(&self, base_variance, n, rng)?;
        Ok(self.with_noise_variance(v))
    }

    pub fn name(&self) -> &str {
        &self.descriptor.name
    }
}

/// Analytic benchmark rescaled to the unit square, noise-free.
pub fn make_benchmark(name: &str) -> Result<Environment> {
    let b: Benchmark = name.parse()?;
    Ok(benchmark_env(b))
}

pub fn benchmark_env(b: Benchmark) -> Environment {
    Environment {
        descriptor: Descriptor {
            name: b.name().to_string(),
            native_domain: b.native_domain(),
            dynamic: false,
            gridded: false,
        },
        field: Field::Benchmark(b),
        noise_variance: 0.0,
    }
}

/// Moving variant `f_dyn(z, t) = f(shift(z, t))`, wrapping periodically in both axes.
pub fn make_dynamic(base: Environment) -> Environment {
    let mut descriptor = base.descriptor.clone();
    descriptor.name = format!("dynamic_{}", descriptor.name);
    descriptor.dynamic = true;
    Environment {
        descriptor,
        field: Field::Dynamic(Box::new(base.field)),
        noise_variance: base.noise_variance,
    }
}

/// Time-independent environment from an ESRI-ASCII lattice file.
pub fn make_grid_env(path: impl AsRef<Path>) -> Result<Environment> {
    let path = path.as_ref();
    let grid = GridField::from_file(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "grid".into());
    Ok(grid_env(&name, grid))
}

pub fn grid_env(name: &str, grid: GridField) -> Environment {
    Environment {
        descriptor: Descriptor {
            name: name.to_string(),
            native_domain: grid.native_domain(),
            dynamic: false,
            gridded: true,
        },
        field: Field::Grid(Arc::new(grid)),
        noise_variance: 0.0,
    }
}

/// `base_variance × Var[f]` over `n` uniform draws of `(z, t)`; zero for gridded data.
pub fn calibrate_noise<R: Rng + ?Sized>(
    env: &Environment,
    base_variance: f64,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    if n < 1000 {
        return Err(contract(format!("noise calibration needs at least 1000 draws, got {n}")));
    }
    if env.descriptor.gridded {
        return Ok(0.0);
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..n {
        let z = [rng.gen::<f64>(), rng.gen::<f64>()];
        let t = rng.gen::<f64>() * CALIBRATION_HORIZON;
        let f = env.eval(z, t);
        let d = f - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (f - mean);
    }
    Ok(base_variance * m2 / (n - 1) as f64)
}

/// The synthetic trench lattice shipped with the crate.
pub fn trench_fixture_text() -> &'static str {
    include_str!("../../fixtures/trench.asc")
}

pub fn trench_env() -> Environment {
    let grid = GridField::parse(trench_fixture_text()).expect("shipped fixture parses");
    grid_env("trench", grid)
}
