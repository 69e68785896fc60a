use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The five analytic test maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Ackley,
    Bird,
    Bukin06,
    Michalewicz,
    ModRosenbrock,
}

pub const ACKLEY_A: f64 = 20.0;
pub const ACKLEY_B: f64 = 0.2;
pub const ACKLEY_C: f64 = 2.0 * PI;
pub const MICHALEWICZ_M: i32 = 10;

impl Benchmark {
    pub const ALL: [Benchmark; 5] = [
        Benchmark::Ackley,
        Benchmark::Bird,
        Benchmark::Bukin06,
        Benchmark::Michalewicz,
        Benchmark::ModRosenbrock,
    ];

    /// `[[z₁_lo, z₁_hi], [z₂_lo, z₂_hi]]`.
    pub fn native_domain(self) -> [[f64; 2]; 2] {
        match self {
            Benchmark::Ackley => [[-5.0, 5.0], [-5.0, 5.0]],
            Benchmark::Bird => [[-2.0 * PI, 2.0 * PI], [-2.0 * PI, 2.0 * PI]],
            Benchmark::Bukin06 => [[-15.0, -5.0], [-3.0, 3.0]],
            Benchmark::Michalewicz => [[0.0, PI], [0.0, PI]],
            Benchmark::ModRosenbrock => [[-2.0, 2.0], [-2.0, 2.0]],
        }
    }

    /// Value at native coordinates.
    pub fn native(self, z1: f64, z2: f64) -> f64 {
        match self {
            Benchmark::Ackley => {
                let r = ((z1 * z1 + z2 * z2) / 2.0).sqrt();
                let c = ((ACKLEY_C * z1).cos() + (ACKLEY_C * z2).cos()) / 2.0;
                (ACKLEY_A - ACKLEY_A * (-ACKLEY_B * r).exp()) + (E - c.exp())
            }
            Benchmark::Bird => {
                z1.sin() * (1.0 - z2.cos()).powi(2).exp()
                    + z2.cos() * (1.0 - z1.sin()).powi(2).exp()
                    + (z1 - z2).powi(2)
            }
            Benchmark::Bukin06 => 100.0 * (z2 - 0.01 * z1 * z1).abs().sqrt() + 0.01 * (z1 + 10.0).abs(),
            Benchmark::Michalewicz => {
                let m2 = 2 * MICHALEWICZ_M;
                -z1.sin() * (z1 * z1 / PI).sin().powi(m2) - z2.sin() * (2.0 * z2 * z2 / PI).sin().powi(m2)
            }
            Benchmark::ModRosenbrock => {
                74.0 + 100.0 * (z2 - z1 * z1).powi(2) + (1.0 - z1).powi(2)
                    - 400.0 * (-((z1 + 1.0).powi(2) + (z2 + 1.0).powi(2)) / 0.1).exp()
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Ackley => "ackley",
            Benchmark::Bird => "bird",
            Benchmark::Bukin06 => "bukin06",
            Benchmark::Michalewicz => "michalewicz",
            Benchmark::ModRosenbrock => "mod_rosenbrock",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == key)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown benchmark `{s}` (expected one of ackley, bird, bukin06, michalewicz, mod_rosenbrock)"
                ))
            })
    }
}

/// Affine map from the unit square onto `domain`.
pub fn to_native(domain: [[f64; 2]; 2], u: [f64; 2]) -> [f64; 2] {
    [
        domain[0][0] + u[0] * (domain[0][1] - domain[0][0]),
        domain[1][0] + u[1] * (domain[1][1] - domain[1][0]),
    ]
}

/// Inverse of [`to_native`].
pub fn to_unit(domain: [[f64; 2]; 2], z: [f64; 2]) -> [f64; 2] {
    [
        (z[0] - domain[0][0]) / (domain[0][1] - domain[0][0]),
        (z[1] - domain[1][0]) / (domain[1][1] - domain[1][0]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(Benchmark::Ackley.native(0.0, 0.0), 0.0);
        assert_eq!(Benchmark::Bukin06.native(-10.0, 1.0), 0.0);
        assert!((Benchmark::ModRosenbrock.native(-1.0, -1.0) - 78.0).abs() < 1e-12);
    }

    #[test]
    fn names_parse() {
        for b in Benchmark::ALL {
            assert_eq!(b.name().parse::<Benchmark>().unwrap(), b);
        }
        assert_eq!("Mod-Rosenbrock".parse::<Benchmark>().unwrap(), Benchmark::ModRosenbrock);
        assert!("rastrigin".parse::<Benchmark>().is_err());
    }

    #[test]
    fn rescaling_round_trips() {
        for b in Benchmark::ALL {
            let d = b.native_domain();
            for u in [[0.0, 0.0], [0.3, 0.9], [1.0, 1.0]] {
                let back = to_unit(d, to_native(d, u));
                assert!((back[0] - u[0]).abs() < 1e-12 && (back[1] - u[1]).abs() < 1e-12);
            }
        }
    }
}
