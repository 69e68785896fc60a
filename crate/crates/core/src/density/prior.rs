use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::in_unit_square;

/// Operator belief over the spatial domain.
///
/// The temporal prior is uniform and never enters weight ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputPrior {
    /// Uniform on the unit square.
    Uniform,
    Gaussian {
        mean: [f64; 2],
        covariance: [[f64; 2]; 2],
    },
}

impl InputPrior {
    pub fn gaussian(mean: [f64; 2], covariance: [[f64; 2]; 2]) -> Result<Self> {
        let p = InputPrior::Gaussian { mean, covariance };
        p.validate()?;
        Ok(p)
    }

    /// Isotropic Gaussian `N(mean, var·I)`.
    pub fn isotropic(mean: [f64; 2], var: f64) -> Result<Self> {
        Self::gaussian(mean, [[var, 0.0], [0.0, var]])
    }

    pub fn validate(&self) -> Result<()> {
        if let InputPrior::Gaussian { covariance: c, mean } = self {
            let sym = (c[0][1] - c[1][0]).abs() <= 1e-12 * (c[0][0].abs() + c[1][1].abs());
            let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            if !sym || c[0][0] <= 0.0 || det <= 0.0 {
                return Err(Error::Config(format!(
                    "prior covariance {c:?} is not symmetric positive definite"
                )));
            }
            if !mean.iter().all(|m| m.is_finite()) {
                return Err(Error::Config("prior mean must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, InputPrior::Uniform)
    }

    pub fn pdf(&self, z: [f64; 2]) -> f64 {
        match self {
            InputPrior::Uniform => {
                if in_unit_square(z) {
                    1.0
                } else {
                    0.0
                }
            }
            InputPrior::Gaussian { mean, covariance } => gaussian_pdf(z, *mean, *covariance),
        }
    }
}

pub(crate) fn gaussian_pdf(z: [f64; 2], mean: [f64; 2], c: [[f64; 2]; 2]) -> f64 {
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let dx = z[0] - mean[0];
    let dy = z[1] - mean[1];
    let q = (c[1][1] * dx * dx - 2.0 * c[0][1] * dx * dy + c[0][0] * dy * dy) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}
