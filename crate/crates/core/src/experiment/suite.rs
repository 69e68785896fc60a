use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::{EnvironmentSpec, ExperimentSpec};
use crate::acquisition::AcquisitionKind;
use crate::density::InputPrior;
use crate::environments::Benchmark;
use crate::error::{Error, Result};
use crate::mission::MissionConfig;

/// Predefined experiment matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Five static benchmarks, uniform prior, unweighted against likelihood-weighted.
    StaticUniform,
    /// Five static benchmarks, Gaussian prior centred on the domain.
    StaticGaussian,
    /// Moving Ackley and Michalewicz with a prior that avoids the anomaly.
    DynamicAdversarial,
    /// The synthetic trench lattice, noise-free.
    Grid,
}

/// Replicates per acquisition function when `ipp bench` is not told otherwise.
pub const DEFAULT_REPLICATES: usize = 50;

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::StaticUniform, Suite::StaticGaussian, Suite::DynamicAdversarial, Suite::Grid];

    pub fn name(self) -> &'static str {
        match self {
            Suite::StaticUniform => "static-uniform",
            Suite::StaticGaussian => "static-gaussian",
            Suite::DynamicAdversarial => "dynamic-adversarial",
            Suite::Grid => "grid",
        }
    }

    pub fn acquisitions(self) -> Vec<AcquisitionKind> {
        use AcquisitionKind::*;
        match self {
            Suite::StaticUniform | Suite::Grid => vec![Us, UsLw, Ivr, IvrLw],
            Suite::StaticGaussian | Suite::DynamicAdversarial => vec![UsIw, UsLw, IvrIw, IvrLw],
        }
    }

    pub fn prior(self) -> InputPrior {
        match self {
            Suite::StaticUniform | Suite::Grid => InputPrior::Uniform,
            Suite::StaticGaussian => InputPrior::isotropic([0.5, 0.5], 0.01).expect("valid prior"),
            Suite::DynamicAdversarial => InputPrior::isotropic([0.25, 0.75], 0.01).expect("valid prior"),
        }
    }

    pub fn environments(self) -> Vec<EnvironmentSpec> {
        match self {
            Suite::StaticUniform | Suite::StaticGaussian => Benchmark::ALL.into_iter().map(EnvironmentSpec::benchmark).collect(),
            Suite::DynamicAdversarial => [Benchmark::Ackley, Benchmark::Michalewicz]
                .into_iter()
                .map(EnvironmentSpec::dynamic)
                .collect(),
            Suite::Grid => vec![EnvironmentSpec::trench()],
        }
    }

    /// One experiment per environment, output under `<suite>/<environment>`.
    pub fn experiments(self, replicates: usize, seed_base: u64) -> Vec<ExperimentSpec> {
        self.environments()
            .into_iter()
            .map(|env| {
                let env_name = match &env.name {
                    Some(n) if env.kind == super::EnvironmentKind::Dynamic => format!("dynamic_{n}"),
                    Some(n) => n.clone(),
                    None => "trench".to_string(),
                };
                ExperimentSpec {
                    name: format!("{}_{}", self.name(), env_name),
                    environment: env,
                    acquisitions: self.acquisitions(),
                    prior: self.prior(),
                    mission: MissionConfig::default(),
                    replicates,
                    seed_base,
                    output_dir: PathBuf::from(self.name()).join(&env_name),
                    base_dir: PathBuf::new(),
                }
            })
            .collect()
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let known: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
            Error::Config(format!("unknown suite {s:?}; known suites: {}", known.join(", ")))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::PlannerConfig;

    #[test]
    fn suites_carry_the_standard_parameters() {
        for suite in Suite::ALL {
            for spec in suite.experiments(3, 0) {
                spec.validate().unwrap();
                let m = &spec.mission;
                assert_eq!(m.planner, PlannerConfig::default());
                assert_eq!(m.planner.lookahead, 0.2);
                assert_eq!(m.planner.half_angle, 3.0 * std::f64::consts::PI / 4.0);
                assert_eq!(m.planner.turning_radius, 0.02);
                assert_eq!((m.duration, m.sample_period, m.n_gmm), (15.0, 1.0 / 15.0, 2));
            }
        }
        assert_eq!(Suite::StaticUniform.experiments(1, 0).len(), 5);
        assert_eq!(Suite::DynamicAdversarial.experiments(1, 0).len(), 2);
    }

    #[test]
    fn priors_match_the_suites() {
        assert_eq!(
            Suite::DynamicAdversarial.prior(),
            InputPrior::Gaussian {
                mean: [0.25, 0.75],
                covariance: [[0.01, 0.0], [0.0, 0.01]]
            }
        );
        assert_eq!(
            Suite::StaticGaussian.prior(),
            InputPrior::Gaussian {
                mean: [0.5, 0.5],
                covariance: [[0.01, 0.0], [0.0, 0.01]]
            }
        );
        assert_eq!(Suite::Grid.environments()[0].noise_base, 0.0);
        for spec in Suite::StaticUniform.experiments(1, 0) {
            assert_eq!(spec.environment.noise_base, 1e-3);
        }
    }

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(matches!("nope".parse::<Suite>(), Err(Error::Config(_))));
        assert_eq!("grid".parse::<Suite>().unwrap(), Suite::Grid);
    }
}
