//! Dubins paths, the arc of admissible destinations, and path-integral destination selection.

mod dubins;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use dubins::{
    dubins_word, normalize_angle, shortest_dubins, DubinsPath, DubinsWord, Pose, Segment, Steer,
};

use crate::acquisition::Evaluator;
use crate::error::{contract, Error, Result};
use crate::space::InputMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Lookahead distance `L`.
    pub lookahead: f64,
    /// Field-of-view half angle `α`.
    pub half_angle: f64,
    /// Turning radius `R`; candidates keep a `2R` margin from the boundary.
    pub turning_radius: f64,
    pub n_candidates: usize,
    pub n_path_samples: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            lookahead: 0.2,
            half_angle: 3.0 * PI / 4.0,
            turning_radius: 0.02,
            n_candidates: 64,
            n_path_samples: 16,
        }
    }
}

impl PlannerConfig {
    pub fn margin(&self) -> f64 {
        2.0 * self.turning_radius
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("planner: {m}")));
        if !(self.lookahead > 0.0) {
            return bad("lookahead must be positive");
        }
        if !(self.half_angle > 0.0 && self.half_angle <= PI) {
            return bad("half_angle must lie in (0, π]");
        }
        if !(self.turning_radius > 0.0) {
            return bad("turning_radius must be positive");
        }
        if self.n_candidates < 2 {
            return bad("n_candidates must be at least 2");
        }
        if self.n_path_samples < 2 {
            return bad("n_path_samples must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Position in the full (unfiltered) bearing sweep.
    pub index: usize,
    pub point: [f64; 2],
    pub bearing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub center: Pose,
    pub lookahead: f64,
    /// Half angle actually used, after any widening.
    pub half_angle: f64,
    pub boundary_margin: f64,
    pub candidates: Vec<Candidate>,
    pub widened: bool,
}

fn sweep(pose: Pose, l: f64, alpha: f64, margin: f64, n: usize) -> Vec<Candidate> {
    (0..n)
        .filter_map(|k| {
            let bearing = pose.theta - alpha + 2.0 * alpha * k as f64 / (n - 1) as f64;
            let point = [pose.z[0] + l * bearing.cos(), pose.z[1] + l * bearing.sin()];
            let safe = point.iter().all(|c| *c > margin && *c < 1.0 - margin);
            safe.then_some(Candidate {
                index: k,
                point,
                bearing: normalize_angle(bearing),
            })
        })
        .collect()
}

/// Destinations at distance `L` with bearings spanning `[θ-α, θ+α]`, keeping only
/// those more than `2R` from every boundary. An empty arc is retried once with `2α`
/// (capped at `π`).
pub fn admissible_destinations(
    pose: Pose,
    lookahead: f64,
    half_angle: f64,
    turning_radius: f64,
    n_candidates: usize,
) -> Result<AdmissibleSet> {
    if !(lookahead > 0.0) || !(half_angle > 0.0 && half_angle <= PI) || n_candidates < 2 {
        return Err(contract("admissible arc needs L > 0, 0 < α ≤ π and at least 2 candidates"));
    }
    let margin = 2.0 * turning_radius;
    let mut alpha = half_angle;
    let mut candidates = sweep(pose, lookahead, alpha, margin, n_candidates);
    let mut widened = false;
    if candidates.is_empty() {
        alpha = (2.0 * half_angle).min(PI);
        candidates = sweep(pose, lookahead, alpha, margin, n_candidates);
        widened = true;
    }
    if candidates.is_empty() {
        return Err(Error::PlannerStuck {
            x: pose.z[0],
            y: pose.z[1],
            theta: pose.theta,
        });
    }
    Ok(AdmissibleSet {
        center: pose,
        lookahead,
        half_angle: alpha,
        boundary_margin: margin,
        candidates,
        widened,
    })
}

impl AdmissibleSet {
    pub fn from_config(pose: Pose, cfg: &PlannerConfig) -> Result<Self> {
        admissible_destinations(
            pose,
            cfg.lookahead,
            cfg.half_angle,
            cfg.turning_radius,
            cfg.n_candidates,
        )
    }

    /// Dubins path to a candidate, arriving with heading equal to its bearing.
    pub fn path_to(&self, c: &Candidate, radius: f64) -> Result<DubinsPath> {
        let d = [c.point[0] - self.center.z[0], c.point[1] - self.center.z[1]];
        shortest_dubins(self.center, Pose::new(c.point, d[1].atan2(d[0])), radius)
    }
}

/// Outcome of [`select_destination`].
#[derive(Debug, Clone)]
pub struct Selection {
    /// Position within `AdmissibleSet::candidates`.
    pub choice: usize,
    pub destination: [f64; 2],
    pub path: DubinsPath,
    /// Path integral of the cost for every candidate.
    pub integrals: Vec<f64>,
}

/// Trapezoid integral over arclength of `-score` along a sampled path.
pub fn path_integral(costs: &[f64], arclengths: &[f64]) -> f64 {
    costs
        .windows(2)
        .zip(arclengths.windows(2))
        .map(|(c, s)| 0.5 * (c[0] + c[1]) * (s[1] - s[0]))
        .sum()
}

/// Picks the candidate minimizing `∫ -score(z(s), clock + s/speed) ds` along its path.
///
/// Ties go to the earliest candidate.
pub fn select_destination(
    set: &AdmissibleSet,
    evaluator: &Evaluator,
    map: InputMap,
    clock: f64,
    speed: f64,
    cfg: &PlannerConfig,
) -> Result<Selection> {
    let paths: Vec<DubinsPath> = set
        .candidates
        .iter()
        .map(|c| set.path_to(c, cfg.turning_radius))
        .collect::<Result<_>>()?;
    let samples: Vec<Vec<([f64; 2], f64)>> =
        paths.iter().map(|p| p.sample_n(cfg.n_path_samples)).collect();
    let points: Vec<Vec<f64>> = samples
        .iter()
        .flat_map(|s| s.iter().map(|(z, a)| map.point(*z, clock + a / speed)))
        .collect();
    let scores = evaluator.scores(&points)?;
    let mut integrals = Vec::with_capacity(paths.len());
    let mut offset = 0;
    for s in &samples {
        let costs: Vec<f64> = scores[offset..offset + s.len()].iter().map(|v| -v).collect();
        let arcs: Vec<f64> = s.iter().map(|(_, a)| *a).collect();
        integrals.push(path_integral(&costs, &arcs));
        offset += s.len();
    }
    let mut choice = 0;
    for (i, v) in integrals.iter().enumerate() {
        if *v < integrals[choice] || (integrals[choice].is_nan() && !v.is_nan()) {
            choice = i;
        }
    }
    Ok(Selection {
        choice,
        destination: set.candidates[choice].point,
        path: paths[choice].clone(),
        integrals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{AcquisitionContext, AcquisitionKind};
    use crate::density::InputPrior;
    use crate::gp::{Dataset, GpModel, KernelParams};

    #[test]
    fn interior_pose_keeps_every_candidate() {
        let set = admissible_destinations(Pose::new([0.5, 0.5], 0.3), 0.2, 0.75 * PI, 0.02, 64).unwrap();
        assert_eq!(set.candidates.len(), 64);
        assert!(!set.widened);
        for c in &set.candidates {
            let d = (c.point[0] - 0.5).hypot(c.point[1] - 0.5);
            assert!((d - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn wall_facing_pose_keeps_only_turning_away() {
        let set = admissible_destinations(Pose::new([0.01, 0.5], -PI), 0.2, 0.75 * PI, 0.02, 64).unwrap();
        assert!(!set.candidates.is_empty());
        for c in &set.candidates {
            assert!(c.point[0] > 0.04);
            assert!(c.bearing.cos() > 0.0);
        }
    }

    #[test]
    fn corner_pose_widens_then_gets_stuck_outside() {
        // heading into the bottom wall with a field of view that misses the interior
        let set = admissible_destinations(Pose::new([0.5, 0.05], -0.5 * PI), 0.2, 1.2, 0.02, 16).unwrap();
        assert!(set.widened);
        let stuck = admissible_destinations(Pose::new([-5.0, -5.0], 0.0), 0.2, 0.5, 0.02, 16);
        assert!(matches!(stuck, Err(Error::PlannerStuck { .. })));
    }

    #[test]
    fn flat_acquisition_picks_first_candidate() {
        let p = KernelParams::isotropic(2, 1.0, 0.2, 1e-4);
        let m = GpModel::new(p, Dataset::default()).unwrap();
        let prior = InputPrior::Uniform;
        let ev = Evaluator::new(AcquisitionContext::new(&m, &prior, 0.0), AcquisitionKind::Flat).unwrap();
        let cfg = PlannerConfig::default();
        let set = AdmissibleSet::from_config(Pose::new([0.5, 0.5], 1.0), &cfg).unwrap();
        let sel = select_destination(&set, &ev, InputMap::Space, 0.0, 1.0, &cfg).unwrap();
        assert_eq!(sel.choice, 0);
    }

    #[test]
    fn variance_seeking_avoids_data_cluster() {
        let mut inputs = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                inputs.push(vec![0.46 + 0.02 * i as f64, 0.66 + 0.02 * j as f64]);
            }
        }
        let outputs = vec![0.0; inputs.len()];
        let p = KernelParams::isotropic(2, 1.0, 0.1, 1e-4);
        let m = GpModel::new(p, Dataset::new(inputs, outputs).unwrap()).unwrap();
        let prior = InputPrior::Uniform;
        let ev = Evaluator::new(AcquisitionContext::new(&m, &prior, 0.0), AcquisitionKind::Us).unwrap();
        let cfg = PlannerConfig {
            n_candidates: 2,
            half_angle: PI / 2.0,
            ..PlannerConfig::default()
        };
        // one candidate straight up into the cluster, one straight down into empty space
        let set = AdmissibleSet::from_config(Pose::new([0.5, 0.5], 0.0), &cfg).unwrap();
        let sel = select_destination(&set, &ev, InputMap::Space, 0.0, 1.0, &cfg).unwrap();
        assert_eq!(set.candidates.len(), 2);
        let far = set
            .candidates
            .iter()
            .enumerate()
            .max_by(|a, b| {
                let d = |c: &Candidate| (c.point[0] - 0.5).hypot(c.point[1] - 0.7);
                d(a.1).total_cmp(&d(b.1))
            })
            .unwrap()
            .0;
        assert_eq!(sel.choice, far);
    }
}
