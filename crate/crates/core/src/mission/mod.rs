//! Exploration loops: next-best-view and informative path planning with en-route sampling.
//!
//! A mission starts with one measurement at the initial position. Each decision epoch
//! picks a destination on the admissible arc, travels there along a Dubins path, refits
//! the surrogate on arrival and records a metric snapshot. The first destination is
//! drawn uniformly from the arc.

mod trace;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use trace::{read_trace, snapshots, trace_to_string, write_trace, EpochRecord, Sample};

use crate::acquisition::{argmax, AcquisitionContext, AcquisitionKind, Evaluator, DEFAULT_QUADRATURE};
use crate::density::{refresh_weight, InputPrior, LikelihoodWeight, WeightConfig};
use crate::environments::Environment;
use crate::error::{Error, Result};
use crate::gp::{fit_with, Dataset, FitOptions, GpModel, KernelParams, FROZEN_LENGTHSCALE};
use crate::metrics::{MetricEvaluator, ProbeSet, DEFAULT_PROBES};
use crate::planner::{select_destination, AdmissibleSet, DubinsPath, PlannerConfig, Pose};
use crate::space::InputMap;

/// How the surrogate treats the time coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaticMode {
    /// Inputs `(z, t)` with every lengthscale trained.
    #[default]
    Spatiotemporal,
    /// Inputs `(z, t)` with the time lengthscale pinned at a huge value.
    InfiniteTimeLengthscale,
    /// Inputs `z` only.
    NoTimeVariable,
}

/// Initial hyperparameters and the per-epoch refit budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub lengthscale: f64,
    pub time_lengthscale: f64,
    /// Initial noise variance as a fraction of the output variance.
    pub noise_fraction: f64,
    /// Optimizer starts on full refits; the first is warm-started from the previous epoch.
    pub restarts: usize,
    /// Every this many epochs the refit uses all restarts; otherwise only the warm start.
    pub full_refit_every: usize,
    pub max_iter: usize,
    /// Sup-norm of the projected log-parameter gradient at which a refit stops.
    pub grad_tol: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            lengthscale: 0.1,
            time_lengthscale: 2.0,
            noise_fraction: 1e-2,
            restarts: 2,
            full_refit_every: 5,
            max_iter: 40,
            grad_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    /// Mission duration `T`.
    pub duration: f64,
    pub speed: f64,
    /// Sampling period `t_s`; measurements happen at clock times `k·t_s`.
    pub sample_period: f64,
    pub initial_position: [f64; 2],
    pub initial_heading: f64,
    pub acquisition: AcquisitionKind,
    pub prior: InputPrior,
    pub planner: PlannerConfig,
    pub gp: GpConfig,
    pub seed: u64,
    /// Mixture components in the likelihood-weight surrogate.
    pub n_gmm: usize,
    /// Uniform samples per likelihood-weight refresh.
    pub weight_samples: usize,
    pub static_mode: StaticMode,
    /// Nodes per axis of the IVR quadrature.
    pub quadrature: usize,
    pub probes: usize,
    pub probe_seed: u64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            duration: 15.0,
            speed: 1.0,
            sample_period: 1.0 / 15.0,
            initial_position: [0.0, 0.0],
            initial_heading: PI / 4.0,
            acquisition: AcquisitionKind::IvrLw,
            prior: InputPrior::Uniform,
            planner: PlannerConfig::default(),
            gp: GpConfig::default(),
            seed: 0,
            n_gmm: 2,
            weight_samples: 10_000,
            static_mode: StaticMode::Spatiotemporal,
            quadrature: DEFAULT_QUADRATURE,
            probes: DEFAULT_PROBES,
            probe_seed: 0x9e37_79b9,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("mission: {m}")));
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be finite and nonnegative, got {}", self.duration));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return bad(format!("speed must be positive, got {}", self.speed));
        }
        if !(self.sample_period > 0.0) {
            return bad(format!("sample_period must be positive, got {}", self.sample_period));
        }
        if !self.initial_position.iter().all(|c| (0.0..=1.0).contains(c)) {
            return bad(format!("initial_position {:?} is outside the unit square", self.initial_position));
        }
        if !self.initial_heading.is_finite() {
            return bad("initial_heading must be finite".into());
        }
        if self.n_gmm == 0 {
            return bad("n_gmm must be at least 1".into());
        }
        if self.weight_samples < 100 {
            return bad(format!("weight_samples must be at least 100, got {}", self.weight_samples));
        }
        if self.quadrature < 2 {
            return bad("quadrature must be at least 2".into());
        }
        if self.probes == 0 {
            return bad("probes must be at least 1".into());
        }
        let g = &self.gp;
        if !(g.lengthscale > 0.0 && g.time_lengthscale > 0.0 && g.noise_fraction > 0.0) {
            return bad("gp lengthscales and noise_fraction must be positive".into());
        }
        if g.restarts == 0 || g.max_iter == 0 || g.full_refit_every == 0 {
            return bad("gp restarts, full_refit_every and max_iter must be at least 1".into());
        }
        if !(g.grad_tol > 0.0) {
            return bad("gp grad_tol must be positive".into());
        }
        self.prior.validate()?;
        self.planner.validate()
    }

    fn weight_config(&self) -> WeightConfig {
        WeightConfig {
            n_samples: self.weight_samples,
            n_resample: self.weight_samples,
            n_components: self.n_gmm,
            ..WeightConfig::default()
        }
    }
}

/// Input layout, starting hyperparameters and frozen axes of the surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub map: InputMap,
    pub init: KernelParams,
    pub frozen: Vec<bool>,
    pub restart_lengthscales: Vec<(f64, f64)>,
}

impl ModelSpec {
    /// Three-dimensional `(z, t)` model with every lengthscale trainable.
    pub fn spatiotemporal(gp: &GpConfig) -> Self {
        Self {
            map: InputMap::SpaceTime,
            init: KernelParams {
                signal_variance: 1.0,
                lengthscales: vec![gp.lengthscale, gp.lengthscale, gp.time_lengthscale],
                noise_variance: gp.noise_fraction,
            },
            frozen: vec![false; 3],
            restart_lengthscales: vec![(0.03, 1.0), (0.03, 1.0), (0.3, 30.0)],
        }
    }
}

/// Adapts a spatiotemporal model spec to the requested treatment of time.
pub fn apply_static_mode(mode: StaticMode, spec: &ModelSpec) -> ModelSpec {
    let mut out = spec.clone();
    match mode {
        StaticMode::Spatiotemporal => {}
        StaticMode::InfiniteTimeLengthscale => {
            out.init.lengthscales[2] = FROZEN_LENGTHSCALE;
            out.frozen[2] = true;
        }
        StaticMode::NoTimeVariable => {
            out.map = InputMap::Space;
            out.init.lengthscales.truncate(2);
            out.frozen.truncate(2);
            out.restart_lengthscales.truncate(2);
        }
    }
    out
}

/// Everything a finished mission leaves behind.
#[derive(Debug, Clone)]
pub struct MissionOutcome {
    pub trace: Vec<EpochRecord>,
    pub model: GpModel,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loop {
    NextBestView,
    PathPlanning,
}

/// Informative path planning: measurements every `t_s` along the way, destinations
/// chosen by the path integral of the acquisition.
pub fn run_mission(env: &Environment, cfg: &MissionConfig) -> Result<MissionOutcome> {
    let metrics = MetricEvaluator::new(env, ProbeSet::uniform(cfg.probes, cfg.probe_seed));
    run_mission_with(env, cfg, &metrics)
}

/// Same as [`run_mission`] with a prebuilt (possibly shared) metric evaluator.
pub fn run_mission_with(env: &Environment, cfg: &MissionConfig, metrics: &MetricEvaluator) -> Result<MissionOutcome> {
    Runner::new(env, cfg, metrics, Loop::PathPlanning)?.run()
}

/// Next-best-view: one measurement per destination, chosen by the pointwise acquisition.
pub fn run_next_best_view(env: &Environment, cfg: &MissionConfig) -> Result<MissionOutcome> {
    let metrics = MetricEvaluator::new(env, ProbeSet::uniform(cfg.probes, cfg.probe_seed));
    run_next_best_view_with(env, cfg, &metrics)
}

pub fn run_next_best_view_with(
    env: &Environment,
    cfg: &MissionConfig,
    metrics: &MetricEvaluator,
) -> Result<MissionOutcome> {
    Runner::new(env, cfg, metrics, Loop::NextBestView)?.run()
}

/// Reruns a mission and lists the epochs whose destination differs from `trace`.
pub fn replay_mismatches(env: &Environment, cfg: &MissionConfig, trace: &[EpochRecord]) -> Result<Vec<usize>> {
    let again = run_mission(env, cfg)?;
    let n = trace.len().max(again.trace.len());
    Ok((0..n)
        .filter(|&i| trace.get(i).map(|r| r.destination) != again.trace.get(i).map(|r| r.destination))
        .collect())
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

struct Runner<'a> {
    env: &'a Environment,
    cfg: &'a MissionConfig,
    metrics: &'a MetricEvaluator,
    mode: Loop,
    spec: ModelSpec,
    noise_rng: ChaCha8Rng,
    plan_rng: ChaCha8Rng,
    weight_rng: ChaCha8Rng,
    data: Dataset,
    samples: Vec<Sample>,
    model: Option<GpModel>,
    weight: Option<LikelihoodWeight>,
    pose: Pose,
    clock: f64,
    next_tick: u64,
    trace: Vec<EpochRecord>,
}

impl<'a> Runner<'a> {
    fn new(env: &'a Environment, cfg: &'a MissionConfig, metrics: &'a MetricEvaluator, mode: Loop) -> Result<Self> {
        cfg.validate()?;
        let spec = apply_static_mode(cfg.static_mode, &ModelSpec::spatiotemporal(&cfg.gp));
        Ok(Self {
            env,
            cfg,
            metrics,
            mode,
            spec,
            noise_rng: stream(cfg.seed, 1),
            plan_rng: stream(cfg.seed, 2),
            weight_rng: stream(cfg.seed, 3),
            data: Dataset::default(),
            samples: Vec::new(),
            model: None,
            weight: None,
            pose: Pose::new(cfg.initial_position, cfg.initial_heading),
            clock: 0.0,
            next_tick: 1,
            trace: Vec::new(),
        })
    }

    fn eps(&self) -> f64 {
        1e-9 * self.cfg.duration.max(1.0)
    }

    fn run(mut self) -> Result<MissionOutcome> {
        let z0 = self.pose.z;
        self.measure(z0, 0.0);
        self.refit()?;
        self.record(None);
        while self.clock < self.cfg.duration - self.eps() {
            if self.cfg.acquisition.is_likelihood_weighted() && self.trace.len() > 1 {
                self.refresh_weight()?;
            }
            let set = AdmissibleSet::from_config(self.pose, &self.cfg.planner)?;
            let (destination, path) = self.decide(&set)?;
            self.travel(&path);
            self.refit()?;
            self.record(Some(destination));
        }
        Ok(MissionOutcome {
            trace: self.trace,
            model: self.model.expect("fitted at least once"),
            samples: self.samples,
        })
    }

    fn decide(&mut self, set: &AdmissibleSet) -> Result<([f64; 2], DubinsPath)> {
        let r = self.cfg.planner.turning_radius;
        if self.trace.len() == 1 {
            let c = set.candidates[self.plan_rng.gen_range(0..set.candidates.len())];
            return Ok((c.point, set.path_to(&c, r)?));
        }
        let model = self.model.as_ref().expect("model fitted before deciding");
        let mut ctx = AcquisitionContext::new(model, &self.cfg.prior, self.clock).with_quadrature(self.cfg.quadrature);
        if let Some(w) = &self.weight {
            ctx = ctx.with_weight(w);
        }
        let evaluator = Evaluator::new(ctx, self.cfg.acquisition)?;
        match self.mode {
            Loop::PathPlanning => {
                let sel = select_destination(set, &evaluator, self.spec.map, self.clock, self.cfg.speed, &self.cfg.planner)?;
                Ok((sel.destination, sel.path))
            }
            Loop::NextBestView => {
                let points: Vec<Vec<f64>> = set
                    .candidates
                    .iter()
                    .map(|c| self.spec.map.point(c.point, self.clock))
                    .collect();
                let scores = evaluator.scores(&points)?;
                let c = set.candidates[argmax(&scores).unwrap_or(0)];
                Ok((c.point, set.path_to(&c, r)?))
            }
        }
    }

    fn travel(&mut self, path: &DubinsPath) {
        let start = self.clock;
        let arrival = start + path.length() / self.cfg.speed;
        let end = arrival.min(self.cfg.duration);
        if self.mode == Loop::PathPlanning {
            loop {
                let tick = self.next_tick as f64 * self.cfg.sample_period;
                if tick > end + self.eps() {
                    break;
                }
                let z = path.pose_at((tick - start) * self.cfg.speed).z;
                self.measure(z, tick);
                self.next_tick += 1;
            }
        }
        if arrival <= self.cfg.duration + self.eps() {
            self.clock = arrival;
            self.pose = path.end();
            if self.mode == Loop::NextBestView {
                let z = self.pose.z;
                self.measure(z, arrival);
            }
        } else {
            self.clock = self.cfg.duration;
            self.pose = path.pose_at((self.clock - start) * self.cfg.speed);
        }
    }

    fn measure(&mut self, z: [f64; 2], t: f64) {
        let y = self.env.observe(z, t, &mut self.noise_rng);
        self.data.push(self.spec.map.point(z, t), y);
        self.samples.push(Sample { z, t, y });
    }

    fn refit(&mut self) -> Result<()> {
        let init = match &self.model {
            Some(m) => m.params().clone(),
            None => {
                let v = self.data.output_variance();
                let scale = if v > 0.0 { v } else { 1.0 };
                KernelParams {
                    signal_variance: scale,
                    noise_variance: self.cfg.gp.noise_fraction * scale,
                    ..self.spec.init.clone()
                }
            }
        };
        let epoch = self.trace.len() as u64;
        let full = self.model.is_none() || epoch.is_multiple_of(self.cfg.gp.full_refit_every as u64);
        let mut opts = FitOptions {
            restarts: if full { self.cfg.gp.restarts } else { 1 },
            max_iter: self.cfg.gp.max_iter,
            grad_tol: self.cfg.gp.grad_tol,
            seed: self.cfg.seed ^ (epoch << 32),
            frozen: self.spec.frozen.clone(),
            restart_lengthscales: self.spec.restart_lengthscales.clone(),
            ..FitOptions::default()
        };
        let report = match fit_with(&self.data, &init, &opts) {
            Ok(r) => r,
            Err(_) => {
                opts.restarts = opts.restarts.max(5) * 2;
                opts.seed = opts.seed.wrapping_add(0x51f1);
                fit_with(&self.data, &self.spec.init, &opts).map_err(|e| {
                    Error::Optimization(format!("refit failed twice at epoch {epoch}, n = {}: {e}", self.data.len()))
                })?
            }
        };
        self.model = Some(report.model);
        Ok(())
    }

    fn refresh_weight(&mut self) -> Result<()> {
        let model = self.model.as_ref().expect("model fitted before weighting");
        let w = refresh_weight(model, &self.cfg.prior, self.clock, &self.cfg.weight_config(), &mut self.weight_rng)?;
        self.weight = Some(w);
        Ok(())
    }

    fn record(&mut self, destination: Option<[f64; 2]>) {
        let model = self.model.as_ref().expect("model fitted before recording");
        let metrics = self.metrics.snapshot(self.env, model, self.clock);
        self.trace.push(EpochRecord {
            epoch: self.trace.len(),
            clock: self.clock,
            pose: self.pose,
            destination,
            acquisition: self.cfg.acquisition,
            dataset_size: self.data.len(),
            metrics,
        });
    }
}
