//! Replicated experiments: a TOML spec in, traces, aggregate CSVs and a hashed manifest out.
//!
//! An experiment compares several acquisition functions on one environment. Every
//! `(acquisition, replicate)` pair is an independent mission seeded with
//! `seed_base + replicate`; missions run in parallel and write to distinct files.
//!
//! Output layout under the resolved output directory:
//!
//! ```text
//! traces/<name>_<acquisition>_r<NNN>.jsonl
//! aggregate/<name>_<acquisition>.csv
//! manifest.json
//! ```

mod suite;

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use suite::{Suite, DEFAULT_REPLICATES};

use crate::acquisition::AcquisitionKind;
use crate::density::InputPrior;
use crate::environments::{benchmark_env, make_dynamic, make_grid_env, trench_env, Benchmark, Environment};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, final_summary, write_aggregate_csv, AggregateSeries, FinalSummary, Metric, MetricEvaluator,
    ProbeSet,
};
use crate::mission::{run_mission_with, snapshots, write_trace, EpochRecord, MissionConfig};

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "IPP_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentKind {
    /// Static analytic benchmark, selected by `name`.
    Benchmark,
    /// Moving variant of the benchmark `name`.
    Dynamic,
    /// ESRI-ASCII lattice at `path`.
    Grid,
    /// The shipped synthetic trench lattice.
    Trench,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub kind: EnvironmentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Relative paths are taken from the spec file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Noise variance as a fraction of the field's variance.
    #[serde(default = "default_noise_base")]
    pub noise_base: f64,
    #[serde(default = "default_calibration_samples")]
    pub calibration_samples: usize,
    #[serde(default)]
    pub calibration_seed: u64,
}

fn default_noise_base() -> f64 {
    1e-3
}

fn default_calibration_samples() -> usize {
    100_000
}

impl EnvironmentSpec {
    pub fn benchmark(b: Benchmark) -> Self {
        Self::with_kind(EnvironmentKind::Benchmark, Some(b.name().to_string()))
    }

    pub fn dynamic(b: Benchmark) -> Self {
        Self::with_kind(EnvironmentKind::Dynamic, Some(b.name().to_string()))
    }

    pub fn trench() -> Self {
        Self {
            noise_base: 0.0,
            ..Self::with_kind(EnvironmentKind::Trench, None)
        }
    }

    fn with_kind(kind: EnvironmentKind, name: Option<String>) -> Self {
        Self {
            kind,
            name,
            path: None,
            noise_base: default_noise_base(),
            calibration_samples: default_calibration_samples(),
            calibration_seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("environment.{m}")));
        match self.kind {
            EnvironmentKind::Benchmark | EnvironmentKind::Dynamic => match &self.name {
                None => return bad("name is required for benchmark environments".into()),
                Some(n) => {
                    if let Err(e) = n.parse::<Benchmark>() {
                        return bad(format!("name: {e}"));
                    }
                }
            },
            EnvironmentKind::Grid if self.path.is_none() => {
                return bad("path is required for grid environments".into())
            }
            _ => {}
        }
        if !(self.noise_base >= 0.0 && self.noise_base.is_finite()) {
            return bad(format!("noise_base must be finite and nonnegative, got {}", self.noise_base));
        }
        if self.calibration_samples < 1000 {
            return bad(format!(
                "calibration_samples must be at least 1000, got {}",
                self.calibration_samples
            ));
        }
        Ok(())
    }

    /// Builds the environment and calibrates its noise variance.
    pub fn build(&self, base_dir: &Path) -> Result<Environment> {
        self.validate()?;
        let env = match self.kind {
            EnvironmentKind::Benchmark => benchmark_env(self.parsed_benchmark()?),
            EnvironmentKind::Dynamic => make_dynamic(benchmark_env(self.parsed_benchmark()?)),
            EnvironmentKind::Grid => {
                let p = self.path.as_ref().expect("validated");
                make_grid_env(if p.is_absolute() { p.clone() } else { base_dir.join(p) })?
            }
            EnvironmentKind::Trench => trench_env(),
        };
        if self.noise_base == 0.0 {
            return Ok(env.with_noise_variance(0.0));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.calibration_seed);
        env.calibrated(self.noise_base, self.calibration_samples, &mut rng)
    }

    fn parsed_benchmark(&self) -> Result<Benchmark> {
        self.name.as_deref().unwrap_or_default().parse()
    }
}

/// One experiment: several acquisition functions, replicated, on one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Prefix of every artifact file name.
    pub name: String,
    pub environment: EnvironmentSpec,
    pub acquisitions: Vec<AcquisitionKind>,
    #[serde(default = "default_prior")]
    pub prior: InputPrior,
    /// Every mission field except `acquisition`, `prior` and `seed`, which the experiment sets.
    #[serde(default)]
    pub mission: MissionConfig,
    pub replicates: usize,
    #[serde(default)]
    pub seed_base: u64,
    pub output_dir: PathBuf,
    /// Directory that relative environment paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_prior() -> InputPrior {
    InputPrior::Uniform
}

const HARNESS_OWNED: [&str; 3] = ["acquisition", "prior", "seed"];

impl ExperimentSpec {
    /// Parses a spec, applying `key.path=value` overrides before validation.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_error(text, &e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        if let Some(toml::Value::Table(m)) = table.get("mission") {
            if let Some(k) = HARNESS_OWNED.iter().find(|k| m.contains_key(**k)) {
                return Err(Error::Config(format!(
                    "mission.{k} is set by the experiment; use the top-level `acquisitions`, `prior` or `seed_base`"
                )));
            }
        }
        let spec: ExperimentSpec = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().trim().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut spec = Self::from_toml_str(&text, overrides)?;
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(spec)
    }

    /// TOML form that parses back to an equal spec.
    pub fn to_toml(&self) -> String {
        let mut v = toml::Value::try_from(self).expect("spec serializes");
        if let Some(m) = v.get_mut("mission").and_then(toml::Value::as_table_mut) {
            HARNESS_OWNED.iter().for_each(|k| drop(m.remove(*k)));
        }
        toml::to_string_pretty(&v).expect("spec serializes")
    }

    fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("spec serializes");
        if let Some(m) = v.get_mut("mission").and_then(serde_json::Value::as_object_mut) {
            HARNESS_OWNED.iter().for_each(|k| drop(m.remove(*k)));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(Error::Config(format!(
                "name must be nonempty and use only letters, digits, '-', '_' or '.', got {:?}",
                self.name
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.acquisitions.is_empty() {
            return Err(Error::Config("acquisitions must list at least one acquisition function".into()));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir must not be empty".into()));
        }
        self.environment.validate()?;
        self.prior.validate().map_err(|e| Error::Config(format!("prior: {e}")))?;
        self.mission_config(self.acquisitions[0], 0).validate()
    }

    /// Mission configuration of one `(acquisition, replicate)` pair.
    pub fn mission_config(&self, kind: AcquisitionKind, replicate: usize) -> MissionConfig {
        MissionConfig {
            acquisition: kind,
            prior: self.prior.clone(),
            seed: self.seed_base.wrapping_add(replicate as u64),
            ..self.mission.clone()
        }
    }

    /// `output_dir`, placed under `root` when it is relative.
    pub fn resolve_output_dir(&self, root: Option<&Path>) -> PathBuf {
        match root {
            Some(r) if self.output_dir.is_relative() => r.join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn trace_file_name(&self, kind: AcquisitionKind, replicate: usize) -> String {
        format!("{}_{}_r{:03}.jsonl", self.name, kind.slug(), replicate)
    }

    pub fn aggregate_file_name(&self, kind: AcquisitionKind) -> String {
        format!("{}_{}.csv", self.name, kind.slug())
    }
}

fn parse_error(text: &str, e: &toml::de::Error) -> Error {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    Error::Parse {
        line,
        column,
        message: e.message().trim().to_string(),
    }
}

/// Sets a dotted key, e.g. `mission.duration=5` or `acquisitions=["US","IVR"]`.
///
/// The value is read as a TOML value and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key {key:?}: {p} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    /// Parent of relative output directories.
    pub output_root: Option<PathBuf>,
}

impl RunOptions {
    /// Options with the output root read from [`OUTPUT_ROOT_ENV`].
    pub fn from_env(jobs: Option<usize>) -> Self {
        Self {
            jobs,
            output_root: std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from),
        }
    }
}

/// All replicates of one acquisition function.
#[derive(Debug, Clone)]
pub struct AcquisitionResult {
    pub kind: AcquisitionKind,
    pub traces: Vec<Vec<EpochRecord>>,
    /// One series per metric; empty with a single replicate.
    pub aggregates: Vec<AggregateSeries>,
    pub finals: Vec<FinalSummary>,
}

impl AcquisitionResult {
    pub fn final_median(&self, metric: Metric) -> Option<f64> {
        self.finals.iter().find(|f| f.metric == metric).map(|f| f.median)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub manifest: PathBuf,
    pub noise_variance: f64,
    pub results: Vec<AcquisitionResult>,
}

impl ExperimentReport {
    pub fn result(&self, kind: AcquisitionKind) -> Option<&AcquisitionResult> {
        self.results.iter().find(|r| r.kind == kind)
    }
}

#[derive(Debug, Serialize)]
struct MissionEntry {
    acquisition: AcquisitionKind,
    replicate: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct Artifact {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    spec: serde_json::Value,
    noise_variance: f64,
    missions: Vec<MissionEntry>,
    finals: Vec<(AcquisitionKind, &'a [FinalSummary])>,
    artifacts: Vec<Artifact>,
}

/// Runs every mission of `spec` and writes its artifacts.
///
/// When a mission fails the remaining traces and the manifest are still written,
/// then the first failure is returned as [`Error::MissionAborted`].
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ExperimentReport> {
    spec.validate()?;
    let out = spec.resolve_output_dir(opts.output_root.as_deref());
    let trace_dir = out.join("traces");
    let agg_dir = out.join("aggregate");
    fs::create_dir_all(&trace_dir)?;
    fs::create_dir_all(&agg_dir)?;

    let env = spec.environment.build(&spec.base_dir)?;
    let probes = ProbeSet::uniform(spec.mission.probes, spec.mission.probe_seed);
    let evaluator = MetricEvaluator::new(&env, probes);

    let jobs: Vec<(AcquisitionKind, usize)> = spec
        .acquisitions
        .iter()
        .flat_map(|k| (0..spec.replicates).map(move |r| (*k, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<Vec<EpochRecord>>> = pool.install(|| {
        jobs.par_iter()
            .map(|(kind, r)| {
                let cfg = spec.mission_config(*kind, *r);
                let trace = run_mission_with(&env, &cfg, &evaluator)?.trace;
                let file = fs::File::create(trace_dir.join(spec.trace_file_name(*kind, *r)))?;
                write_trace(std::io::BufWriter::new(file), &trace)?;
                Ok(trace)
            })
            .collect()
    });

    let mut entries = Vec::with_capacity(jobs.len());
    let mut first_failure = None;
    let mut by_kind: Vec<(AcquisitionKind, Vec<Vec<EpochRecord>>, bool)> =
        spec.acquisitions.iter().map(|k| (*k, Vec::new(), true)).collect();
    for ((kind, r), outcome) in jobs.iter().zip(outcomes) {
        let slot = by_kind.iter_mut().find(|s| s.0 == *kind).expect("kind listed");
        let mut entry = MissionEntry {
            acquisition: *kind,
            replicate: *r,
            seed: spec.mission_config(*kind, *r).seed,
            trace: None,
            error: None,
        };
        match outcome {
            Ok(trace) => {
                entry.trace = Some(format!("traces/{}", spec.trace_file_name(*kind, *r)));
                slot.1.push(trace);
            }
            Err(e) => {
                slot.2 = false;
                entry.error = Some(e.to_string());
                first_failure.get_or_insert_with(|| Error::MissionAborted {
                    mission: format!("{} replicate {r}", kind),
                    reason: e.to_string(),
                });
            }
        }
        entries.push(entry);
    }

    let mut results = Vec::new();
    for (kind, traces, complete) in by_kind {
        let snaps = traces.iter().map(|t| snapshots(t)).collect::<Result<Vec<_>>>()?;
        let mut aggregates = Vec::new();
        if complete && snaps.len() >= 2 {
            aggregates = Metric::ALL
                .iter()
                .map(|m| aggregate(&snaps, *m))
                .collect::<Result<Vec<_>>>()?;
            let file = fs::File::create(agg_dir.join(spec.aggregate_file_name(kind)))?;
            write_aggregate_csv(std::io::BufWriter::new(file), &aggregates)?;
        }
        let finals = if snaps.is_empty() {
            Vec::new()
        } else {
            Metric::ALL.iter().map(|m| final_summary(&snaps, *m)).collect()
        };
        results.push(AcquisitionResult {
            kind,
            traces,
            aggregates,
            finals,
        });
    }

    let mut artifacts = Vec::new();
    for (dir, rel) in [(&trace_dir, "traces"), (&agg_dir, "aggregate")] {
        let mut names: Vec<String> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .filter(|n| n.starts_with(&format!("{}_", spec.name)))
            .collect();
        names.sort();
        for n in names {
            let bytes = fs::read(dir.join(&n))?;
            artifacts.push(Artifact {
                path: format!("{rel}/{n}"),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
    }
    let manifest = Manifest {
        spec: spec.echo(),
        noise_variance: env.noise_variance,
        missions: entries,
        finals: results.iter().map(|r| (r.kind, r.finals.as_slice())).collect(),
        artifacts,
    };
    let manifest_path = out.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;

    if let Some(e) = first_failure {
        return Err(e);
    }
    Ok(ExperimentReport {
        output_dir: out,
        manifest: manifest_path,
        noise_variance: env.noise_variance,
        results,
    })
}
