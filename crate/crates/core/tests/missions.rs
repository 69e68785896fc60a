//! Whole-mission behaviour on the benchmark fields.

use anomaly_ipp::acquisition::AcquisitionKind;
use anomaly_ipp::environments::{make_benchmark, Environment};
use anomaly_ipp::metrics::median;
use anomaly_ipp::mission::{
    read_trace, replay_mismatches, run_mission, run_next_best_view, trace_to_string, MissionConfig, StaticMode,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn calibrated(name: &str) -> Environment {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    make_benchmark(name).unwrap().calibrated(1e-3, 20_000, &mut rng).unwrap()
}

fn config(kind: AcquisitionKind, duration: f64, seed: u64) -> MissionConfig {
    MissionConfig {
        duration,
        acquisition: kind,
        seed,
        probes: 20_000,
        ..MissionConfig::default()
    }
}

#[test]
fn full_mission_samples_on_the_clock_along_a_continuous_path() {
    let env = calibrated("ackley");
    let cfg = config(AcquisitionKind::Us, 15.0, 3);
    let out = run_mission(&env, &cfg).unwrap();
    assert!(out.samples.len() <= 226, "{} samples", out.samples.len());
    assert!(out.samples.iter().all(|s| s.t <= 15.0));
    let step = cfg.speed * cfg.sample_period;
    for w in out.samples.windows(2) {
        let d = (w[1].z[0] - w[0].z[0]).hypot(w[1].z[1] - w[0].z[1]);
        assert!(d <= step + 1e-9, "jump of {d}");
    }
    let last = out.trace.last().unwrap();
    assert_eq!(last.clock, 15.0);
    assert_eq!(out.model.data().len(), out.samples.len());

    let sd = env.noise_variance.sqrt();
    let z: Vec<f64> = out.samples.iter().map(|s| (s.y - env.eval(s.z, s.t)) / sd).collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
    assert!((0.5..=2.0).contains(&var), "standardized residual variance {var}");
}

#[test]
fn same_seed_gives_identical_traces_and_replays() {
    let env = calibrated("bird");
    let cfg = config(AcquisitionKind::IvrLw, 2.5, 17);
    let a = run_mission(&env, &cfg).unwrap();
    let b = run_mission(&env, &cfg).unwrap();
    let text = trace_to_string(&a.trace);
    assert_eq!(text, trace_to_string(&b.trace));
    assert_eq!(read_trace(text.as_bytes()).unwrap(), a.trace);
    assert!(replay_mismatches(&env, &cfg, &a.trace).unwrap().is_empty());

    let other = run_mission(&env, &MissionConfig { seed: 18, ..cfg }).unwrap();
    assert_ne!(trace_to_string(&other.trace), text);
}

#[test]
fn en_route_sampling_beats_next_best_view_on_ackley() {
    let env = calibrated("ackley");
    let runs = 20;
    let wins = (0..runs)
        .filter(|&seed| {
            let cfg = config(AcquisitionKind::Us, 15.0, seed);
            let ipp = run_mission(&env, &cfg).unwrap().trace.last().unwrap().metrics.rmse;
            let nbv = run_next_best_view(&env, &cfg).unwrap().trace.last().unwrap().metrics.rmse;
            ipp <= nbv
        })
        .count();
    assert!(wins * 10 >= runs as usize * 6, "path planning won {wins} of {runs}");
}

#[test]
fn static_treatments_of_time_agree_on_ackley() {
    let env = calibrated("ackley");
    let finals: Vec<f64> = [StaticMode::Spatiotemporal, StaticMode::InfiniteTimeLengthscale, StaticMode::NoTimeVariable]
        .into_iter()
        .map(|mode| {
            let rmse: Vec<f64> = (0..10)
                .map(|seed| {
                    let cfg = MissionConfig {
                        static_mode: mode,
                        ..config(AcquisitionKind::Us, 15.0, seed)
                    };
                    run_mission(&env, &cfg).unwrap().trace.last().unwrap().metrics.rmse
                })
                .collect();
            median(&rmse)
        })
        .collect();
    let hi = finals.iter().cloned().fold(f64::MIN, f64::max);
    let lo = finals.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi <= 3.0 * lo, "median final rmse per mode {finals:?}");
}
