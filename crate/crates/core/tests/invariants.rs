//! Property tests for the module invariants.

use std::f64::consts::PI;

use anomaly_ipp::acquisition::{argmax, AcquisitionContext, AcquisitionKind, Evaluator};
use anomaly_ipp::density::{fit_gmm, refresh_weight, InputPrior, OutputDensity, WeightConfig};
use anomaly_ipp::environments::{dynamic_shift, to_native, to_unit, Benchmark};
use anomaly_ipp::gp::{fit_with, Dataset, FitOptions, GpModel, KernelParams};
use anomaly_ipp::metrics::{cumulative_min, snapshot_of};
use anomaly_ipp::planner::{admissible_destinations, path_integral, shortest_dubins, Pose};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(seed: u64, n: usize, dims: usize) -> GpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dims).map(|_| rng.gen()).collect()).collect();
    let y = x.iter().map(|v| (5.0 * v[0]).sin() + v[1] * v[1] + 0.01 * rng.gen::<f64>()).collect();
    let p = KernelParams::new(
        rng.gen_range(0.2..2.0),
        (0..dims).map(|_| rng.gen_range(0.05..0.6)).collect(),
        rng.gen_range(1e-6..1e-2),
    )
    .unwrap();
    GpModel::new(p, Dataset::new(x, y).unwrap()).unwrap()
}

fn unit_points(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn posterior_variance_is_bounded(seed in any::<u64>(), n in 1usize..40, dims in 2usize..4) {
        let m = random_model(seed, n, dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..50 {
            let x: Vec<f64> = (0..dims).map(|_| rng.gen()).collect();
            let v = m.posterior_var(&x).unwrap();
            prop_assert!(v >= 0.0 && v <= m.params().signal_variance * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cholesky_reconstructs_gram_matrix(seed in any::<u64>(), n in 1usize..40) {
        let m = random_model(seed, n, 2);
        let l = m.chol();
        let k = l * l.transpose();
        let p = m.params();
        let x = &m.data().inputs;
        for i in 0..n {
            for j in 0..n {
                let mut want = p.eval(&x[i], &x[j]);
                if i == j {
                    want += p.noise_variance + m.jitter();
                }
                prop_assert!((k[(i, j)] - want).abs() <= 1e-8 * want.abs().max(p.signal_variance));
            }
        }
    }

    #[test]
    fn observations_never_increase_variance(seed in any::<u64>(), n in 1usize..30) {
        let m = random_model(seed, n, 2);
        let mut data = m.data().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        data.push(vec![rng.gen(), rng.gen()], rng.gen());
        let bigger = m.condition_on(data).unwrap();
        for x in unit_points(seed ^ 3, 100) {
            prop_assert!(bigger.posterior_var(&x).unwrap() <= m.posterior_var(&x).unwrap() + 1e-12);
        }
    }

    #[test]
    fn fit_never_ends_below_a_starting_point(seed in any::<u64>(), n in 3usize..20) {
        let m = random_model(seed, n, 2);
        let opts = FitOptions { restarts: 3, seed, ..FitOptions::default() };
        let r = fit_with(m.data(), &KernelParams::isotropic(2, 1.0, 0.3, 1e-3), &opts).unwrap();
        for init in &r.initial_log_likelihoods {
            prop_assert!(r.log_likelihood >= *init - 1e-9);
        }
    }

    #[test]
    fn dubins_is_at_least_the_chord_and_rigid_invariant(
        a in (0.0..1.0f64, 0.0..1.0f64, -PI..PI),
        b in (0.0..1.0f64, 0.0..1.0f64, -PI..PI),
        r in 0.01..0.3f64,
        rot in -PI..PI,
        shift in (-2.0..2.0f64, -2.0..2.0f64),
    ) {
        let pa = Pose::new([a.0, a.1], a.2);
        let pb = Pose::new([b.0, b.1], b.2);
        let len = shortest_dubins(pa, pb, r).unwrap().length();
        prop_assert!(len >= (a.0 - b.0).hypot(a.1 - b.1) - 1e-12);
        let (c, s) = (rot.cos(), rot.sin());
        let move_pose = |p: Pose| Pose::new(
            [c * p.z[0] - s * p.z[1] + shift.0, s * p.z[0] + c * p.z[1] + shift.1],
            p.theta + rot,
        );
        let moved = shortest_dubins(move_pose(pa), move_pose(pb), r).unwrap().length();
        prop_assert!((moved - len).abs() < 1e-9);
    }

    #[test]
    fn dubins_paths_are_tangent_continuous(
        a in (0.0..1.0f64, 0.0..1.0f64, -PI..PI),
        b in (0.0..1.0f64, 0.0..1.0f64, -PI..PI),
        r in 0.02..0.3f64,
    ) {
        let path = shortest_dubins(Pose::new([a.0, a.1], a.2), Pose::new([b.0, b.1], b.2), r).unwrap();
        let samples = path.sample_n(400);
        let ds = path.length() / 399.0;
        for w in samples.windows(2) {
            let step = (w[1].0[0] - w[0].0[0]).hypot(w[1].0[1] - w[0].0[1]);
            prop_assert!(step <= ds + 1e-9);
        }
        let end = path.end();
        prop_assert!((end.z[0] - b.0).abs() < 1e-9 && (end.z[1] - b.1).abs() < 1e-9);
    }

    #[test]
    fn admissible_candidates_respect_the_arc(x in 0.05..0.95f64, y in 0.05..0.95f64, theta in -PI..PI) {
        let pose = Pose::new([x, y], theta);
        if let Ok(set) = admissible_destinations(pose, 0.2, 3.0 * PI / 4.0, 0.02, 64) {
            for c in &set.candidates {
                let d = (c.point[0] - x).hypot(c.point[1] - y);
                prop_assert!((d - 0.2).abs() < 1e-12);
                let off = (c.bearing - theta + PI).rem_euclid(2.0 * PI) - PI;
                prop_assert!(off.abs() <= set.half_angle + 1e-12);
                for v in c.point {
                    prop_assert!(v > 0.04 && v < 0.96);
                }
            }
        }
    }

    #[test]
    fn path_integral_is_stable_under_refinement(seed in any::<u64>(), n in 5usize..30) {
        let raw = random_model(seed, n, 2);
        let m = anomaly_ipp::gp::fit(raw.data(), &KernelParams::isotropic(2, 1.0, 0.2, 1e-3), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Pose::new([rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)], rng.gen_range(-PI..PI));
        let set = admissible_destinations(a, 0.2, 3.0 * PI / 4.0, 0.02, 64).unwrap();
        let c = &set.candidates[rng.gen_range(0..set.candidates.len())];
        let path = set.path_to(c, 0.02).unwrap();
        let integral = |n: usize| {
            let s = path.sample_n(n);
            let costs: Vec<f64> = s.iter().map(|(z, _)| m.posterior_var(z).unwrap()).collect();
            let arcs: Vec<f64> = s.iter().map(|(_, a)| *a).collect();
            path_integral(&costs, &arcs)
        };
        let (coarse, fine) = (integral(16), integral(32));
        let scale = path.length() * m.params().signal_variance;
        prop_assert!((coarse - fine).abs() <= 1e-3 * scale, "{coarse} vs {fine} on scale {scale}");
    }

    #[test]
    fn rescaling_round_trips(u in (0.0..1.0f64, 0.0..1.0f64)) {
        for b in Benchmark::ALL {
            let d = b.native_domain();
            let back = to_unit(d, to_native(d, [u.0, u.1]));
            prop_assert!((back[0] - u.0).abs() < 1e-12 && (back[1] - u.1).abs() < 1e-12);
        }
    }

    #[test]
    fn dynamic_shift_is_periodic_in_the_first_axis(z in (0.0..1.0f64, 0.0..1.0f64), k in 0u32..(15 << 10)) {
        let t = k as f64 / 1024.0;
        prop_assert_eq!(dynamic_shift([z.0, z.1], t)[0], dynamic_shift([z.0, z.1], t + 15.0)[0]);
    }

    #[test]
    fn kde_integrates_to_one_above_the_floor(seed in any::<u64>(), n in 100usize..2000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(3) * 5.0).collect();
        let d = OutputDensity::from_samples(&s);
        prop_assert!((d.mass() - 1.0).abs() <= 1e-3);
        prop_assert!(d.values.iter().all(|v| *v >= d.floor && v.is_finite()));
    }

    #[test]
    fn em_log_likelihood_is_monotone(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 2]> = (0..400).map(|_| [rng.gen(), rng.gen::<f64>().powi(2)]).collect();
        let w: Vec<f64> = pts.iter().map(|p| 0.1 + p[0]).collect();
        let fit = fit_gmm(&pts, &w, k, 100, &mut rng).unwrap();
        for pair in fit.log_likelihood.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-9 * pair[0].abs().max(1.0));
        }
        for c in &fit.gmm.components {
            prop_assert!(c.weight > 0.0);
        }
    }

    #[test]
    fn cumulative_min_is_nonincreasing(v in prop::collection::vec(0.0..10.0f64, 1..50)) {
        let c = cumulative_min(&v);
        prop_assert!(c.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn metrics_respect_permutation_and_transform_invariances(seed in any::<u64>(), shift in -5.0..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 2]> = (0..300).map(|_| [rng.gen(), rng.gen()]).collect();
        let f: Vec<f64> = pts.iter().map(|z| (6.0 * z[0]).sin() + z[1]).collect();
        let mu: Vec<f64> = f.iter().map(|v| v + 0.1 * rng.gen::<f64>()).collect();
        let base = snapshot_of(1.0, &pts, &f, &mu);

        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.reverse();
        let pick = |v: &[f64]| order.iter().map(|i| v[*i]).collect::<Vec<f64>>();
        let perm_pts: Vec<[f64; 2]> = order.iter().map(|i| pts[*i]).collect();
        let perm = snapshot_of(1.0, &perm_pts, &pick(&f), &pick(&mu));
        prop_assert!((perm.rmse - base.rmse).abs() < 1e-12);
        prop_assert!((perm.pdfe - base.pdfe).abs() < 1e-9 * base.pdfe.max(1.0));
        prop_assert_eq!(perm.dist_to_min, base.dist_to_min);
        prop_assert_eq!(perm.regret, base.regret);

        let up = |v: &[f64]| v.iter().map(|x| x + shift).collect::<Vec<f64>>();
        let moved = snapshot_of(1.0, &pts, &up(&f), &up(&mu));
        prop_assert!((moved.rmse - base.rmse).abs() < 1e-9);
        prop_assert!((moved.regret - base.regret).abs() < 1e-9);

        let warp = |v: &[f64]| v.iter().map(|x| x.exp()).collect::<Vec<f64>>();
        prop_assert_eq!(snapshot_of(1.0, &pts, &warp(&f), &warp(&mu)).dist_to_min, base.dist_to_min);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn weights_are_finite_and_nonnegative(seed in any::<u64>(), n in 5usize..30) {
        let m = random_model(seed, n, 2);
        let prior = InputPrior::isotropic([0.3, 0.6], 0.02).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = refresh_weight(&m, &prior, 0.0, &WeightConfig { n_samples: 2000, n_resample: 2000, ..WeightConfig::default() }, &mut rng).unwrap();
        for z in unit_points(seed, 200) {
            let v = anomaly_ipp::density::likelihood_ratio(&w, &m, &z).unwrap();
            prop_assert!(v.is_finite() && v >= 0.0);
            let g = w.gmm.eval([z[0], z[1]]);
            prop_assert!(g.is_finite() && g >= 0.0);
        }
    }

    #[test]
    fn acquisition_values_are_finite_and_nonnegative(seed in any::<u64>(), n in 3usize..30) {
        let m = random_model(seed, n, 2);
        let prior = InputPrior::isotropic([0.5, 0.5], 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = refresh_weight(&m, &prior, 0.0, &WeightConfig { n_samples: 2000, n_resample: 2000, ..WeightConfig::default() }, &mut rng).unwrap();
        let probes = unit_points(seed ^ 9, 40);
        use AcquisitionKind::*;
        for kind in [Us, UsIw, UsLw, Ivr, IvrIw, IvrLw] {
            let ev = Evaluator::new(AcquisitionContext::new(&m, &prior, 0.0).with_weight(&w), kind).unwrap();
            for u in ev.utilities(&probes).unwrap() {
                prop_assert!(u.is_finite() && u >= 0.0, "{kind}: {u}");
            }
        }
        for kind in [Ucb { kappa: 1.0 }, Pi { kappa: 1.0 }, Ei { kappa: 1.0 }] {
            let ev = Evaluator::new(AcquisitionContext::new(&m, &prior, 0.0), kind).unwrap();
            prop_assert!(ev.utilities(&probes).unwrap().iter().all(|u| u.is_finite()));
        }
    }

    #[test]
    fn importance_weighting_is_inert_under_a_uniform_prior(seed in any::<u64>(), n in 3usize..30) {
        let m = random_model(seed, n, 2);
        let prior = InputPrior::Uniform;
        let probes = unit_points(seed ^ 5, 60);
        let ctx = AcquisitionContext::new(&m, &prior, 0.0);
        let rank = |k| argmax(&Evaluator::new(ctx, k).unwrap().scores(&probes).unwrap());
        prop_assert_eq!(rank(AcquisitionKind::UsIw), rank(AcquisitionKind::Us));
        prop_assert_eq!(rank(AcquisitionKind::IvrIw), rank(AcquisitionKind::Ivr));
    }

    #[test]
    fn scaling_the_mixture_keeps_lw_argmaxes(seed in any::<u64>(), n in 3usize..30, factor in 1e-3..1e3f64) {
        let m = random_model(seed, n, 2);
        let prior = InputPrior::Uniform;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = refresh_weight(&m, &prior, 0.0, &WeightConfig { n_samples: 2000, n_resample: 2000, ..WeightConfig::default() }, &mut rng).unwrap();
        let mut scaled = w.clone();
        scaled.gmm = w.gmm.scaled(factor);
        let probes = unit_points(seed ^ 7, 60);
        for kind in [AcquisitionKind::UsLw, AcquisitionKind::IvrLw] {
            let a = argmax(&Evaluator::new(AcquisitionContext::new(&m, &prior, 0.0).with_weight(&w), kind).unwrap().scores(&probes).unwrap());
            let b = argmax(&Evaluator::new(AcquisitionContext::new(&m, &prior, 0.0).with_weight(&scaled), kind).unwrap().scores(&probes).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
