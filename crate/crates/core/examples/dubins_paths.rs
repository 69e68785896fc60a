//! Shortest curvature-bounded paths and the arc of admissible destinations.
//!
//! ```text
//! cargo run --release --example dubins_paths
//! ```

use std::f64::consts::PI;

use anomaly_ipp::planner::{dubins_word, shortest_dubins, AdmissibleSet, DubinsWord, PlannerConfig, Pose};

fn main() -> anomaly_ipp::Result<()> {
    let start = Pose::new([0.2, 0.2], 0.0);
    let end = Pose::new([0.25, 0.3], PI);
    let r = 0.05;
    println!("from {:?} to {:?}, turning radius {r}", start, end);
    for w in DubinsWord::ALL {
        match dubins_word(start, end, r, w) {
            Some(p) => println!("  {:?}: length {:.4}", w, p.length()),
            None => println!("  {:?}: infeasible", w),
        }
    }
    let best = shortest_dubins(start, end, r)?;
    println!("shortest: {:?}, length {:.4}", best.word, best.length());
    for (z, s) in best.sample_n(6) {
        println!("  s = {:.3}  z = ({:.3}, {:.3})", s, z[0], z[1]);
    }

    let cfg = PlannerConfig::default();
    for pose in [Pose::new([0.5, 0.5], 0.3), Pose::new([0.05, 0.5], PI)] {
        let set = AdmissibleSet::from_config(pose, &cfg)?;
        println!(
            "\nvehicle at ({:.2}, {:.2}) heading {:.2}: {} of {} candidates admissible, half angle {:.3}{}",
            pose.z[0],
            pose.z[1],
            pose.theta,
            set.candidates.len(),
            cfg.n_candidates,
            set.half_angle,
            if set.widened { " (widened)" } else { "" }
        );
        let lengths: Vec<f64> = set
            .candidates
            .iter()
            .map(|c| set.path_to(c, cfg.turning_radius).map(|p| p.length()))
            .collect::<anomaly_ipp::Result<_>>()?;
        let (lo, hi) = lengths.iter().fold((f64::INFINITY, 0.0f64), |(a, b), l| (a.min(*l), b.max(*l)));
        println!("path lengths range {:.3} .. {:.3} (lookahead {})", lo, hi, cfg.lookahead);
    }
    Ok(())
}
