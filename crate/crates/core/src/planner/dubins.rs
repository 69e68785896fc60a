use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Vehicle position and heading; `theta = 0` points along the `z₁` axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub z: [f64; 2],
    pub theta: f64,
}

impl Pose {
    pub fn new(z: [f64; 2], theta: f64) -> Self {
        Self {
            z,
            theta: normalize_angle(theta),
        }
    }
}

/// Maps an angle to `(-π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

fn mod2pi(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Steer {
    Left,
    Straight,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DubinsWord {
    Lsl,
    Rsr,
    Lsr,
    Rsl,
    Rlr,
    Lrl,
}

impl DubinsWord {
    pub const ALL: [DubinsWord; 6] = [
        DubinsWord::Lsl,
        DubinsWord::Rsr,
        DubinsWord::Lsr,
        DubinsWord::Rsl,
        DubinsWord::Rlr,
        DubinsWord::Lrl,
    ];

    pub fn steers(self) -> [Steer; 3] {
        use Steer::*;
        match self {
            DubinsWord::Lsl => [Left, Straight, Left],
            DubinsWord::Rsr => [Right, Straight, Right],
            DubinsWord::Lsr => [Left, Straight, Right],
            DubinsWord::Rsl => [Right, Straight, Left],
            DubinsWord::Rlr => [Right, Left, Right],
            DubinsWord::Lrl => [Left, Right, Left],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub steer: Steer,
    pub length: f64,
}

/// Three-segment curvature-bounded path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath {
    pub start: Pose,
    pub word: DubinsWord,
    pub segments: [Segment; 3],
    pub turning_radius: f64,
}

/// Normalized segment lengths `(t, p, q)` of one word, or `None` if infeasible.
fn word_params(word: DubinsWord, a: f64, b: f64, d: f64) -> Option<[f64; 3]> {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let cab = (a - b).cos();
    match word {
        DubinsWord::Lsl => {
            let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb);
            if p2 < 0.0 {
                return None;
            }
            let th = (cb - ca).atan2(d + sa - sb);
            Some([mod2pi(th - a), p2.sqrt(), mod2pi(b - th)])
        }
        DubinsWord::Rsr => {
            let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa);
            if p2 < 0.0 {
                return None;
            }
            let th = (ca - cb).atan2(d - sa + sb);
            Some([mod2pi(a - th), p2.sqrt(), mod2pi(th - b)])
        }
        DubinsWord::Lsr => {
            let p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let th = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(th - a), p, mod2pi(th - b)])
        }
        DubinsWord::Rsl => {
            let p2 = d * d - 2.0 + 2.0 * cab - 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let th = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(a - th), p, mod2pi(b - th)])
        }
        DubinsWord::Rlr => {
            let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
            if c.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(2.0 * PI - c.acos());
            let t = mod2pi(a - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            Some([t, p, mod2pi(a - b - t + p)])
        }
        DubinsWord::Lrl => {
            let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
            if c.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(2.0 * PI - c.acos());
            let t = mod2pi(-a - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            Some([t, p, mod2pi(b - a - t + p)])
        }
    }
}

/// Path of a single word, or `None` if that word cannot connect the poses.
pub fn dubins_word(start: Pose, end: Pose, radius: f64, word: DubinsWord) -> Option<DubinsPath> {
    let dx = end.z[0] - start.z[0];
    let dy = end.z[1] - start.z[1];
    let d = dx.hypot(dy) / radius;
    let phi = if d > 0.0 { dy.atan2(dx) } else { 0.0 };
    let a = mod2pi(start.theta - phi);
    let b = mod2pi(end.theta - phi);
    let params = word_params(word, a, b, d)?;
    let steers = word.steers();
    let segments = [0, 1, 2].map(|i| Segment {
        steer: steers[i],
        length: params[i] * radius,
    });
    Some(DubinsPath {
        start,
        word,
        segments,
        turning_radius: radius,
    })
}

/// Shortest of the six Dubins words between two poses.
pub fn shortest_dubins(start: Pose, end: Pose, radius: f64) -> Result<DubinsPath> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(contract(format!("turning radius must be positive, got {radius}")));
    }
    let same_pose = start.z == end.z && normalize_angle(start.theta - end.theta) == 0.0;
    if same_pose {
        return Ok(DubinsPath {
            start,
            word: DubinsWord::Lsl,
            segments: [Steer::Left, Steer::Straight, Steer::Left].map(|steer| Segment { steer, length: 0.0 }),
            turning_radius: radius,
        });
    }
    DubinsWord::ALL
        .iter()
        .filter_map(|w| dubins_word(start, end, radius, *w))
        .min_by(|p, q| p.length().total_cmp(&q.length()))
        .ok_or_else(|| contract("no Dubins word connects the poses"))
}

impl DubinsPath {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Pose after travelling `s` along the path (clamped to `[0, length]`).
    pub fn pose_at(&self, s: f64) -> Pose {
        let mut remaining = s.clamp(0.0, self.length());
        let mut pose = self.start;
        for seg in &self.segments {
            let step = remaining.min(seg.length);
            pose = advance(pose, seg.steer, step, self.turning_radius);
            remaining -= step;
            if remaining <= 0.0 {
                break;
            }
        }
        pose
    }

    pub fn end(&self) -> Pose {
        self.pose_at(self.length())
    }

    /// Points at arclengths `0, ds, 2ds, …` plus the endpoint, paired with their arclength.
    pub fn sample(&self, ds: f64) -> Result<Vec<([f64; 2], f64)>> {
        if !(ds > 0.0) {
            return Err(contract(format!("sampling step must be positive, got {ds}")));
        }
        let total = self.length();
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let s = k as f64 * ds;
            if s >= total - 1e-12 * total.max(1.0) {
                break;
            }
            out.push((self.pose_at(s).z, s));
            k += 1;
        }
        out.push((self.end().z, total));
        Ok(out)
    }

    /// `n ≥ 2` points evenly spaced in arclength, endpoints included.
    pub fn sample_n(&self, n: usize) -> Vec<([f64; 2], f64)> {
        let n = n.max(2);
        let total = self.length();
        (0..n)
            .map(|i| {
                let s = total * i as f64 / (n - 1) as f64;
                (self.pose_at(s).z, s)
            })
            .collect()
    }
}

fn advance(p: Pose, steer: Steer, len: f64, r: f64) -> Pose {
    let [x, y] = p.z;
    let th = p.theta;
    match steer {
        Steer::Straight => Pose {
            z: [x + len * th.cos(), y + len * th.sin()],
            theta: th,
        },
        Steer::Left => {
            let phi = len / r;
            Pose {
                z: [
                    x + r * ((th + phi).sin() - th.sin()),
                    y + r * (th.cos() - (th + phi).cos()),
                ],
                theta: normalize_angle(th + phi),
            }
        }
        Steer::Right => {
            let phi = len / r;
            Pose {
                z: [
                    x + r * (th.sin() - (th - phi).sin()),
                    y + r * ((th - phi).cos() - th.cos()),
                ],
                theta: normalize_angle(th - phi),
            }
        }
    }
}
