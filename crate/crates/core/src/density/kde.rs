//! One-dimensional Gaussian kernel density estimation on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::special::norm_pdf;

pub const GRID_POINTS: usize = 1024;
/// Relative density floor (fraction of the peak value).
pub const DENSITY_FLOOR_REL: f64 = 1e-9;
/// Bandwidth used when all samples coincide, relative to `max(1, |value|)`.
pub const DEGENERATE_BANDWIDTH_REL: f64 = 1e-6;

/// A density tabulated on a uniform grid `lo + i·step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDensity {
    pub lo: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub floor: f64,
}

/// Silverman's rule of thumb `0.9 min(σ, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        if i + 1 < sorted.len() {
            sorted[i] * (1.0 - f) + sorted[i + 1] * f
        } else {
            sorted[i]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

impl OutputDensity {
    /// KDE with Silverman bandwidth, evaluated by linear binning and discrete convolution.
    pub fn from_samples(samples: &[f64]) -> Self {
        Self::build(samples, None, false)
    }

    /// KDE with Silverman bandwidth, evaluated by direct summation over samples.
    pub fn from_samples_direct(samples: &[f64]) -> Self {
        Self::build(samples, None, true)
    }

    /// KDE with a fixed bandwidth.
    pub fn with_bandwidth(samples: &[f64], bandwidth: f64) -> Self {
        Self::build(samples, Some(bandwidth), false)
    }

    /// Tabulates an arbitrary density on `[lo, hi]` (used for analytic comparisons).
    pub fn tabulate(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64, floor: f64) -> Self {
        let step = (hi - lo) / (n - 1) as f64;
        let values = (0..n).map(|i| f(lo + i as f64 * step).max(floor)).collect();
        Self {
            lo,
            step,
            values,
            bandwidth: step,
            floor,
        }
    }

    fn build(samples: &[f64], bandwidth: Option<f64>, direct: bool) -> Self {
        assert!(!samples.is_empty(), "KDE needs at least one sample");
        let (min, max) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
        let degenerate_h = DEGENERATE_BANDWIDTH_REL * min.abs().max(max.abs()).max(1.0);
        let h = match bandwidth {
            Some(h) => h,
            None if max - min <= 0.0 => degenerate_h,
            None => silverman_bandwidth(samples).max(degenerate_h),
        };
        let lo = min - 3.0 * h;
        let hi = max + 3.0 * h;
        let step = (hi - lo) / (GRID_POINTS - 1) as f64;
        let mut values = if direct || h / step < 4.0 {
            direct_kde(samples, h, lo, step, GRID_POINTS)
        } else {
            binned_kde(samples, h, lo, step, GRID_POINTS)
        };
        // renormalize: the grid truncates the kernel tails at ±3h beyond the extremes
        let mass = trapezoid(&values, step);
        if mass > 0.0 {
            values.iter_mut().for_each(|v| *v /= mass);
        }
        let peak = values.iter().cloned().fold(0.0, f64::max);
        let floor = DENSITY_FLOOR_REL * peak;
        values.iter_mut().for_each(|v| *v = v.max(floor));
        Self {
            lo,
            step,
            values,
            bandwidth: h,
            floor,
        }
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.step * (self.values.len() - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.lo + i as f64 * self.step).collect()
    }

    /// Density at `y` by linear interpolation; the floor outside the grid.
    pub fn eval(&self, y: f64) -> f64 {
        let pos = (y - self.lo) / self.step;
        if !(pos >= 0.0) || pos > (self.values.len() - 1) as f64 {
            return self.floor;
        }
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let f = pos - i as f64;
        (self.values[i] * (1.0 - f) + self.values[i + 1] * f).max(self.floor)
    }

    /// Trapezoid integral of the tabulated values.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.step)
    }
}

pub(crate) fn trapezoid(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values.iter().sum();
    step * (inner - 0.5 * (values[0] + values[values.len() - 1]))
}

/// Gaussian KDE with Silverman bandwidth tabulated on `lo + i·step`, `i < n`,
/// rescaled to unit trapezoid mass and without any floor. Returns the values and the bandwidth.
pub fn kde_on_grid(samples: &[f64], lo: f64, step: f64, n: usize) -> (Vec<f64>, f64) {
    assert!(!samples.is_empty() && n >= 2 && step > 0.0);
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    let degenerate_h = DEGENERATE_BANDWIDTH_REL * min.abs().max(max.abs()).max(1.0);
    let h = if max - min <= 0.0 {
        degenerate_h
    } else {
        silverman_bandwidth(samples).max(degenerate_h)
    };
    let inside: Vec<f64> = samples
        .iter()
        .cloned()
        .filter(|s| *s >= lo && *s <= lo + step * (n - 1) as f64)
        .collect();
    let mut values = if h / step < 4.0 || inside.len() < samples.len() {
        direct_kde(samples, h, lo, step, n)
    } else {
        binned_kde(samples, h, lo, step, n)
    };
    let mass = trapezoid(&values, step);
    if mass > 0.0 {
        values.iter_mut().for_each(|v| *v /= mass);
    }
    (values, h)
}

fn direct_kde(samples: &[f64], h: f64, lo: f64, step: f64, g: usize) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let reach = 9.0 * h;
    (0..g)
        .map(|i| {
            let y = lo + i as f64 * step;
            let a = sorted.partition_point(|s| *s < y - reach);
            let b = sorted.partition_point(|s| *s <= y + reach);
            sorted[a..b].iter().map(|s| norm_pdf((y - s) / h)).sum::<f64>() / (n * h)
        })
        .collect()
}

fn binned_kde(samples: &[f64], h: f64, lo: f64, step: f64, g: usize) -> Vec<f64> {
    let mut counts = vec![0.0; g];
    for &s in samples {
        let pos = (s - lo) / step;
        let i = (pos.floor() as usize).min(g - 2);
        let f = pos - i as f64;
        counts[i] += 1.0 - f;
        counts[i + 1] += f;
    }
    let n = samples.len() as f64;
    let width = ((9.0 * h / step).ceil() as usize).min(g - 1);
    let kernel: Vec<f64> = (0..=width)
        .map(|j| norm_pdf(j as f64 * step / h) / (n * h))
        .collect();
    let mut out = vec![0.0; g];
    for (i, &c) in counts.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let a = i.saturating_sub(width);
        let b = (i + width).min(g - 1);
        for (k, o) in out.iter_mut().enumerate().take(b + 1).skip(a) {
            *o += c * kernel[k.abs_diff(i)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s: Vec<f64> = (0..5000).map(|_| rng.sample::<f64, _>(StandardNormal).powi(3)).collect();
        let d = OutputDensity::from_samples(&s);
        assert!((d.mass() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_samples_give_narrow_bump() {
        let d = OutputDensity::from_samples(&[2.5; 300]);
        assert!((d.mass() - 1.0).abs() < 1e-3);
        let peak = d
            .grid()
            .into_iter()
            .zip(&d.values)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((peak - 2.5).abs() < 1e-5);
        assert!(d.bandwidth <= 2.5 * DEGENERATE_BANDWIDTH_REL + 1e-15);
    }

    #[test]
    fn standard_normal_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let d = OutputDensity::from_samples(&s);
        let err = d
            .grid()
            .iter()
            .map(|y| (d.eval(*y) - norm_pdf(*y)).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.02, "{err}");
    }

    #[test]
    fn binned_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<f64> = (0..20_000).map(|_| rng.gen::<f64>().powi(4)).collect();
        let a = OutputDensity::from_samples(&s);
        let b = OutputDensity::from_samples_direct(&s);
        let peak = b.values.iter().cloned().fold(0.0, f64::max);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-3 * peak);
        }
    }

    #[test]
    fn floor_applies_outside_grid() {
        let d = OutputDensity::from_samples(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(d.eval(1e6), d.floor);
        assert!(d.values.iter().all(|v| *v >= d.floor));
    }
}
