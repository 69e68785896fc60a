//! Normal-distribution special functions: cdf/pdf in linear and log space and
//! bivariate normal rectangle probabilities (Genz's BVNU algorithm), plus a
//! vectorizable exponential for the hot kernel loops.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `eˣ` for `x ≤ 0` without branches, so loops over it vectorize.
///
/// Relative error stays within a few ulp down to `x = -708`; smaller arguments
/// return `e^{-708}`.
#[inline(always)]
pub fn exp_nonpositive(x: f64) -> f64 {
    const SHIFTER: f64 = 6755399441055744.0;
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let x = x.max(-708.0);
    let shifted = x * std::f64::consts::LOG2_E + SHIFTER;
    let k = shifted - SHIFTER;
    let r = x - k * LN2_HI - k * LN2_LO;
    let mut p = 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let bits = shifted.to_bits().wrapping_sub(SHIFTER.to_bits()).wrapping_add(1023) << 52;
    p * f64::from_bits(bits)
}

/// Adds `w · exp(-½((p1ᵢ - a)² + (p2ᵢ - b)²))` to `accᵢ` for every `(a, b, w)` term.
pub fn gaussian_sum(acc: &mut [f64], p1: &[f64], p2: &[f64], terms: &[(f64, f64, f64)]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { gaussian_sum_avx2(acc, p1, p2, terms) };
            return;
        }
    }
    gaussian_sum_portable(acc, p1, p2, terms);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gaussian_sum_avx2(acc: &mut [f64], p1: &[f64], p2: &[f64], terms: &[(f64, f64, f64)]) {
    gaussian_sum_portable(acc, p1, p2, terms);
}

#[inline(always)]
fn gaussian_sum_portable(acc: &mut [f64], p1: &[f64], p2: &[f64], terms: &[(f64, f64, f64)]) {
    let m = acc.len().min(p1.len()).min(p2.len());
    let (acc, p1, p2) = (&mut acc[..m], &p1[..m], &p2[..m]);
    for &(a, b, w) in terms {
        for ((o, x), y) in acc.iter_mut().zip(p1).zip(p2) {
            let d1 = x - a;
            let d2 = y - b;
            *o += w * exp_nonpositive(-0.5 * (d1 * d1 + d2 * d2));
        }
    }
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `ln Φ(x)`, accurate deep into the lower tail where `Φ` underflows.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x < -10.0 {
        let u = 1.0 / (x * x);
        let series = 1.0 - u * (1.0 - 3.0 * u * (1.0 - 5.0 * u * (1.0 - 7.0 * u)));
        -0.5 * x * x - LN_SQRT_2PI - (-x).ln() + series.ln()
    } else {
        norm_cdf(x).ln()
    }
}

/// `λΦ(λ) + φ(λ)`, the expected-improvement bracket.
pub fn ei_bracket(lambda: f64) -> f64 {
    if lambda < -10.0 {
        log_ei_bracket(lambda).exp()
    } else {
        lambda * norm_cdf(lambda) + norm_pdf(lambda)
    }
}

/// `ln[λΦ(λ) + φ(λ)]` without cancellation in the lower tail.
pub fn log_ei_bracket(lambda: f64) -> f64 {
    if lambda < -10.0 {
        let u = 1.0 / (lambda * lambda);
        let series = u * (1.0 - 3.0 * u * (1.0 - 5.0 * u * (1.0 - 7.0 * u * (1.0 - 9.0 * u))));
        -0.5 * lambda * lambda - LN_SQRT_2PI + series.ln()
    } else {
        (lambda * norm_cdf(lambda) + norm_pdf(lambda)).ln()
    }
}

/// Positive Gauss-Legendre nodes and weights on [-1, 1] for an `n`-point rule (n even).
pub fn gauss_legendre_half(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n / 2);
    for i in 1..=n / 2 {
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

struct BvnRules {
    r6: Vec<(f64, f64)>,
    r12: Vec<(f64, f64)>,
    r20: Vec<(f64, f64)>,
}

fn bvn_rules() -> &'static BvnRules {
    static RULES: OnceLock<BvnRules> = OnceLock::new();
    RULES.get_or_init(|| BvnRules {
        r6: gauss_legendre_half(6),
        r12: gauss_legendre_half(12),
        r20: gauss_legendre_half(20),
    })
}

/// Upper bivariate normal probability `P(X > h, Y > k)` for standard margins with correlation `r`.
pub fn bvnu(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { norm_cdf(-k) };
    }
    if k == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    if r == 0.0 {
        return norm_cdf(-h) * norm_cdf(-k);
    }
    let tp = 2.0 * PI;
    let rules = bvn_rules();
    let rule = if r.abs() < 0.3 {
        &rules.r6
    } else if r.abs() < 0.75 {
        &rules.r12
    } else {
        &rules.r20
    };
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for &(x, w) in rule {
            for xi in [1.0 - x, 1.0 + x] {
                let sn = (asr * xi).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / tp + norm_cdf(-h) * norm_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = 1.0 - r * r;
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let asr = -0.5 * (bs / as_ + hk);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = tp.sqrt() * norm_cdf(-b / a);
                bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a *= 0.5;
            let mut acc = 0.0;
            for &(x, w) in rule {
                for xi in [1.0 - x, 1.0 + x] {
                    let xs = (a * xi) * (a * xi);
                    let asr = -0.5 * (bs / xs + hk);
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                        let rs = (1.0 - xs).sqrt();
                        let ep = (-(0.5 * hk) * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                        acc += w * asr.exp() * (sp - ep);
                    }
                }
            }
            bvn = (a * acc - bvn) / tp;
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 {
                norm_cdf(k) - norm_cdf(h)
            } else {
                norm_cdf(-h) - norm_cdf(-k)
            };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Probability that a bivariate normal `N(mean, cov)` lands in the box `[lo, hi]²`.
pub fn bvn_box(mean: [f64; 2], cov: [[f64; 2]; 2], lo: f64, hi: f64) -> f64 {
    let s1 = cov[0][0].sqrt();
    let s2 = cov[1][1].sqrt();
    let r = (cov[0][1] / (s1 * s2)).clamp(-1.0, 1.0);
    let a1 = (lo - mean[0]) / s1;
    let b1 = (hi - mean[0]) / s1;
    let a2 = (lo - mean[1]) / s2;
    let b2 = (hi - mean[1]) / s2;
    let p = bvnu(a1, a2, r) - bvnu(b1, a2, r) - bvnu(a1, b2, r) + bvnu(b1, b2, r);
    p.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_exponential_matches_libm() {
        let mut worst = 0.0f64;
        for i in 0..=200_000 {
            let x = -700.0 * i as f64 / 200_000.0;
            let rel = (exp_nonpositive(x) / x.exp() - 1.0).abs();
            worst = worst.max(rel);
        }
        assert!(worst < 1e-15, "{worst}");
        assert_eq!(exp_nonpositive(0.0), 1.0);
        assert!(exp_nonpositive(-1e4) < 1e-300);
    }

    /// P(X>h, Y>k) = ∫_h^∞ φ(u) Φ((ρu - k)/√(1-ρ²)) du, by composite Simpson.
    fn bvnu_oracle(h: f64, k: f64, r: f64) -> f64 {
        let upper = 12.0_f64.max(h + 12.0);
        let lo = h.max(-12.0);
        let n = 40_000;
        let dx = (upper - lo) / n as f64;
        let s = (1.0 - r * r).sqrt();
        let f = |u: f64| norm_pdf(u) * norm_cdf((r * u - k) / s);
        let mut acc = f(lo) + f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + i as f64 * dx);
        }
        acc * dx / 3.0
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [6usize, 12, 20] {
            let rule = gauss_legendre_half(n);
            let total: f64 = rule.iter().map(|(_, w)| 2.0 * w).sum();
            assert!((total - 2.0).abs() < 1e-14);
            // ∫ x^(2n-2) over [-1,1] = 2/(2n-1)
            let p = 2 * n as i32 - 2;
            let v: f64 = rule.iter().map(|(x, w)| 2.0 * w * x.powi(p)).sum();
            assert!((v - 2.0 / (p as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
        let six = gauss_legendre_half(6);
        assert!((six[0].0 - 0.932_469_514_203_152_1).abs() < 1e-14);
        assert!((six[0].1 - 0.171_324_492_379_170_5).abs() < 1e-14);
    }

    #[test]
    fn bvnu_matches_quadrature_oracle() {
        let cases = [
            (0.0, 0.0, 0.5),
            (0.3, -0.7, 0.1),
            (-1.2, 0.4, -0.2),
            (1.0, 1.5, 0.6),
            (-0.5, -2.0, -0.7),
            (0.2, 0.1, 0.95),
            (-1.0, 0.8, -0.95),
            (2.0, -1.0, 0.99),
            (0.7, 0.7, -0.5),
        ];
        for (h, k, r) in cases {
            let got = bvnu(h, k, r);
            let want = bvnu_oracle(h, k, r);
            assert!((got - want).abs() < 1e-10, "h={h} k={k} r={r}: {got} vs {want}");
        }
        // closed form at the origin: 1/4 + asin(r)/(2π)
        let r: f64 = 0.37;
        assert!((bvnu(0.0, 0.0, r) - (0.25 + r.asin() / (2.0 * PI))).abs() < 1e-14);
    }

    #[test]
    fn box_probability_of_independent_normals_factorizes() {
        let p = bvn_box([0.4, 0.6], [[0.04, 0.0], [0.0, 0.09]], 0.0, 1.0);
        let px = norm_cdf(0.6 / 0.2) - norm_cdf(-0.4 / 0.2);
        let py = norm_cdf(0.4 / 0.3) - norm_cdf(-0.6 / 0.3);
        assert!((p - px * py).abs() < 1e-13);
    }

    #[test]
    fn log_tail_functions_are_continuous_at_switch() {
        for f in [log_norm_cdf as fn(f64) -> f64, log_ei_bracket] {
            let a = f(-10.0 - 1e-9);
            let b = f(-10.0 + 1e-9);
            assert!((a - b).abs() < 1e-6 * a.abs(), "{a} vs {b}");
        }
        assert!(log_norm_cdf(-1e6).is_finite());
        assert!(log_ei_bracket(-1e6).is_finite());
        assert!((ei_bracket(0.0) - norm_pdf(0.0)).abs() < 1e-15);
    }
}
