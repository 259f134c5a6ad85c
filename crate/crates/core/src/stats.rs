//! Scalar probability helpers shared by the model modules: standard normal
//! functions with tail-accurate complements, truncated normal and
//! inverse-gamma draws, adaptive quadrature and empirical quantiles.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use libm::erfc;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use statrs::function::erf::erfc_inv;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal cdf.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function `1 - Φ(x)`, accurate in the upper tail.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal quantile. Returns `±inf` at the endpoints.
#[inline]
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p <= 0.5 {
        lower_quantile(p)
    } else {
        -lower_quantile(1.0 - p)
    }
}

/// Inverse of [`norm_sf`].
#[inline]
pub fn norm_isf(q: f64) -> f64 {
    -norm_quantile(q)
}

/// Quantile for `p ≤ 1/2`. The `erfc_inv` start is only good to about 1e-10
/// relative, so two Halley steps on `Φ(x) - p` polish it.
fn lower_quantile(p: f64) -> f64 {
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..2 {
        let d = norm_pdf(x);
        if d == 0.0 {
            break;
        }
        let u = (norm_cdf(x) - p) / d;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

#[inline]
pub fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `P(a < Z < b)` for a standard normal `Z`, computed on whichever tail keeps
/// the difference free of cancellation.
pub fn std_normal_interval_prob(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let p = if a >= 0.0 {
        norm_sf(a) - norm_sf(b)
    } else if b <= 0.0 {
        norm_cdf(b) - norm_cdf(a)
    } else {
        1.0 - norm_cdf(a) - norm_sf(b)
    };
    p.max(0.0)
}

/// `P(lo < X < hi)` for `X ~ N(mean, sd²)`.
pub fn normal_interval_prob(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    std_normal_interval_prob((lo - mean) / sd, (hi - mean) / sd)
}

/// Draw from `N(mean, sd²)` truncated to the open interval `(lo, hi)`.
///
/// Inverse-cdf sampling on the tail that keeps the interval mass well
/// represented, falling back to exponential rejection when the mass
/// underflows.
pub fn sample_truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo < hi, "empty truncation interval ({lo}, {hi})");
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let x = sample_std_truncated(rng, a, b);
    let mut t = mean + sd * x;
    // Rounding can land exactly on a boundary; keep the draw in the open interval.
    if t <= lo {
        t = lo.next_up();
    }
    if t >= hi {
        t = hi.next_down();
    }
    t
}

fn sample_std_truncated<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return StandardNormal.sample(rng);
    }
    if b <= 0.0 {
        return -sample_std_truncated(rng, -b, -a);
    }
    let u: f64 = open01(rng);
    if a >= 0.0 {
        let qa = norm_sf(a);
        let qb = norm_sf(b);
        if qa > 1e-300 && qa > qb {
            let q = qb + u * (qa - qb);
            return norm_isf(q).clamp(a, b);
        }
        return tail_rejection(rng, a, b);
    }
    let pa = norm_cdf(a);
    let pb = norm_cdf(b);
    norm_quantile(pa + u * (pb - pa)).clamp(a, b)
}

// Robert (1995) exponential proposal for far upper tails, uniform proposal for
// narrow far-tail intervals.
fn tail_rejection<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if b - a < 1.0 / a {
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            let accept = (0.5 * (a * a - z * z)).exp();
            if rng.random::<f64>() < accept {
                return z;
            }
        }
    }
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(alpha).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        if z > b {
            continue;
        }
        let accept = (-0.5 * (z - alpha) * (z - alpha)).exp();
        if rng.random::<f64>() < accept {
            return z;
        }
    }
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draw from `Gamma(shape, rate)`.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng)
}

/// Draw from the inverse-gamma `IG(shape, scale)` with density
/// `∝ x^{-shape-1} exp(-scale / x)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    scale / sample_gamma(rng, shape, 1.0)
}

/// Index drawn with probability proportional to `exp(log_weights[k])`.
/// Returns `None` when every weight is zero or a weight is NaN.
pub fn sample_log_categorical<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> Option<usize> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let total: f64 = log_weights.iter().map(|&w| (w - max).exp()).sum();
    if !total.is_finite() || total <= 0.0 {
        return None;
    }
    let mut target = rng.random::<f64>() * total;
    let mut last = 0;
    for (k, &w) in log_weights.iter().enumerate() {
        let p = (w - max).exp();
        if p > 0.0 {
            last = k;
            if target < p {
                return Some(k);
            }
            target -= p;
        }
    }
    Some(last)
}

/// `log(Σ exp(x_k))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman–Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = K15_WEIGHTS[7] * fc;
    let mut gauss = G7_WEIGHTS[3] * fc;
    for k in 0..7 {
        let x = h * GK_NODES[k];
        let s = f(c - x) + f(c + x);
        kronrod += K15_WEIGHTS[k] * s;
        if k % 2 == 1 {
            gauss += G7_WEIGHTS[k / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth == 0 || (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
        return value;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss–Kronrod quadrature of `f` over a finite interval to an
/// absolute tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&f, a, b, abs_tol, 40)
}

/// `∫_{-∞}^{b} f(x) dx` via the substitution `x = b - (1 - s) / s`.
pub fn integrate_lower_tail<F: Fn(f64) -> f64>(f: F, b: f64, abs_tol: f64) -> f64 {
    let g = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let x = b - (1.0 - s) / s;
        let v = f(x) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adapt(&g, 0.0, 1.0, abs_tol, 40)
}
