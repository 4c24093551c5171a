//! Reference implementations written directly from the defining formulas,
//! independent of the library internals.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Exp-sinh rule for `∫_a^∞ f`. Handles integrable endpoint singularities
/// at `a` and exponential decay at infinity.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, a: f64) -> f64 {
    let mut prev = f64::NAN;
    for level in 3..=9 {
        let h = 1.0 / (1u32 << level) as f64;
        let n = (4.5 / h) as i64;
        let mut sum = 0.0;
        for i in -n..=n {
            let t = i as f64 * h;
            let e = (0.5 * PI * t.sinh()).exp();
            let w = 0.5 * PI * t.cosh() * e;
            let x = a + e;
            if e == 0.0 || !x.is_finite() {
                continue;
            }
            let v = f(x);
            if v.is_finite() {
                sum += v * w;
            }
        }
        let cur = sum * h;
        if (cur - prev).abs() <= 1e-14 * cur.abs().max(1e-300) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Tanh-sinh rule for `∫_a^b f`.
pub fn integrate_finite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let r = 0.5 * (b - a);
    let mut prev = f64::NAN;
    for level in 3..=10 {
        let h = 1.0 / (1u32 << level) as f64;
        let n = (3.5 / h) as i64;
        let mut sum = 0.0;
        for i in -n..=n {
            let t = i as f64 * h;
            let s = 0.5 * PI * t.sinh();
            // distance to the nearer endpoint, without cancellation
            let d = r / (s.abs().exp() * s.abs().cosh());
            let w = 0.5 * PI * t.cosh() / s.cosh().powi(2);
            let x = if t < 0.0 { a + d } else { b - d };
            if d <= 0.0 || x <= a || x >= b {
                continue;
            }
            let v = f(x);
            if v.is_finite() {
                sum += v * w * r;
            }
        }
        let cur = sum * h;
        if (cur - prev).abs() <= 1e-13 * cur.abs().max(1e-300) {
            return cur;
        }
        prev = cur;
    }
    prev
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `e^{γy} erfc(β√y)` with `γ − β² = −μ²/(2σ²)`.
fn scaled_erfc(mu: f64, s2: f64, alpha: f64, y: f64) -> f64 {
    let gamma = alpha * (alpha * s2 / 2.0 - mu);
    let beta = (alpha * s2 - mu) / (2.0 * s2).sqrt();
    let b = beta * y.sqrt();
    if b > 20.0 {
        let k = mu * mu / (2.0 * s2);
        let b2 = b * b;
        let series = 1.0 - 1.0 / (2.0 * b2) + 3.0 / (4.0 * b2 * b2) - 15.0 / (8.0 * b2 * b2 * b2);
        (-k * y).exp() / (b * PI.sqrt()) * series
    } else {
        (gamma * y).exp() * libm::erfc(b)
    }
}

/// Density of the α-potential measure of the IG subordinator.
pub fn u_alpha(mu: f64, s2: f64, alpha: f64, y: f64) -> f64 {
    let s = s2.sqrt();
    let t1 = s / y.sqrt() * normal_pdf(y.sqrt() * mu / s);
    let c0 = (mu - alpha * s2) / 2.0;
    t1 + c0 * scaled_erfc(mu, s2, alpha, y)
}

/// Laplace exponent `ψ(β) = (√(2βσ² + μ²) − μ)/σ²`.
pub fn psi(mu: f64, s2: f64, beta: f64) -> f64 {
    ((2.0 * beta * s2 + mu * mu).sqrt() - mu) / s2
}

pub fn psi_prime(mu: f64, s2: f64, beta: f64) -> f64 {
    1.0 / (2.0 * beta * s2 + mu * mu).sqrt()
}

/// Largest root of `Mη − ψ(η) = α`, by bisection.
pub fn eta(mu: f64, s2: f64, m: f64, alpha: f64) -> f64 {
    let f = |e: f64| m * e - psi(mu, s2, e) - alpha;
    let lo0 = ((1.0 / (m * m) - mu * mu) / (2.0 * s2)).max(0.0);
    let mut lo = lo0;
    let mut hi = lo0.max(1.0);
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    if alpha == 0.0 && lo0 == 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `∫₀^a u_α` by tanh-sinh.
pub fn resolvent_mass(mu: f64, s2: f64, alpha: f64, a: f64) -> f64 {
    integrate_finite(|y| u_alpha(mu, s2, alpha, y), 0.0, a)
}

/// Sample mean, variance and the standard errors of both.
pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    Moments {
        mean,
        var,
        se_mean: (var / n).sqrt(),
        se_var: ((m4 - m2 * m2) / n).sqrt(),
    }
}

/// Kolmogorov–Smirnov distance of a sample to a continuous cdf.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}
