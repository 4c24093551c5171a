//! The inverse Gaussian input process `I`.
//!
//! `I_t` is the first time a Brownian motion with drift `μ` and variance
//! `σ²` per unit time reaches level `t`; as a process in `t` it is a
//! driftless subordinator whose increments over time `t` are inverse
//! Gaussian with mean `t/μ` and shape `t²/σ²`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{domain, require_finite, Error, Result};
use crate::special::{erfc, erfcx, normal_cdf, SQRT_2PI};

/// Law of the input process, in the `(μ, σ²)` parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IgParams {
    mu: f64,
    sigma2: f64,
}

impl IgParams {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("must be finite and > 0, got {mu}"),
            });
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma2",
                reason: format!("must be finite and > 0, got {sigma2}"),
            });
        }
        Ok(Self { mu, sigma2 })
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    #[inline]
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Mean of `I_t`.
    pub fn mean(&self, t: f64) -> f64 {
        t / self.mu
    }

    /// Variance of `I_t`.
    pub fn variance(&self, t: f64) -> f64 {
        t * self.sigma2 / self.mu.powi(3)
    }

    /// Conventional `(mean, shape)` pair of the increment law over time `t`.
    pub fn mean_shape(&self, t: f64) -> (f64, f64) {
        (t / self.mu, t * t / self.sigma2)
    }

    /// Transition density `p(t, z)` of an increment `z` over time `t`.
    pub fn density(&self, t: f64, z: f64) -> Result<f64> {
        check_time(t)?;
        require_finite("z", z)?;
        Ok(self.density_unchecked(t, z))
    }

    #[inline]
    pub(crate) fn density_unchecked(&self, t: f64, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let dev = self.mu * z - t;
        t / (self.sigma() * SQRT_2PI * z * z.sqrt()) * (-dev * dev / (2.0 * z * self.sigma2)).exp()
    }

    /// `∂p(t, z)/∂t`.
    pub(crate) fn density_dt(&self, t: f64, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        self.density_unchecked(t, z) * (1.0 / t + (self.mu * z - t) / (z * self.sigma2))
    }

    /// `∂p(t, z)/∂z`.
    pub(crate) fn density_dz(&self, t: f64, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let m2z2 = self.mu * self.mu * z * z;
        self.density_unchecked(t, z) * (-1.5 / z - (m2z2 - t * t) / (2.0 * z * z * self.sigma2))
    }

    /// `P(I_t ≤ z)`.
    pub fn cdf(&self, t: f64, z: f64) -> Result<f64> {
        check_time(t)?;
        if z.is_nan() {
            return Err(domain("z must not be NaN"));
        }
        Ok(self.cdf_unchecked(t, z))
    }

    pub(crate) fn cdf_unchecked(&self, t: f64, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        if z.is_infinite() {
            return 1.0;
        }
        let (w, reflected) = self.cdf_parts(t, z);
        if w > 0.0 {
            1.0 - self.upper_tail(w, t, z)
        } else {
            (normal_cdf(w) + reflected).min(1.0)
        }
    }

    /// `P(I_t > z)`, accurate in the upper tail.
    pub fn sf(&self, t: f64, z: f64) -> Result<f64> {
        check_time(t)?;
        if z.is_nan() {
            return Err(domain("z must not be NaN"));
        }
        Ok(self.sf_unchecked(t, z))
    }

    pub(crate) fn sf_unchecked(&self, t: f64, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        if z.is_infinite() {
            return 0.0;
        }
        let (w, reflected) = self.cdf_parts(t, z);
        if w > 0.0 {
            self.upper_tail(w, t, z)
        } else {
            (1.0 - normal_cdf(w) - reflected).max(0.0)
        }
    }

    /// Standardized argument `w = (μz − t)/(σ√z)` and the reflected term
    /// `exp(2tμ/σ²)·Φ(−(μz + t)/(σ√z))` written through `erfcx`.
    fn cdf_parts(&self, t: f64, z: f64) -> (f64, f64) {
        let sz = self.sigma() * z.sqrt();
        let w = (self.mu * z - t) / sz;
        let v = (self.mu * z + t) / (sz * std::f64::consts::SQRT_2);
        let reflected = 0.5 * (-0.5 * w * w).exp() * erfcx(v);
        (w, reflected)
    }

    fn upper_tail(&self, w: f64, t: f64, z: f64) -> f64 {
        // ½e^{-w²/2}[erfcx(w/√2) − erfcx(v)] keeps relative accuracy for w ≫ 0
        let sz = self.sigma() * z.sqrt();
        let v = (self.mu * z + t) / (sz * std::f64::consts::SQRT_2);
        let u = w / std::f64::consts::SQRT_2;
        (0.5 * (-0.5 * w * w).exp() * (erfcx(u) - erfcx(v))).max(0.0)
    }

    /// Partial first moment `E[I_t ; I_t ≤ z]`.
    pub fn partial_mean(&self, t: f64, z: f64) -> Result<f64> {
        check_time(t)?;
        if z.is_nan() {
            return Err(domain("z must not be NaN"));
        }
        Ok(self.partial_mean_unchecked(t, z))
    }

    pub(crate) fn partial_mean_unchecked(&self, t: f64, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let m = t / self.mu;
        if z.is_infinite() {
            return m;
        }
        let (w, reflected) = self.cdf_parts(t, z);
        if w > 0.0 {
            // m·[1 − ½erfc(w/√2) − reflected], evaluated as m·(1 − tail)
            let tail = 0.5 * erfc(w / std::f64::consts::SQRT_2) + reflected;
            m * (1.0 - tail).max(0.0)
        } else {
            m * (normal_cdf(w) - reflected).max(0.0)
        }
    }

    /// Laplace exponent `ψ(a)` with `E e^{−a I_t} = e^{−tψ(a)}`.
    pub fn laplace_exponent(&self, a: f64) -> Result<f64> {
        if !(a >= 0.0) || a.is_infinite() {
            return Err(domain(format!("transform argument must be finite and ≥ 0, got {a}")));
        }
        Ok(self.psi(a))
    }

    #[inline]
    pub(crate) fn psi(&self, a: f64) -> f64 {
        // (√(2aσ²+μ²) − μ)/σ² rationalized
        2.0 * a / ((2.0 * a * self.sigma2 + self.mu * self.mu).sqrt() + self.mu)
    }

    #[inline]
    pub(crate) fn psi_prime(&self, a: f64) -> f64 {
        1.0 / (2.0 * a * self.sigma2 + self.mu * self.mu).sqrt()
    }

    /// Density of the Lévy measure `ν(dy)/dy`.
    pub fn levy_density(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || y.is_infinite() {
            return Err(domain(format!("jump size must be finite and > 0, got {y}")));
        }
        Ok(self.levy_density_unchecked(y))
    }

    #[inline]
    pub(crate) fn levy_density_unchecked(&self, y: f64) -> f64 {
        (-y * self.mu * self.mu / (2.0 * self.sigma2)).exp() / (self.sigma() * SQRT_2PI * y * y.sqrt())
    }

    /// Tail mass `ν((s, ∞))` of the Lévy measure.
    pub fn levy_tail(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(domain(format!("jump size must be > 0, got {s}")));
        }
        Ok(self.levy_tail_unchecked(s))
    }

    pub(crate) fn levy_tail_unchecked(&self, s: f64) -> f64 {
        if s.is_infinite() {
            return 0.0;
        }
        // ∫_s^∞ r^{−3/2}e^{−kr} dr = 2e^{−ks}[s^{−1/2} − √(πk)·erfcx(√(ks))]
        let k = self.mu * self.mu / (2.0 * self.sigma2);
        let inner = 1.0 / s.sqrt() - (std::f64::consts::PI * k).sqrt() * erfcx((k * s).sqrt());
        (2.0 * (-k * s).exp() * inner / (self.sigma() * SQRT_2PI)).max(0.0)
    }

    /// One draw of the increment `I_{s+t} − I_s`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<f64> {
        check_time(t)?;
        Ok(self.sample_unchecked(t, rng))
    }

    /// Michael–Schucany–Haas transformation, with the smaller root written
    /// as `m/(A + B)` so it stays positive when `m·χ²/shape` is huge.
    #[inline]
    pub(crate) fn sample_unchecked<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        let (m, shape) = self.mean_shape(t);
        let n: f64 = rng.sample(StandardNormal);
        let phi_y = m * n * n / shape;
        let a = 1.0 + 0.5 * phi_y;
        let b = (phi_y * (1.0 + 0.25 * phi_y)).sqrt();
        let x = m / (a + b);
        let u: f64 = rng.random();
        if u * (m + x) <= m {
            x
        } else {
            m * m / x
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || t.is_infinite() {
        return Err(domain(format!("elapsed time must be finite and > 0, got {t}")));
    }
    Ok(())
}

/// Independent, reproducible random stream number `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
