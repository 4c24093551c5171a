//! First-passage laws of the two phases of a cycle.
//!
//! Filling: the input process started at `x` up-crosses `λ` at `W_λ`.
//! Releasing: the content `x + I_t − Mt` hits `τ` from above at `W*_τ`.
//! Both are closed forms in the error-function family.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::ig::IgParams;
use crate::special::{erf, erfc, exp_neg_erfc, normal_pdf};

/// A two-threshold release policy: release at `rate` from the up-crossing of
/// `lambda` until the content is drained back to `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Policy {
    lambda: f64,
    tau: f64,
    rate: f64,
}

impl Policy {
    pub fn new(lambda: f64, tau: f64, rate: f64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("must be finite and ≥ 0, got {tau}"),
            });
        }
        if !(lambda.is_finite() && lambda > tau) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be finite and > tau ({tau}), got {lambda}"),
            });
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rate",
                reason: format!("must be finite and > 0, got {rate}"),
            });
        }
        Ok(Self { lambda, tau, rate })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Whether releasing at this rate drains the dam on average (`μM > 1`).
    pub fn drains(&self, params: &IgParams) -> bool {
        params.mu() * self.rate > 1.0
    }
}

/// A quantity that is either finite or `+∞` (an answer, not a failure).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }
}

impl std::fmt::Display for Extended {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("infinite"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::Infinite => s.serialize_str("infinite"),
        }
    }
}

/// The exponent `η(α)` of the release-phase passage transform: the
/// increasing root of `Mη = α + ψ(η)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReleaseExponent {
    params: IgParams,
    rate: f64,
}

impl ReleaseExponent {
    pub fn new(params: IgParams, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rate",
                reason: format!("must be finite and > 0, got {rate}"),
            });
        }
        Ok(Self { params, rate })
    }

    pub fn eta(&self, alpha: f64) -> Result<f64> {
        check_discount(alpha)?;
        Ok(self.eta_unchecked(alpha))
    }

    pub(crate) fn eta_unchecked(&self, alpha: f64) -> f64 {
        let m = self.rate;
        let s2 = self.params.sigma2();
        let drift = m * self.params.mu() - 1.0;
        let disc = (drift * drift + 2.0 * alpha * m * s2).sqrt();
        // s = Mη − α solves Mσ²s² + 2(Mμ − 1)s − 2α = 0
        let s = if drift > 0.0 {
            2.0 * alpha / (drift + disc)
        } else {
            (disc - drift) / (m * s2)
        };
        (alpha + s) / m
    }

    /// `dη/dα = 1/(M − ψ′(η))`; infinite at `α = 0` when `μM = 1`.
    pub fn eta_prime(&self, alpha: f64) -> Result<f64> {
        check_discount(alpha)?;
        let eta = self.eta_unchecked(alpha);
        Ok(1.0 / (self.rate - self.params.psi_prime(eta)))
    }

    /// `Mη − α − ψ(η)` for a candidate `η`.
    pub fn residual(&self, alpha: f64, eta: f64) -> f64 {
        self.rate * eta - alpha - self.params.psi(eta)
    }

    pub fn params(&self) -> &IgParams {
        &self.params
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Closed-form `η(α)`.
pub fn eta(params: &IgParams, rate: f64, alpha: f64) -> Result<f64> {
    ReleaseExponent::new(*params, rate)?.eta(alpha)
}

pub(crate) fn check_discount(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || alpha.is_infinite() {
        return Err(domain(format!("discount rate must be finite and ≥ 0, got {alpha}")));
    }
    Ok(())
}

fn check_below(x: f64, lambda: f64) -> Result<f64> {
    if !(x.is_finite() && lambda.is_finite()) {
        return Err(domain(format!("levels must be finite, got x = {x}, lambda = {lambda}")));
    }
    if x > lambda {
        return Err(domain(format!("start level {x} lies above the threshold {lambda}")));
    }
    Ok(lambda - x)
}

fn check_above(x: f64, tau: f64) -> Result<f64> {
    if !(x.is_finite() && tau.is_finite()) {
        return Err(domain(format!("levels must be finite, got x = {x}, tau = {tau}")));
    }
    if x < tau {
        return Err(domain(format!("start level {x} lies below the threshold {tau}")));
    }
    Ok(x - tau)
}

/// Relative half-width of the window around `α = 2μ/σ²` where the closed
/// form is replaced by interpolation between its two sides.
const POLE_WINDOW: f64 = 1e-6;

/// `E_x e^{−αW_λ}`.
pub fn lt_w_lambda(params: &IgParams, x: f64, lambda: f64, alpha: f64) -> Result<f64> {
    let gap = check_below(x, lambda)?;
    check_discount(alpha)?;
    Ok(lt_fill_gap(params, gap, alpha))
}

pub(crate) fn lt_fill_gap(params: &IgParams, gap: f64, alpha: f64) -> f64 {
    if gap == 0.0 || alpha == 0.0 {
        return 1.0;
    }
    let pole = 2.0 * params.mu() / params.sigma2();
    let offset = alpha / pole - 1.0;
    if offset.abs() < POLE_WINDOW {
        let lo = pole * (1.0 - POLE_WINDOW);
        let hi = pole * (1.0 + POLE_WINDOW);
        let w = (offset + POLE_WINDOW) / (2.0 * POLE_WINDOW);
        return (1.0 - w) * lt_fill_closed(params, gap, lo) + w * lt_fill_closed(params, gap, hi);
    }
    lt_fill_closed(params, gap, alpha)
}

fn lt_fill_closed(params: &IgParams, gap: f64, alpha: f64) -> f64 {
    let mu = params.mu();
    let s2 = params.sigma2();
    let denom = alpha * s2 - 2.0 * mu;
    let root = gap.sqrt() / (2.0 * s2).sqrt();
    // e^{α·gap·(ασ²/2 − μ)}·erfc(√gap(ασ² − μ)/√(2σ²))
    let scaled = exp_neg_erfc(alpha * gap * (mu - 0.5 * alpha * s2), root * (alpha * s2 - mu));
    (alpha * s2 - mu) / denom * scaled - mu / denom * erfc(root * mu)
}

/// `P_x(W_λ ≤ t)`, from `{W_λ ≤ t} = {I_t ≥ λ − x}` for increasing paths.
pub fn cdf_w_lambda(params: &IgParams, x: f64, lambda: f64, t: f64) -> Result<f64> {
    let gap = check_below(x, lambda)?;
    if !(t >= 0.0) {
        return Err(domain(format!("time must be ≥ 0, got {t}")));
    }
    if gap == 0.0 {
        return Ok(1.0);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if t.is_infinite() {
        return Ok(1.0);
    }
    Ok(params.sf_unchecked(t, gap))
}

/// The erfc form of `F_{W_λ}` with the `√(λ − x)` scaling left out of the
/// arguments, kept only for comparison with [`cdf_w_lambda`]. It coincides
/// with the exact law when `λ − x = 1` and drifts away otherwise.
pub fn cdf_w_lambda_unscaled(params: &IgParams, x: f64, lambda: f64, t: f64) -> Result<f64> {
    let gap = check_below(x, lambda)?;
    if !(t >= 0.0) {
        return Err(domain(format!("time must be ≥ 0, got {t}")));
    }
    let mu = params.mu();
    let s2 = params.sigma2();
    let r = (2.0 * s2).sqrt();
    // ½erfc((gμ − t)/r) − ½e^{2μt/σ²}erfc((gμ + t)/r)
    let second = exp_neg_erfc(-2.0 * mu * t / s2, (gap * mu + t) / r);
    Ok(0.5 * erfc((gap * mu - t) / r) - 0.5 * second)
}

/// `E_x W_λ` in closed form.
pub fn mean_w_lambda(params: &IgParams, x: f64, lambda: f64) -> Result<f64> {
    let gap = check_below(x, lambda)?;
    Ok(mean_fill_gap(params, gap))
}

pub(crate) fn mean_fill_gap(params: &IgParams, gap: f64) -> f64 {
    if gap == 0.0 {
        return 0.0;
    }
    let mu = params.mu();
    let s = params.sigma();
    let r = gap.sqrt();
    0.5 * gap * mu + s * r * normal_pdf(r * mu / s) + (gap * mu * mu + s * s) / (2.0 * mu) * erf(r * mu / (s * std::f64::consts::SQRT_2))
}

/// `E_x e^{−αW*_τ} = e^{−(x−τ)η(α)}`; at `α = 0` this is `P_x(W*_τ < ∞)`.
pub fn lt_w_tau_star(params: &IgParams, rate: f64, x: f64, tau: f64, alpha: f64) -> Result<f64> {
    let d = check_above(x, tau)?;
    let eta = eta(params, rate, alpha)?;
    Ok((-d * eta).exp())
}

/// `P_x(W*_τ < ∞)`.
pub fn release_finite_probability(params: &IgParams, rate: f64, x: f64, tau: f64) -> Result<f64> {
    let d = check_above(x, tau)?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(domain(format!("release rate must be finite and > 0, got {rate}")));
    }
    let mm = params.mu() * rate;
    if mm > 1.0 {
        Ok(1.0)
    } else {
        Ok((-2.0 * d * (1.0 - mm) / (rate * rate * params.sigma2())).exp())
    }
}

/// Density of `W*_τ` (defective when `μM < 1`).
pub fn pdf_w_tau_star(params: &IgParams, rate: f64, x: f64, tau: f64, t: f64) -> Result<f64> {
    let d = check_above(x, tau)?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(domain(format!("release rate must be finite and > 0, got {rate}")));
    }
    if !(t >= 0.0) {
        return Err(domain(format!("time must be ≥ 0, got {t}")));
    }
    Ok(release_density(params, rate, d, t))
}

pub(crate) fn release_density(params: &IgParams, rate: f64, d: f64, t: f64) -> f64 {
    let excess = rate * t - d;
    if d == 0.0 || excess <= 0.0 || t.is_infinite() {
        return 0.0;
    }
    let mu = params.mu();
    let s2 = params.sigma2();
    let dev = (rate * mu - 1.0) * t - mu * d;
    d / ((2.0 * std::f64::consts::PI * s2).sqrt() * excess * excess.sqrt()) * (-dev * dev / (2.0 * excess * s2)).exp()
}

/// Mean and variance of the release time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassageMoments {
    pub mean: Extended,
    pub variance: Extended,
}

/// `E_x W*_τ = (x−τ)μ/(μM−1)` and `Var_x W*_τ = (x−τ)σ²/(μM−1)³`, both
/// infinite when `μM ≤ 1`.
pub fn mean_var_w_tau_star(params: &IgParams, rate: f64, x: f64, tau: f64) -> Result<PassageMoments> {
    let d = check_above(x, tau)?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(domain(format!("release rate must be finite and > 0, got {rate}")));
    }
    let b = params.mu() * rate - 1.0;
    if b <= 0.0 {
        return Ok(PassageMoments {
            mean: Extended::Infinite,
            variance: Extended::Infinite,
        });
    }
    Ok(PassageMoments {
        mean: Extended::Finite(d * params.mu() / b),
        variance: Extended::Finite(d * params.sigma2() / b.powi(3)),
    })
}
