//! Resolvents of the input process and of the release-phase content process.
//!
//! `u_α` is the density of the α-potential measure of `I`; `p*_α` is the
//! potential density of `I_t − Mt`, and the release phase killed at `τ` has
//! potential density `p*_α(y−x) − e^{−(x−τ)η(α)} p*_α(y−τ)`.

use crate::error::{domain, Error, Result};
use crate::ig::IgParams;
use crate::passage::{check_discount, mean_fill_gap, ReleaseExponent};
use crate::penalty::{PenaltyFn, Piece};
use crate::quad::{integrate, integrate_sqrt_left, integrate_to_infinity, Integral, QuadConfig, TailPlan};
use crate::special::{exp_neg_erfc, normal_pdf};

/// Density `u_α` of the α-potential measure of the input process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventDensity {
    params: IgParams,
    alpha: f64,
    second_sign: f64,
}

impl ResolventDensity {
    pub fn new(params: IgParams, alpha: f64) -> Result<Self> {
        check_discount(alpha)?;
        Ok(Self {
            params,
            alpha,
            second_sign: 1.0,
        })
    }

    /// The same density with the sign of its erfc term reversed. This is a
    /// deliberately wrong variant, used as a negative control by `validate`.
    pub fn with_flipped_second_term(mut self) -> Self {
        self.second_sign = -self.second_sign;
        self
    }

    pub fn params(&self) -> &IgParams {
        &self.params
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn u(&self, y: f64) -> Result<f64> {
        check_level(y)?;
        Ok(self.u_unchecked(y))
    }

    pub(crate) fn u_unchecked(&self, y: f64) -> f64 {
        if y.is_infinite() {
            return if self.alpha == 0.0 { self.params.mu() } else { 0.0 };
        }
        let (t1, c0, e2, _, _) = self.terms(y);
        t1 + self.second_sign * c0 * e2
    }

    /// `(T₁, c₀, E, γ, β)` with `u = T₁ + c₀E`, `E = e^{γy} erfc(β√y)`.
    #[inline]
    fn terms(&self, y: f64) -> (f64, f64, f64, f64, f64) {
        let mu = self.params.mu();
        let s2 = self.params.sigma2();
        let s = self.params.sigma();
        let a = self.alpha;
        let ry = y.sqrt();
        let t1 = s / ry * normal_pdf(ry * mu / s);
        let c0 = 0.5 * (mu - a * s2);
        let gamma = a * (0.5 * a * s2 - mu);
        let beta = (a * s2 - mu) / (2.0 * s2).sqrt();
        let e2 = exp_neg_erfc(-gamma * y, beta * ry);
        (t1, c0, e2, gamma, beta)
    }

    /// `u_α′(y)`; blows up like `y^{−3/2}` at `0`.
    pub fn u_prime(&self, y: f64) -> Result<f64> {
        check_level(y)?;
        Ok(self.u_prime_unchecked(y))
    }

    pub(crate) fn u_prime_unchecked(&self, y: f64) -> f64 {
        if y.is_infinite() {
            return 0.0;
        }
        let (t1, c0, e2, gamma, beta) = self.terms(y);
        let k = self.params.mu().powi(2) / (2.0 * self.params.sigma2());
        let d1 = t1 * (-0.5 / y - k);
        let d2 = c0 * (gamma * e2 - beta * (-k * y).exp() / (std::f64::consts::PI * y).sqrt());
        d1 + self.second_sign * d2
    }

    /// Exponential decay rate of `u_α` at infinity (`0` when `α = 0`).
    pub fn decay_rate(&self) -> f64 {
        let mu = self.params.mu();
        let s2 = self.params.sigma2();
        if self.alpha * s2 < mu {
            self.alpha * (mu - 0.5 * self.alpha * s2)
        } else {
            mu * mu / (2.0 * s2)
        }
    }

    /// Closed form of `∫₀^∞ e^{−βy} u_α(y) dy`; infinite when `α = β = 0`.
    pub fn laplace_closed(&self, beta: f64) -> f64 {
        let s2 = self.params.sigma2();
        s2 / (self.alpha * s2 + self.params.psi(beta) * s2)
    }

    /// `∫₀^∞ e^{−βy} u_α(y) dy` by quadrature.
    pub fn laplace_quadrature(&self, beta: f64, cfg: &QuadConfig) -> Result<Integral> {
        check_discount(beta)?;
        let rate = self.decay_rate() + beta;
        if rate == 0.0 {
            return Err(Error::Divergent("∫ u₀ over (0, ∞) is infinite".into()));
        }
        let plan = TailPlan {
            scale: (1.0 / rate).min(1.0),
            reach: 5.0 / rate,
            sqrt_start: true,
        };
        Ok(integrate_to_infinity(|y| (-beta * y).exp() * self.u_unchecked(y), 0.0, plan, cfg))
    }

    /// `∫₀^a e^{−βy} u_α(y) dy`.
    pub fn laplace_below(&self, beta: f64, a: f64, cfg: &QuadConfig) -> f64 {
        if !(a > 0.0) {
            return 0.0;
        }
        integrate_sqrt_left(|y| (-beta * y).exp() * self.u_unchecked(y), 0.0, a, cfg).value
    }

    /// `U_α(0, a] = ∫₀^a u_α`, closed form when `α = 0`.
    pub fn mass_below(&self, a: f64, cfg: &QuadConfig) -> f64 {
        if !(a > 0.0) {
            return 0.0;
        }
        if self.alpha == 0.0 && self.second_sign > 0.0 {
            return mean_fill_gap(&self.params, a);
        }
        self.laplace_below(0.0, a, cfg)
    }

    /// `∫_a^∞ u_α`, finite for `α > 0`.
    pub fn mass_above(&self, a: f64, cfg: &QuadConfig) -> Result<f64> {
        if self.alpha == 0.0 {
            return Err(Error::Divergent("u₀ is not integrable at infinity".into()));
        }
        let rate = self.decay_rate();
        let plan = TailPlan {
            scale: (1.0 / rate).min(1.0),
            reach: a + 5.0 / rate,
            sqrt_start: a == 0.0,
        };
        Ok(integrate_to_infinity(|y| self.u_unchecked(y), a.max(0.0), plan, cfg).value)
    }

    /// `∫₀^{to−from} g(from + y) u_α(y) dy`: the discounted penalty accrued
    /// by the fill phase started at `from` and stopped on passing `to`.
    pub fn integrate_resolvent(&self, g: &PenaltyFn, from: f64, to: f64, cfg: &QuadConfig) -> Result<f64> {
        check_range(from, to)?;
        if g.is_zero() || to == from {
            return Ok(0.0);
        }
        let mut cuts = vec![0.0];
        cuts.extend(g.breakpoints(from, to).into_iter().map(|b| b - from));
        cuts.push(to - from);
        Ok(self.integrate_cuts(|y| g.eval(from + y), &cuts, cfg))
    }

    /// [`Self::integrate_resolvent`] for an arbitrary bounded rate function.
    pub fn integrate_resolvent_with<F: Fn(f64) -> f64>(&self, g: F, from: f64, to: f64, cfg: &QuadConfig) -> Result<f64> {
        check_range(from, to)?;
        Ok(self.integrate_cuts(|y| g(from + y), &[0.0, to - from], cfg))
    }

    fn integrate_cuts<F: Fn(f64) -> f64>(&self, h: F, cuts: &[f64], cfg: &QuadConfig) -> f64 {
        let f = |y: f64| h(y) * self.u_unchecked(y);
        let mut total = 0.0;
        for (i, w) in cuts.windows(2).enumerate() {
            if w[1] <= w[0] {
                continue;
            }
            total += if i == 0 {
                integrate_sqrt_left(f, w[0], w[1], cfg).value
            } else {
                integrate(f, w[0], w[1], cfg).value
            };
        }
        total
    }
}

fn check_level(y: f64) -> Result<()> {
    if !(y > 0.0) {
        return Err(domain(format!("level must be > 0, got {y}")));
    }
    Ok(())
}

fn check_range(from: f64, to: f64) -> Result<()> {
    if !(from >= 0.0 && to >= from && to.is_finite()) {
        return Err(domain(format!("need 0 ≤ from ≤ to < ∞, got [{from}, {to}]")));
    }
    Ok(())
}

/// Potential of the release-phase content process `x + I_t − Mt`, with and
/// without killing on reaching `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KilledResolvent {
    params: IgParams,
    rate: f64,
    tau: f64,
    alpha: f64,
    eta: f64,
    eta_prime: f64,
}

impl KilledResolvent {
    /// Fails with [`Error::Divergent`] at `α = 0` unless `μM > 1`.
    pub fn new(params: IgParams, rate: f64, tau: f64, alpha: f64) -> Result<Self> {
        let ex = ReleaseExponent::new(params, rate)?;
        check_discount(alpha)?;
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(domain(format!("tau must be finite and ≥ 0, got {tau}")));
        }
        if alpha == 0.0 && params.mu() * rate <= 1.0 {
            return Err(Error::Divergent(format!(
                "undiscounted release-phase occupation is infinite when μM ≤ 1 (μM = {})",
                params.mu() * rate
            )));
        }
        Ok(Self {
            params,
            rate,
            tau,
            alpha,
            eta: ex.eta_unchecked(alpha),
            eta_prime: ex.eta_prime(alpha)?,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn net_drift(&self) -> f64 {
        self.rate - 1.0 / self.params.mu()
    }

    /// `p*_α(z)`: exact `η′(α)e^{η(α)z}` for `z ≤ 0`, quadrature otherwise.
    pub fn p_star(&self, z: f64, cfg: &QuadConfig) -> f64 {
        if z <= 0.0 {
            return self.eta_prime * (self.eta * z).exp();
        }
        self.p_star_quadrature(z, cfg)
    }

    /// `∫₀^∞ e^{−αt} p(t, z + Mt) dt` by quadrature, for any `z`.
    pub fn p_star_quadrature(&self, z: f64, cfg: &QuadConfig) -> f64 {
        let m = self.rate;
        let start = (-z / m).max(0.0);
        let f = |t: f64| (-self.alpha * t).exp() * self.params.density_unchecked(t, z + m * t);
        let centre = if self.net_drift().abs() > 1e-12 { z.abs() / self.net_drift().abs() } else { 0.0 };
        let mut reach = start + 2.0 * centre + 1.0;
        if self.alpha > 0.0 {
            reach = reach.min(start + 2.0 * centre + 40.0 / self.alpha).max(start + 1.0);
        }
        let plan = TailPlan {
            scale: (0.25 * z.abs().max(0.05)).min(1.0),
            reach,
            sqrt_start: true,
        };
        integrate_to_infinity(f, start, plan, cfg).value
    }

    /// Density of `U*_α(dy − x)`.
    pub fn density(&self, x: f64, y: f64, cfg: &QuadConfig) -> Result<f64> {
        if !(x >= self.tau && x.is_finite()) {
            return Err(domain(format!("start level {x} lies below tau {}", self.tau)));
        }
        if !(y > self.tau && y.is_finite()) {
            return Err(domain(format!("level {y} must exceed tau {}", self.tau)));
        }
        if x == self.tau {
            return Ok(0.0);
        }
        let kill = (-(x - self.tau) * self.eta).exp();
        Ok(self.p_star(y - x, cfg) - kill * self.p_star(y - self.tau, cfg))
    }

    /// `∫_τ^∞ g*(y) U*_α(dy − x)`: the discounted penalty accrued by the
    /// release phase started at `x`.
    pub fn occupation(&self, g: &PenaltyFn, x: f64, cfg: &QuadConfig) -> Result<f64> {
        if !(x >= self.tau && x.is_finite()) {
            return Err(domain(format!("start level {x} lies below tau {}", self.tau)));
        }
        if x == self.tau || g.is_zero() {
            return Ok(0.0);
        }
        Ok(self.occupation_pieces(&g.pieces(self.tau, f64::INFINITY), x, cfg))
    }

    /// Occupation integral for a rate given as affine pieces on `[τ, ∞)`;
    /// the pieces need not join continuously.
    pub(crate) fn occupation_pieces(&self, pieces: &[Piece], x: f64, cfg: &QuadConfig) -> f64 {
        if x <= self.tau || pieces.is_empty() {
            return 0.0;
        }
        let tau = self.tau;
        let m = self.rate;
        let kill = (-(x - tau) * self.eta).exp();
        let f = |t: f64| {
            let disc = (-self.alpha * t).exp();
            disc * (self.above(pieces, x, t) - kill * self.above(pieces, tau, t))
        };
        // the integrand turns sharply where the deterministic drain from x
        // reaches a piece boundary
        let mut cuts: Vec<f64> = pieces
            .iter()
            .flat_map(|p| [p.lo, p.hi])
            .filter(|b| b.is_finite())
            .map(|b| (x - b) / m)
            .filter(|&t| t > 0.0)
            .collect();
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let last = *cuts.last().expect("non-empty");
        let mut total = 0.0;
        for (i, w) in cuts.windows(2).enumerate() {
            total += if i == 0 {
                integrate_sqrt_left(f, w[0], w[1], cfg).value
            } else {
                integrate(f, w[0], w[1], cfg).value
            };
        }
        let drain = if self.net_drift() > 0.0 { (x - tau) / self.net_drift() } else { 0.0 };
        let mut reach = last + 2.0 * drain + 1.0;
        if self.alpha > 0.0 {
            reach = reach.max(last + 5.0 / self.alpha).min(last + 2.0 * drain + 60.0 / self.alpha);
        }
        let plan = TailPlan {
            scale: (x - tau).max(0.1),
            reach,
            sqrt_start: cuts.len() == 1,
        };
        total + integrate_to_infinity(f, last, plan, cfg).value
    }

    /// [`Self::occupation`] for an arbitrary bounded rate, by quadrature of
    /// [`Self::density`] over `y`. Much slower; each density value is itself
    /// a quadrature.
    pub fn occupation_with<F: Fn(f64) -> f64>(&self, g: F, x: f64, cfg: &QuadConfig) -> Result<f64> {
        if !(x >= self.tau && x.is_finite()) {
            return Err(domain(format!("start level {x} lies below tau {}", self.tau)));
        }
        if x == self.tau {
            return Ok(0.0);
        }
        let kill = (-(x - self.tau) * self.eta).exp();
        let f = |y: f64| g(y) * (self.p_star(y - x, cfg) - kill * self.p_star(y - self.tau, cfg));
        // p*(z) has a log-type peak at z = 0
        let mut total = integrate(f, self.tau, x, cfg).value;
        let scale = if self.alpha > 0.0 { 1.0 / self.eta.max(1e-3) } else { 1.0 };
        let plan = TailPlan {
            scale: scale.min(1.0),
            reach: x + 5.0 * scale,
            sqrt_start: false,
        };
        total += integrate_to_infinity(f, x, plan, cfg).value;
        Ok(total)
    }

    /// `E[g*(c + I_t − Mt); c + I_t − Mt > τ]` for a piecewise-affine `g*`.
    fn above(&self, pieces: &[Piece], c: f64, t: f64) -> f64 {
        let shift = self.rate * t - c;
        let mean = self.params.mean(t);
        let mut total = 0.0;
        for p in pieces {
            // I ∈ [lo + Mt − c, hi + Mt − c)
            let l = p.lo + shift;
            let h = p.hi + shift;
            if h <= 0.0 {
                continue;
            }
            let prob = self.interval_prob(t, l, h);
            if prob == 0.0 {
                continue;
            }
            let mut v = (p.intercept - p.slope * shift) * prob;
            if p.slope != 0.0 {
                let pm_h = if h.is_infinite() { mean } else { self.params.partial_mean_unchecked(t, h) };
                v += p.slope * (pm_h - self.params.partial_mean_unchecked(t, l));
            }
            total += v;
        }
        total
    }

    fn interval_prob(&self, t: f64, l: f64, h: f64) -> f64 {
        let q = &self.params;
        if l >= q.mean(t) {
            (q.sf_unchecked(t, l) - q.sf_unchecked(t, h)).max(0.0)
        } else {
            (q.cdf_unchecked(t, h) - q.cdf_unchecked(t, l)).max(0.0)
        }
    }
}
