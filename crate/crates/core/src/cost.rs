//! Economics of a two-threshold policy: discounted and long-run average
//! cost, the cycle transform, the mean cycle length and the stationary law
//! of the content.
//!
//! A cycle starts when the content is drained to `τ` (or at time zero) and
//! consists of a fill phase up to the crossing of `λ` followed by a release
//! phase at rate `M` back down to `τ`. The switch-off charge `K₂M` is booked
//! at the start of each cycle and the switch-on charge `K₁M` at the
//! crossing.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ig::IgParams;
use crate::overshoot::OvershootLaw;
use crate::passage::{lt_fill_gap, mean_fill_gap, Extended, Policy, ReleaseExponent};
use crate::penalty::{PenaltyFn, Piece};
use crate::quad::{integrate_to_infinity, QuadConfig, TailPlan};
use crate::resolvent::{KilledResolvent, ResolventDensity};

/// Switching costs, release reward, discount rate and penalty rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    pub k1: f64,
    pub k2: f64,
    pub r: f64,
    pub alpha: f64,
    /// Penalty rate during the fill phase.
    pub g: PenaltyFn,
    /// Penalty rate during the release phase.
    pub g_star: PenaltyFn,
}

impl CostParams {
    pub fn zero(alpha: f64) -> Self {
        Self {
            k1: 0.0,
            k2: 0.0,
            r: 0.0,
            alpha,
            g: PenaltyFn::zero(),
            g_star: PenaltyFn::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k1", self.k1), ("k2", self.k2), ("r", self.r), ("alpha", self.alpha)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and ≥ 0, got {v}"),
                });
            }
        }
        if !self.g.is_nonnegative() {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: "penalty rate must be nonnegative".into(),
            });
        }
        if !self.g_star.is_nonnegative() {
            return Err(Error::InvalidParameter {
                name: "g_star",
                reason: "penalty rate must be nonnegative".into(),
            });
        }
        Ok(())
    }
}

/// A money figure split by origin. `reward` is the (nonpositive) value of
/// released output.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Components {
    pub switching: f64,
    pub reward: f64,
    pub penalty_fill: f64,
    pub penalty_release: f64,
}

impl Components {
    pub fn total(&self) -> f64 {
        self.switching + self.reward + self.penalty_fill + self.penalty_release
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            switching: s * self.switching,
            reward: s * self.reward,
            penalty_fill: s * self.penalty_fill,
            penalty_release: s * self.penalty_release,
        }
    }

    fn plus(&self, o: &Self) -> Self {
        Self {
            switching: self.switching + o.switching,
            reward: self.reward + o.reward,
            penalty_fill: self.penalty_fill + o.penalty_fill,
            penalty_release: self.penalty_release + o.penalty_release,
        }
    }
}

/// Long-run average cost per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AverageCost {
    pub rate: Extended,
    /// Per-origin rates; absent when the rate is infinite.
    pub components: Option<Components>,
}

/// Everything `evaluate` reports for one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyEvaluation {
    pub start: f64,
    /// Absent when the discount rate is zero.
    pub discounted_total: Option<f64>,
    pub discounted_components: Option<Components>,
    pub average_rate: Extended,
    pub average_components: Option<Components>,
    pub cycle_mean: Extended,
}

/// A fully specified dam: input law, policy, economics and numerics.
#[derive(Debug, Clone, PartialEq)]
pub struct DamModel {
    params: IgParams,
    policy: Policy,
    cost: CostParams,
    quad: QuadConfig,
}

impl DamModel {
    pub fn new(params: IgParams, policy: Policy, cost: CostParams, quad: QuadConfig) -> Result<Self> {
        cost.validate()?;
        quad.validate()?;
        Ok(Self {
            params,
            policy,
            cost,
            quad,
        })
    }

    pub fn params(&self) -> &IgParams {
        &self.params
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn cost(&self) -> &CostParams {
        &self.cost
    }

    pub fn quad(&self) -> &QuadConfig {
        &self.quad
    }

    /// The same dam under different thresholds.
    pub fn with_policy(&self, policy: Policy) -> Self {
        Self { policy, ..self.clone() }
    }

    /// The same dam under a different discount rate.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let cost = CostParams { alpha, ..self.cost.clone() };
        cost.validate()?;
        Ok(Self { cost, ..self.clone() })
    }

    fn discount(&self) -> Result<f64> {
        let a = self.cost.alpha;
        if a > 0.0 {
            Ok(a)
        } else {
            Err(domain("discounted quantities need a discount rate > 0; use the average-cost path"))
        }
    }

    fn check_start(&self, x: f64) -> Result<()> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(domain(format!("start level must be finite and ≥ 0, got {x}")));
        }
        Ok(())
    }

    fn eta(&self, alpha: f64) -> f64 {
        ReleaseExponent::new(self.params, self.policy.rate())
            .expect("validated rate")
            .eta_unchecked(alpha)
    }

    /// `∫₀^{λ−x} e^{−ηz} u_α(z) dz`.
    fn j(&self, alpha: f64, eta: f64, x: f64) -> Result<f64> {
        let ua = ResolventDensity::new(self.params, alpha)?;
        Ok(ua.laplace_below(eta, self.policy.lambda() - x, &self.quad))
    }

    /// `E_x e^{−αT}` where `T` ends the first cycle (the first return to `τ`
    /// after a crossing of `λ`).
    pub fn cycle_transform(&self, x: f64) -> Result<f64> {
        self.check_start(x)?;
        let alpha = self.discount()?;
        self.cycle_transform_at(alpha, x)
    }

    fn cycle_transform_at(&self, alpha: f64, x: f64) -> Result<f64> {
        let eta = self.eta(alpha);
        let lambda = self.policy.lambda();
        if x >= lambda {
            return Ok((-eta * (x - self.policy.tau())).exp());
        }
        Ok((-eta * (lambda - self.policy.tau())).exp() * self.landing_transform(alpha, eta, x)?)
    }

    /// `E_x[e^{−αW_λ − η(L − λ)}]` for the landing level `L`, equal to
    /// `e^{η(λ−x)}(1 − MηJ_x)`. When `η(λ−x)` is large that difference
    /// cancels, so the equivalent `Mη∫₀^∞ e^{−ηs}u_α(λ−x+s)ds` is used.
    fn landing_transform(&self, alpha: f64, eta: f64, x: f64) -> Result<f64> {
        let gap = self.policy.lambda() - x;
        let m = self.policy.rate();
        if eta * gap <= 1.0 {
            return Ok((eta * gap).exp() * (1.0 - m * eta * self.j(alpha, eta, x)?));
        }
        let ua = ResolventDensity::new(self.params, alpha)?;
        let rate = eta + ua.decay_rate();
        let plan = TailPlan {
            scale: (1.0 / rate).min(1.0),
            reach: 5.0 / rate,
            sqrt_start: false,
        };
        let tail = integrate_to_infinity(|s| (-eta * s).exp() * ua.u_unchecked(gap + s), 0.0, plan, &self.quad);
        Ok(m * eta * tail.value)
    }

    /// Expected discounted cost of the first cycle from `x`.
    pub fn discounted_cycle_cost(&self, x: f64) -> Result<Components> {
        self.check_start(x)?;
        let alpha = self.discount()?;
        let m = self.policy.rate();
        let tau = self.policy.tau();
        let lambda = self.policy.lambda();
        let c = &self.cost;
        let eta = self.eta(alpha);
        let kr = KilledResolvent::new(self.params, m, tau, alpha)?;
        if x >= lambda {
            let released = (1.0 - (-(x - tau) * eta).exp()) / alpha;
            return Ok(Components {
                switching: m * (c.k2 + c.k1),
                // a difference, so a zero reward prints as 0 rather than -0
                reward: 0.0 - c.r * m * released,
                penalty_fill: 0.0,
                penalty_release: kr.occupation(&c.g_star, x, &self.quad)?,
            });
        }
        let gap = lambda - x;
        let lt = lt_fill_gap(&self.params, gap, alpha);
        let ua = ResolventDensity::new(self.params, alpha)?;
        // E_x[e^{−αW}(1 − e^{−η(L−τ)})]/α, the discounted release time
        let tail = self.cycle_transform_at(alpha, x)?;
        let released = (lt - tail) / alpha;
        let penalty_release = match c.g_star {
            PenaltyFn::Constant(v) => v * released,
            _ => {
                let law = OvershootLaw::new(self.params, gap)?;
                let occ = |z: f64| kr.occupation(&c.g_star, x + z, &self.quad).unwrap_or(f64::NAN);
                law.expect(alpha, occ, &[], &self.quad)?
            }
        };
        Ok(Components {
            switching: m * (c.k2 + c.k1 * lt),
            reward: 0.0 - c.r * m * released,
            penalty_fill: ua.integrate_resolvent(&c.g, x, lambda, &self.quad)?,
            penalty_release,
        })
    }

    /// Expected total discounted cost over all cycles from `x`.
    pub fn discounted_total_cost(&self, x: f64) -> Result<Components> {
        self.check_start(x)?;
        let alpha = self.discount()?;
        let first = self.discounted_cycle_cost(x)?;
        let tau = self.policy.tau();
        let later = if x == tau { first } else { self.discounted_cycle_cost(tau)? };
        let eta = self.eta(alpha);
        // 1 − E_τ e^{−αW}, without the cancellation
        let renew = self.policy.rate() * eta * self.j(alpha, eta, tau)?;
        let factor = self.cycle_transform_at(alpha, x)? / renew;
        Ok(first.plus(&later.scaled(factor)))
    }

    /// `E_τ W = μM·E₀W_{λ−τ}/(μM − 1)`, infinite when `μM ≤ 1`.
    pub fn mean_cycle_length(&self) -> Extended {
        let mm = self.params.mu() * self.policy.rate();
        if mm <= 1.0 {
            return Extended::Infinite;
        }
        let fill = mean_fill_gap(&self.params, self.policy.lambda() - self.policy.tau());
        Extended::Finite(mm * fill / (mm - 1.0))
    }

    /// Long-run average cost per unit time.
    pub fn average_cost(&self) -> Result<AverageCost> {
        let cycle = match self.mean_cycle_length() {
            Extended::Finite(v) => v,
            Extended::Infinite => {
                return Ok(AverageCost {
                    rate: Extended::Infinite,
                    components: None,
                })
            }
        };
        let m = self.policy.rate();
        let tau = self.policy.tau();
        let lambda = self.policy.lambda();
        let c = &self.cost;
        let gap = lambda - tau;
        let release_mean = mean_fill_gap(&self.params, gap) / (self.params.mu() * m - 1.0);
        let u0 = ResolventDensity::new(self.params, 0.0)?;
        let penalty_release = match c.g_star {
            PenaltyFn::Constant(v) => v * release_mean,
            _ => {
                let kr = KilledResolvent::new(self.params, m, tau, 0.0)?;
                let law = OvershootLaw::new(self.params, gap)?;
                let occ = |z: f64| kr.occupation(&c.g_star, tau + z, &self.quad).unwrap_or(f64::NAN);
                law.expect(0.0, occ, &[], &self.quad)?
            }
        };
        let per_cycle = Components {
            switching: m * (c.k1 + c.k2),
            reward: 0.0 - c.r * m * release_mean,
            penalty_fill: u0.integrate_resolvent(&c.g, tau, lambda, &self.quad)?,
            penalty_release,
        };
        let rates = per_cycle.scaled(1.0 / cycle);
        Ok(AverageCost {
            rate: Extended::Finite(rates.total()),
            components: Some(rates),
        })
    }

    /// Stationary `P(Z ≤ z)` of the content; needs `μM > 1`.
    pub fn stationary_cdf(&self, z: f64) -> Result<f64> {
        let cycle = self.mean_cycle_length().finite().ok_or_else(|| {
            Error::Infeasible("the content has no stationary law when μM ≤ 1".into())
        })?;
        if z.is_nan() {
            return Err(domain("level must not be NaN"));
        }
        let tau = self.policy.tau();
        let lambda = self.policy.lambda();
        if z <= tau {
            return Ok(0.0);
        }
        if z.is_infinite() {
            return Ok(1.0);
        }
        let fill = mean_fill_gap(&self.params, lambda.min(z) - tau);
        let kr = KilledResolvent::new(self.params, self.policy.rate(), tau, 0.0)?;
        let law = OvershootLaw::new(self.params, lambda - tau)?;
        let below = [Piece {
            lo: tau,
            hi: z,
            intercept: 1.0,
            slope: 0.0,
        }];
        // the result is a probability; 1e-8 relative is ample
        let cfg = self.quad.scaled(1e2);
        let occ = |w: f64| kr.occupation_pieces(&below, tau + w, &cfg);
        let release = law.expect(0.0, occ, &[z - tau], &cfg)?;
        Ok(((fill + release) / cycle).clamp(0.0, 1.0))
    }

    /// Discounted (when `α > 0`) and average figures for a start at `x`.
    pub fn evaluate(&self, x: f64) -> Result<PolicyEvaluation> {
        let discounted = if self.cost.alpha > 0.0 {
            Some(self.discounted_total_cost(x)?)
        } else {
            None
        };
        let avg = self.average_cost()?;
        Ok(PolicyEvaluation {
            start: x,
            discounted_total: discounted.map(|c| c.total()),
            discounted_components: discounted,
            average_rate: avg.rate,
            average_components: avg.components,
            cycle_mean: self.mean_cycle_length(),
        })
    }
}
