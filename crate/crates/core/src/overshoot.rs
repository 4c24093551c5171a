//! Law of the up-crossing pair `(W_λ, I_{W_λ})` for the fill phase.
//!
//! Everything is expressed for a start at `0` and a level `a = λ − x`; a
//! start at `x` shifts the landing level by `x`.

use crate::error::{domain, Result};
use crate::ig::IgParams;
use crate::passage::{check_discount, lt_fill_gap, mean_fill_gap};
use crate::quad::{integrate, integrate_sqrt_left, integrate_to_infinity, QuadConfig, TailPlan};
use crate::resolvent::ResolventDensity;

/// Which coefficient multiplies `u₀(z − a)` in the joint density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JointReading {
    /// The transition density `p(t, a)`. Integrating over `t` recovers the
    /// marginal overshoot density.
    #[default]
    TransitionAtLevel,
    /// The resolvent density `u₀(a)`, constant in `t`. Kept for comparison;
    /// its `t`-marginal diverges.
    ResolventAtLevel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvershootLaw {
    params: IgParams,
    level: f64,
    u0: ResolventDensity,
}

impl OvershootLaw {
    /// Law of the first passage of `I` (from `0`) above `level > 0`.
    pub fn new(params: IgParams, level: f64) -> Result<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(domain(format!("level must be finite and > 0, got {level}")));
        }
        Ok(Self {
            params,
            level,
            u0: ResolventDensity::new(params, 0.0)?,
        })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    fn check_landing(&self, z: f64) -> Result<()> {
        if !(z > self.level) {
            return Err(domain(format!("landing level {z} must exceed {}", self.level)));
        }
        Ok(())
    }

    /// Marginal density of the landing level `I_{W_λ}` on `(a, ∞)`, from the
    /// inverted transform
    /// `(2/σ²)[u₀(a)u₀(z−a) + ∫_a^z u₀(z−y)u₀′(y)dy − μu₀(z)]`.
    ///
    /// The bracket cancels to a tiny number far out in the tail, where only
    /// absolute accuracy survives; [`Self::discounted_density_direct`] does
    /// not have that problem.
    pub fn pdf(&self, z: f64, cfg: &QuadConfig) -> Result<f64> {
        self.check_landing(z)?;
        Ok(self.expansion(&self.u0, z, cfg))
    }

    /// `E[e^{−αW_λ}; I_{W_λ} ∈ dz]/dz` in the same inverted form.
    pub fn discounted_density(&self, alpha: f64, z: f64, cfg: &QuadConfig) -> Result<f64> {
        self.check_landing(z)?;
        let ua = ResolventDensity::new(self.params, alpha)?;
        Ok(alpha * ua.u_unchecked(z) + self.expansion(&ua, z, cfg))
    }

    fn expansion(&self, ua: &ResolventDensity, z: f64, cfg: &QuadConfig) -> f64 {
        let a = self.level;
        // s = z − y, so the u₀ singularity sits at s = 0 exactly
        let conv = integrate_sqrt_left(|s| self.u0.u_unchecked(s) * ua.u_prime_unchecked(z - s), 0.0, z - a, cfg).value;
        let bracket = ua.u_unchecked(a) * self.u0.u_unchecked(z - a) + conv - self.params.mu() * ua.u_unchecked(z);
        2.0 / self.params.sigma2() * bracket
    }

    /// The same discounted density from the compensation formula
    /// `∫₀^a u_α(y) ν(z − y) dy`; positive by construction, so it keeps full
    /// relative accuracy in the far tail where the inverted form cancels.
    pub fn discounted_density_direct(&self, alpha: f64, z: f64, cfg: &QuadConfig) -> Result<f64> {
        self.check_landing(z)?;
        let ua = ResolventDensity::new(self.params, alpha)?;
        Ok(self.against_jumps(&ua, z - self.level, |s| self.params.levy_density_unchecked(s), cfg))
    }

    /// `∫₀^a u(y) k(δ + a − y) dy` where `k` peaks at `0`.
    fn against_jumps<K: Fn(f64) -> f64>(&self, ua: &ResolventDensity, delta: f64, kernel: K, cfg: &QuadConfig) -> f64 {
        let a = self.level;
        let half = 0.5 * a;
        let left = integrate_sqrt_left(|y| ua.u_unchecked(y) * kernel(delta + a - y), 0.0, half, cfg).value;
        // y = a − δ(e^v − 1) flattens the kernel peak at y = a
        let vmax = (half / delta).ln_1p();
        let right = integrate(
            |v| {
                let s = delta * v.exp_m1();
                ua.u_unchecked(a - s) * kernel(delta + s) * delta * v.exp()
            },
            0.0,
            vmax,
            cfg,
        )
        .value;
        left + right
    }

    /// `P(I_{W_λ} > z)`.
    pub fn sf(&self, z: f64, cfg: &QuadConfig) -> f64 {
        if z <= self.level {
            return 1.0;
        }
        let v = self.against_jumps(&self.u0, z - self.level, |s| self.params.levy_tail_unchecked(s), cfg);
        v.clamp(0.0, 1.0)
    }

    pub fn cdf(&self, z: f64, cfg: &QuadConfig) -> f64 {
        1.0 - self.sf(z, cfg)
    }

    /// `E I_{W_λ} = E W_λ / μ`.
    pub fn mean(&self) -> f64 {
        mean_fill_gap(&self.params, self.level) / self.params.mu()
    }

    /// `E[e^{−αW_λ − βI_{W_λ}}] = (α + ψ(β))∫_a^∞ e^{−βz}u_α(z)dz`, evaluated
    /// through the complementary integral over `(0, a)`.
    pub fn joint_transform(&self, alpha: f64, beta: f64, cfg: &QuadConfig) -> Result<f64> {
        check_discount(alpha)?;
        check_discount(beta)?;
        if alpha == 0.0 && beta == 0.0 {
            return Ok(1.0);
        }
        let ua = ResolventDensity::new(self.params, alpha)?;
        Ok(1.0 - (alpha + self.params.psi(beta)) * ua.laplace_below(beta, self.level, cfg))
    }

    /// `E[e^{−αW_λ}]`.
    pub fn fill_transform(&self, alpha: f64) -> f64 {
        lt_fill_gap(&self.params, self.level, alpha)
    }

    /// Joint density of `(W_λ, I_{W_λ})` at `(t, z)`.
    pub fn joint_density(&self, t: f64, z: f64, reading: JointReading, cfg: &QuadConfig) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(domain(format!("passage time must be finite and > 0, got {t}")));
        }
        if z <= self.level {
            return Ok(0.0);
        }
        let a = self.level;
        let q = &self.params;
        let coeff = match reading {
            JointReading::TransitionAtLevel => q.density_unchecked(t, a),
            JointReading::ResolventAtLevel => self.u0.u_unchecked(a),
        };
        let conv = integrate_sqrt_left(|s| self.u0.u_unchecked(s) * q.density_dz(t, z - s), 0.0, z - a, cfg).value;
        let bracket = coeff * self.u0.u_unchecked(z - a) + conv - q.mu() * q.density_unchecked(t, z);
        Ok(q.density_dt(t, z) + 2.0 / q.sigma2() * bracket)
    }

    /// `E[e^{−αW_λ} h(I_{W_λ})]` for a bounded `h`, with optional points in
    /// `(a, ∞)` where `h` has kinks.
    pub fn expect<H: Fn(f64) -> f64>(&self, alpha: f64, h: H, kinks: &[f64], cfg: &QuadConfig) -> Result<f64> {
        let ua = ResolventDensity::new(self.params, alpha)?;
        let a = self.level;
        let f = |z: f64| {
            let m = self.against_jumps(&ua, z - a, |s| self.params.levy_density_unchecked(s), cfg);
            m * h(z)
        };
        let mut cuts: Vec<f64> = kinks.iter().copied().filter(|&k| k > a && k.is_finite()).collect();
        cuts.push(a);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for (i, w) in cuts.windows(2).enumerate() {
            total += if i == 0 {
                integrate_sqrt_left(f, w[0], w[1], cfg).value
            } else {
                integrate(f, w[0], w[1], cfg).value
            };
        }
        let last = *cuts.last().expect("non-empty");
        let k = self.params.mu().powi(2) / (2.0 * self.params.sigma2());
        let plan = TailPlan {
            scale: (1.0 / k).min(1.0),
            reach: last + 3.0 / k,
            sqrt_start: cuts.len() == 1,
        };
        total += integrate_to_infinity(f, last, plan, cfg).value;
        Ok(total)
    }
}
