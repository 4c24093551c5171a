//! Self-consistency checks between independently computed quantities.
//!
//! Each check compares a closed form against a quadrature or against a
//! different closed form, and passes when the residual is within its
//! tolerance.

use std::fmt;

use serde::Serialize;

use crate::cost::DamModel;
use crate::overshoot::OvershootLaw;
use crate::passage::{
    lt_w_lambda, lt_w_tau_star, mean_var_w_tau_star, mean_w_lambda, pdf_w_tau_star, release_finite_probability,
    ReleaseExponent,
};
use crate::penalty::PenaltyFn;
use crate::quad::{integrate_to_infinity, TailPlan};
use crate::resolvent::{KilledResolvent, ResolventDensity};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum Outcome {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub scale: Scale,
    pub outcome: Outcome,
}

impl Check {
    fn compare(name: impl Into<String>, value: f64, reference: f64, tolerance: f64, scale: Scale) -> Self {
        let diff = (value - reference).abs();
        let residual = match scale {
            Scale::Absolute => diff,
            Scale::Relative if diff == 0.0 => 0.0,
            Scale::Relative => diff / reference.abs(),
        };
        let outcome = if residual <= tolerance { Outcome::Pass } else { Outcome::Fail };
        Self {
            name: name.into(),
            value,
            reference,
            residual,
            tolerance,
            scale,
            outcome,
        }
    }

    fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: f64::NAN,
            reference: f64::NAN,
            residual: f64::NAN,
            tolerance: f64::NAN,
            scale: Scale::Absolute,
            outcome: Outcome::Skipped(reason.into()),
        }
    }

    fn failed(name: impl Into<String>, err: impl fmt::Display) -> Self {
        Self {
            outcome: Outcome::Fail,
            ..Self::skipped(name, "")
        }
        .with_reason(err)
    }

    fn with_reason(mut self, err: impl fmt::Display) -> Self {
        self.name = format!("{} ({err})", self.name);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        !self.checks.iter().any(|c| c.outcome == Outcome::Fail)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.outcome == Outcome::Fail).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(0);
        writeln!(
            f,
            "{:<width$}  {:>22}  {:>22}  {:>10}  {:>8}  status",
            "check", "value", "reference", "residual", "tol"
        )?;
        for c in &self.checks {
            let status = match &c.outcome {
                Outcome::Pass => "PASS".to_string(),
                Outcome::Fail => "FAIL".to_string(),
                Outcome::Skipped(why) => format!("SKIP: {why}"),
            };
            if matches!(c.outcome, Outcome::Skipped(_)) {
                writeln!(f, "{:<width$}  {:>22}  {:>22}  {:>10}  {:>8}  {status}", c.name, "", "", "", "")?;
            } else {
                writeln!(
                    f,
                    "{:<width$}  {:>22.15e}  {:>22.15e}  {:>10.2e}  {:>8.0e}  {status}",
                    c.name, c.value, c.reference, c.residual, c.tolerance
                )?;
            }
        }
        write!(f, "{} checks, {} failed", self.checks.len(), self.failures())
    }
}

/// Runs the identity suite for the model's input law and policy. `start`
/// is the initial content used by the start-dependent checks. With
/// `flip_resolvent` every check that uses `u_α` gets the deliberately wrong
/// variant, so those checks must fail.
pub fn run(model: &DamModel, start: f64, flip_resolvent: bool) -> Report {
    let params = *model.params();
    let quad = model.quad();
    let m = model.policy().rate();
    let lambda = model.policy().lambda();
    let tau = model.policy().tau();
    let drains = model.policy().drains(&params);
    let mut checks = Vec::new();
    let resolvent = |alpha: f64| {
        let ua = ResolventDensity::new(params, alpha).expect("nonnegative rate");
        if flip_resolvent {
            ua.with_flipped_second_term()
        } else {
            ua
        }
    };

    let grid = [0.0, 0.5, 1.0, 2.0];
    for &alpha in &grid {
        for &beta in &grid {
            let name = format!("resolvent transform α={alpha} β={beta}");
            let ua = resolvent(alpha);
            let want = ResolventDensity::new(params, alpha).expect("nonnegative rate").laplace_closed(beta);
            checks.push(match ua.laplace_quadrature(beta, quad) {
                Ok(got) => Check::compare(name, got.value, want, 1e-6, Scale::Relative),
                Err(_) if want.is_infinite() => Check::skipped(name, "both sides infinite"),
                Err(e) => Check::failed(name, e),
            });
        }
    }

    let mut alphas = vec![0.5, 2.0];
    let rate = model.cost().alpha;
    if rate > 0.0 && !alphas.contains(&rate) {
        alphas.insert(0, rate);
    }
    let x = start.min(lambda);
    for &alpha in &alphas {
        let lt = lt_w_lambda(&params, x, lambda, alpha).unwrap_or(f64::NAN);
        let tail = resolvent(alpha).mass_above(lambda - x, quad).unwrap_or(f64::NAN);
        checks.push(Check::compare(
            format!("fill transform vs resolvent tail α={alpha}"),
            lt,
            alpha * tail,
            1e-6,
            Scale::Absolute,
        ));
    }
    checks.push(Check::compare(
        "fill transform at λ",
        lt_w_lambda(&params, lambda, lambda, 1.0).unwrap_or(f64::NAN),
        1.0,
        0.0,
        Scale::Absolute,
    ));

    let release = ReleaseExponent::new(params, m).expect("validated rate");
    for alpha in [0.0, 0.1, 1.0, 10.0] {
        let name = format!("release exponent residual α={alpha}");
        checks.push(match release.eta(alpha) {
            Ok(eta) => Check::compare(name, release.residual(alpha, eta), 0.0, 1e-10, Scale::Absolute),
            Err(e) => Check::failed(name, e),
        });
    }
    let eta0 = release.eta(0.0).unwrap_or(f64::NAN);
    checks.push(Check::compare(
        "η(0) = 0 iff μM > 1",
        ((eta0 == 0.0) == drains) as u8 as f64,
        1.0,
        0.0,
        Scale::Absolute,
    ));

    let d = lambda - tau;
    let start_t = d / m;
    let plan = TailPlan {
        scale: start_t.max(0.5),
        reach: 10.0 * start_t,
        sqrt_start: true,
    };
    let mass = integrate_to_infinity(
        |t| pdf_w_tau_star(&params, m, lambda, tau, t).unwrap_or(f64::NAN),
        start_t,
        plan,
        quad,
    )
    .value;
    checks.push(Check::compare(
        "release density mass",
        mass,
        release_finite_probability(&params, m, lambda, tau).unwrap_or(f64::NAN),
        1e-6,
        Scale::Absolute,
    ));

    let one = PenaltyFn::constant(1.0).expect("finite");
    for &alpha in &alphas {
        let occ = resolvent(alpha).integrate_resolvent(&one, x, lambda, quad).unwrap_or(f64::NAN);
        let lt = lt_w_lambda(&params, x, lambda, alpha).unwrap_or(f64::NAN);
        checks.push(Check::compare(
            format!("free occupation vs fill transform α={alpha}"),
            occ,
            (1.0 - lt) / alpha,
            1e-5,
            Scale::Relative,
        ));
        let name = format!("killed occupation vs release transform α={alpha}");
        checks.push(match KilledResolvent::new(params, m, tau, alpha) {
            Ok(kr) => Check::compare(
                name,
                kr.occupation(&one, lambda, quad).unwrap_or(f64::NAN),
                (1.0 - lt_w_tau_star(&params, m, lambda, tau, alpha).unwrap_or(f64::NAN)) / alpha,
                1e-5,
                Scale::Relative,
            ),
            Err(e) => Check::failed(name, e),
        });
    }
    let occ0 = resolvent(0.0).integrate_resolvent(&one, x, lambda, quad).unwrap_or(f64::NAN);
    checks.push(Check::compare(
        "free occupation vs mean fill time",
        occ0,
        mean_w_lambda(&params, x, lambda).unwrap_or(f64::NAN),
        1e-5,
        Scale::Relative,
    ));
    let name = "killed occupation vs mean release time";
    checks.push(if drains {
        let kr = KilledResolvent::new(params, m, tau, 0.0).expect("μM > 1");
        let mean = mean_var_w_tau_star(&params, m, lambda, tau)
            .ok()
            .and_then(|p| p.mean.finite())
            .unwrap_or(f64::NAN);
        Check::compare(
            name,
            kr.occupation(&one, lambda, quad).unwrap_or(f64::NAN),
            mean,
            1e-5,
            Scale::Relative,
        )
    } else {
        Check::skipped(name, "μM ≤ 1: release time has infinite mean")
    });

    match OvershootLaw::new(params, lambda - x) {
        Ok(law) if lambda > x => {
            let mass = law.expect(0.0, |_| 1.0, &[], quad).unwrap_or(f64::NAN);
            checks.push(Check::compare("overshoot mass", mass, 1.0, 1e-4, Scale::Absolute));
            let mean = law.expect(0.0, |z| z, &[], quad).unwrap_or(f64::NAN);
            checks.push(Check::compare("overshoot mean", mean, law.mean(), 1e-4, Scale::Relative));
        }
        _ => checks.push(Check::skipped("overshoot law", "start is at or above λ")),
    }

    if drains {
        let small = 1e-3;
        let disc = model
            .with_alpha(small)
            .and_then(|mm| mm.discounted_total_cost(tau))
            .map(|c| c.total())
            .unwrap_or(f64::NAN);
        let avg = model
            .average_cost()
            .ok()
            .and_then(|a| a.rate.finite())
            .unwrap_or(f64::NAN);
        checks.push(Check::compare(
            "discounted cost × α vs average cost, α=1e-3",
            small * disc,
            avg,
            2e-2,
            Scale::Relative,
        ));
        checks.push(Check::compare(
            "stationary F(τ)",
            model.stationary_cdf(tau).unwrap_or(f64::NAN),
            0.0,
            0.0,
            Scale::Absolute,
        ));
        let k = params.mu() * params.mu() / (2.0 * params.sigma2());
        let far = lambda + 50.0 * (1.0 + 1.0 / k);
        checks.push(Check::compare(
            "stationary F far above λ",
            model.stationary_cdf(far).unwrap_or(f64::NAN),
            1.0,
            1e-3,
            Scale::Absolute,
        ));
    } else {
        for name in ["discounted cost × α vs average cost", "stationary law"] {
            checks.push(Check::skipped(name, "μM ≤ 1: average cost infinite, no stationary law"));
        }
    }

    Report { checks }
}
