//! Grid search over the threshold pair `(λ, τ)`.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::DamModel;
use crate::error::{Error, Result};
use crate::passage::Policy;

/// What the search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Objective {
    /// Total discounted cost from a fixed start level, at the model's
    /// discount rate.
    Discounted { start: f64 },
    /// Long-run average cost per unit time.
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub lambda_range: [f64; 2],
    pub tau_range: [f64; 2],
    /// Points per axis of the initial grid.
    pub grid: usize,
    pub refine_rounds: usize,
    pub objective: Objective,
    /// Smallest admissible `λ − τ`; defaults to `λ_max/100`.
    #[serde(default)]
    pub min_gap: Option<f64>,
}

impl SearchSpec {
    pub fn new(lambda_range: [f64; 2], tau_range: [f64; 2], objective: Objective) -> Self {
        Self {
            lambda_range,
            tau_range,
            grid: 11,
            refine_rounds: 4,
            objective,
            min_gap: None,
        }
    }

    pub fn min_gap(&self) -> f64 {
        self.min_gap.unwrap_or(self.lambda_range[1] / 100.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        let [l0, l1] = self.lambda_range;
        let [t0, t1] = self.tau_range;
        if !(l0.is_finite() && l1.is_finite() && 0.0 < l0 && l0 <= l1) {
            return bad("lambda_range", format!("need 0 < λ_min ≤ λ_max, got [{l0}, {l1}]"));
        }
        if !(t0.is_finite() && t1.is_finite() && 0.0 <= t0 && t0 <= t1) {
            return bad("tau_range", format!("need 0 ≤ τ_min ≤ τ_max, got [{t0}, {t1}]"));
        }
        if !(t1 < l1) {
            return bad("tau_range", format!("τ_max = {t1} must be below λ_max = {l1}"));
        }
        if self.grid < 4 {
            return bad("grid", format!("need at least 4 points per axis, got {}", self.grid));
        }
        let gap = self.min_gap();
        if !(gap > 0.0 && gap.is_finite()) {
            return bad("min_gap", format!("must be finite and > 0, got {gap}"));
        }
        if let Objective::Discounted { start } = self.objective {
            if !(start >= 0.0 && start.is_finite()) {
                return bad("start", format!("must be finite and ≥ 0, got {start}"));
            }
        }
        Ok(())
    }

    fn feasible(&self, lambda: f64, tau: f64) -> bool {
        lambda - tau >= self.min_gap()
    }
}

/// One objective evaluation. `value` is `+∞` when the objective is infinite
/// or could not be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub round: usize,
    pub lambda: f64,
    pub tau: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub lambda: f64,
    pub tau: f64,
    pub value: f64,
    /// Grid spacing `(Δλ, Δτ)` of the last round.
    pub resolution: [f64; 2],
    pub trace: Vec<TracePoint>,
}

/// Evaluates the objective for a single policy.
pub fn objective_value(model: &DamModel, objective: Objective, lambda: f64, tau: f64) -> Result<f64> {
    let policy = Policy::new(lambda, tau, model.policy().rate())?;
    let m = model.with_policy(policy);
    match objective {
        Objective::Discounted { start } => Ok(m.discounted_total_cost(start)?.total()),
        Objective::Average => Ok(m.average_cost()?.rate.finite().unwrap_or(f64::INFINITY)),
    }
}

/// `a` beats `b`: lower value, then smaller `λ`, then smaller `τ`.
fn better(a: &TracePoint, b: &TracePoint) -> bool {
    (a.value, a.lambda, a.tau) < (b.value, b.lambda, b.tau)
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Coarse grid followed by `refine_rounds` local grids around the incumbent,
/// each with half the previous spacing. The model supplies the input law,
/// release rate, costs and numerics; its thresholds are ignored.
pub fn optimize(model: &DamModel, spec: &SearchSpec) -> Result<SearchResult> {
    spec.validate()?;
    if spec.objective == Objective::Average && !model.policy().drains(model.params()) {
        return Err(Error::Infeasible(
            "the average cost is infinite for every policy when μM ≤ 1".into(),
        ));
    }
    if matches!(spec.objective, Objective::Discounted { .. }) && !(model.cost().alpha > 0.0) {
        return Err(Error::Infeasible("the discounted objective needs α > 0".into()));
    }
    let [l0, l1] = spec.lambda_range;
    let [t0, t1] = spec.tau_range;
    let n = spec.grid;
    let mut seen = HashSet::new();
    let mut trace = Vec::new();

    let mut probe = |round: usize, pts: Vec<(f64, f64)>, trace: &mut Vec<TracePoint>| {
        let fresh: Vec<(f64, f64)> = pts
            .into_iter()
            .filter(|&(l, t)| spec.feasible(l, t) && seen.insert((l.to_bits(), t.to_bits())))
            .collect();
        let evals: Vec<TracePoint> = fresh
            .par_iter()
            .map(|&(lambda, tau)| {
                let value = objective_value(model, spec.objective, lambda, tau)
                    .ok()
                    .filter(|v| !v.is_nan())
                    .unwrap_or(f64::INFINITY);
                TracePoint { round, lambda, tau, value }
            })
            .collect();
        trace.extend(evals);
    };

    let coarse: Vec<(f64, f64)> = axis(l0, l1, n)
        .into_iter()
        .flat_map(|l| axis(t0, t1, n).into_iter().map(move |t| (l, t)))
        .collect();
    probe(0, coarse, &mut trace);
    if trace.is_empty() {
        return Err(Error::Infeasible("no grid point satisfies λ − τ ≥ min_gap".into()));
    }

    let best_of = |trace: &[TracePoint]| -> TracePoint {
        *trace.iter().reduce(|a, b| if better(b, a) { b } else { a }).expect("non-empty")
    };
    let mut best = best_of(&trace);
    if best.value.is_infinite() {
        return Err(Error::Infeasible("the objective is infinite on the whole grid".into()));
    }

    let mut dl = if l1 > l0 { (l1 - l0) / (n - 1) as f64 } else { 0.0 };
    let mut dt = if t1 > t0 { (t1 - t0) / (n - 1) as f64 } else { 0.0 };
    let half = (n / 2) as i64;
    for round in 1..=spec.refine_rounds {
        dl *= 0.5;
        dt *= 0.5;
        let mut pts = Vec::new();
        for i in -half..=half {
            let l = (best.lambda + i as f64 * dl).clamp(l0, l1);
            for j in -half..=half {
                let t = (best.tau + j as f64 * dt).clamp(t0, t1);
                pts.push((l, t));
            }
        }
        probe(round, pts, &mut trace);
        best = best_of(&trace);
    }

    Ok(SearchResult {
        lambda: best.lambda,
        tau: best.tau,
        value: best.value,
        resolution: [dl, dt],
        trace,
    })
}
