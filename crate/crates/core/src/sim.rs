//! Monte Carlo simulation of the controlled content process.
//!
//! Increments of `I` are sampled exactly on a time grid that is refined near
//! the active threshold. During the release phase jumps are applied at the
//! end of each step and the linear drain between them is followed exactly,
//! so the hitting time of `τ` is located without discretization error.
//!
//! Cycles are independent given their start level. Cycle `i` draws from its
//! own random stream, so results do not depend on the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{Components, DamModel};
use crate::error::{domain, Error, Result};
use crate::ig::{stream_rng, IgParams};

/// Time-grid and sample-size settings for the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Base time step.
    pub dt: f64,
    /// Step shrink applied (up to twice) close to a threshold.
    pub refine_factor: u32,
    pub n_cycles: usize,
    /// Cap on the simulated time of the path of cycles from `τ`, and on
    /// the length of any single cycle.
    pub horizon: f64,
    pub seed: u64,
    /// Time discarded (in whole cycles) before occupancy is recorded.
    pub burn_in: f64,
    /// Width of the occupancy histogram bins.
    pub bin_width: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            refine_factor: 10,
            n_cycles: 10_000,
            horizon: 1e5,
            seed: 1,
            burn_in: 1e3,
            bin_width: 0.01,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("must be finite and > 0, got {}", self.dt));
        }
        if self.refine_factor < 1 {
            return bad("refine_factor", "must be at least 1".into());
        }
        if self.n_cycles < 1 {
            return bad("n_cycles", "must be at least 1".into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon", format!("must be finite and > 0, got {}", self.horizon));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return bad("burn_in", format!("must be finite and ≥ 0, got {}", self.burn_in));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return bad("bin_width", format!("must be finite and > 0, got {}", self.bin_width));
        }
        Ok(())
    }
}

/// One simulated cycle: a fill phase up to the crossing of `λ` and a release
/// phase down to `τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub index: usize,
    pub start_level: f64,
    /// Start time on the path of cycles from `τ` (zero for first cycles
    /// simulated from another start level).
    pub start_time: f64,
    pub w_lambda: f64,
    pub landing: f64,
    /// `NaN` when the horizon was exhausted first.
    pub w_tau_star: f64,
    /// Costs discounted to the start of the cycle.
    pub discounted: Components,
    pub undiscounted: Components,
    /// `e^{−α·(cycle length)}`.
    pub discount: f64,
    pub horizon_exceeded: bool,
}

impl CycleRecord {
    pub fn length(&self) -> f64 {
        self.w_lambda + self.w_tau_star
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Time spent by the content in each level bin `[k·w, (k+1)·w)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Occupancy {
    pub bin_width: f64,
    pub time: Vec<f64>,
}

impl Occupancy {
    pub fn total(&self) -> f64 {
        self.time.iter().sum()
    }

    /// Right-continuous time-weighted distribution at the bin edges.
    pub fn cdf(&self) -> Result<EmpiricalCdf> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::InsufficientData("no occupancy recorded after burn-in".into()));
        }
        let mut acc = 0.0;
        let mut edges = Vec::with_capacity(self.time.len() + 1);
        let mut values = Vec::with_capacity(self.time.len() + 1);
        edges.push(0.0);
        values.push(0.0);
        for (k, t) in self.time.iter().enumerate() {
            acc += t;
            edges.push((k + 1) as f64 * self.bin_width);
            values.push(acc / total);
        }
        Ok(EmpiricalCdf { edges, values })
    }

    fn merge_sparse(&mut self, sparse: &[(u32, f64)]) {
        for &(k, t) in sparse {
            let k = k as usize;
            if k >= self.time.len() {
                self.time.resize(k + 1, 0.0);
            }
            self.time[k] += t;
        }
    }
}

/// Empirical distribution known exactly at the bin edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl EmpiricalCdf {
    /// Value at the largest edge not above `z`.
    pub fn eval(&self, z: f64) -> f64 {
        if z < self.edges[0] {
            return 0.0;
        }
        let i = self.edges.partition_point(|&e| e <= z);
        self.values[i - 1]
    }

    /// `sup |F − G|` over the edges.
    pub fn sup_distance<G: Fn(f64) -> f64>(&self, other: G) -> f64 {
        self.edges
            .iter()
            .zip(&self.values)
            .map(|(&e, &v)| (v - other(e)).abs())
            .fold(0.0, f64::max)
    }
}

/// Result of [`simulate_cycles`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub start: f64,
    pub alpha: f64,
    /// The path of cycles started from `τ`.
    pub cycles: Vec<CycleRecord>,
    /// Independent first cycles from `start`; empty when `start = τ`.
    pub first_cycles: Vec<CycleRecord>,
    pub occupancy: Occupancy,
}

const MAX_BINS: usize = 1 << 16;
const WAVE: usize = 1024;
const EXTRA_STREAM_BIT: u64 = 1 << 63;

/// Simulates `sim.n_cycles` cycles from `τ` (stopping early once their
/// total length exceeds the horizon) and, when `start ≠ τ`, as many
/// independent first cycles from `start`.
pub fn simulate_cycles(model: &DamModel, start: f64, sim: &SimConfig) -> Result<SimulationRun> {
    sim.validate()?;
    if !(start >= 0.0 && start.is_finite()) {
        return Err(domain(format!("start level must be finite and ≥ 0, got {start}")));
    }
    let tau = model.policy().tau();
    let sim_one = |i: usize, level: f64, stream: u64, occ: bool| {
        let mut rng = stream_rng(sim.seed, stream);
        run_cycle(model, sim, level, i, &mut rng, occ)
    };

    let mut cycles = Vec::new();
    let mut occupancy = Occupancy {
        bin_width: sim.bin_width,
        time: Vec::new(),
    };
    let mut clock = 0.0;
    let mut next = 0;
    'waves: while next < sim.n_cycles {
        let end = (next + WAVE).min(sim.n_cycles);
        let wave: Vec<(CycleRecord, Vec<(u32, f64)>)> =
            (next..end).into_par_iter().map(|i| sim_one(i, tau, i as u64, true)).collect();
        for (mut rec, sparse) in wave {
            rec.start_time = clock;
            if clock >= sim.burn_in {
                occupancy.merge_sparse(&sparse);
            }
            clock += if rec.horizon_exceeded { sim.horizon } else { rec.length() };
            cycles.push(rec);
            if clock >= sim.horizon {
                break 'waves;
            }
        }
        next = end;
    }

    let first_cycles = if start == tau {
        Vec::new()
    } else {
        (0..sim.n_cycles)
            .into_par_iter()
            .map(|i| sim_one(i, start, i as u64 | EXTRA_STREAM_BIT, false).0)
            .collect()
    };

    Ok(SimulationRun {
        start,
        alpha: model.cost().alpha,
        cycles,
        first_cycles,
        occupancy,
    })
}

/// `∫_t^{t+h} e^{−αs} ds`.
#[inline]
fn disc_integral(alpha: f64, t: f64, h: f64) -> f64 {
    if alpha == 0.0 {
        h
    } else {
        (-alpha * t).exp() * (-(-alpha * h).exp_m1()) / alpha
    }
}

/// Step sizes `dt, dt/r, dt/r²` chosen by distance to the threshold.
struct Grid {
    dt: f64,
    r: f64,
}

impl Grid {
    fn new(sim: &SimConfig) -> Self {
        Self {
            dt: sim.dt,
            r: sim.refine_factor as f64,
        }
    }

    /// `speed` is the expected change of the content per unit time.
    #[inline]
    fn step(&self, distance: f64, speed: f64) -> f64 {
        let mut h = self.dt;
        for _ in 0..2 {
            if distance <= 3.0 * speed * h {
                h /= self.r;
            } else {
                break;
            }
        }
        h
    }
}

struct Histogram {
    width: f64,
    time: Vec<f64>,
}

impl Histogram {
    fn new(width: f64) -> Self {
        Self { width, time: Vec::new() }
    }

    #[inline]
    fn bin(&self, level: f64) -> usize {
        ((level / self.width).floor().max(0.0) as usize).min(MAX_BINS - 1)
    }

    fn add_point(&mut self, level: f64, dt: f64) {
        let k = self.bin(level);
        if k >= self.time.len() {
            self.time.resize(k + 1, 0.0);
        }
        self.time[k] += dt;
    }

    /// Linear drain from `hi` to `lo` at `rate`.
    fn add_segment(&mut self, hi: f64, lo: f64, rate: f64) {
        if hi <= lo {
            return;
        }
        let (k_lo, k_hi) = (self.bin(lo), self.bin(hi));
        if k_hi >= self.time.len() {
            self.time.resize(k_hi + 1, 0.0);
        }
        if k_lo == k_hi {
            self.time[k_lo] += (hi - lo) / rate;
            return;
        }
        for k in k_lo..=k_hi {
            let a = (k as f64 * self.width).max(lo);
            let b = if k == MAX_BINS - 1 { hi } else { ((k + 1) as f64 * self.width).min(hi) };
            if b > a {
                self.time[k] += (b - a) / rate;
            }
        }
    }

    fn into_sparse(self) -> Vec<(u32, f64)> {
        self.time
            .into_iter()
            .enumerate()
            .filter(|(_, t)| *t > 0.0)
            .map(|(k, t)| (k as u32, t))
            .collect()
    }
}

/// Outcome of a simulated fill phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillPassage {
    pub time: f64,
    pub landing: f64,
}

/// Simulates the fill phase from `x` until the content reaches `λ`.
/// Returns `None` if `max_time` elapses first.
pub fn simulate_fill_passage<R: Rng + ?Sized>(
    params: &IgParams,
    x: f64,
    lambda: f64,
    sim: &SimConfig,
    max_time: f64,
    rng: &mut R,
) -> Option<FillPassage> {
    let grid = Grid::new(sim);
    fill_phase(params, &grid, x, lambda, max_time, rng, |_, _, _| {})
}

/// Simulates the release phase from `x` at rate `rate` until the content
/// hits `τ`. Returns `None` if `max_time` elapses first.
pub fn simulate_release_passage<R: Rng + ?Sized>(
    params: &IgParams,
    rate: f64,
    x: f64,
    tau: f64,
    sim: &SimConfig,
    max_time: f64,
    rng: &mut R,
) -> Option<f64> {
    let grid = Grid::new(sim);
    release_phase(params, &grid, rate, x, tau, max_time, rng, |_, _, _, _| {})
}

/// `visit(t, h, z)` is called for every step spent at level `z`.
fn fill_phase<R: Rng + ?Sized, V: FnMut(f64, f64, f64)>(
    params: &IgParams,
    grid: &Grid,
    x: f64,
    lambda: f64,
    max_time: f64,
    rng: &mut R,
    mut visit: V,
) -> Option<FillPassage> {
    let speed = 1.0 / params.mu();
    let mut z = x;
    let mut t = 0.0;
    while z < lambda {
        if t >= max_time {
            return None;
        }
        let h = grid.step(lambda - z, speed);
        visit(t, h, z);
        z += params.sample_unchecked(h, rng);
        t += h;
    }
    Some(FillPassage { time: t, landing: z })
}

/// `visit(t, s, hi, lo)` is called for every drain segment from `hi` down to
/// `lo` over `[t, t + s]`.
fn release_phase<R: Rng + ?Sized, V: FnMut(f64, f64, f64, f64)>(
    params: &IgParams,
    grid: &Grid,
    rate: f64,
    x: f64,
    tau: f64,
    max_time: f64,
    rng: &mut R,
    mut visit: V,
) -> Option<f64> {
    let mut z = x;
    let mut t = 0.0;
    while z > tau {
        if t >= max_time {
            return None;
        }
        let h = grid.step(z - tau, rate);
        let drained = z - rate * h;
        if drained <= tau {
            let s = (z - tau) / rate;
            visit(t, s, z, tau);
            return Some(t + s);
        }
        visit(t, h, z, drained);
        z = drained + params.sample_unchecked(h, rng);
        t += h;
    }
    Some(t)
}

fn run_cycle<R: Rng + ?Sized>(
    model: &DamModel,
    sim: &SimConfig,
    start: f64,
    index: usize,
    rng: &mut R,
    record_occupancy: bool,
) -> (CycleRecord, Vec<(u32, f64)>) {
    let params = model.params();
    let policy = model.policy();
    let cost = model.cost();
    let alpha = cost.alpha;
    let m = policy.rate();
    let lambda = policy.lambda();
    let tau = policy.tau();
    let grid = Grid::new(sim);
    let mut hist = Histogram::new(sim.bin_width);
    let mut disc = Components::default();
    let mut raw = Components::default();

    disc.switching += m * cost.k2;
    raw.switching += m * cost.k2;

    let fill = if start >= lambda {
        Some(FillPassage { time: 0.0, landing: start })
    } else {
        fill_phase(params, &grid, start, lambda, sim.horizon, rng, |t, h, z| {
            let g = cost.g.eval(z);
            disc.penalty_fill += g * disc_integral(alpha, t, h);
            raw.penalty_fill += g * h;
            if record_occupancy {
                hist.add_point(z, h);
            }
        })
    };
    let Some(fill) = fill else {
        return (
            exceeded(index, start, sim.horizon, f64::NAN, disc, raw),
            hist.into_sparse(),
        );
    };
    let t0 = fill.time;
    let on = (-alpha * t0).exp();
    disc.switching += m * cost.k1 * on;
    raw.switching += m * cost.k1;

    let release = release_phase(params, &grid, m, fill.landing, tau, sim.horizon - t0, rng, |t, s, hi, lo| {
        let w = disc_integral(alpha, t0 + t, s);
        let g = cost.g_star.eval(0.5 * (hi + lo));
        disc.penalty_release += g * w;
        raw.penalty_release += g * s;
        disc.reward -= cost.r * m * w;
        raw.reward -= cost.r * m * s;
        if record_occupancy {
            hist.add_segment(hi, lo, m);
        }
    });
    let Some(w_star) = release else {
        return (
            exceeded(index, start, t0, fill.landing, disc, raw),
            hist.into_sparse(),
        );
    };
    debug_assert!(w_star >= (fill.landing - tau) / m * (1.0 - 1e-12));
    let rec = CycleRecord {
        index,
        start_level: start,
        start_time: 0.0,
        w_lambda: t0,
        landing: fill.landing,
        w_tau_star: w_star,
        discounted: disc,
        undiscounted: raw,
        discount: (-alpha * (t0 + w_star)).exp(),
        horizon_exceeded: false,
    };
    (rec, hist.into_sparse())
}

fn exceeded(index: usize, start: f64, w_lambda: f64, landing: f64, disc: Components, raw: Components) -> CycleRecord {
    CycleRecord {
        index,
        start_level: start,
        start_time: 0.0,
        w_lambda,
        landing,
        w_tau_star: f64::NAN,
        discounted: disc,
        undiscounted: raw,
        discount: 0.0,
        horizon_exceeded: true,
    }
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return Estimate { value: f64::NAN, se: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Estimate { value: mean, se: f64::NAN };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        value: mean,
        se: (var / n).sqrt(),
    }
}

fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
}

impl SimulationRun {
    fn complete(&self) -> Result<&[CycleRecord]> {
        if self.cycles.iter().any(|c| c.horizon_exceeded) {
            return Err(Error::InsufficientData(format!(
                "{} of {} cycles exhausted the horizon",
                self.cycles.iter().filter(|c| c.horizon_exceeded).count(),
                self.cycles.len()
            )));
        }
        if self.cycles.len() < 2 {
            return Err(Error::InsufficientData("need at least two complete cycles".into()));
        }
        Ok(&self.cycles)
    }

    pub fn horizon_exceeded(&self) -> usize {
        self.cycles.iter().chain(&self.first_cycles).filter(|c| c.horizon_exceeded).count()
    }

    /// Mean of `e^{−αW}` over the cycles from `τ`.
    pub fn cycle_transform(&self) -> Result<Estimate> {
        let xs: Vec<f64> = self.complete()?.iter().map(|c| c.discount).collect();
        Ok(mean_se(&xs))
    }

    pub fn cycle_length(&self) -> Result<Estimate> {
        let xs: Vec<f64> = self.complete()?.iter().map(|c| c.length()).collect();
        Ok(mean_se(&xs))
    }

    /// Total discounted cost from the start level: the regenerative ratio
    /// `C_τ/(1 − E e^{−αW})` for the cycles from `τ`, prefixed by the mean
    /// first cycle when the start differs from `τ`. Standard errors by the
    /// delta method.
    pub fn discounted_total(&self) -> Result<Estimate> {
        if !(self.alpha > 0.0) {
            return Err(domain("discounted estimate needs a discount rate > 0"));
        }
        let cs = &self.cycles;
        if cs.len() < 2 {
            return Err(Error::InsufficientData("need at least two cycles".into()));
        }
        let n = cs.len() as f64;
        let a: Vec<f64> = cs.iter().map(|c| c.discounted.total()).collect();
        let b: Vec<f64> = cs.iter().map(|c| c.discount).collect();
        let (ma, mb) = (mean_se(&a), mean_se(&b));
        let denom = 1.0 - mb.value;
        let y = ma.value / denom;
        let (ga, gb) = (1.0 / denom, ma.value / (denom * denom));
        let var_y = (ga * ga * covariance(&a, &a) + gb * gb * covariance(&b, &b) + 2.0 * ga * gb * covariance(&a, &b)) / n;
        if self.first_cycles.is_empty() {
            return Ok(Estimate { value: y, se: var_y.max(0.0).sqrt() });
        }
        let fs = &self.first_cycles;
        let nf = fs.len() as f64;
        let c: Vec<f64> = fs.iter().map(|c| c.discounted.total()).collect();
        let d: Vec<f64> = fs.iter().map(|c| c.discount).collect();
        let (mc, md) = (mean_se(&c), mean_se(&d));
        let var_first = (covariance(&c, &c) + y * y * covariance(&d, &d) + 2.0 * y * covariance(&c, &d)) / nf;
        let var = var_first + md.value * md.value * var_y;
        Ok(Estimate {
            value: mc.value + md.value * y,
            se: var.max(0.0).sqrt(),
        })
    }

    /// Long-run average cost per unit time by the renewal-reward ratio.
    pub fn average_cost(&self) -> Result<Estimate> {
        let cs = self.complete()?;
        let c: Vec<f64> = cs.iter().map(|c| c.undiscounted.total()).collect();
        let w: Vec<f64> = cs.iter().map(|c| c.length()).collect();
        ratio_estimate(&c, &w)
    }

    /// Fraction of time spent releasing.
    pub fn release_fraction(&self) -> Result<Estimate> {
        let cs = self.complete()?;
        let r: Vec<f64> = cs.iter().map(|c| c.w_tau_star).collect();
        let w: Vec<f64> = cs.iter().map(|c| c.length()).collect();
        ratio_estimate(&r, &w)
    }

    /// Time-weighted distribution of the content after burn-in.
    pub fn stationary(&self) -> Result<EmpiricalCdf> {
        self.occupancy.cdf()
    }
}

/// `Σx/Σy` with a delta-method standard error.
pub fn ratio_estimate(x: &[f64], y: &[f64]) -> Result<Estimate> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::InsufficientData("need at least two paired samples".into()));
    }
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let r = sx / sy;
    let my = sy / n;
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - r * b).collect();
    let var = resid.iter().map(|e| e * e).sum::<f64>() / (n - 1.0);
    Ok(Estimate {
        value: r,
        se: (var / n).sqrt() / my,
    })
}
