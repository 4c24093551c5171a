//! Analytic laws against simulated samples.

mod common;

use std::sync::OnceLock;

use common::*;
use igdam::cost::{CostParams, DamModel};
use igdam::ig::{stream_rng, IgParams};
use igdam::overshoot::{JointReading, OvershootLaw};
use igdam::passage::{cdf_w_lambda, lt_w_tau_star, mean_var_w_tau_star, mean_w_lambda, Policy};
use igdam::penalty::PenaltyFn;
use igdam::quad::QuadConfig;
use igdam::sim::{mean_se, simulate_cycles, simulate_fill_passage, simulate_release_passage, SimConfig, SimulationRun};

fn p(mu: f64, s2: f64) -> IgParams {
    IgParams::new(mu, s2).unwrap()
}

fn fine() -> SimConfig {
    SimConfig {
        dt: 1e-3,
        refine_factor: 10,
        ..SimConfig::default()
    }
}

fn within(est: f64, se: f64, want: f64, k: f64) -> bool {
    (est - want).abs() <= k * se
}

fn model(cost: CostParams) -> DamModel {
    DamModel::new(p(2.0, 1.0), Policy::new(3.0, 1.0, 1.0).unwrap(), cost, QuadConfig::default()).unwrap()
}

fn benchmark_cost(alpha: f64) -> CostParams {
    CostParams {
        k1: 1.0,
        k2: 1.0,
        r: 0.5,
        alpha,
        g: PenaltyFn::Constant(1.0),
        g_star: PenaltyFn::Constant(1.0),
    }
}

/// Cycles from `τ` on the benchmark dam: 10⁵ time units after a burn-in of
/// 10³.
fn benchmark_run() -> &'static SimulationRun {
    static RUN: OnceLock<SimulationRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let sim = SimConfig {
            n_cycles: 20_000,
            horizon: 1.01e5,
            burn_in: 1e3,
            seed: 99,
            bin_width: 0.02,
            ..fine()
        };
        simulate_cycles(&model(benchmark_cost(0.2)), 1.0, &sim).unwrap()
    })
}

#[test]
fn increment_moments() {
    let n = 1_000_000;
    let q = p(1.0, 1.0);
    let mut rng = stream_rng(1, 0);
    let xs: Vec<f64> = (0..n).map(|_| q.sample_increment(1.0, &mut rng).unwrap()).collect();
    let m = moments(&xs);
    // sd of I_1 is σ/μ^{3/2} = 1
    assert!((m.mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{}", m.mean);

    let q = p(2.0, 0.5);
    let mut rng = stream_rng(1, 1);
    let xs: Vec<f64> = (0..n).map(|_| q.sample_increment(4.0, &mut rng).unwrap()).collect();
    let m = moments(&xs);
    assert!(within(m.var, m.se_var, 0.25, 3.0), "{} ± {}", m.var, m.se_var);
    assert!(within(m.mean, m.se_mean, 2.0, 3.0));
}

#[test]
fn laplace_transform_of_increments() {
    let q = p(1.0, 1.0);
    let (a, t) = (0.7, 2.0);
    let mut rng = stream_rng(3, 0);
    let xs: Vec<f64> = (0..1_000_000).map(|_| (-a * q.sample_increment(t, &mut rng).unwrap()).exp()).collect();
    let m = moments(&xs);
    let want = (-t * q.laplace_exponent(a).unwrap()).exp();
    assert!(within(m.mean, m.se_mean, want, 3.0), "{} ± {} vs {want}", m.mean, m.se_mean);
}

fn fill_passages(mu: f64, lambda: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let q = p(mu, 1.0);
    let sim = fine();
    (0..n)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let f = simulate_fill_passage(&q, 0.0, lambda, &sim, 1e6, &mut rng).unwrap();
            (f.time, f.landing)
        })
        .unzip()
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    (p0, p1) = (p1, ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k);
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Nodes and weights for `∫_lo^hi` (`hi` may be infinite; `sqrt_lo` adds a
/// `lo + w²` substitution).
fn rule(lo: f64, hi: f64, sqrt_lo: bool, gl: &[(f64, f64)]) -> Vec<(f64, f64)> {
    gl.iter()
        .map(|&(x, w)| {
            let u = 0.5 * (x + 1.0);
            let wu = 0.5 * w;
            if hi.is_infinite() {
                // lo + s/(1 − s) with s = u²: integrable at both ends
                let s = u * u;
                let y = lo + s / (1.0 - s);
                (y, wu * 2.0 * u / (1.0 - s).powi(2))
            } else if sqrt_lo {
                let r = (hi - lo).sqrt();
                let v = u * r;
                (lo + v * v, wu * r * 2.0 * v)
            } else {
                (lo + u * (hi - lo), wu * (hi - lo))
            }
        })
        .collect()
}

fn quantiles(xs: &[f64], k: usize) -> Vec<f64> {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    (1..k).map(|i| s[i * s.len() / k]).collect()
}

#[test]
fn fill_passage_above_one() {
    let (mu, lambda, n) = (1.0, 1.0, 100_000);
    let q = p(mu, 1.0);
    let cfg = QuadConfig::default();
    let (times, landings) = fill_passages(mu, lambda, n, 21);

    let mut ts = times.clone();
    let ks = ks_distance(&mut ts, |t| cdf_w_lambda(&q, 0.0, lambda, t).unwrap());
    assert!(ks < 1.63 / (n as f64).sqrt(), "passage-time KS {ks}");

    let law = OvershootLaw::new(q, lambda).unwrap();
    let m = moments(&landings);
    assert!(within(m.mean, m.se_mean, law.mean(), 3.0), "{} ± {} vs {}", m.mean, m.se_mean, law.mean());

    // chi-square of the joint law on a 10 × 10 grid of marginal deciles
    let tq = quantiles(&times, 10);
    let zq = quantiles(&landings, 10);
    let t_edges: Vec<f64> = std::iter::once(0.0).chain(tq.iter().copied()).chain([f64::INFINITY]).collect();
    let z_edges: Vec<f64> = std::iter::once(lambda).chain(zq.iter().copied()).chain([f64::INFINITY]).collect();
    let gl = gauss_legendre(24);
    let loose = QuadConfig { rel_tol: 1e-8, ..cfg };
    let mut counts = [[0usize; 10]; 10];
    for (&t, &z) in times.iter().zip(&landings) {
        let i = t_edges.partition_point(|&e| e <= t) - 1;
        let j = z_edges.partition_point(|&e| e <= z) - 1;
        counts[i.min(9)][j.min(9)] += 1;
    }
    let mut chi2 = 0.0;
    let mut total_prob = 0.0;
    for i in 0..10 {
        let tr = rule(t_edges[i], t_edges[i + 1], false, &gl);
        for j in 0..10 {
            let zr = rule(z_edges[j], z_edges[j + 1], j == 0, &gl);
            let mut prob = 0.0;
            for &(t, wt) in &tr {
                if t <= 0.0 {
                    continue;
                }
                for &(z, wz) in &zr {
                    if z > lambda {
                        prob += wt * wz * law.joint_density(t, z, JointReading::TransitionAtLevel, &loose).unwrap();
                    }
                }
            }
            total_prob += prob;
            let expected = prob * n as f64;
            chi2 += (counts[i][j] as f64 - expected).powi(2) / expected;
        }
    }
    assert!((total_prob - 1.0).abs() < 1e-3, "joint mass {total_prob}");
    // 99 degrees of freedom, upper 1% point
    assert!(chi2 < 134.64, "chi-square {chi2}");
}

#[test]
fn fill_passage_above_two() {
    let (mu, lambda) = (1.0, 2.0);
    let (times, _) = fill_passages(mu, lambda, 100_000, 22);
    let m = moments(&times);
    let want = mean_w_lambda(&p(mu, 1.0), 0.0, lambda).unwrap();
    assert!(within(m.mean, m.se_mean, want, 3.0), "{} ± {} vs {want}", m.mean, m.se_mean);
}

#[test]
fn release_phase_moments_and_transform() {
    let (mu, m, x, tau, alpha) = (2.0, 1.0, 1.0, 0.0, 0.3);
    let q = p(mu, 1.0);
    let sim = fine();
    let ws: Vec<f64> = (0..100_000)
        .map(|i| {
            let mut rng = stream_rng(23, i);
            let w = simulate_release_passage(&q, m, x, tau, &sim, 1e6, &mut rng).unwrap();
            assert!(w >= (x - tau) / m);
            w
        })
        .collect();
    let mom = moments(&ws);
    let lib = mean_var_w_tau_star(&q, m, x, tau).unwrap();
    assert_eq!((lib.mean.finite(), lib.variance.finite()), (Some(2.0), Some(1.0)));
    assert!(within(mom.mean, mom.se_mean, 2.0, 3.0), "{} ± {}", mom.mean, mom.se_mean);
    assert!(within(mom.var, mom.se_var, 1.0, 3.0), "{} ± {}", mom.var, mom.se_var);
    let disc: Vec<f64> = ws.iter().map(|w| (-alpha * w).exp()).collect();
    let d = moments(&disc);
    let want = lt_w_tau_star(&q, m, x, tau, alpha).unwrap();
    assert!(within(d.mean, d.se_mean, want, 3.0), "{} ± {} vs {want}", d.mean, d.se_mean);
}

#[test]
fn benchmark_cycle_quantities() {
    let run = benchmark_run();
    let m = model(benchmark_cost(0.2));
    let tau = 1.0;

    let first: Vec<f64> = run.cycles.iter().map(|c| c.discounted.total()).collect();
    let c = mean_se(&first);
    let want = m.discounted_cycle_cost(tau).unwrap().total();
    assert!(c.covers(want, 3.0), "cycle cost {c:?} vs {want}");

    let t = run.cycle_transform().unwrap();
    let want = m.cycle_transform(tau).unwrap();
    assert!(t.covers(want, 3.0), "cycle transform {t:?} vs {want}");

    let l = run.cycle_length().unwrap();
    let want = m.mean_cycle_length().finite().unwrap();
    assert!(l.covers(want, 3.0), "cycle length {l:?} vs {want}");
    let fill: Vec<f64> = run.cycles.iter().map(|c| c.w_lambda).collect();
    let f = mean_se(&fill);
    let want_fill = mean_w_lambda(m.params(), tau, 3.0).unwrap();
    assert!(f.covers(want_fill, 3.0), "fill {f:?} vs {want_fill}");
    assert!((want - 2.0 * mean_w_lambda(m.params(), 0.0, 2.0).unwrap()).abs() < 1e-12);

    let d = run.discounted_total().unwrap();
    let want = m.discounted_total_cost(tau).unwrap().total();
    assert!(d.covers(want, 3.0), "discounted total {d:?} vs {want}");

    let a = run.average_cost().unwrap();
    let want = m.average_cost().unwrap().rate.finite().unwrap();
    assert!((a.value / want - 1.0).abs() < 0.02, "average {a:?} vs {want}");
    assert!(a.covers(want, 3.0), "average {a:?} vs {want}");

    for c in &run.cycles {
        assert!(c.landing >= 3.0);
        assert!(c.w_tau_star >= (c.landing - tau) * (1.0 - 1e-12));
    }
}

#[test]
fn release_fraction_matches_reward_rate() {
    let run = benchmark_run();
    let reward_only = CostParams { r: 1.0, ..CostParams::zero(0.0) };
    let avg = model(reward_only).average_cost().unwrap();
    let frac = -avg.components.unwrap().reward / 1.0;
    let est = run.release_fraction().unwrap();
    assert!(est.covers(frac, 3.0), "{est:?} vs {frac}");
    assert!((frac - 0.5).abs() < 1e-12);
}

#[test]
fn reward_only_first_cycle() {
    let cost = CostParams { r: 1.0, ..CostParams::zero(0.2) };
    let m = model(cost);
    let sim = SimConfig { n_cycles: 10_000, seed: 5, ..fine() };
    let run = simulate_cycles(&m, 0.0, &sim).unwrap();
    let xs: Vec<f64> = run.first_cycles.iter().map(|c| c.discounted.total()).collect();
    let est = mean_se(&xs);
    let want = m.discounted_cycle_cost(0.0).unwrap().total();
    assert!(want < 0.0);
    assert!(est.covers(want, 3.0), "{est:?} vs {want}");
}

#[test]
fn heavy_discount_is_first_cycle() {
    let m = model(benchmark_cost(50.0));
    let sim = SimConfig { n_cycles: 4_000, seed: 6, ..fine() };
    let run = simulate_cycles(&m, 0.0, &sim).unwrap();
    let total = run.discounted_total().unwrap().value;
    let first = mean_se(&run.first_cycles.iter().map(|c| c.discounted.total()).collect::<Vec<_>>()).value;
    assert!((total / first - 1.0).abs() < 0.01, "{total} vs {first}");
    let exact = m.discounted_total_cost(0.0).unwrap().total();
    let exact_first = m.discounted_cycle_cost(0.0).unwrap().total();
    assert!((exact / exact_first - 1.0).abs() < 0.01);
}

#[test]
fn stationary_occupancy() {
    let run = benchmark_run();
    let m = model(benchmark_cost(0.2));
    let emp = run.stationary().unwrap();
    assert_eq!(emp.eval(0.999), 0.0);
    let mut sup: f64 = 0.0;
    for (&z, &v) in emp.edges.iter().zip(&emp.values).step_by(5) {
        if (1.0..=8.0).contains(&z) {
            sup = sup.max((m.stationary_cdf(z).unwrap() - v).abs());
        }
    }
    assert!(sup < 0.02, "{sup}");
}

#[test]
fn longer_runs_track_the_stationary_law_better() {
    let m = model(CostParams::zero(0.2));
    let grid: Vec<f64> = (0..36).map(|i| 1.0 + 0.2 * i as f64).collect();
    let exact: Vec<f64> = grid.iter().map(|&z| m.stationary_cdf(z).unwrap()).collect();
    let sup = |horizon: f64, seed: u64| {
        let sim = SimConfig {
            n_cycles: 1_000_000,
            horizon,
            burn_in: 0.0,
            seed,
            dt: 2e-3,
            ..fine()
        };
        let emp = simulate_cycles(&m, 1.0, &sim).unwrap().stationary().unwrap();
        grid.iter().zip(&exact).map(|(&z, &f)| (emp.eval(z) - f).abs()).fold(0.0, f64::max)
    };
    let seeds = 1..=5u64;
    let short: f64 = seeds.clone().map(|s| sup(1500.0, s)).sum::<f64>() / 5.0;
    let long: f64 = seeds.map(|s| sup(3000.0, s + 100)).sum::<f64>() / 5.0;
    assert!(long < short, "mean sup: {short} at T, {long} at 2T");
}

/// Fill passages on a path sampled at step `h/2`, read at `h` and at `h/2`.
/// Both readings share the same path, so the difference isolates the
/// discretization of the crossing.
fn coupled_fill(q: &IgParams, lambda: f64, h: f64, seed: u64, n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let mut coarse = Vec::with_capacity(n);
    let mut finer = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        let (mut z, mut t) = (0.0, 0.0);
        let mut fine_done = None;
        loop {
            let a = q.sample_increment(0.5 * h, &mut rng).unwrap();
            let b = q.sample_increment(0.5 * h, &mut rng).unwrap();
            if fine_done.is_none() && z + a >= lambda {
                fine_done = Some(t + 0.5 * h);
            }
            z += a + b;
            t += h;
            if z >= lambda {
                let tf = fine_done.unwrap_or(t);
                coarse.push((-alpha * t).exp());
                finer.push((-alpha * tf).exp());
                break;
            }
        }
    }
    (coarse, finer)
}

#[test]
fn halving_the_step_moves_means_by_less_than_one_se() {
    let q = p(2.0, 1.0);
    let alpha = 0.2;
    let (coarse, finer) = coupled_fill(&q, 2.0, 1e-3, 31, 20_000, alpha);
    let (c, f) = (moments(&coarse), moments(&finer));
    assert!((c.mean - f.mean).abs() < f.se_mean, "{} vs {} (se {})", c.mean, f.mean, f.se_mean);

    // the library simulator at both steps, independent streams: the gap is
    // pure noise at the 3 SE level
    let m = model(benchmark_cost(alpha));
    let run = |dt: f64| {
        let sim = SimConfig { dt, n_cycles: 3_000, seed: 8, ..fine() };
        simulate_cycles(&m, 1.0, &sim).unwrap()
    };
    let (a, b) = (run(1e-3), run(5e-4));
    for (x, y) in [
        (a.cycle_length().unwrap(), b.cycle_length().unwrap()),
        (a.cycle_transform().unwrap(), b.cycle_transform().unwrap()),
        (a.average_cost().unwrap(), b.average_cost().unwrap()),
    ] {
        let se = (x.se * x.se + y.se * y.se).sqrt();
        assert!((x.value - y.value).abs() < 3.0 * se, "{x:?} vs {y:?}");
    }
}
