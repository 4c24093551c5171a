use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use igdam::config::RunConfig;
use igdam::error::Error;
use igdam::optimize::optimize;
use igdam::output::{self, write_atomic, StationaryRow};
use igdam::sim::{simulate_cycles, Estimate, SimulationRun};
use igdam::validate;

#[derive(Parser)]
#[command(name = "igdam", version, about = "Two-threshold dam release policies under inverse Gaussian input")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (sectioned text or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for simulation and search.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Discounted and average cost of the configured policy.
    Evaluate(Common),
    /// Monte Carlo estimates of the configured policy.
    Simulate(Common),
    /// Run the identity suite.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Use a deliberately wrong resolvent density (negative control).
        #[arg(long, hide = true)]
        flip_resolvent_sign: bool,
    },
    /// Search for the best thresholds.
    Optimize(Common),
    /// Stationary distribution of the content.
    Stationary(Common),
}

enum Failure {
    Config(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(format!("i/o error: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Failure> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("cannot set up {n} threads: {e}")))?;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn write(dir: &Path, name: &str, contents: &str) -> Outcome {
    let path = dir.join(name);
    write_atomic(&path, contents.as_bytes())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn evaluate(common: &Common) -> Outcome {
    let (cfg, out) = load(common)?;
    let eval = cfg.model().evaluate(cfg.start)?;
    write(&out, "evaluation.json", &output::to_json(&eval))?;
    write(&out, "evaluation.csv", &output::evaluation_csv(&eval))?;
    match eval.discounted_total {
        Some(v) => println!("discounted total cost from {}: {v}", cfg.start),
        None => println!("discounted total cost: not defined for α = 0"),
    }
    println!("average cost rate: {}", eval.average_rate);
    Ok(())
}

fn estimate_json(est: Result<Estimate, Error>, analytic: Option<f64>) -> serde_json::Value {
    match est {
        Ok(e) => json!({ "estimate": e.value, "se": e.se, "analytic": analytic }),
        Err(err) => json!({ "error": err.to_string(), "analytic": analytic }),
    }
}

fn estimates(cfg: &RunConfig, run: &SimulationRun) -> serde_json::Value {
    let model = cfg.model();
    let alpha = cfg.cost.alpha;
    let discounted = if alpha > 0.0 {
        estimate_json(
            run.discounted_total(),
            model.discounted_total_cost(cfg.start).ok().map(|c| c.total()),
        )
    } else {
        json!({ "error": "needs α > 0" })
    };
    let transform = if alpha > 0.0 {
        estimate_json(run.cycle_transform(), model.cycle_transform(cfg.policy.tau()).ok())
    } else {
        json!({ "error": "needs α > 0" })
    };
    let avg = model.average_cost().ok().and_then(|a| a.rate.finite());
    json!({
        "seed": cfg.simulation.seed,
        "cycles": run.cycles.len(),
        "first_cycles": run.first_cycles.len(),
        "horizon_exceeded": run.horizon_exceeded(),
        "discounted_total": discounted,
        "average_cost": estimate_json(run.average_cost(), avg),
        "cycle_length": estimate_json(run.cycle_length(), model.mean_cycle_length().finite()),
        "cycle_transform": transform,
    })
}

fn simulate(common: &Common) -> Outcome {
    let (cfg, out) = load(common)?;
    let run = simulate_cycles(&cfg.model(), cfg.start, &cfg.simulation)?;
    let est = estimates(&cfg, &run);
    write(&out, "cycles.csv", &output::cycles_csv(&run))?;
    write(&out, "estimates.json", &output::to_json(&est))?;
    write(&out, "occupancy.csv", &output::occupancy_csv(&run))?;
    if run.horizon_exceeded() > 0 {
        eprintln!("warning: {} cycles exhausted the horizon", run.horizon_exceeded());
    }
    println!("{}", serde_json::to_string_pretty(&est).expect("json"));
    Ok(())
}

fn run_validate(common: &Common, flip: bool) -> Outcome {
    let (cfg, _) = load(common)?;
    let report = validate::run(&cfg.model(), cfg.start, flip);
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("{} identities failed", report.failures())))
    }
}

fn run_optimize(common: &Common) -> Outcome {
    let (cfg, out) = load(common)?;
    match optimize(&cfg.model(), &cfg.search) {
        Ok(res) => {
            write(&out, "trace.csv", &output::trace_csv(&res))?;
            let best = json!({
                "status": "ok",
                "objective": cfg.search.objective,
                "lambda": res.lambda,
                "tau": res.tau,
                "value": res.value,
                "resolution": res.resolution,
                "evaluations": res.trace.len(),
            });
            write(&out, "best.json", &output::to_json(&best))?;
            println!("best λ = {}, τ = {}, objective = {}", res.lambda, res.tau, res.value);
            Ok(())
        }
        Err(Error::Infeasible(why)) => {
            let best = json!({ "status": "infeasible", "reason": why });
            write(&out, "best.json", &output::to_json(&best))?;
            println!("infeasible: {why}");
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

fn stationary(common: &Common) -> Outcome {
    let (cfg, out) = load(common)?;
    let model = cfg.model();
    let tau = cfg.policy.tau();
    if !cfg.policy.drains(&cfg.params) {
        println!("infeasible: the content has no stationary law when μM ≤ 1");
        return Ok(());
    }
    let empirical = if cfg.simulation_enabled {
        Some(simulate_cycles(&model, tau, &cfg.simulation)?.stationary()?)
    } else {
        None
    };
    let w = cfg.simulation.bin_width;
    let mut top = cfg.policy.lambda();
    while model.stationary_cdf(top)? < 1.0 - 1e-4 {
        top += cfg.policy.lambda() - tau;
    }
    let first = (tau / w).floor() as usize + 1;
    let last = (top / w).ceil() as usize;
    let stride = ((last - first) / 120).max(1);
    let mut zs = vec![tau];
    zs.extend((first..=last).step_by(stride).map(|k| k as f64 * w));
    let analytic: Vec<f64> = zs
        .par_iter()
        .map(|&z| model.stationary_cdf(z))
        .collect::<Result<_, Error>>()?;
    let rows: Vec<StationaryRow> = zs
        .iter()
        .zip(analytic)
        .map(|(&z, analytic)| StationaryRow {
            z,
            analytic,
            empirical: empirical.as_ref().map(|f| f.eval(z)),
        })
        .collect();
    let sup = rows
        .iter()
        .filter_map(|r| r.empirical.map(|e| (e - r.analytic).abs()))
        .fold(0.0, f64::max);
    write(&out, "stationary.csv", &output::stationary_csv(&rows))?;
    if empirical.is_some() {
        println!("sup |F_analytic − F_empirical| = {sup}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Evaluate(c) => evaluate(c),
        Command::Simulate(c) => simulate(c),
        Command::Validate {
            common,
            flip_resolvent_sign,
        } => run_validate(common, *flip_resolvent_sign),
        Command::Optimize(c) => run_optimize(c),
        Command::Stationary(c) => stationary(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
