//! File formats written by the command-line tool.
//!
//! Every CSV starts with a `# igdam <table> v<N>` line followed by a fixed
//! header row. Floats use the shortest representation that round-trips.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use serde::Serialize;

use crate::cost::PolicyEvaluation;
use crate::optimize::SearchResult;
use crate::passage::Extended;
use crate::sim::{CycleRecord, SimulationRun};

pub const SCHEMA_VERSION: u32 = 1;

fn header(table: &str, columns: &[&str]) -> String {
    format!("# igdam {table} v{SCHEMA_VERSION}\n{}\n", columns.join(","))
}

fn ext(v: Extended) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn evaluation_csv(e: &PolicyEvaluation) -> String {
    let mut s = header("evaluation", &["quantity", "discounted", "average"]);
    let d = e.discounted_components;
    let a = e.average_components;
    let rows: [(&str, fn(&crate::cost::Components) -> f64); 4] = [
        ("switching", |c| c.switching),
        ("reward", |c| c.reward),
        ("penalty_fill", |c| c.penalty_fill),
        ("penalty_release", |c| c.penalty_release),
    ];
    for (name, f) in rows {
        let avg = match (e.average_rate, a) {
            (Extended::Infinite, _) => "infinite".to_string(),
            (_, c) => opt(c.as_ref().map(f)),
        };
        writeln!(s, "{name},{},{avg}", opt(d.as_ref().map(f))).unwrap();
    }
    writeln!(s, "total,{},{}", opt(e.discounted_total), ext(e.average_rate)).unwrap();
    writeln!(s, "cycle_mean,,{}", ext(e.cycle_mean)).unwrap();
    s
}

fn cycle_row(s: &mut String, path: &str, c: &CycleRecord) {
    writeln!(
        s,
        "{path},{},{},{},{},{},{},{},{},{}",
        c.index,
        c.start_level,
        c.start_time,
        c.w_lambda,
        c.landing,
        c.w_tau_star,
        c.discounted.total(),
        c.undiscounted.total(),
        c.horizon_exceeded
    )
    .unwrap();
}

/// One row per cycle; `path` is `tau` for the renewal path and `start` for
/// the independent first cycles.
pub fn cycles_csv(run: &SimulationRun) -> String {
    let mut s = header(
        "cycles",
        &[
            "path",
            "index",
            "start_level",
            "start_time",
            "w_lambda",
            "landing",
            "w_tau_star",
            "discounted_cost",
            "undiscounted_cost",
            "horizon_exceeded",
        ],
    );
    for c in &run.first_cycles {
        cycle_row(&mut s, "start", c);
    }
    for c in &run.cycles {
        cycle_row(&mut s, "tau", c);
    }
    s
}

pub fn occupancy_csv(run: &SimulationRun) -> String {
    let mut s = header("occupancy", &["bin_lo", "bin_hi", "time", "cdf"]);
    let occ = &run.occupancy;
    let total = occ.total();
    let mut acc = 0.0;
    for (k, t) in occ.time.iter().enumerate() {
        acc += t;
        let w = occ.bin_width;
        writeln!(s, "{},{},{},{}", k as f64 * w, (k + 1) as f64 * w, t, acc / total).unwrap();
    }
    s
}

pub fn trace_csv(res: &SearchResult) -> String {
    let mut s = header("trace", &["round", "lambda", "tau", "objective"]);
    for p in &res.trace {
        let v = if p.value.is_infinite() { "infinite".to_string() } else { p.value.to_string() };
        writeln!(s, "{},{},{},{v}", p.round, p.lambda, p.tau).unwrap();
    }
    s
}

/// One row of the stationary table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryRow {
    pub z: f64,
    pub analytic: f64,
    pub empirical: Option<f64>,
}

pub fn stationary_csv(rows: &[StationaryRow]) -> String {
    let mut s = header("stationary", &["z", "F_analytic", "F_empirical", "gap"]);
    for r in rows {
        let gap = r.empirical.map(|e| (e - r.analytic).abs());
        writeln!(s, "{},{},{},{}", r.z, r.analytic, opt(r.empirical), opt(gap)).unwrap();
    }
    s
}
