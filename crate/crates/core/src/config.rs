//! Run configuration: a sectioned `key = value` text format, or the same
//! structure as a JSON object.
//!
//! ```text
//! [process]
//! mu = 2
//! sigma2 = 1
//!
//! [policy]
//! lambda = 3
//! tau = 1
//! m = 1
//!
//! [cost]
//! k1 = 1
//! g = pwl 0:0, 5:2
//! ```
//!
//! Unknown sections or keys, duplicates and malformed values are errors
//! carrying the offending line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde_json::Value;

use crate::cost::{CostParams, DamModel};
use crate::error::Error;
use crate::ig::IgParams;
use crate::optimize::{Objective, SearchSpec};
use crate::passage::Policy;
use crate::penalty::PenaltyFn;
use crate::quad::QuadConfig;
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    value: String,
    line: Option<usize>,
}

/// Section name to key to raw value, before typing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("process", &["mu", "sigma2"]),
    ("policy", &["lambda", "tau", "m", "start"]),
    ("cost", &["k1", "k2", "r", "alpha", "g", "g_star"]),
    ("quadrature", &["rel_tol", "abs_tol", "tail_mass_tol", "max_subdivisions"]),
    (
        "simulation",
        &["enabled", "dt", "refine_factor", "n_cycles", "horizon", "seed", "burn_in", "bin_width"],
    ),
    (
        "search",
        &[
            "lambda_min",
            "lambda_max",
            "tau_min",
            "tau_max",
            "grid",
            "refine_rounds",
            "objective",
            "start",
            "min_gap",
        ],
    ),
    ("output", &["dir"]),
];

impl RawConfig {
    fn insert(&mut self, section: &str, key: &str, value: String, line: Option<usize>) -> Result<(), ConfigError> {
        let Some((_, keys)) = SCHEMA.iter().find(|(s, _)| *s == section) else {
            return Err(ConfigError::at(line, format!("unknown section [{section}]")));
        };
        if !keys.contains(&key) {
            return Err(ConfigError::at(
                line,
                format!("unknown key `{key}` in [{section}]; expected one of {}", keys.join(", ")),
            ));
        }
        let sec = self.sections.entry(section.to_owned()).or_default();
        if let Some(prev) = sec.get(key) {
            let at = prev.line.map(|l| format!(" (first set on line {l})")).unwrap_or_default();
            return Err(ConfigError::at(line, format!("duplicate key `{key}` in [{section}]{at}")));
        }
        sec.insert(key.to_owned(), Entry { value, line });
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.get(key)
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.sections.values().find_map(|s| s.get(key)).and_then(|e| e.line)
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| {
                ConfigError::at(e.line, format!("[{section}] {key}: expected {what}, got {:?}", e.value))
            }),
        }
    }

    fn number(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse(section, key, "a number")
    }

    fn required(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.number(section, key)?
            .ok_or_else(|| ConfigError::at(None, format!("missing required key `{key}` in [{section}]")))
    }

    fn penalty(&self, key: &str) -> Result<PenaltyFn, ConfigError> {
        let Some(e) = self.get("cost", key) else {
            return Ok(PenaltyFn::zero());
        };
        if let Ok(c) = e.value.trim().parse::<f64>() {
            return PenaltyFn::constant(c).map_err(|err| ConfigError::at(e.line, format!("[cost] {key}: {err}")));
        }
        e.value
            .parse()
            .map_err(|err| ConfigError::at(e.line, format!("[cost] {key}: {err}")))
    }
}

/// Parses the sectioned text format into untyped entries.
pub fn parse_text(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::default();
    let mut section: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let n = Some(i + 1);
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(n, format!("unterminated section header {line:?}")))?
                .trim();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::at(n, format!("unknown section [{name}]")));
            }
            if raw.sections.contains_key(name) {
                return Err(ConfigError::at(n, format!("section [{name}] appears twice")));
            }
            raw.sections.insert(name.to_owned(), BTreeMap::new());
            section = Some(name.to_owned());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::at(n, format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::at(n, "empty key"));
        }
        if value.is_empty() {
            return Err(ConfigError::at(n, format!("empty value for `{key}`")));
        }
        let sec = section
            .as_deref()
            .ok_or_else(|| ConfigError::at(n, format!("key `{key}` appears before any section header")))?;
        raw.insert(sec, key, value.to_owned(), n)?;
    }
    Ok(raw)
}

/// Parses the JSON encoding: an object of sections, each an object of
/// scalar values.
pub fn parse_json(text: &str) -> Result<RawConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::at(Some(e.line()), e.to_string()))?;
    let Value::Object(sections) = root else {
        return Err(ConfigError::at(None, "top level must be an object of sections"));
    };
    let mut raw = RawConfig::default();
    for (name, body) in sections {
        let Value::Object(entries) = body else {
            return Err(ConfigError::at(None, format!("section `{name}` must be an object")));
        };
        if !SCHEMA.iter().any(|(s, _)| *s == name) {
            return Err(ConfigError::at(None, format!("unknown section [{name}]")));
        }
        raw.sections.entry(name.clone()).or_default();
        for (key, v) in entries {
            let value = match v {
                Value::Number(x) => x.to_string(),
                Value::String(s) => s,
                Value::Bool(b) => b.to_string(),
                _ => {
                    return Err(ConfigError::at(
                        None,
                        format!("[{name}] {key}: expected a number, string or boolean"),
                    ))
                }
            };
            raw.insert(&name, &key, value, None)?;
        }
    }
    Ok(raw)
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: IgParams,
    pub policy: Policy,
    /// Initial content for discounted figures; defaults to `τ`.
    pub start: f64,
    pub cost: CostParams,
    pub quad: QuadConfig,
    pub simulation: SimConfig,
    pub simulation_enabled: bool,
    pub search: SearchSpec,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Parses either encoding; JSON is recognized by a leading `{`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw = if text.trim_start().starts_with('{') {
            parse_json(text)?
        } else {
            parse_text(text)?
        };
        Self::from_raw(&raw)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let anchor = |e: Error| {
            let line = match &e {
                Error::InvalidParameter { name, .. } => raw.line_of(if *name == "rate" { "m" } else { name }),
                _ => None,
            };
            ConfigError::at(line, e.to_string())
        };

        let params = IgParams::new(raw.required("process", "mu")?, raw.required("process", "sigma2")?).map_err(anchor)?;
        let policy = Policy::new(
            raw.required("policy", "lambda")?,
            raw.required("policy", "tau")?,
            raw.required("policy", "m")?,
        )
        .map_err(anchor)?;
        let start = raw.number("policy", "start")?.unwrap_or(policy.tau());
        if !(start >= 0.0 && start.is_finite()) {
            return Err(ConfigError::at(
                raw.get("policy", "start").and_then(|e| e.line),
                format!("[policy] start must be finite and ≥ 0, got {start}"),
            ));
        }

        let cost = CostParams {
            k1: raw.number("cost", "k1")?.unwrap_or(0.0),
            k2: raw.number("cost", "k2")?.unwrap_or(0.0),
            r: raw.number("cost", "r")?.unwrap_or(0.0),
            alpha: raw.number("cost", "alpha")?.unwrap_or(0.0),
            g: raw.penalty("g")?,
            g_star: raw.penalty("g_star")?,
        };
        cost.validate().map_err(anchor)?;

        let qd = QuadConfig::default();
        let quad = QuadConfig {
            rel_tol: raw.number("quadrature", "rel_tol")?.unwrap_or(qd.rel_tol),
            abs_tol: raw.number("quadrature", "abs_tol")?.unwrap_or(qd.abs_tol),
            tail_mass_tol: raw.number("quadrature", "tail_mass_tol")?.unwrap_or(qd.tail_mass_tol),
            max_subdivisions: raw
                .parse("quadrature", "max_subdivisions", "a nonnegative integer")?
                .unwrap_or(qd.max_subdivisions),
        };
        quad.validate().map_err(anchor)?;

        let sd = SimConfig::default();
        let simulation = SimConfig {
            dt: raw.number("simulation", "dt")?.unwrap_or(sd.dt),
            refine_factor: raw
                .parse("simulation", "refine_factor", "a positive integer")?
                .unwrap_or(sd.refine_factor),
            n_cycles: raw.parse("simulation", "n_cycles", "a positive integer")?.unwrap_or(sd.n_cycles),
            horizon: raw.number("simulation", "horizon")?.unwrap_or(sd.horizon),
            seed: raw.parse("simulation", "seed", "an unsigned integer")?.unwrap_or(sd.seed),
            burn_in: raw.number("simulation", "burn_in")?.unwrap_or(sd.burn_in),
            bin_width: raw.number("simulation", "bin_width")?.unwrap_or(sd.bin_width),
        };
        simulation.validate().map_err(anchor)?;
        let simulation_enabled = raw.parse("simulation", "enabled", "true or false")?.unwrap_or(true);

        let lambda = policy.lambda();
        let objective = match raw.get("search", "objective") {
            None if cost.alpha > 0.0 => "discounted",
            None => "average",
            Some(e) => e.value.as_str(),
        };
        let objective = match objective {
            "average" => Objective::Average,
            "discounted" => Objective::Discounted {
                start: raw.number("search", "start")?.unwrap_or(0.0),
            },
            other => {
                return Err(ConfigError::at(
                    raw.get("search", "objective").and_then(|e| e.line),
                    format!("[search] objective: expected `discounted` or `average`, got {other:?}"),
                ))
            }
        };
        let lambda_max = raw.number("search", "lambda_max")?.unwrap_or(2.0 * lambda);
        let search = SearchSpec {
            lambda_range: [raw.number("search", "lambda_min")?.unwrap_or(lambda_max / 20.0), lambda_max],
            tau_range: [
                raw.number("search", "tau_min")?.unwrap_or(0.0),
                raw.number("search", "tau_max")?.unwrap_or(0.9 * lambda_max),
            ],
            grid: raw.parse("search", "grid", "a positive integer")?.unwrap_or(11),
            refine_rounds: raw.parse("search", "refine_rounds", "a nonnegative integer")?.unwrap_or(4),
            objective,
            min_gap: raw.number("search", "min_gap")?,
        };
        search.validate().map_err(|e| {
            let line = match &e {
                Error::InvalidParameter { name, .. } => match *name {
                    "lambda_range" => raw.line_of("lambda_max").or(raw.line_of("lambda_min")),
                    "tau_range" => raw.line_of("tau_max").or(raw.line_of("tau_min")),
                    other => raw.get("search", other).and_then(|e| e.line),
                },
                _ => None,
            };
            ConfigError::at(line, format!("[search] {e}"))
        })?;

        let output_dir = raw
            .get("output", "dir")
            .map(|e| PathBuf::from(&e.value))
            .unwrap_or_else(|| PathBuf::from("out"));

        Ok(Self {
            params,
            policy,
            start,
            cost,
            quad,
            simulation,
            simulation_enabled,
            search,
            output_dir,
        })
    }

    pub fn model(&self) -> DamModel {
        DamModel::new(self.params, self.policy, self.cost.clone(), self.quad).expect("validated at load")
    }
}
