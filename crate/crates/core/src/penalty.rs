//! Penalty-rate functions from a closed family (constant or piecewise linear).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A bounded penalty rate. Piecewise-linear functions interpolate between
/// sorted knots and hold their end values outside the knot range, so the
/// bound is the largest absolute knot value.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyFn {
    Constant(f64),
    PiecewiseLinear { xs: Vec<f64>, ys: Vec<f64> },
}

/// An affine piece `intercept + slope·y` valid on `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub intercept: f64,
    pub slope: f64,
}

impl Piece {
    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        self.intercept + self.slope * y
    }
}

impl PenaltyFn {
    pub fn zero() -> Self {
        PenaltyFn::Constant(0.0)
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(invalid(format!("constant must be finite, got {c}")));
        }
        Ok(PenaltyFn::Constant(c))
    }

    pub fn piecewise_linear(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.is_empty() {
            return Err(invalid("piecewise-linear function needs at least one knot".into()));
        }
        for (i, &(x, y)) in knots.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(invalid(format!("knot {i} is not finite: ({x}, {y})")));
            }
            if i > 0 && x <= knots[i - 1].0 {
                return Err(invalid(format!("knot abscissae must strictly increase (knot {i})")));
            }
        }
        if knots.len() == 1 {
            return Ok(PenaltyFn::Constant(knots[0].1));
        }
        Ok(PenaltyFn::PiecewiseLinear {
            xs: knots.iter().map(|k| k.0).collect(),
            ys: knots.iter().map(|k| k.1).collect(),
        })
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            PenaltyFn::Constant(c) => *c,
            PenaltyFn::PiecewiseLinear { xs, ys } => {
                let n = xs.len();
                if y <= xs[0] {
                    return ys[0];
                }
                if y >= xs[n - 1] {
                    return ys[n - 1];
                }
                let i = xs.partition_point(|&k| k <= y);
                let (x0, x1) = (xs[i - 1], xs[i]);
                let w = (y - x0) / (x1 - x0);
                ys[i - 1] + w * (ys[i] - ys[i - 1])
            }
        }
    }

    /// `sup |g|`.
    pub fn bound(&self) -> f64 {
        match self {
            PenaltyFn::Constant(c) => c.abs(),
            PenaltyFn::PiecewiseLinear { ys, .. } => ys.iter().fold(0.0, |m, y| m.max(y.abs())),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bound() == 0.0
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            PenaltyFn::Constant(c) => *c >= 0.0,
            PenaltyFn::PiecewiseLinear { ys, .. } => ys.iter().all(|&y| y >= 0.0),
        }
    }

    /// `g + c`.
    pub fn shifted(&self, c: f64) -> Self {
        match self {
            PenaltyFn::Constant(v) => PenaltyFn::Constant(v + c),
            PenaltyFn::PiecewiseLinear { xs, ys } => PenaltyFn::PiecewiseLinear {
                xs: xs.clone(),
                ys: ys.iter().map(|y| y + c).collect(),
            },
        }
    }

    /// Knot abscissae strictly inside `(lo, hi)`.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            PenaltyFn::Constant(_) => Vec::new(),
            PenaltyFn::PiecewiseLinear { xs, .. } => xs.iter().copied().filter(|&x| x > lo && x < hi).collect(),
        }
    }

    /// Affine pieces covering `[lo, hi)`; `hi` may be `+∞`.
    pub fn pieces(&self, lo: f64, hi: f64) -> Vec<Piece> {
        if !(hi > lo) {
            return Vec::new();
        }
        let mut cuts = vec![lo];
        cuts.extend(self.breakpoints(lo, hi));
        cuts.push(hi);
        cuts.windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let (intercept, slope) = self.affine_on(a, b);
                Piece { lo: a, hi: b, intercept, slope }
            })
            .collect()
    }

    fn affine_on(&self, a: f64, b: f64) -> (f64, f64) {
        match self {
            PenaltyFn::Constant(c) => (*c, 0.0),
            PenaltyFn::PiecewiseLinear { xs, ys } => {
                let n = xs.len();
                if b <= xs[0] {
                    return (ys[0], 0.0);
                }
                if a >= xs[n - 1] {
                    return (ys[n - 1], 0.0);
                }
                let i = xs.partition_point(|&k| k <= a).max(1);
                let slope = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
                (ys[i - 1] - slope * xs[i - 1], slope)
            }
        }
    }
}

fn invalid(reason: String) -> Error {
    Error::InvalidParameter { name: "penalty", reason }
}

impl fmt::Display for PenaltyFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltyFn::Constant(c) => write!(f, "constant {c:?}"),
            PenaltyFn::PiecewiseLinear { xs, ys } => {
                f.write_str("pwl ")?;
                for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x:?}:{y:?}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `constant <c>` or `pwl <x>:<y>, <x>:<y>, ...`.
impl FromStr for PenaltyFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
        let rest = rest.trim();
        match head {
            "constant" => {
                let c: f64 = rest.parse().map_err(|_| invalid(format!("cannot parse constant value {rest:?}")))?;
                PenaltyFn::constant(c)
            }
            "pwl" => {
                let mut knots = Vec::new();
                for part in rest.split(',') {
                    let part = part.trim();
                    let (x, y) = part
                        .split_once(':')
                        .ok_or_else(|| invalid(format!("knot {part:?} is not of the form x:y")))?;
                    let x: f64 = x.trim().parse().map_err(|_| invalid(format!("bad knot abscissa {x:?}")))?;
                    let y: f64 = y.trim().parse().map_err(|_| invalid(format!("bad knot value {y:?}")))?;
                    knots.push((x, y));
                }
                PenaltyFn::piecewise_linear(&knots)
            }
            _ => Err(invalid(format!("unknown penalty kind {head:?}; expected `constant` or `pwl`"))),
        }
    }
}

impl Serialize for PenaltyFn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PenaltyFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
