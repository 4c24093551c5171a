//! Adaptive Gauss–Kronrod quadrature and the change-of-variable wrappers the
//! analytic modules need: square-root endpoint singularities, kinks at known
//! breakpoints, and semi-infinite ranges cut off once the tail is negligible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and refinement limits shared by every numerical integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// A semi-infinite integral stops once successive panels contribute less
    /// than this fraction of the running total.
    pub tail_mass_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            tail_mass_tol: 1e-12,
            max_subdivisions: 1000,
        }
    }
}

impl QuadConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, tail_mass_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let cfg = Self {
            rel_tol,
            abs_tol,
            tail_mass_tol,
            max_subdivisions,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("tail_mass_tol", self.tail_mass_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must lie in (0, 1), got {v}"),
                });
            }
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidParameter {
                name: "max_subdivisions",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Same limits with every tolerance multiplied by `factor` (capped below 1).
    pub fn scaled(&self, factor: f64) -> Self {
        let cap = |v: f64| (v * factor).min(0.5);
        Self {
            rel_tol: cap(self.rel_tol),
            abs_tol: cap(self.abs_tol),
            tail_mass_tol: cap(self.tail_mass_tol),
            max_subdivisions: self.max_subdivisions,
        }
    }
}

/// Result of a numerical integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl Integral {
    fn zero() -> Self {
        Self {
            value: 0.0,
            abs_err: 0.0,
            evaluations: 0,
            converged: true,
        }
    }

    fn add(&mut self, other: Integral) {
        self.value += other.value;
        self.abs_err += other.abs_err;
        self.evaluations += other.evaluations;
        self.converged &= other.converged;
    }
}

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = fc.abs() * WGK[10];
    let mut fv = [0.0; 21];
    fv[10] = fc;
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[20 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[j] - mean).abs() + (fv[20 - j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(round);
    }
    Segment { a, b, value, err }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// The integrand is never evaluated at the endpoints.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Integral {
    if a == b {
        return Integral::zero();
    }
    if b < a {
        let r = integrate(f, b, a, cfg);
        return Integral { value: -r.value, ..r };
    }
    let first = gk21(&f, a, b);
    let mut segments = vec![first];
    let mut evaluations = 21;
    let mut converged = false;
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.err).sum();
        if !total.is_finite() {
            break;
        }
        if err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            converged = true;
            break;
        }
        if segments.len() >= cfg.max_subdivisions {
            break;
        }
        let (idx, worst) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, s)| (i, *s))
            .expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval exhausted at machine precision
            break;
        }
        segments[idx] = gk21(&f, worst.a, mid);
        segments.push(gk21(&f, mid, worst.b));
        evaluations += 42;
    }
    Integral {
        value: segments.iter().map(|s| s.value).sum(),
        abs_err: segments.iter().map(|s| s.err).sum(),
        evaluations,
        converged,
    }
}

/// Integral over `[a, b]` of an integrand with an inverse-square-root
/// singularity at `a`, via `y = a + w²`.
pub fn integrate_sqrt_left<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Integral {
    if b <= a {
        return Integral::zero();
    }
    integrate(|w| 2.0 * w * f(a + w * w), 0.0, (b - a).sqrt(), cfg)
}

/// Mirror of [`integrate_sqrt_left`] for a singularity at `b`.
pub fn integrate_sqrt_right<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Integral {
    if b <= a {
        return Integral::zero();
    }
    integrate(|w| 2.0 * w * f(b - w * w), 0.0, (b - a).sqrt(), cfg)
}

/// Square-root singularities at both ends: split at the midpoint.
pub fn integrate_sqrt_both<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Integral {
    if b <= a {
        return Integral::zero();
    }
    let m = 0.5 * (a + b);
    let mut r = integrate_sqrt_left(&f, a, m, cfg);
    r.add(integrate_sqrt_right(&f, m, b, cfg));
    r
}

/// Sum of adaptive integrals between consecutive sorted breakpoints.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], cfg: &QuadConfig) -> Integral {
    let mut total = Integral::zero();
    for w in points.windows(2) {
        if w[1] > w[0] {
            total.add(integrate(&f, w[0], w[1], cfg));
        }
    }
    total
}

/// How a semi-infinite integral is laid out in panels.
#[derive(Debug, Clone, Copy)]
pub struct TailPlan {
    /// Width of the first panel; later panels double.
    pub scale: f64,
    /// The integral is never cut off before this abscissa.
    pub reach: f64,
    /// Apply the `y = a + w²` substitution on the first panel.
    pub sqrt_start: bool,
}

const MAX_TAIL_PANELS: usize = 200;

/// Integral of `f` over `[a, ∞)`, accumulated panel by panel until two
/// successive panels fall below `tail_mass_tol` relative to the running total
/// (and `abs_tol` absolutely) past `plan.reach`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, plan: TailPlan, cfg: &QuadConfig) -> Integral {
    let scale = if plan.scale > 0.0 && plan.scale.is_finite() { plan.scale } else { 1.0 };
    let mut total = Integral::zero();
    let mut lo = a;
    let mut width = scale;
    let mut quiet = 0;
    for panel in 0..MAX_TAIL_PANELS {
        let hi = lo + width;
        let piece = if panel == 0 && plan.sqrt_start {
            integrate_sqrt_left(&f, lo, hi, cfg)
        } else {
            integrate(&f, lo, hi, cfg)
        };
        total.add(piece);
        let small = piece.value.abs() <= (cfg.tail_mass_tol * total.value.abs()).max(cfg.abs_tol);
        if hi >= plan.reach && small {
            quiet += 1;
            if quiet >= 2 {
                return total;
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
        if !total.value.is_finite() {
            break;
        }
    }
    total.converged = false;
    total
}
