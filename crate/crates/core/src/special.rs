//! Normal density and the error-function family.
//!
//! `erf`/`erfc` delegate to `libm`. The scaled complement
//! `erfcx(x) = exp(x²)·erfc(x)` is assembled here: the product form with an
//! exactly split square for moderate arguments, a Laplace continued fraction
//! in the tail, and the reflection `2·exp(x²) − erfcx(−x)` for negative `x`.

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Beyond this point `exp(x²)` overflows.
const ERFCX_NEG_LIMIT: f64 = -26.64;
/// Switch from the product form to the continued fraction.
const ERFCX_CF_START: f64 = 12.0;
const ERFCX_CF_TERMS: usize = 60;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `exp(x²)` with the square split into a rounded head and its exact error.
#[inline]
fn exp_square(x: f64) -> f64 {
    let hi = x * x;
    let lo = x.mul_add(x, -hi);
    hi.exp() * (1.0 + lo)
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// Finite for `x > -26.64`; returns `+inf` below that.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        if x < ERFCX_NEG_LIMIT {
            return f64::INFINITY;
        }
        return 2.0 * exp_square(x) - erfcx(-x);
    }
    if x < ERFCX_CF_START {
        return exp_square(x) * erfc(x);
    }
    if x.is_infinite() {
        return 0.0;
    }
    // erfc(x) = exp(-x²)/√π · 1/(x + (1/2)/(x + (2/2)/(x + (3/2)/(x + ...))))
    let mut t = x;
    for k in (1..=ERFCX_CF_TERMS).rev() {
        t = x + 0.5 * k as f64 / t;
    }
    FRAC_1_SQRT_PI / t
}

/// `exp(-a)·erfc(b)` for `b` of either sign, without intermediate overflow.
///
/// Used wherever an exponential prefactor multiplies a complementary error
/// function whose argument may be large.
pub fn exp_neg_erfc(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        (-a - b * b).exp() * erfcx(b)
    } else {
        (-a).exp() * erfc(b)
    }
}

pub(crate) const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
