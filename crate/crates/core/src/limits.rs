//! Limit laws of the rescaled interval `Z` and first point `Y`, with the
//! exponential integral they are built from.

use crate::analytic::Transform;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Euler–Mascheroni constant.
#[allow(clippy::excessive_precision)]
pub const EULER_GAMMA: f64 = 0.577215664901532860606512090082;

const E1_SERIES_TERMS: usize = 40;
const E1_CF_LEVELS: usize = 60;

/// `E₁(s) = ∫_s^∞ e^(-t)/t dt` for `s > 0`.
pub fn exp_integral_e1(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain { what: "E1", value: s });
    }
    if s <= 1.0 {
        Ok(-EULER_GAMMA - libm::log(s) + ein_series(s))
    } else {
        Ok(e1_continued_fraction(s))
    }
}

/// `Σ_{k≥1} (-1)^(k+1) s^k/(k·k!)`.
fn ein_series(s: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..=E1_SERIES_TERMS {
        term *= -s / k as f64;
        sum -= term / k as f64;
    }
    sum
}

/// Modified Lentz evaluation of `e^(-s)/(s + 1 - 1/(s + 3 - 4/(s + 5 - …)))`.
fn e1_continued_fraction(s: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = s + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut f = d;
    for i in 1..=E1_CF_LEVELS {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f * libm::exp(-s)
}

/// `Ein(s) = ∫₀¹ (1 - e^(-sy))/y dy = γ̄ + ln s + E₁(s)`, with `Ein(0) = 0`.
pub fn ein(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain { what: "Ein", value: s });
    }
    if s <= 1.0 {
        Ok(ein_series(s))
    } else {
        Ok(EULER_GAMMA + libm::log(s) + e1_continued_fraction(s))
    }
}

/// Parameters of the interval limit law `ℛ(κ·E₁(s))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLawParams {
    pub transform: Transform,
    pub c0: f64,
}

impl LimitLawParams {
    pub fn new(transform: Transform, c0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c0) {
            return Err(Error::Domain { what: "c0", value: c0 });
        }
        Ok(Self { transform, c0 })
    }

    /// `κ = c₀` in case (i), `((γ+1)/(γ+2))·c₀` in case (ii).
    pub fn kappa(&self) -> f64 {
        self.transform.kappa_factor() * self.c0
    }
}

/// Laplace transform of the limit interval law at `s > 0`.
///
/// Zero when `c₀ = 0`: the rescaled interval escapes to infinity.
pub fn limit_interval_laplace(params: &LimitLawParams, s: f64) -> Result<f64> {
    let e1 = exp_integral_e1(s)?;
    if params.c0 == 0.0 {
        return Ok(0.0);
    }
    params.transform.r(params.kappa() * e1)
}

/// `exp{-(c₀/(1+γ))·Ein(s)}`: first-point limit law in case (i).
pub fn limit_leftmost_laplace_case_i(c0: f64, gamma: f64, s: f64) -> Result<f64> {
    Ok(libm::exp(-c0 / (1.0 + gamma) * ein(s)?))
}

/// `(e^(-γ̄/2)/2)·√(sech²(E₁(s)/2)/s)`: first-point limit law in case (ii).
pub fn limit_leftmost_laplace_case_ii(s: f64) -> Result<f64> {
    let x = exp_integral_e1(s)? / 2.0;
    Ok(0.5 * libm::exp(-EULER_GAMMA / 2.0) * libm::sqrt(sech2(x) / s))
}

/// `sech²(x) = 4e^(-2x)/(1 + e^(-2x))²` for `x ≥ 0`.
fn sech2(x: f64) -> f64 {
    let e = libm::exp(-2.0 * x.abs());
    4.0 * e / ((1.0 + e) * (1.0 + e))
}
