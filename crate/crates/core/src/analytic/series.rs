use crate::error::{Error, Result};
use crate::model::CaseTag;
use serde::{Deserialize, Serialize};

/// Residual above which a series reversion is rejected.
pub const REVERSION_TOL: f64 = 1e-10;

/// The linearizing transform `F` and its inverse `R` for the two solvable rate families.
///
/// Case (i): `F(x) = -ln(1-x)`, `R(y) = 1 - e^(-y)`.
/// Case (ii): `F(x) = (γ+1)/(γ+2)·ln((1 + x/(γ+1))/(1-x))`,
/// `R(y) = (e^(cy) - 1)/(e^(cy) + 1/(γ+1))` with `c = (γ+2)/(γ+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum Transform {
    CaseI,
    CaseII { gamma: f64 },
}

impl Transform {
    pub fn from_case(case: CaseTag) -> Result<Self> {
        match case {
            CaseTag::CaseI => Ok(Transform::CaseI),
            CaseTag::CaseII { gamma } if gamma >= 0.0 => Ok(Transform::CaseII { gamma }),
            _ => Err(Error::Unavailable("no closed-form recursion for general rates".into())),
        }
    }

    /// Rate of the exponential in `R`.
    fn c(gamma: f64) -> f64 {
        (gamma + 2.0) / (gamma + 1.0)
    }

    /// `F(x)` for `x ∈ [0, 1)`.
    pub fn f(&self, x: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Domain { what: "F", value: x });
        }
        Ok(match *self {
            Transform::CaseI => -libm::log1p(-x),
            Transform::CaseII { gamma } => (libm::log1p(x / (gamma + 1.0)) - libm::log1p(-x)) / Self::c(gamma),
        })
    }

    /// `F(1 - y)` for small `y > 0`, without forming `1 - y`.
    pub fn f_complement(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y <= 1.0) {
            return Err(Error::Domain { what: "F(1 - y)", value: y });
        }
        Ok(match *self {
            Transform::CaseI => -libm::log(y),
            Transform::CaseII { gamma } => (libm::log((gamma + 2.0 - y) / (gamma + 1.0)) - libm::log(y)) / Self::c(gamma),
        })
    }

    /// `F'(x)`.
    pub fn f_prime(&self, x: f64) -> f64 {
        match *self {
            Transform::CaseI => 1.0 / (1.0 - x),
            Transform::CaseII { gamma } => (gamma + 1.0) / ((gamma + 1.0 + x) * (1.0 - x)),
        }
    }

    /// `R(y)` for `y ≥ 0`, evaluated as `(1 - e^(-cy))/(1 + e^(-cy)/(γ+1))` in case (ii).
    pub fn r(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Domain { what: "R", value: y });
        }
        Ok(match *self {
            Transform::CaseI => -libm::expm1(-y),
            Transform::CaseII { gamma } => {
                let e = libm::exp(-Self::c(gamma) * y);
                -libm::expm1(-Self::c(gamma) * y) / (1.0 + e / (gamma + 1.0))
            }
        })
    }

    /// `R'(y)` expressed through `p = R(y)`.
    pub fn r_prime_of_value(&self, p: f64) -> f64 {
        match *self {
            Transform::CaseI => 1.0 - p,
            Transform::CaseII { gamma } => 1.0 - p * (gamma + p) / (gamma + 1.0),
        }
    }

    /// Scale factor `κ/c₀` of the limit law.
    pub fn kappa_factor(&self) -> f64 {
        match *self {
            Transform::CaseI => 1.0,
            Transform::CaseII { gamma } => (gamma + 1.0) / (gamma + 2.0),
        }
    }
}

/// Taylor coefficients of `F` and `R` up to order `K`, index `k` holding the `x^k`
/// coefficient (index 0 is zero).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub transform: Transform,
    pub f: Vec<f64>,
    pub r: Vec<f64>,
    /// Largest `|[x^j] F(R(x)) - δ_{j1}|` for `j ≤ K`.
    pub composition_residual: f64,
}

impl SeriesCoefficients {
    pub fn new(transform: Transform, order: usize) -> Result<Self> {
        let f = f_coefficients(transform, order);
        let r = r_coefficients(transform, order)?;
        let composition_residual = composition_residual(&f, &r);
        Ok(Self { transform, f, r, composition_residual })
    }

    pub fn order(&self) -> usize {
        self.f.len() - 1
    }
}

/// `f_k` for `k ≤ order`.
pub fn f_coefficients(transform: Transform, order: usize) -> Vec<f64> {
    let mut f = vec![0.0; order + 1];
    for (k, fk) in f.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        *fk = match transform {
            Transform::CaseI => 1.0 / kf,
            Transform::CaseII { gamma } => {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                (gamma + 1.0) / (gamma + 2.0) / kf * (1.0 + sign * libm::pow(gamma + 1.0, -kf))
            }
        };
    }
    f
}

/// `r_k` for `k ≤ order`: closed form in case (i), series reversion of `F` in case (ii).
pub fn r_coefficients(transform: Transform, order: usize) -> Result<Vec<f64>> {
    match transform {
        Transform::CaseI => {
            let mut r = vec![0.0; order + 1];
            let mut fact = 1.0;
            for (k, rk) in r.iter_mut().enumerate().skip(1) {
                fact *= k as f64;
                *rk = if k % 2 == 1 { 1.0 / fact } else { -1.0 / fact };
            }
            Ok(r)
        }
        Transform::CaseII { .. } => {
            let f = f_coefficients(transform, order);
            let r = revert(&f)?;
            let residual = composition_residual(&f, &r);
            if residual > REVERSION_TOL {
                return Err(Error::Reversion { order, residual });
            }
            Ok(r)
        }
    }
}

/// Compositional inverse of a series with `f[0] = 0`, `f[1] ≠ 0`, to the same order.
///
/// Uses `[x^j] F(R) = 0` for `j ≥ 2`: `r_j f_1 = -Σ_{k=2..j} f_k [x^j] R^k`, where
/// the right side only involves `r_1 … r_{j-1}`.
pub fn revert(f: &[f64]) -> Result<Vec<f64>> {
    let order = f.len().saturating_sub(1);
    if order == 0 {
        return Ok(vec![0.0]);
    }
    if f[0] != 0.0 || f[1] == 0.0 {
        return Err(Error::Reversion { order, residual: f64::INFINITY });
    }
    let mut r = vec![0.0; order + 1];
    r[1] = 1.0 / f[1];
    // powers[k][j] = [x^j] R^k, filled column by column
    let mut powers = vec![vec![0.0; order + 1]; order + 1];
    powers[1][1] = r[1];
    for j in 2..=order {
        let mut acc = 0.0;
        for k in 2..=j {
            let mut c = 0.0;
            for i in 1..=j - k + 1 {
                c += r[i] * powers[k - 1][j - i];
            }
            powers[k][j] = c;
            acc += f[k] * c;
        }
        r[j] = -acc / f[1];
        powers[1][j] = r[j];
    }
    Ok(r)
}

/// Largest deviation of the coefficients of `F∘R` from the identity.
pub fn composition_residual(f: &[f64], r: &[f64]) -> f64 {
    let order = f.len().min(r.len()) - 1;
    let mut power = r[..=order].to_vec();
    let mut comp = vec![0.0; order + 1];
    for k in 1..=order {
        if k > 1 {
            power = crate::measure::convolve_slices(&power, r, order + 1);
        }
        for j in 0..=order {
            comp[j] += f[k] * power[j];
        }
    }
    comp.iter().enumerate().map(|(j, &c)| (c - if j == 1 { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_i_coefficients() {
        let f = f_coefficients(Transform::CaseI, 3);
        assert_eq!(&f[1..], &[1.0, 0.5, 1.0 / 3.0]);
        let r = r_coefficients(Transform::CaseI, 3).unwrap();
        assert_eq!(&r[1..], &[1.0, -0.5, 1.0 / 6.0]);
        assert!(composition_residual(&f_coefficients(Transform::CaseI, 20), &r_coefficients(Transform::CaseI, 20).unwrap()) < 1e-12);
    }

    #[test]
    fn case_ii_gamma_zero_is_arctanh() {
        let t = Transform::CaseII { gamma: 0.0 };
        let f = f_coefficients(t, 3);
        assert_eq!(&f[1..], &[1.0, 0.0, 1.0 / 3.0]);
        let r = r_coefficients(t, 7).unwrap();
        // tanh x = x - x³/3 + 2x⁵/15 - 17x⁷/315
        let tanh = [0.0, 1.0, 0.0, -1.0 / 3.0, 0.0, 2.0 / 15.0, 0.0, -17.0 / 315.0];
        for (a, b) in r.iter().zip(&tanh) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn case_ii_gamma_one_first_coefficient() {
        let f = f_coefficients(Transform::CaseII { gamma: 1.0 }, 4);
        assert!((f[1] - 1.0).abs() < 1e-15);
        let s = SeriesCoefficients::new(Transform::CaseII { gamma: 1.0 }, 40).unwrap();
        assert!((s.r[1] - 1.0).abs() < 1e-15);
        assert!(s.composition_residual < 1e-12);
    }

    #[test]
    fn reversion_matches_closed_form_r() {
        for gamma in [0.0, 0.5, 1.0, 3.0] {
            let t = Transform::CaseII { gamma };
            let r = r_coefficients(t, 30).unwrap();
            for y in [0.01f64, 0.05, 0.1] {
                let series: f64 = r.iter().enumerate().map(|(k, c)| c * y.powi(k as i32)).sum();
                assert!((series - t.r(y).unwrap()).abs() < 1e-14, "gamma={gamma} y={y}");
            }
        }
    }

    #[test]
    fn closed_forms_invert() {
        for t in [Transform::CaseI, Transform::CaseII { gamma: 0.0 }, Transform::CaseII { gamma: 2.5 }] {
            for &x in &[0.0, 1e-9, 0.3, 0.9, 0.999999] {
                let y = t.f(x).unwrap();
                assert!((t.r(y).unwrap() - x).abs() < 1e-13, "{t:?} x={x}");
            }
            assert!(t.f(1.0).is_err());
            assert!(t.r(-1.0).is_err());
            assert_eq!(t.r(0.0).unwrap(), 0.0);
            let y = 1e-6;
            assert!((t.f_complement(y).unwrap() - t.f(1.0 - y).unwrap()).abs() < 1e-9);
        }
        assert!((Transform::CaseII { gamma: 0.0 }.r(0.7).unwrap() - 0.7f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn derivative_identity() {
        for t in [Transform::CaseI, Transform::CaseII { gamma: 0.0 }, Transform::CaseII { gamma: 1.7 }] {
            let y: f64 = 0.4;
            let eps = 1e-6;
            let num = (t.r(y + eps).unwrap() - t.r(y - eps).unwrap()) / (2.0 * eps);
            assert!((num - t.r_prime_of_value(t.r(y).unwrap())).abs() < 1e-9);
            let x: f64 = 0.3;
            let num = (t.f(x + eps).unwrap() - t.f(x - eps).unwrap()) / (2.0 * eps);
            assert!((num - t.f_prime(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn general_rates_have_no_transform() {
        assert!(Transform::from_case(CaseTag::General).is_err());
    }
}
