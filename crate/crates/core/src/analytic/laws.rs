use super::series::{SeriesCoefficients, Transform};
use crate::error::{Error, Result};
use crate::measure::{convolve_slices, GridMeasure};
use crate::model::{EpochSchedule, LeftmostCase};
use serde::{Deserialize, Serialize};

/// Negative masses down to this are rounding and get clamped to zero.
pub const NEGATIVE_TOL: f64 = 1e-10;

fn index_of(x: f64, h: f64) -> Result<usize> {
    let k = (x / h).round();
    if (x / h - k).abs() > 1e-9 * k.max(1.0) || k < 0.0 {
        return Err(Error::GridMismatch(format!("{x} is not a multiple of the lattice step {h}")));
    }
    Ok(k as usize)
}

/// Largest lattice index not beyond `x`.
fn floor_index(x: f64, h: f64) -> usize {
    (x / h + 1e-9).floor() as usize
}

fn clamp_negatives(v: &mut [f64], offset: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, m) in v.iter_mut().enumerate() {
        if *m < 0.0 {
            if *m < -NEGATIVE_TOL {
                return Err(Error::NegativeMass { site: offset + i, mass: *m });
            }
            worst = worst.max(-*m);
            *m = 0.0;
        }
    }
    Ok(worst)
}

fn check_probability(mu: &GridMeasure) -> Result<()> {
    if !mu.is_probability(1e-9) {
        return Err(Error::Law(format!("interval law has total mass {}", mu.total() + mu.tail_mass())));
    }
    if mu.start() == 0 || mu.offset() < 1.0 - 1e-12 {
        return Err(Error::Law("interval law must be supported on [1, ∞)".into()));
    }
    Ok(())
}

/// The measure `m` with `∫ e^(-sx) m(dx) = F(g(s))`, stored on `[1, x_max]`.
///
/// Computed from the power-series identity `F'(G)·G' = M'` in the variable
/// `e^(-sh)`: in case (i) `(1 - G)M' = G'`, in case (ii)
/// `((γ+1) - γG - G²)M' = (γ+1)G'`. Each coefficient costs one short inner
/// product, so the whole measure is `O(N²)` in the number of sites. Since `m`
/// has infinite total mass, nothing is recorded as tail.
pub fn m_measure(mu: &GridMeasure, transform: Transform, x_max: f64) -> Result<GridMeasure> {
    check_probability(mu)?;
    let h = mu.h();
    let n = floor_index(x_max, h);
    let s0 = mu.start();
    if n < s0 {
        return Err(Error::Law(format!("x_max = {x_max} lies below the first lattice site {}", mu.offset())));
    }
    let g = mu.to_dense(n + 1);
    let mut m = vec![0.0; n + 1];
    match transform {
        Transform::CaseI => {
            for j in s0..=n {
                let mut acc = j as f64 * g[j];
                for i in s0..=j.saturating_sub(s0) {
                    acc += i as f64 * m[i] * g[j - i];
                }
                m[j] = acc / j as f64;
            }
        }
        Transform::CaseII { gamma } => {
            let g2 = convolve_slices(&g, &g, n + 1);
            let q: Vec<f64> = (0..=n).map(|k| -gamma * g[k] - g2[k]).collect();
            for j in s0..=n {
                let mut acc = 0.0;
                for i in s0..=j.saturating_sub(s0) {
                    acc += i as f64 * m[i] * q[j - i];
                }
                m[j] = g[j] - acc / ((gamma + 1.0) * j as f64);
            }
        }
    }
    let mut body = m[s0..].to_vec();
    clamp_negatives(&mut body, s0)?;
    GridMeasure::new(h, s0, body, 0.0)
}

/// `m = Σ_k f_k μ^(⊗k)` by repeated convolution. Quadratic per power; kept as an
/// independent reference for [`m_measure`].
pub fn m_measure_direct(mu: &GridMeasure, coeffs: &SeriesCoefficients, x_max: f64) -> Result<GridMeasure> {
    check_probability(mu)?;
    let h = mu.h();
    let n = floor_index(x_max, h);
    let s0 = mu.start();
    if n < s0 {
        return Err(Error::Law(format!("x_max = {x_max} lies below the first lattice site {}", mu.offset())));
    }
    let kmax = n / s0;
    if kmax > coeffs.order() {
        return Err(Error::Law(format!("series order {} below the {kmax} powers needed", coeffs.order())));
    }
    let g = mu.to_dense(n + 1);
    let mut power = g.clone();
    let mut m = vec![0.0; n + 1];
    for k in 1..=kmax {
        if k > 1 {
            power = convolve_slices(&power, &g, n + 1);
        }
        for (mj, pj) in m.iter_mut().zip(&power) {
            *mj += coeffs.f[k] * pj;
        }
    }
    let mut body = m[s0..].to_vec();
    clamp_negatives(&mut body, s0)?;
    GridMeasure::new(h, s0, body, 0.0)
}

/// Law of `Z⁽ⁿ⁾ = X⁽ⁿ⁾/d⁽ⁿ⁾` on `[1, z_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLaw {
    /// Lattice step `h/d⁽ⁿ⁾`; the deficit below one is the mass beyond `z_max`.
    pub law: GridMeasure,
    pub d_n: f64,
    /// Largest negative rounding residue clamped to zero.
    pub clamped: f64,
    /// `m` has no mass at or beyond `d⁽ⁿ⁾` on the stored range.
    pub empty: bool,
}

fn epoch_base(m: &GridMeasure, d_n: f64, z_max: f64) -> Result<(usize, usize, Vec<f64>)> {
    let h = m.h();
    let d = index_of(d_n, h)?;
    if d == 0 {
        return Err(Error::Law("d_n must be positive".into()));
    }
    if !(z_max >= 1.0) {
        return Err(Error::Law(format!("z_max must be at least 1, got {z_max}")));
    }
    let n = floor_index(d_n * z_max, h);
    if n + 1 > m.end() && m.x_max() + 1e-9 * h < n as f64 * h {
        return Err(Error::Law(format!("d_n·z_max = {} exceeds the stored range of m ({})", d_n * z_max, m.x_max())));
    }
    let mut base = m.to_dense(n + 1);
    base[..d.min(n + 1)].iter_mut().for_each(|v| *v = 0.0);
    Ok((d, n, base))
}

fn finish_epoch_law(h: f64, d_n: f64, d: usize, mut p: Vec<f64>) -> Result<EpochLaw> {
    let empty = p.iter().all(|&v| v == 0.0);
    let clamped = clamp_negatives(&mut p[d..], d)?;
    let body = p[d..].to_vec();
    let total: f64 = body.iter().sum();
    let law = GridMeasure::new(h / d_n, d, body, (1.0 - total).max(0.0))?;
    Ok(EpochLaw { law, d_n, clamped, empty })
}

/// Exact law of the rescaled interval at the start of epoch `n`, where `d_n = d⁽ⁿ⁾`:
/// `p = R(m_n)` with `m_n = m` restricted to `[d⁽ⁿ⁾, d⁽ⁿ⁾·z_max]`, rescaled by
/// `1/d⁽ⁿ⁾`.
///
/// `R(m_n) = Σ r_k m_n^(⊗k)` is evaluated through `P' = R'(P)·M'` with `R'`
/// written in terms of `R` itself, which keeps every step a short inner product.
pub fn epoch_interval_law(m: &GridMeasure, d_n: f64, transform: Transform, z_max: f64) -> Result<EpochLaw> {
    let (d, n, base) = epoch_base(m, d_n, z_max)?;
    let mut p = vec![0.0; n + 1];
    match transform {
        Transform::CaseI => {
            for j in d..=n {
                let mut acc = 0.0;
                for i in d..=j.saturating_sub(d) {
                    acc += i as f64 * base[i] * p[j - i];
                }
                p[j] = base[j] - acc / j as f64;
            }
        }
        Transform::CaseII { gamma } => {
            // q[k] = [x^k] P²
            let mut q = vec![0.0; n + 1];
            for j in d..=n {
                if j >= 3 * d {
                    let k = j - d;
                    q[k] = (d..=k - d).map(|a| p[a] * p[k - a]).sum();
                }
                let mut acc = 0.0;
                for i in d..=j.saturating_sub(d) {
                    acc += i as f64 * base[i] * (gamma * p[j - i] + q[j - i]);
                }
                p[j] = base[j] - acc / ((gamma + 1.0) * j as f64);
            }
        }
    }
    finish_epoch_law(m.h(), d_n, d, p)
}

/// Same law as [`epoch_interval_law`], from the literal sum `Σ_{k ≤ z_max} r_k m_n^(⊗k)`.
pub fn epoch_interval_law_direct(m: &GridMeasure, d_n: f64, coeffs: &SeriesCoefficients, z_max: f64) -> Result<EpochLaw> {
    let (d, n, base) = epoch_base(m, d_n, z_max)?;
    let kmax = n / d;
    if kmax > coeffs.order() {
        return Err(Error::Law(format!("series order {} below the {kmax} powers needed", coeffs.order())));
    }
    let mut power = base.clone();
    let mut p = vec![0.0; n + 1];
    for k in 1..=kmax {
        if k > 1 {
            power = convolve_slices(&power, &base, n + 1);
        }
        for (pj, wj) in p.iter_mut().zip(&power) {
            *pj += coeffs.r[k] * wj;
        }
    }
    finish_epoch_law(m.h(), d_n, d, p)
}

/// One step of the Laplace recursion: `R(F(g) - h)` pointwise.
///
/// With `g = g⁽ⁿ⁾(s)` and `h = h⁽ⁿ⁾(s)` on a grid, the result is `g⁽ⁿ⁺¹⁾(a_n·s)`.
pub fn recursion_step_laplace(g_n: &[f64], h_n: &[f64], transform: Transform) -> Result<Vec<f64>> {
    if g_n.len() != h_n.len() {
        return Err(Error::GridMismatch(format!("{} values of g against {} of h", g_n.len(), h_n.len())));
    }
    g_n.iter()
        .zip(h_n)
        .map(|(&g, &h)| {
            let y = transform.f(g)? - h;
            if y < -1e-12 * (1.0 + h.abs()) {
                return Err(Error::Domain { what: "R", value: y });
            }
            transform.r(y.max(0.0))
        })
        .collect()
}

/// `Σ_{x ≥ lo} e^(-s·x/scale) m(x)` over the stored range.
fn restricted_laplace(m: &GridMeasure, lo: f64, hi: f64, scale: f64, s: f64) -> f64 {
    let eps = 1e-9 * m.h();
    m.iter().filter(|(x, _)| *x >= lo - eps && *x < hi - eps).map(|(x, w)| w * libm::exp(-s * x / scale)).sum()
}

/// `g⁽ⁿ⁾(s) = R(∫_{[d⁽ⁿ⁾,∞)} e^(-sx/d⁽ⁿ⁾) m(dx))`, truncated at the range of `m`.
pub fn interval_laplace(m: &GridMeasure, d_n: f64, transform: Transform, s: f64) -> Result<f64> {
    transform.r(restricted_laplace(m, d_n, f64::INFINITY, d_n, s))
}

/// `h⁽ⁿ⁾(s) = ∫_{[d⁽ⁿ⁾, d⁽ⁿ⁺¹⁾)} e^(-sx/d⁽ⁿ⁾) m(dx)`: Laplace transform of the
/// active part of the epoch-`n` interval law, in rescaled units.
pub fn active_laplace(m: &GridMeasure, d_n: f64, d_next: f64, s: f64) -> f64 {
    restricted_laplace(m, d_n, d_next, d_n, s)
}

/// `m([1, z))`: the accumulated active mass `Σ_{j<n} h⁽ʲ⁾(0)` when `z = d⁽ⁿ⁾`.
pub fn log_sum_h(m: &GridMeasure, z: f64) -> f64 {
    m.mass_in(1.0, z)
}

/// Laplace transform of `Y⁽ⁿ⁾ = X₀⁽ⁿ⁾/d⁽ⁿ⁾` on `s_grid`, for a half-line start with
/// first point law `nu` (`δ₀` when `None`).
///
/// `m` must be the measure of the interval case implied by `case`: case (i)
/// measure for [`LeftmostCase::I`], case (ii) with `γ = 0` for
/// [`LeftmostCase::II`]. Its stored range bounds the accuracy at small `s`.
///
/// Case (i): `ℓ⁽ⁿ⁾(s) = ℓ⁽¹⁾(s/d⁽ⁿ⁾)·exp{(1+γ)⁻¹ ∫_{[1,d⁽ⁿ⁾)} (e^(-sx/d⁽ⁿ⁾) - 1) m(dx)}`.
/// Case (ii): `ℓ⁽ⁿ⁾(s) = ℓ⁽¹⁾(s/d⁽ⁿ⁾)·√((1-g⁽ⁿ⁾(s)²)/(1-g(s/d⁽ⁿ⁾)²))·e^(-m([1,d⁽ⁿ⁾)))`.
pub fn leftmost_laplace(
    n: usize,
    case: LeftmostCase,
    mu: &GridMeasure,
    m: &GridMeasure,
    schedule: &EpochSchedule,
    nu: Option<&GridMeasure>,
    s_grid: &[f64],
) -> Result<Vec<f64>> {
    if n == 0 || n > schedule.values().len() {
        return Err(Error::Law(format!("epoch {n} outside the schedule")));
    }
    if !mu.mean().is_finite() {
        return Err(Error::Law("first-point law needs a finite-mean interval law".into()));
    }
    let d_n = schedule.d(n);
    let ell1 = |s: f64| nu.map_or(1.0, |v| v.laplace(s));
    s_grid
        .iter()
        .map(|&s| {
            if s < 0.0 {
                return Err(Error::Domain { what: "leftmost Laplace transform", value: s });
            }
            let base = ell1(s / d_n);
            match case {
                LeftmostCase::Frozen => Ok(base),
                LeftmostCase::I { gamma } => {
                    let eps = 1e-9 * m.h();
                    let acc: f64 = m
                        .iter()
                        .filter(|(x, _)| *x < d_n - eps)
                        .map(|(x, w)| w * libm::expm1(-s * x / d_n))
                        .sum();
                    Ok(base * libm::exp(acc / (1.0 + gamma)))
                }
                LeftmostCase::II => {
                    if n == 1 {
                        return Ok(base);
                    }
                    if s == 0.0 {
                        return Ok(1.0);
                    }
                    let t = Transform::CaseII { gamma: 0.0 };
                    let gn = interval_laplace(m, d_n, t, s)?;
                    let g1 = mu.laplace(s / d_n);
                    let ratio = ((1.0 - gn) * (1.0 + gn)) / ((1.0 - g1) * (1.0 + g1));
                    Ok(base * ratio.sqrt() * libm::exp(-log_sum_h(m, d_n)))
                }
            }
        })
        .collect()
}

/// Result of [`c0_estimate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C0Estimate {
    /// Extrapolated value clamped to `[0, 1]`.
    pub value: f64,
    /// Unclamped extrapolation.
    pub raw_limit: f64,
    /// `(s, -s g'(s)/(1 - g(s)))` for decreasing `s`.
    pub sequence: Vec<(f64, f64)>,
    /// Difference between the last two twice-accelerated values.
    pub residual: f64,
    pub converged: bool,
}

/// Tolerance on the extrapolation residual for [`C0Estimate::converged`].
pub const C0_TOL: f64 = 1e-2;

/// Estimates `c₀ = lim_{s↓0} -s g'(s)/(1 - g(s))`.
///
/// The ratio is evaluated at 8 dyadic points and accelerated by two passes of
/// Aitken's Δ² process. With mass beyond the stored range the smallest `s` is
/// kept at `40/x_max`, so the truncated tail acts as mass at infinity.
pub fn c0_estimate(mu: &GridMeasure) -> Result<C0Estimate> {
    check_probability(mu)?;
    let s_bottom = if mu.tail_mass() > 0.0 {
        40.0 / mu.x_max()
    } else {
        libm::ldexp(1.0, -10) / mu.mean().max(1.0)
    };
    let sequence: Vec<(f64, f64)> = (0..8)
        .map(|j| {
            let s = s_bottom * libm::ldexp(1.0, 7 - j);
            let (mut num, mut den) = (0.0, mu.tail_mass());
            for (x, w) in mu.iter() {
                num += w * x * libm::exp(-s * x);
                den += w * -libm::expm1(-s * x);
            }
            (s, s * num / den)
        })
        .collect();
    let a: Vec<f64> = sequence.iter().map(|p| p.1).collect();
    let a1 = aitken(&a);
    let a2 = aitken(&a1);
    let raw_limit = *a2.last().expect("eight points give four accelerated values");
    let residual = (a2[a2.len() - 1] - a2[a2.len() - 2]).abs();
    let converged = residual <= C0_TOL && (-C0_TOL..=1.0 + C0_TOL).contains(&raw_limit);
    Ok(C0Estimate { value: raw_limit.clamp(0.0, 1.0), raw_limit, sequence, residual, converged })
}

fn aitken(a: &[f64]) -> Vec<f64> {
    a.windows(3)
        .map(|w| {
            let den = w[2] - 2.0 * w[1] + w[0];
            if den.abs() <= 1e-14 * (w[0].abs() + w[1].abs() + w[2].abs()).max(1e-300) {
                w[2]
            } else {
                w[2] - (w[2] - w[1]) * (w[2] - w[1]) / den
            }
        })
        .collect()
}
