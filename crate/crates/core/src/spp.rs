//! Renewal point processes used as initial conditions.
//!
//! Interval laws are either closed-form presets, sampled by exact inversion, or
//! arbitrary lattice measures, sampled with a Vose alias table. Lattice laws are
//! accumulated as integer site indices and converted to positions once, so a
//! configuration built from a lattice law sits exactly on that lattice.

use crate::error::{Error, Result};
use crate::measure::GridMeasure;
use crate::model::{Configuration, Topology};
use crate::rng::StreamRng;
use serde::{Deserialize, Serialize};

/// Named interval laws, all supported on `[1, ∞)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntervalLawPreset {
    /// Point mass at `d0`, on the lattice of step `h` (default 1).
    Delta {
        d0: f64,
        #[serde(default = "unit")]
        h: f64,
    },
    /// Mass `p(1-p)^k` at `1 + k·h`.
    Geometric {
        p: f64,
        #[serde(default = "unit")]
        h: f64,
    },
    /// `P(X ≥ x) = x^(-α)` at the sites `x = 1 + k·h`.
    ZetaTail {
        alpha: f64,
        #[serde(default = "unit")]
        h: f64,
    },
    /// Continuous density `∝ x^(-α-1)` on `[1, x_max]`; `h` is the step used
    /// when a lattice version is requested.
    TruncatedPareto {
        alpha: f64,
        x_max: f64,
        #[serde(default = "pareto_step")]
        h: f64,
    },
    Custom { measure: GridMeasure },
}

fn unit() -> f64 {
    1.0
}

fn pareto_step() -> f64 {
    1.0 / 64.0
}

/// Lattice index of position `x` on step `h`, if `x` is a lattice site.
fn lattice_index(x: f64, h: f64) -> Option<usize> {
    let k = (x / h).round();
    ((x / h - k).abs() <= 1e-9 * k.max(1.0) && k >= 0.0).then_some(k as usize)
}

fn check_step(h: f64) -> Result<usize> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Law(format!("lattice step must be in (0, 1], got {h}")));
    }
    lattice_index(1.0, h).ok_or_else(|| Error::Law(format!("1/h must be an integer, got h = {h}")))
}

impl IntervalLawPreset {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IntervalLawPreset::Delta { d0, h } => {
                check_step(h)?;
                if !(d0 >= 1.0 && d0.is_finite()) {
                    return Err(Error::Law(format!("delta location must be >= 1, got {d0}")));
                }
                lattice_index(d0, h).ok_or_else(|| Error::Law(format!("delta location {d0} is not on the lattice of step {h}")))?;
            }
            IntervalLawPreset::Geometric { p, h } => {
                check_step(h)?;
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Law(format!("geometric parameter must be in (0, 1), got {p}")));
                }
            }
            IntervalLawPreset::ZetaTail { alpha, h } => {
                check_step(h)?;
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::Law(format!("tail exponent must be in (0, 1], got {alpha}")));
                }
            }
            IntervalLawPreset::TruncatedPareto { alpha, x_max, h } => {
                check_step(h)?;
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Law(format!("Pareto exponent must be positive, got {alpha}")));
                }
                if !(x_max > 1.0 && x_max.is_finite()) {
                    return Err(Error::Law(format!("Pareto cutoff must exceed 1, got {x_max}")));
                }
            }
            IntervalLawPreset::Custom { ref measure } => {
                if !measure.is_probability(1e-12) {
                    return Err(Error::Law(format!("custom law has total mass {}", measure.total() + measure.tail_mass())));
                }
                if measure.start() == 0 || measure.offset() < 1.0 - 1e-12 {
                    return Err(Error::Law("custom law must be supported on [1, ∞)".into()));
                }
            }
        }
        Ok(())
    }

    /// Lattice step of the law's support, `None` for continuous laws.
    pub fn lattice(&self) -> Option<f64> {
        match *self {
            IntervalLawPreset::Delta { h, .. } | IntervalLawPreset::Geometric { h, .. } | IntervalLawPreset::ZetaTail { h, .. } => Some(h),
            IntervalLawPreset::TruncatedPareto { .. } => None,
            IntervalLawPreset::Custom { ref measure } => Some(measure.h()),
        }
    }
}

/// Lattice version of a preset, with sites up to `x_max` stored and the rest of the
/// mass recorded as tail. Continuous laws are binned to the left lattice site.
pub fn interval_law_preset(preset: &IntervalLawPreset, x_max: f64) -> Result<GridMeasure> {
    preset.validate()?;
    match *preset {
        IntervalLawPreset::Delta { d0, h } => {
            let k = lattice_index(d0, h).expect("validated");
            if d0 > x_max {
                return GridMeasure::new(h, k, Vec::new(), 1.0);
            }
            GridMeasure::point(h, k, 1.0)
        }
        IntervalLawPreset::Geometric { p, h } => {
            let start = check_step(h)?;
            let n = sites_up_to(x_max, h, start);
            let q = 1.0 - p;
            let mass: Vec<f64> = (0..n).map(|j| p * libm::pow(q, j as f64)).collect();
            GridMeasure::new(h, start, mass, libm::pow(q, n as f64))
        }
        IntervalLawPreset::ZetaTail { alpha, h } => {
            let start = check_step(h)?;
            let n = sites_up_to(x_max, h, start);
            let surv = |j: usize| libm::pow((start + j) as f64 * h, -alpha);
            let mass: Vec<f64> = (0..n).map(|j| surv(j) - surv(j + 1)).collect();
            GridMeasure::new(h, start, mass, surv(n))
        }
        IntervalLawPreset::TruncatedPareto { alpha, x_max: cut, h } => {
            let start = check_step(h)?;
            let top = cut.min(x_max);
            let n = sites_up_to(top, h, start);
            let norm = 1.0 - libm::pow(cut, -alpha);
            let surv = |x: f64| ((libm::pow(x, -alpha) - libm::pow(cut, -alpha)) / norm).max(0.0);
            let mass: Vec<f64> = (0..n).map(|j| {
                let x = (start + j) as f64 * h;
                surv(x) - surv((x + h).min(cut))
            }).collect();
            let stored: f64 = mass.iter().sum();
            GridMeasure::new(h, start, mass, (1.0 - stored).max(0.0))
        }
        IntervalLawPreset::Custom { ref measure } => Ok(measure.clone()),
    }
}

fn sites_up_to(x_max: f64, h: f64, start: usize) -> usize {
    let last = (x_max / h + 1e-9).floor() as usize;
    (last + 1).saturating_sub(start)
}

/// Vose alias table over finitely many outcomes.
#[derive(Clone, Debug)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Weights need not be normalized; at least one must be positive.
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        if n == 0 || !(total > 0.0 && total.is_finite()) || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Law("alias table needs nonnegative weights with positive total".into()));
        }
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        Ok(Self { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    #[inline]
    pub fn sample(&self, rng: &mut StreamRng) -> usize {
        let u = rng.uniform() * self.prob.len() as f64;
        let i = (u as usize).min(self.prob.len() - 1);
        if u - (i as f64) < self.prob[i] { i } else { self.alias[i] as usize }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Delta { index: u64 },
    Geometric { ln_q: f64, start: u64 },
    Zeta { alpha: f64, start: u64 },
    Pareto { alpha: f64, x_max: f64 },
    Table { table: AliasTable, biased: AliasTable, start: u64 },
}

/// Gap sampler built once per interval law.
#[derive(Clone, Debug)]
pub struct GapLaw {
    kind: Kind,
    h: Option<f64>,
    mean: f64,
}

impl GapLaw {
    pub fn from_preset(preset: &IntervalLawPreset) -> Result<Self> {
        preset.validate()?;
        let h = preset.lattice();
        let (kind, mean) = match *preset {
            IntervalLawPreset::Delta { d0, h } => (Kind::Delta { index: lattice_index(d0, h).expect("validated") as u64 }, d0),
            IntervalLawPreset::Geometric { p, h } => {
                let q = 1.0 - p;
                (Kind::Geometric { ln_q: libm::log(q), start: check_step(h)? as u64 }, 1.0 + h * q / p)
            }
            IntervalLawPreset::ZetaTail { alpha, h } => (Kind::Zeta { alpha, start: check_step(h)? as u64 }, f64::INFINITY),
            IntervalLawPreset::TruncatedPareto { alpha, x_max, .. } => {
                let norm = 1.0 - libm::pow(x_max, -alpha);
                let mean = if (alpha - 1.0).abs() < 1e-12 {
                    libm::log(x_max) / norm
                } else {
                    alpha / (alpha - 1.0) * (1.0 - libm::pow(x_max, 1.0 - alpha)) / norm
                };
                (Kind::Pareto { alpha, x_max }, mean)
            }
            IntervalLawPreset::Custom { ref measure } => return Self::from_measure(measure),
        };
        Ok(Self { kind, h, mean })
    }

    /// Alias sampler for a normalized lattice measure on `[1, ∞)` with no tail mass.
    pub fn from_measure(mu: &GridMeasure) -> Result<Self> {
        if !mu.is_probability(1e-12) {
            return Err(Error::Law(format!("interval law is not normalized: total {}", mu.total() + mu.tail_mass())));
        }
        if mu.tail_mass() > 1e-12 {
            return Err(Error::Law("interval law has unresolved tail mass; use a closed-form preset".into()));
        }
        if mu.is_empty() || mu.offset() < 1.0 - 1e-12 {
            return Err(Error::Law("interval law must be supported on [1, ∞)".into()));
        }
        let table = AliasTable::new(mu.masses())?;
        let biased: Vec<f64> = mu.iter().map(|(x, m)| x * m).collect();
        let biased = AliasTable::new(&biased)?;
        Ok(Self { kind: Kind::Table { table, biased, start: mu.start() as u64 }, h: Some(mu.h()), mean: mu.mean() / mu.total() })
    }

    /// Lattice step, `None` for continuous laws.
    pub fn lattice(&self) -> Option<f64> {
        self.h
    }

    /// True if every support point is an integer.
    pub fn is_integer(&self) -> bool {
        match &self.kind {
            Kind::Delta { index } => self.h.is_some_and(|h| ((*index as f64) * h).fract() == 0.0),
            Kind::Pareto { .. } => false,
            _ => self.h == Some(1.0),
        }
    }

    /// Mean gap; infinite for the power-tail family.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// One gap as a lattice index. Panics for continuous laws.
    #[inline]
    pub fn sample_index(&self, rng: &mut StreamRng) -> u64 {
        match &self.kind {
            Kind::Delta { index } => *index,
            Kind::Geometric { ln_q, start, .. } => start + geometric0(rng, *ln_q),
            Kind::Zeta { alpha, start } => {
                // largest site x = (start + k)·h with x^(-α) ≥ U
                let x_over_h = libm::pow(rng.uniform_pos(), -1.0 / alpha) * *start as f64;
                (x_over_h.floor() as u64).max(*start)
            }
            Kind::Table { table, start, .. } => start + table.sample(rng) as u64,
            Kind::Pareto { .. } => panic!("continuous law has no lattice index"),
        }
    }

    /// One gap length.
    #[inline]
    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match &self.kind {
            Kind::Pareto { alpha, x_max } => {
                let tail = libm::pow(*x_max, -alpha);
                libm::pow(tail + rng.uniform_pos() * (1.0 - tail), -1.0 / alpha).min(*x_max)
            }
            _ => self.sample_index(rng) as f64 * self.h.expect("lattice law"),
        }
    }

    /// One draw from the size-biased law `x·μ(dx)/μ̄`, as a length.
    pub fn sample_size_biased(&self, rng: &mut StreamRng) -> Result<f64> {
        if !self.mean.is_finite() {
            return Err(Error::Law("a stationary renewal process with infinite-mean intervals does not exist".into()));
        }
        let x = match &self.kind {
            Kind::Delta { .. } => self.sample(rng),
            Kind::Geometric { ln_q, start } => {
                let h = self.h.expect("lattice law");
                // (1 + hk)·p·q^k splits into a geometric part of weight 1 and a
                // negative-binomial part of weight h·q/p
                let k = if rng.uniform() * self.mean < 1.0 {
                    geometric0(rng, *ln_q)
                } else {
                    1 + geometric0(rng, *ln_q) + geometric0(rng, *ln_q)
                };
                (start + k) as f64 * h
            }
            Kind::Pareto { alpha, x_max } => {
                let u = rng.uniform();
                if (alpha - 1.0).abs() < 1e-12 {
                    libm::pow(*x_max, u)
                } else {
                    let e = 1.0 - alpha;
                    libm::pow(1.0 + u * (libm::pow(*x_max, e) - 1.0), 1.0 / e)
                }
            }
            Kind::Table { biased, start, .. } => (start + biased.sample(rng) as u64) as f64 * self.h.expect("lattice law"),
            Kind::Zeta { .. } => unreachable!("infinite mean handled above"),
        };
        Ok(x)
    }
}

#[inline]
fn geometric0(rng: &mut StreamRng, ln_q: f64) -> u64 {
    (libm::log(rng.uniform_pos()) / ln_q).floor() as u64
}

/// Region on which a stationary renewal process is observed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Torus { length: f64 },
    Window { a: f64, b: f64 },
}

/// `Ren(δ₀, μ)`: a point at 0 followed by `n_intervals` i.i.d. gaps, on the half-line.
pub fn sample_ren_delta0(law: &GapLaw, n_intervals: usize, rng: &mut StreamRng) -> Result<Configuration> {
    if n_intervals == 0 {
        return Err(Error::Law("need at least one interval".into()));
    }
    let mut points = Vec::with_capacity(n_intervals + 1);
    match law.lattice() {
        Some(h) => {
            let mut k = 0u64;
            points.push(0.0);
            for _ in 0..n_intervals {
                k += law.sample_index(rng);
                points.push(k as f64 * h);
            }
        }
        None => {
            let mut x = 0.0;
            points.push(0.0);
            for _ in 0..n_intervals {
                x += law.sample(rng);
                points.push(x);
            }
        }
    }
    Configuration::new(points, Topology::HalfLine)
}

/// Stationary renewal process.
///
/// On a torus the circle is filled from 0 with i.i.d. gaps; if the wrap-around gap is
/// shorter than 1 the last point is dropped, and the result is rotated by a uniform
/// offset (a lattice multiple for lattice laws with commensurate length). This is
/// exact up to a boundary bias of order one interval per circle.
///
/// On a window the interval straddling the origin is size biased with the origin
/// uniform inside it, and independent gaps extend it to both window edges.
pub fn sample_ren_stationary(law: &GapLaw, region: Region, rng: &mut StreamRng) -> Result<Configuration> {
    if !law.mean().is_finite() {
        return Err(Error::Law("a stationary renewal process with infinite-mean intervals does not exist".into()));
    }
    match region {
        Region::Torus { length } => sample_torus(law, length, rng),
        Region::Window { a, b } => {
            if !(a < b) {
                return Err(Error::Configuration(format!("window [{a}, {b}] is empty")));
            }
            let d = law.sample_size_biased(rng)?;
            let x0 = -rng.uniform() * d;
            let mut points = extend_both_ways(law, x0, x0 + d, a, b, rng, |g| g);
            points.retain(|&x| x >= a && x <= b);
            Configuration::new(points, Topology::Window { a, b })
        }
    }
}

fn extend_both_ways(law: &GapLaw, left: f64, right: f64, a: f64, b: f64, rng: &mut StreamRng, map: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut lefts = vec![left];
    let mut x = left;
    while x >= a {
        x -= map(law.sample(rng));
        lefts.push(x);
    }
    lefts.reverse();
    let mut x = right;
    lefts.push(x);
    while x <= b {
        x += map(law.sample(rng));
        lefts.push(x);
    }
    lefts
}

fn sample_torus(law: &GapLaw, length: f64, rng: &mut StreamRng) -> Result<Configuration> {
    if !(length >= 2.0 && length.is_finite()) {
        return Err(Error::Configuration(format!("torus length must be at least 2, got {length}")));
    }
    let lattice = law.lattice().and_then(|h| lattice_index(length, h).map(|n| (h, n as u64)));
    let points = match lattice {
        Some((h, n)) => {
            let mut idx = vec![0u64];
            loop {
                let next = idx.last().unwrap() + law.sample_index(rng);
                if next >= n {
                    break;
                }
                idx.push(next);
            }
            if (n - idx.last().unwrap()) as f64 * h < 1.0 - 1e-12 && idx.len() > 1 {
                idx.pop();
            }
            let shift = rng.below(n);
            let mut rotated: Vec<u64> = idx.iter().map(|&k| (k + shift) % n).collect();
            rotated.sort_unstable();
            rotated.into_iter().map(|k| k as f64 * h).collect::<Vec<f64>>()
        }
        None => {
            let mut xs = vec![0.0];
            loop {
                let next = xs.last().unwrap() + law.sample(rng);
                if next >= length {
                    break;
                }
                xs.push(next);
            }
            if length - xs.last().unwrap() < 1.0 && xs.len() > 1 {
                xs.pop();
            }
            let shift = rng.uniform() * length;
            let mut rotated: Vec<f64> = xs.iter().map(|&x| {
                let y = x + shift;
                if y >= length { y - length } else { y }
            }).collect();
            rotated.sort_by(f64::total_cmp);
            rotated.dedup();
            rotated
        }
    };
    Configuration::new(points, Topology::Torus { length })
}

/// ℤ-stationary renewal process on the integer window `[a, b]`: the straddling
/// interval is size biased and the origin falls on one of its integer sites
/// uniformly.
pub fn sample_ren_z(law: &GapLaw, a: i64, b: i64, rng: &mut StreamRng) -> Result<Configuration> {
    if !law.is_integer() {
        return Err(Error::Law("the ℤ-stationary process needs a law supported on positive integers".into()));
    }
    if !law.mean().is_finite() {
        return Err(Error::Law("a stationary renewal process with infinite-mean intervals does not exist".into()));
    }
    if a >= b {
        return Err(Error::Configuration(format!("window [{a}, {b}] is empty")));
    }
    let d = law.sample_size_biased(rng)?.round() as i64;
    let x0 = -(rng.below(d as u64) as i64);
    let mut points = extend_both_ways(law, x0 as f64, (x0 + d) as f64, a as f64, b as f64, rng, |g| g.round());
    points.retain(|&x| x >= a as f64 && x <= b as f64);
    Configuration::new(points, Topology::Window { a: a as f64, b: b as f64 })
}
