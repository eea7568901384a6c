//! Finite measures on a uniform lattice `{k·h : k ≥ start}`.
//!
//! Interval laws, the `m`-measure and leftmost-point laws all live here. Sites
//! are addressed by their integer lattice index, so two measures on the same
//! step convolve exactly by adding indices.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Sizes at or above this use blocked Karatsuba multiplication.
pub const KARATSUBA_THRESHOLD: usize = 1 << 14;

/// Nonnegative measure on the lattice `{(start + i)·h}` with explicit mass beyond the
/// last stored site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    h: f64,
    start: usize,
    mass: Vec<f64>,
    tail_mass: f64,
}

impl GridMeasure {
    /// Builds a measure; masses must be finite and nonnegative.
    pub fn new(h: f64, start: usize, mass: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Measure(format!("lattice step must be positive, got {h}")));
        }
        if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::Measure(format!("mass {m} at site {i} is not finite and nonnegative")));
        }
        if !(tail_mass.is_finite() && tail_mass >= 0.0) {
            return Err(Error::Measure(format!("tail mass {tail_mass} is not finite and nonnegative")));
        }
        Ok(Self { h, start, mass, tail_mass })
    }

    /// Point mass `weight` at lattice index `index`.
    pub fn point(h: f64, index: usize, weight: f64) -> Result<Self> {
        Self::new(h, index, vec![weight], 0.0)
    }

    /// Measure from a dense vector indexed by lattice index (index 0 is position 0).
    /// Leading and trailing zeros are trimmed.
    pub fn from_dense(h: f64, dense: &[f64], tail_mass: f64) -> Result<Self> {
        let first = dense.iter().position(|&m| m != 0.0).unwrap_or(dense.len());
        let last = dense.iter().rposition(|&m| m != 0.0).map_or(first, |l| l + 1);
        Self::new(h, first, dense[first..last].to_vec(), tail_mass)
    }

    /// The zero measure on step `h`.
    pub fn zero(h: f64) -> Self {
        Self { h, start: 0, mass: Vec::new(), tail_mass: 0.0 }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Lattice index of the first stored site.
    pub fn start(&self) -> usize {
        self.start
    }

    /// Position of the first stored site.
    pub fn offset(&self) -> f64 {
        self.start as f64 * self.h
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// One past the last stored lattice index.
    pub fn end(&self) -> usize {
        self.start + self.mass.len()
    }

    /// Largest stored position (the truncation cutoff).
    pub fn x_max(&self) -> f64 {
        (self.end().max(1) - 1) as f64 * self.h
    }

    pub fn position(&self, i: usize) -> f64 {
        (self.start + i) as f64 * self.h
    }

    /// Mass at lattice index `k` (zero off the stored range).
    pub fn at_index(&self, k: usize) -> f64 {
        if k < self.start {
            return 0.0;
        }
        self.mass.get(k - self.start).copied().unwrap_or(0.0)
    }

    /// `(position, mass)` pairs over the stored range.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.mass.iter().enumerate().map(|(i, &m)| (self.position(i), m))
    }

    /// Stored mass, excluding the tail.
    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// True if stored plus tail mass is one within `tol`.
    pub fn is_probability(&self, tol: f64) -> bool {
        (self.total() + self.tail_mass - 1.0).abs() <= tol
    }

    /// Mean over the stored range (the tail is not included).
    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, m)| x * m).sum()
    }

    /// `Σ x² m(x)` over the stored range.
    pub fn second_moment(&self) -> f64 {
        self.iter().map(|(x, m)| x * x * m).sum()
    }

    /// Dense vector indexed by lattice index, of length `len`.
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        for (i, &m) in self.mass.iter().enumerate() {
            let k = self.start + i;
            if k < len {
                v[k] = m;
            }
        }
        v
    }

    /// Laplace transform `Σ e^{-sx} m(x)` of the stored part.
    pub fn laplace(&self, s: f64) -> f64 {
        laplace_of_grid(self, s)
    }

    /// Laplace transform together with the bound `tail_mass·e^{-s·x_max}` on the
    /// contribution of the truncated tail.
    pub fn laplace_with_bound(&self, s: f64) -> (f64, f64) {
        (self.laplace(s), self.tail_mass * libm::exp(-s * self.x_max()))
    }

    /// Mass of the stored sites with position in `[lo, hi)`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let eps = 1e-9 * self.h;
        self.iter().filter(|(x, _)| *x >= lo - eps && *x < hi - eps).map(|(_, m)| m).sum()
    }

    /// Distribution function `m((-∞, x])` over the stored range.
    pub fn cdf(&self, x: f64) -> f64 {
        let eps = 1e-9 * self.h;
        self.iter().take_while(|(p, _)| *p <= x + eps).map(|(_, m)| m).sum()
    }

    /// Restriction to lattice indices `[lo, hi)`; the tail mass is dropped.
    pub fn restrict_indices(&self, lo: usize, hi: usize) -> GridMeasure {
        let lo = lo.max(self.start);
        let hi = hi.min(self.end());
        if lo >= hi {
            return GridMeasure { h: self.h, start: lo, mass: Vec::new(), tail_mass: 0.0 };
        }
        GridMeasure {
            h: self.h,
            start: lo,
            mass: self.mass[lo - self.start..hi - self.start].to_vec(),
            tail_mass: 0.0,
        }
    }

    /// Same masses on the lattice scaled by `1/factor`.
    pub fn rescaled(&self, factor: f64) -> GridMeasure {
        GridMeasure { h: self.h / factor, ..self.clone() }
    }

    /// Scale every mass, tail included, by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> GridMeasure {
        GridMeasure {
            h: self.h,
            start: self.start,
            mass: self.mass.iter().map(|m| m * c).collect(),
            tail_mass: self.tail_mass * c,
        }
    }

    /// Convolution truncated to lattice indices below `end`; everything above goes to
    /// the tail, together with the tails of both factors.
    pub fn convolve(&self, other: &GridMeasure, end: usize) -> Result<GridMeasure> {
        if (self.h - other.h).abs() > 1e-12 * self.h {
            return Err(Error::Measure(format!("lattice steps differ: {} vs {}", self.h, other.h)));
        }
        let start = self.start + other.start;
        let len = end.saturating_sub(start);
        let mass = convolve_slices(&self.mass, &other.mass, len);
        let kept: f64 = mass.iter().sum();
        let full = (self.total() + self.tail_mass) * (other.total() + other.tail_mass);
        let tail = (full - kept).max(0.0);
        let mut out = GridMeasure::new(self.h, start, mass.into_iter().map(|m| m.max(0.0)).collect(), tail)?;
        out.trim();
        Ok(out)
    }

    fn trim(&mut self) {
        let last = self.mass.iter().rposition(|&m| m != 0.0).map_or(0, |l| l + 1);
        self.mass.truncate(last);
        let first = self.mass.iter().position(|&m| m != 0.0).unwrap_or(self.mass.len());
        if first > 0 {
            self.mass.drain(..first);
            self.start += first;
        }
    }

    /// Total-variation distance `½Σ|a−b|` over the union of stored sites.
    pub fn total_variation(&self, other: &GridMeasure) -> f64 {
        let lo = self.start.min(other.start);
        let hi = self.end().max(other.end());
        0.5 * (lo..hi).map(|k| (self.at_index(k) - other.at_index(k)).abs()).sum::<f64>()
    }

    /// Sup distance between the distribution functions, evaluated at every stored site
    /// of either measure. Both measures must share a lattice step.
    pub fn ks_distance(&self, other: &GridMeasure) -> f64 {
        let lo = self.start.min(other.start);
        let hi = self.end().max(other.end());
        let (mut fa, mut fb, mut d) = (0.0f64, 0.0f64, 0.0f64);
        for k in lo..hi {
            fa += self.at_index(k);
            fb += other.at_index(k);
            d = d.max((fa - fb).abs());
        }
        d
    }
}

/// `Σ_x e^{-sx}·mass(x)` over the stored sites. At `s = 0` this is the stored total mass.
pub fn laplace_of_grid(measure: &GridMeasure, s: f64) -> f64 {
    if s == 0.0 {
        return measure.total();
    }
    let h = measure.h;
    measure
        .mass
        .iter()
        .enumerate()
        .map(|(i, &m)| m * libm::exp(-s * (measure.start + i) as f64 * h))
        .sum()
}

/// First `len` coefficients of the product of two coefficient vectors.
pub fn convolve_slices(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    if a.is_empty() || b.is_empty() || len == 0 {
        return vec![0.0; len];
    }
    if a.len().min(b.len()).min(len) >= KARATSUBA_THRESHOLD {
        let a = &a[..a.len().min(len)];
        let b = &b[..b.len().min(len)];
        let mut full = karatsuba(a, b);
        full.resize(len, 0.0);
        return full;
    }
    convolve_direct(a, b, len)
}

/// Schoolbook truncated product.
pub fn convolve_direct(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &ai) in a.iter().enumerate().take(len) {
        if ai == 0.0 {
            continue;
        }
        let n = b.len().min(len - i);
        for (o, &bj) in out[i..i + n].iter_mut().zip(&b[..n]) {
            *o += ai * bj;
        }
    }
    out
}

/// Full product by Karatsuba splitting, falling back to schoolbook below 64 terms.
pub fn karatsuba(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().min(b.len()) <= 64 {
        return convolve_direct(a, b, a.len() + b.len() - 1);
    }
    let half = n / 2;
    let (a0, a1) = a.split_at(half.min(a.len()));
    let (b0, b1) = b.split_at(half.min(b.len()));
    let z0 = karatsuba(a0, b0);
    let z2 = karatsuba(a1, b1);
    let sa = add_slices(a0, a1);
    let sb = add_slices(b0, b1);
    let z1 = karatsuba(&sa, &sb);
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, v) in z0.iter().enumerate() {
        out[i] += v;
    }
    for (i, v) in z2.iter().enumerate() {
        out[i + 2 * half] += v;
    }
    for (i, v) in z1.iter().enumerate() {
        let mid = v - z0.get(i).copied().unwrap_or(0.0) - z2.get(i).copied().unwrap_or(0.0);
        if let Some(o) = out.get_mut(i + half) {
            *o += mid;
        }
    }
    out
}

fn add_slices(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geometric(n: usize) -> GridMeasure {
        let mass: Vec<f64> = (1..=n).map(|k| 0.5f64.powi(k as i32)).collect();
        let tail = 0.5f64.powi(n as i32);
        GridMeasure::new(1.0, 1, mass, tail).unwrap()
    }

    #[test]
    fn rejects_negative_mass() {
        assert!(GridMeasure::new(1.0, 1, vec![0.5, -0.1], 0.0).is_err());
        assert!(GridMeasure::new(0.0, 1, vec![1.0], 0.0).is_err());
    }

    #[test]
    fn laplace_of_point_mass() {
        let d = GridMeasure::point(1.0, 1, 1.0).unwrap();
        assert!((d.laplace(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(d.laplace(0.0), 1.0);
    }

    #[test]
    fn laplace_of_geometric_matches_closed_form() {
        let g = geometric(200);
        for &s in &[0.05, 0.3, 1.0, 4.0] {
            let e = f64::exp(-s);
            let closed = e / (2.0 - e);
            assert!((g.laplace(s) - closed).abs() < 1e-14, "s={s}");
        }
    }

    #[test]
    fn convolution_of_points_and_truncation() {
        let a = GridMeasure::new(1.0, 1, vec![0.5, 0.5], 0.0).unwrap();
        let c = a.convolve(&a, 100).unwrap();
        assert_eq!(c.start(), 2);
        assert_eq!(c.masses(), &[0.25, 0.5, 0.25]);
        let t = a.convolve(&a, 4).unwrap();
        assert_eq!(t.masses(), &[0.25, 0.5]);
        assert!((t.tail_mass() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn karatsuba_matches_direct() {
        let a: Vec<f64> = (0..700).map(|i| ((i * 37 % 101) as f64) / 101.0).collect();
        let b: Vec<f64> = (0..523).map(|i| ((i * 53 % 97) as f64) / 97.0 - 0.3).collect();
        let k = karatsuba(&a, &b);
        let d = convolve_direct(&a, &b, a.len() + b.len() - 1);
        for (x, y) in k.iter().zip(&d) {
            assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn ks_and_tv() {
        let a = GridMeasure::new(1.0, 1, vec![0.5, 0.5], 0.0).unwrap();
        let b = GridMeasure::new(1.0, 2, vec![1.0], 0.0).unwrap();
        assert!((a.ks_distance(&b) - 0.5).abs() < 1e-15);
        assert!((a.total_variation(&b) - 0.5).abs() < 1e-15);
        assert_eq!(a.ks_distance(&a), 0.0);
    }

    proptest! {
        #[test]
        fn convolution_preserves_total_mass(xs in proptest::collection::vec(0.0f64..1.0, 1..30),
                                            ys in proptest::collection::vec(0.0f64..1.0, 1..30)) {
            let a = GridMeasure::new(1.0, 1, xs.clone(), 0.0).unwrap();
            let b = GridMeasure::new(1.0, 2, ys.clone(), 0.0).unwrap();
            let c = a.convolve(&b, 1000).unwrap();
            let expect = a.total() * b.total();
            prop_assert!((c.total() - expect).abs() <= 1e-12 * (1.0 + expect));
            // Laplace transform is multiplicative
            let s = 0.37;
            prop_assert!((c.laplace(s) - a.laplace(s) * b.laplace(s)).abs() <= 1e-12 * (1.0 + expect));
        }
    }
}
