//! Helpers shared by the integration tests.

#![allow(dead_code)]

use hcp::model::{Configuration, RateFn, RateSpec, Topology};
use std::collections::BTreeMap;

/// Rates on `[2, 4)` that are constant on `[2, 3)` and on `[3, 4)`.
#[derive(Clone, Copy, Debug)]
pub struct StepRates {
    /// `(left, right, ann)` on `[2, 3)`.
    pub short: (f64, f64, f64),
    /// `(left, right, ann)` on `[3, 4)`.
    pub long: (f64, f64, f64),
}

impl StepRates {
    pub fn at(&self, d: f64) -> (f64, f64, f64) {
        if (2.0..3.0).contains(&d) {
            self.short
        } else if (3.0..4.0).contains(&d) {
            self.long
        } else {
            (0.0, 0.0, 0.0)
        }
    }

    pub fn spec(&self) -> RateSpec {
        let r = *self;
        RateSpec::new(
            2.0,
            4.0,
            RateFn::func(move |d| r.at(d).0),
            RateFn::func(move |d| r.at(d).1),
            RateFn::func(move |d| r.at(d).2),
        )
        .unwrap()
    }
}

/// Torus with the given gaps, first point at the origin.
pub fn torus(gaps: &[u32]) -> Configuration {
    let mut points = Vec::with_capacity(gaps.len());
    let mut x = 0u32;
    for &g in gaps {
        points.push(x as f64);
        x += g;
    }
    Configuration::new(points, Topology::Torus { length: x as f64 }).unwrap()
}

/// Cyclic classes of gap sequences of length `k` over `values`, one representative each.
pub fn cyclic_classes(values: &[u32], k: usize) -> Vec<Vec<u32>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    let total = values.len().pow(k as u32);
    for mut code in 0..total {
        let mut seq = Vec::with_capacity(k);
        for _ in 0..k {
            seq.push(values[code % values.len()]);
            code /= values.len();
        }
        let canon = (0..k).map(|r| [&seq[r..], &seq[..r]].concat()).min().unwrap();
        if seen.insert(canon.clone()) {
            out.push(canon);
        }
    }
    out
}

/// Exact law of the final point set of one epoch on a small torus.
///
/// Every initially active domain owns one exponential clock with its total rate
/// and fires unless one of its endpoints was erased first. By memorylessness the
/// next firing domain is chosen with probability proportional to its rate, and
/// its merge kind with probability proportional to the three rates. Final sets
/// are keyed by their integer positions.
pub fn exact_final_law(gaps: &[u32], rates: &StepRates) -> BTreeMap<Vec<u32>, f64> {
    let k = gaps.len();
    let mut pos = Vec::with_capacity(k);
    let mut x = 0u32;
    for &g in gaps {
        pos.push(x);
        x += g;
    }
    let domain_rates: Vec<(f64, f64, f64)> = gaps.iter().map(|&g| rates.at(g as f64)).collect();
    let mut law = BTreeMap::new();
    let all: u32 = (1 << k) - 1;
    recurse(all, 1.0, k, &pos, &domain_rates, &mut law);
    law
}

fn recurse(alive: u32, weight: f64, k: usize, pos: &[u32], rates: &[(f64, f64, f64)], law: &mut BTreeMap<Vec<u32>, f64>) {
    let pending: Vec<usize> = (0..k)
        .filter(|&i| {
            let (l, r, a) = rates[i];
            let j = (i + 1) % k;
            l + r + a > 0.0 && alive & (1 << i) != 0 && alive & (1 << j) != 0
        })
        .collect();
    if pending.is_empty() {
        let key: Vec<u32> = (0..k).filter(|&i| alive & (1 << i) != 0).map(|i| pos[i]).collect();
        *law.entry(key).or_insert(0.0) += weight;
        return;
    }
    let total: f64 = pending.iter().map(|&i| rates[i].0 + rates[i].1 + rates[i].2).sum();
    for &i in &pending {
        let (l, r, a) = rates[i];
        let lam = l + r + a;
        let j = (i + 1) % k;
        let w = weight * lam / total;
        for (rate, erase) in [(l, 1u32 << i), (r, 1 << j), (a, (1 << i) | (1 << j))] {
            if rate > 0.0 {
                recurse(alive & !erase, w * rate / lam, k, pos, rates, law);
            }
        }
    }
}

/// `sup_s |a(s) - b(s)|`.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
