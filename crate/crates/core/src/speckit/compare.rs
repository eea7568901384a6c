use super::config::Tolerances;
use crate::error::{Error, Result};
use crate::measure::GridMeasure;
use crate::runner::{empirical_laplace, EmpiricalSummary};
use crate::stats::dkw_half_width;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Exact or limiting reference for one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub s_grid: Vec<f64>,
    pub laplace: Vec<f64>,
    /// Reference law on the lattice of the empirical histogram, when known.
    pub law: Option<GridMeasure>,
}

impl Reference {
    pub fn from_law(law: GridMeasure, s_grid: &[f64]) -> Self {
        let laplace = s_grid.iter().map(|&s| law.laplace(s)).collect();
        Self { s_grid: s_grid.to_vec(), laplace, law: Some(law) }
    }
}

/// Distances between an empirical summary and a reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub count: u64,
    /// `sup_s |ĝ(s) - g_ref(s)|`.
    pub sup_laplace: f64,
    /// Kolmogorov distance of the distribution functions, when the reference law is known.
    pub ks: Option<f64>,
    /// 99% DKW half-width `√(ln(2/0.01)/(2·count))`.
    pub dkw_band: f64,
    pub passed: bool,
}

/// Compares `empirical` with `reference` on their common s-grid.
pub fn compare_report(empirical: &EmpiricalSummary, reference: &Reference, tol: &Tolerances) -> Result<Comparison> {
    if empirical.s_grid != reference.s_grid || reference.laplace.len() != reference.s_grid.len() {
        return Err(Error::GridMismatch("empirical and reference s-grids differ".into()));
    }
    let g = empirical_laplace(empirical)?;
    let sup_laplace = g.iter().zip(&reference.laplace).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ks = match &reference.law {
        Some(law) => {
            let emp = empirical.to_measure_below(law.end() as u64)?;
            if (emp.h() - law.h()).abs() > 1e-12 * law.h() {
                return Err(Error::GridMismatch(format!("histogram step {} against reference step {}", emp.h(), law.h())));
            }
            Some(emp.ks_distance(law))
        }
        None => None,
    };
    let dkw_band = dkw_half_width(empirical.count, 0.01);
    let passed = sup_laplace <= tol.laplace_sup && ks.is_none_or(|k| k <= dkw_band + tol.ks_slack);
    Ok(Comparison { count: empirical.count, sup_laplace, ks, dkw_band, passed })
}

/// Rows of a Laplace CSV (`epoch,s,value,stderr`) grouped by epoch.
pub type LaplaceTable = BTreeMap<usize, Vec<(f64, f64)>>;

pub fn parse_laplace_csv(text: &str) -> Result<LaplaceTable> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "epoch,s,value,stderr" => {}
        other => return Err(Error::Config(format!("expected header epoch,s,value,stderr, found {other:?}"))),
    }
    let mut table = LaplaceTable::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Config(format!("line {}: malformed row {line:?}", i + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        let epoch: usize = f[0].trim().parse().map_err(|_| bad())?;
        let s: f64 = f[1].trim().parse().map_err(|_| bad())?;
        let v: f64 = f[2].trim().parse().map_err(|_| bad())?;
        table.entry(epoch).or_default().push((s, v));
    }
    Ok(table)
}

/// Per-epoch `sup_s` distance between two Laplace tables with identical grids.
pub fn compare_laplace_tables(a: &LaplaceTable, b: &LaplaceTable) -> Result<BTreeMap<usize, f64>> {
    if a.keys().ne(b.keys()) {
        return Err(Error::GridMismatch("the two files cover different epochs".into()));
    }
    let mut out = BTreeMap::new();
    for (epoch, ra) in a {
        let rb = &b[epoch];
        if ra.len() != rb.len() || ra.iter().zip(rb).any(|(x, y)| (x.0 - y.0).abs() > 1e-12 * x.0.abs()) {
            return Err(Error::GridMismatch(format!("s-grids differ at epoch {epoch}")));
        }
        out.insert(*epoch, ra.iter().zip(rb).map(|(x, y)| (x.1 - y.1).abs()).fold(0.0, f64::max));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn summary(values: impl Iterator<Item = f64>, s: &[f64]) -> EmpiricalSummary {
        let mut e = EmpiricalSummary::new(1, s.to_vec(), 1.0, true);
        values.for_each(|v| e.push(v));
        e
    }

    #[test]
    fn identical_inputs_have_zero_distance() {
        let s = vec![0.1, 0.5, 2.0];
        let e = summary([1.0, 2.0, 2.0, 5.0].into_iter(), &s);
        let r = Reference::from_law(e.to_measure().unwrap(), &s);
        let c = compare_report(&e, &r, &Tolerances::default()).unwrap();
        assert!(c.sup_laplace < 1e-15);
        assert_eq!(c.ks, Some(0.0));
        assert!(c.passed);
    }

    #[test]
    fn delta_draws_sit_inside_the_band() {
        let s = vec![0.1, 1.0, 5.0];
        let mut rng = StreamRng::new(1, 0);
        // a fair coin on {1, 2}
        let e = summary((0..1_000_000).map(|_| 1.0 + (rng.uniform() < 0.5) as u8 as f64), &s);
        let law = GridMeasure::new(1.0, 1, vec![0.5, 0.5], 0.0).unwrap();
        let c = compare_report(&e, &Reference::from_law(law, &s), &Tolerances::default()).unwrap();
        assert!(c.ks.unwrap() < c.dkw_band);
        assert!((c.dkw_band - (200f64.ln() / 2e6).sqrt()).abs() < 1e-15);
        let e = summary(std::iter::repeat_n(1.0, 1_000_000), &s);
        let law = GridMeasure::point(1.0, 1, 1.0).unwrap();
        let c = compare_report(&e, &Reference::from_law(law, &s), &Tolerances::default()).unwrap();
        assert!(c.sup_laplace < c.dkw_band);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let e = summary([1.0].into_iter(), &[0.1, 1.0]);
        let r = Reference { s_grid: vec![0.1, 2.0], laplace: vec![0.9, 0.1], law: None };
        assert!(compare_report(&e, &r, &Tolerances::default()).is_err());
        let a = parse_laplace_csv("epoch,s,value,stderr\n1,0.1,0.5,0\n1,1.0,0.2,0\n").unwrap();
        let b = parse_laplace_csv("epoch,s,value,stderr\n1,0.1,0.4,0\n1,2.0,0.2,0\n").unwrap();
        assert!(compare_laplace_tables(&a, &b).is_err());
        let d = compare_laplace_tables(&a, &a).unwrap();
        assert_eq!(d[&1], 0.0);
        assert!(parse_laplace_csv("s,value\n").is_err());
    }
}
