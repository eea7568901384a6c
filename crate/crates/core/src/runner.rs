//! Epoch chaining, rescaled statistics and replica aggregation.

use crate::error::{Error, Result};
use crate::measure::GridMeasure;
use crate::model::{Configuration, EpochSchedule, RateSpec, Topology};
use crate::ocp::{run_epoch, RunOptions};
use crate::rng::StreamRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Bin width for non-lattice runs.
pub const ADAPTIVE_BIN_WIDTH: f64 = 1e-2;

/// `k` logarithmically spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k).map(|i| lo * libm::pow(hi / lo, i as f64 / (k - 1) as f64)).collect()
}

/// The default s-grid: 64 points from 0.05 to 10.
pub fn default_s_grid() -> Vec<f64> {
    log_grid(0.05, 10.0, 64)
}

/// Streaming summary of one rescaled quantity at one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSummary {
    pub epoch: usize,
    pub count: u64,
    /// Histogram bin width in rescaled units.
    pub bin_width: f64,
    /// Lattice bins are centred on multiples of `bin_width`; otherwise bin `k` is
    /// `[k·w, (k+1)·w)`.
    pub lattice: bool,
    pub histogram: BTreeMap<u64, u64>,
    pub s_grid: Vec<f64>,
    /// `Σ e^(-s·Z)` per grid point.
    pub laplace_acc: Vec<f64>,
    /// `Σ e^(-2s·Z)` per grid point.
    pub laplace_sq: Vec<f64>,
    pub sum: f64,
    pub sum_sq: f64,
    pub min: f64,
}

impl EmpiricalSummary {
    pub fn new(epoch: usize, s_grid: Vec<f64>, bin_width: f64, lattice: bool) -> Self {
        let k = s_grid.len();
        Self {
            epoch,
            count: 0,
            bin_width,
            lattice,
            histogram: BTreeMap::new(),
            s_grid,
            laplace_acc: vec![0.0; k],
            laplace_sq: vec![0.0; k],
            sum: 0.0,
            sum_sq: 0.0,
            min: f64::INFINITY,
        }
    }

    fn bin(&self, z: f64) -> u64 {
        let q = z / self.bin_width;
        if self.lattice {
            q.round() as u64
        } else {
            q.floor() as u64
        }
    }

    pub fn push(&mut self, z: f64) {
        self.count += 1;
        *self.histogram.entry(self.bin(z)).or_insert(0) += 1;
        for (j, &s) in self.s_grid.iter().enumerate() {
            let e = libm::exp(-s * z);
            self.laplace_acc[j] += e;
            self.laplace_sq[j] += e * e;
        }
        self.sum += z;
        self.sum_sq += z * z;
        self.min = self.min.min(z);
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn second_moment(&self) -> f64 {
        self.sum_sq / self.count as f64
    }

    /// Standard error of each Laplace estimate.
    pub fn laplace_stderr(&self) -> Result<Vec<f64>> {
        let g = empirical_laplace(self)?;
        let n = self.count as f64;
        Ok(g.iter()
            .zip(&self.laplace_sq)
            .map(|(m, sq)| libm::sqrt(((sq / n) - m * m).max(0.0) / n))
            .collect())
    }

    /// Empirical law as a measure; only for lattice summaries.
    pub fn to_measure(&self) -> Result<GridMeasure> {
        self.to_measure_below(u64::MAX)
    }

    /// Empirical law on the bins below `end`, with the rest as tail mass.
    pub fn to_measure_below(&self, end: u64) -> Result<GridMeasure> {
        if !self.lattice {
            return Err(Error::GridMismatch("histogram is not lattice-aligned".into()));
        }
        if self.count == 0 {
            return Err(Error::EmptySummary);
        }
        let n = self.count as f64;
        let kept = self.histogram.range(..end);
        let (Some((&lo, _)), Some((&hi, _))) = (kept.clone().next(), kept.clone().next_back()) else {
            return GridMeasure::new(self.bin_width, 1, Vec::new(), 1.0);
        };
        let mut mass = vec![0.0; (hi - lo + 1) as usize];
        let mut total = 0u64;
        for (&k, &c) in kept {
            mass[(k - lo) as usize] = c as f64 / n;
            total += c;
        }
        GridMeasure::new(self.bin_width, lo as usize, mass, (self.count - total) as f64 / n)
    }

    /// Rows `epoch,z_bin_lo,z_bin_hi,mass`.
    pub fn histogram_csv_rows(&self, out: &mut String) {
        for (&k, &c) in &self.histogram {
            let lo = if self.lattice { (k as f64 - 0.5) * self.bin_width } else { k as f64 * self.bin_width };
            let hi = lo + self.bin_width;
            writeln!(out, "{},{:.16e},{:.16e},{:.16e}", self.epoch, lo, hi, c as f64 / self.count as f64).unwrap();
        }
    }

    /// Rows `epoch,s,value,stderr`.
    pub fn laplace_csv_rows(&self, out: &mut String) -> Result<()> {
        let g = empirical_laplace(self)?;
        let se = self.laplace_stderr()?;
        for ((s, v), e) in self.s_grid.iter().zip(&g).zip(&se) {
            writeln!(out, "{},{:.16e},{:.16e},{:.16e}", self.epoch, s, v, e).unwrap();
        }
        Ok(())
    }
}

/// `ĝ(s) = Σ e^(-sZ)/count`.
pub fn empirical_laplace(summary: &EmpiricalSummary) -> Result<Vec<f64>> {
    if summary.count == 0 {
        return Err(Error::EmptySummary);
    }
    Ok(summary.laplace_acc.iter().map(|a| a / summary.count as f64).collect())
}

/// Pools two summaries of the same epoch, grid and binning.
pub fn merge_summaries(a: &EmpiricalSummary, b: &EmpiricalSummary) -> Result<EmpiricalSummary> {
    if a.epoch != b.epoch || a.s_grid != b.s_grid || a.bin_width != b.bin_width || a.lattice != b.lattice {
        return Err(Error::GridMismatch(format!("cannot merge summaries of epochs {} and {} with different layouts", a.epoch, b.epoch)));
    }
    let mut out = a.clone();
    out.count += b.count;
    for (&k, &c) in &b.histogram {
        *out.histogram.entry(k).or_insert(0) += c;
    }
    for j in 0..out.s_grid.len() {
        out.laplace_acc[j] += b.laplace_acc[j];
        out.laplace_sq[j] += b.laplace_sq[j];
    }
    out.sum += b.sum;
    out.sum_sq += b.sum_sq;
    out.min = out.min.min(b.min);
    Ok(out)
}

/// Settings for [`run_hcp`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HcpOptions {
    pub s_grid: Vec<f64>,
    /// Common lattice step of the initial gaps, if any.
    pub lattice: Option<f64>,
    pub engine: RunOptions,
}

impl Default for HcpOptions {
    fn default() -> Self {
        Self { s_grid: default_s_grid(), lattice: None, engine: RunOptions::default() }
    }
}

/// Statistics taken at the start of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub d_n: f64,
    /// Rescaled gaps `X/d⁽ⁿ⁾`.
    pub z: EmpiricalSummary,
    /// `x₀/d⁽ⁿ⁾` on a half-line, when the first point is still trusted.
    pub y: Option<f64>,
    pub points: usize,
    /// Points left of the frontier (all points off the half-line).
    pub trusted_points: usize,
    /// Events during the epoch that follows; zero for the final record.
    pub events: u64,
}

/// Output of [`run_hcp`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HcpRun {
    pub epochs: Vec<EpochRecord>,
    /// The configuration ran out of points before the last requested epoch.
    pub truncated: bool,
    pub final_configuration: Configuration,
}

/// Runs epochs `1..=n_epochs` and records statistics at the start of each.
///
/// `initial` must lie in `𝒩(d⁽¹⁾)`. Epoch `n` runs under `rate_factory(n)`, whose
/// range must be `[d⁽ⁿ⁾, d⁽ⁿ⁺¹⁾)`; its output starts epoch `n + 1`.
pub fn run_hcp(
    initial: &Configuration,
    schedule: &EpochSchedule,
    rate_factory: &dyn Fn(usize) -> Result<RateSpec>,
    n_epochs: usize,
    rng: &mut StreamRng,
    opts: &HcpOptions,
) -> Result<HcpRun> {
    if n_epochs > schedule.horizon() {
        return Err(Error::Schedule(format!("{n_epochs} epochs requested, schedule has {}", schedule.horizon())));
    }
    initial.validate(schedule.d(1))?;
    let mut config = initial.clone();
    let mut epochs = Vec::with_capacity(n_epochs);
    let mut truncated = false;
    for n in 1..=n_epochs {
        if config.len() <= 1 {
            truncated = true;
            break;
        }
        let d_n = schedule.d(n);
        let (width, lattice) = match opts.lattice {
            Some(h) => (h / d_n, true),
            None => (ADAPTIVE_BIN_WIDTH, false),
        };
        let mut z = EmpiricalSummary::new(n, opts.s_grid.clone(), width, lattice);
        let mut gaps = config.trusted_gaps();
        if matches!(config.topology(), Topology::Torus { .. }) && config.len() < 3 {
            gaps.pop();
        }
        for g in gaps {
            z.push(g / d_n);
        }
        let y = match config.topology() {
            Topology::HalfLine => config.leftmost().map(|x| x / d_n),
            _ => None,
        };
        let spec = rate_factory(n)?;
        if (spec.d_min() - d_n).abs() > 1e-12 * d_n {
            return Err(Error::Rates(format!("epoch {n} rates start at {}, schedule gives {d_n}", spec.d_min())));
        }
        let mut record = EpochRecord { epoch: n, d_n, z, y, points: config.len(), trusted_points: config.frontier_index(), events: 0 };
        if n < n_epochs {
            let (next, trace) = run_epoch(&config, &spec, rng, &opts.engine)?;
            record.events = trace.events;
            config = next;
        }
        epochs.push(record);
    }
    Ok(HcpRun { epochs, truncated, final_configuration: config })
}

/// Pooled statistics over replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub replicas: usize,
    /// Per epoch, the pooled rescaled gaps.
    pub z: Vec<EmpiricalSummary>,
    /// Per epoch, the first-point statistic over replicas where it was trusted.
    pub y: Vec<EmpiricalSummary>,
    pub truncated_replicas: usize,
    /// Smallest trusted-point count seen at the last epoch.
    pub min_trusted_points: usize,
}

/// Thread pool with `workers` threads (0 picks the rayon default).
pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Runs `replicas` independent chains in parallel and merges them in index order.
///
/// Replica `i` draws from stream `i` of `seed`, so the result does not depend on
/// the worker count.
pub fn run_replicas(
    replicas: usize,
    seed: u64,
    workers: usize,
    n_epochs: usize,
    run: &(dyn Fn(usize, &mut StreamRng) -> Result<HcpRun> + Sync),
) -> Result<ReplicaSummary> {
    let pool = thread_pool(workers)?;
    let runs: Vec<Result<HcpRun>> = pool.install(|| {
        (0..replicas)
            .into_par_iter()
            .map(|i| {
                let mut rng = StreamRng::new(seed, i as u64);
                run(i, &mut rng)
            })
            .collect()
    });
    let mut out = ReplicaSummary { replicas, z: Vec::new(), y: Vec::new(), truncated_replicas: 0, min_trusted_points: usize::MAX };
    for run in runs {
        let run = run?;
        out.truncated_replicas += run.truncated as usize;
        for rec in &run.epochs {
            let k = rec.epoch - 1;
            if out.z.len() <= k {
                out.z.push(rec.z.clone());
                out.y.push(EmpiricalSummary::new(rec.epoch, rec.z.s_grid.clone(), rec.z.bin_width, rec.z.lattice));
            } else {
                out.z[k] = merge_summaries(&out.z[k], &rec.z)?;
            }
            if let Some(y) = rec.y {
                out.y[k].push(y);
            }
        }
        if let Some(last) = run.epochs.last() {
            if last.epoch == n_epochs {
                out.min_trusted_points = out.min_trusted_points.min(last.trusted_points);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_rate_spec, Preset};
    use crate::spp::{sample_ren_delta0, GapLaw, IntervalLawPreset};

    fn summary(values: &[f64], s: Vec<f64>) -> EmpiricalSummary {
        let mut e = EmpiricalSummary::new(1, s, 1.0, true);
        for &v in values {
            e.push(v);
        }
        e
    }

    #[test]
    fn laplace_examples() {
        assert_eq!(empirical_laplace(&summary(&[1.0, 1.0, 2.0], vec![0.0])).unwrap(), vec![1.0]);
        let g = empirical_laplace(&summary(&[1.0], vec![std::f64::consts::LN_2])).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15);
        assert!(empirical_laplace(&summary(&[], vec![1.0])).is_err());
    }

    #[test]
    fn merging() {
        let s = vec![0.1, 1.0];
        let a = summary(&[1.0, 2.0], s.clone());
        let b = summary(&[3.0], s.clone());
        let c = summary(&[1.0, 5.0, 8.0], s.clone());
        let e = summary(&[], s.clone());
        assert_eq!(merge_summaries(&a, &e).unwrap(), a);
        assert_eq!(merge_summaries(&a, &b).unwrap().count, 3);
        let l = merge_summaries(&a, &merge_summaries(&b, &c).unwrap()).unwrap();
        let r = merge_summaries(&merge_summaries(&a, &b).unwrap(), &c).unwrap();
        assert_eq!(l.histogram, r.histogram);
        assert_eq!(l.count, r.count);
        for (x, y) in l.laplace_acc.iter().zip(&r.laplace_acc) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(merge_summaries(&a, &summary(&[1.0], vec![0.2, 1.0])).is_err());
    }

    #[test]
    fn inert_rates_leave_summaries_fixed() {
        let config = Configuration::new((0..50).map(|i| i as f64).collect(), Topology::Torus { length: 50.0 }).unwrap();
        let sched = EpochSchedule::linear(8);
        let rates = |n: usize| RateSpec::inert(sched.d(n), sched.d(n + 1));
        let mut rng = StreamRng::new(1, 0);
        let run = run_hcp(&config, &sched, &rates, 3, &mut rng, &HcpOptions { lattice: Some(1.0), ..Default::default() }).unwrap();
        assert_eq!(run.epochs.len(), 3);
        for rec in &run.epochs {
            assert_eq!(rec.z.count, 50);
            assert_eq!(rec.z.histogram.len(), 1);
            assert!((rec.z.mean() - 1.0 / rec.d_n).abs() < 1e-15);
        }
    }

    #[test]
    fn rescaled_gaps_stay_above_one() {
        let law = GapLaw::from_preset(&IntervalLawPreset::Geometric { p: 0.5, h: 1.0 }).unwrap();
        let mut rng = StreamRng::new(7, 0);
        let config = sample_ren_delta0(&law, 20_000, &mut rng).unwrap();
        let sched = EpochSchedule::linear(16);
        let rates = |n: usize| make_rate_spec(&Preset::IsingT0, n, &sched);
        let run = run_hcp(&config, &sched, &rates, 8, &mut rng, &HcpOptions { lattice: Some(1.0), ..Default::default() }).unwrap();
        assert!(!run.truncated);
        let mut last_y = 0.0;
        for rec in &run.epochs {
            assert!(rec.z.min >= 1.0 - 1e-12, "epoch {}", rec.epoch);
            let x0 = rec.y.unwrap() * rec.d_n;
            assert!(x0 >= last_y);
            last_y = x0;
        }
    }

    #[test]
    fn exhausted_configuration_is_flagged() {
        let config = Configuration::new(vec![0.0, 1.0, 2.0], Topology::Torus { length: 3.0 }).unwrap();
        let sched = EpochSchedule::linear(8);
        let rates = |n: usize| make_rate_spec(&Preset::IsingT0, n, &sched);
        let run = run_hcp(&config, &sched, &rates, 4, &mut StreamRng::new(3, 0), &HcpOptions::default()).unwrap();
        assert!(run.truncated);
        assert!(run.epochs.len() < 4);
    }

    #[test]
    fn replicas_do_not_depend_on_workers() {
        let sched = EpochSchedule::linear(8);
        let law = GapLaw::from_preset(&IntervalLawPreset::Geometric { p: 0.5, h: 1.0 }).unwrap();
        let run = |_: usize, rng: &mut StreamRng| {
            let config = sample_ren_delta0(&law, 200, rng)?;
            let rates = |n: usize| make_rate_spec(&Preset::IsingT0, n, &sched);
            run_hcp(&config, &sched, &rates, 4, rng, &HcpOptions { lattice: Some(1.0), ..Default::default() })
        };
        let a = run_replicas(12, 5, 1, 4, &run).unwrap();
        let b = run_replicas(12, 5, 3, 4, &run).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.y[3].count, 12);
    }
}
