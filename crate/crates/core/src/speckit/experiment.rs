use super::compare::{compare_report, Comparison, Reference};
use super::config::{ExperimentConfig, TopologyConfig};
use crate::analytic::{c0_estimate, epoch_interval_law, leftmost_laplace, m_measure, Transform};
use crate::error::{Error, Result};
use crate::limits::{limit_interval_laplace, limit_leftmost_laplace_case_i, limit_leftmost_laplace_case_ii, LimitLawParams};
use crate::measure::GridMeasure;
use crate::model::{CaseTag, EpochSchedule, LeftmostCase, RateSpec};
use crate::ode::{endpoint_check, evolve_epoch_ode, invariant_drift, OdeOptions};
use crate::runner::{empirical_laplace, run_hcp, run_replicas, HcpOptions, ReplicaSummary};
use crate::spp::{interval_law_preset, sample_ren_delta0, sample_ren_stationary, GapLaw, Region};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Largest lattice index the exact laws are computed up to.
const ORACLE_MAX_SITES: f64 = (1u64 << 17) as f64;
/// Preferred range of the exact laws in rescaled units.
const ORACLE_Z_MAX: f64 = 64.0;
/// Smallest acceptable range when the lattice cap forces a cut.
const ORACLE_Z_MIN: f64 = 16.0;
/// Lattice sites used for the `c₀` extrapolation.
const C0_SITES: f64 = (1u64 << 20) as f64;

/// One pass/fail line of the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub d_n: f64,
    pub count: u64,
    pub mean: f64,
    pub min: f64,
    pub oracle: Option<Comparison>,
    /// `sup_s |ĝ - g_limit|`.
    pub limit_sup: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeftmostReport {
    pub epoch: usize,
    /// Replicas whose first point was still trusted.
    pub count: u64,
    pub oracle_sup: Option<f64>,
    pub limit_sup: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierReport {
    pub min_trusted_points: usize,
    pub truncated_replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeReport {
    pub drift: f64,
    pub leftmost_drift: Option<f64>,
    pub endpoint: f64,
    pub leftmost_endpoint: Option<f64>,
    /// Total variation between the rescaled endpoint and the exact epoch-2 law.
    pub tv_epoch2: f64,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub version: String,
    pub seed: u64,
    pub replicas: usize,
    pub epochs: usize,
    pub model: String,
    pub case: CaseTag,
    pub leftmost_case: Option<LeftmostCase>,
    pub c0: Option<f64>,
    pub interval: Vec<EpochReport>,
    pub leftmost: Vec<LeftmostReport>,
    pub ode: Option<OdeReport>,
    pub frontier: Option<FrontierReport>,
    /// Requested outputs that could not be produced, with the reason.
    pub unavailable: Vec<String>,
    pub checks: Vec<Check>,
    pub wall_time_s: BTreeMap<String, f64>,
    pub files: Vec<String>,
    pub passed: bool,
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn laplace_header() -> String {
    "epoch,s,value,stderr\n".to_string()
}

fn push_exact_rows(out: &mut String, epoch: usize, s_grid: &[f64], values: &[f64]) {
    for (s, v) in s_grid.iter().zip(values) {
        writeln!(out, "{epoch},{s:.16e},{v:.16e},{:.16e}", 0.0).unwrap();
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn timed<T>(times: &mut BTreeMap<String, f64>, key: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    times.insert(key.to_string(), start.elapsed().as_secs_f64());
    out
}

/// Exact per-epoch laws for lattice initial laws in cases (i) and (ii).
struct Oracle {
    laws: Vec<GridMeasure>,
}

fn common_transform(specs: &[RateSpec]) -> Result<Transform> {
    let first = Transform::from_case(specs[0].case())?;
    if specs.iter().any(|s| s.case() != specs[0].case()) {
        return Err(Error::Unavailable("the rates change case between epochs".into()));
    }
    Ok(first)
}

fn common_leftmost(specs: &[RateSpec]) -> Result<LeftmostCase> {
    let first = specs[0].leftmost_case().ok_or_else(|| Error::Unavailable("no closed form for the first point under these rates".into()))?;
    if specs.iter().any(|s| s.leftmost_case() != Some(first)) {
        return Err(Error::Unavailable("the first-point case changes between epochs".into()));
    }
    Ok(first)
}

/// Range in original units and the per-epoch rescaled range of the exact laws.
fn oracle_range(h: f64, d_last: f64) -> Result<(f64, f64)> {
    let z_max = ORACLE_Z_MAX.min(ORACLE_MAX_SITES * h / d_last);
    if z_max < ORACLE_Z_MIN {
        return Err(Error::Unavailable(format!("d = {d_last} needs more than {ORACLE_MAX_SITES} lattice sites for the exact law")));
    }
    Ok((d_last * z_max, z_max))
}

fn build_oracle(config: &ExperimentConfig, schedule: &EpochSchedule, specs: &[RateSpec]) -> Result<Oracle> {
    let h = config.initial.lattice().ok_or_else(|| Error::Unavailable("the initial law is not on a lattice".into()))?;
    let transform = common_transform(specs)?;
    let (x_max, _) = oracle_range(h, schedule.d(config.epochs))?;
    let mu = interval_law_preset(&config.initial, x_max)?;
    let m = m_measure(&mu, transform, x_max)?;
    let mut laws = Vec::with_capacity(config.epochs);
    for n in 1..=config.epochs {
        let d_n = schedule.d(n);
        laws.push(epoch_interval_law(&m, d_n, transform, x_max / d_n)?.law);
    }
    Ok(Oracle { laws })
}

fn initial_measure_for_c0(config: &ExperimentConfig) -> Result<GridMeasure> {
    let h = match config.initial.lattice() {
        Some(h) => h,
        None => match config.initial {
            crate::spp::IntervalLawPreset::TruncatedPareto { h, .. } => h,
            _ => return Err(Error::Unavailable("no lattice for the initial law".into())),
        },
    };
    interval_law_preset(&config.initial, C0_SITES * h)
}

fn simulate(config: &ExperimentConfig, schedule: &EpochSchedule, specs: &[RateSpec], s_grid: &[f64], workers: usize) -> Result<ReplicaSummary> {
    let law = GapLaw::from_preset(&config.initial)?;
    let opts = HcpOptions { s_grid: s_grid.to_vec(), lattice: config.initial.lattice(), ..Default::default() };
    let rates = |n: usize| Ok(specs[n - 1].clone());
    let topology = config.topology.clone();
    let run = |_: usize, rng: &mut crate::rng::StreamRng| {
        let initial = match topology {
            TopologyConfig::Torus { length, intervals } => {
                let length = match (length, intervals) {
                    (Some(l), _) => l,
                    (None, Some(k)) => {
                        let l = k as f64 * law.mean();
                        law.lattice().map_or(l, |h| (l / h).round().max(1.0) * h)
                    }
                    (None, None) => return Err(Error::Config("torus size missing".into())),
                };
                sample_ren_stationary(&law, Region::Torus { length }, rng)?
            }
            TopologyConfig::HalfLine { intervals } => sample_ren_delta0(&law, intervals, rng)?,
        };
        run_hcp(&initial, schedule, &rates, config.epochs, rng, &opts)
    };
    run_replicas(config.replicas, config.seed, workers, config.epochs, &run)
}

/// Runs the experiment described by `config` and writes its outputs to `out_dir`.
///
/// `workers` overrides the configured worker count. Outputs other than
/// `report.json` depend only on the configuration and seed.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path, workers: Option<usize>) -> Result<Report> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let mut w = Writer { dir: out_dir.to_path_buf(), files: Vec::new() };
    let mut times = BTreeMap::new();
    let mut unavailable = Vec::new();
    let mut checks = Vec::new();
    let tol = &config.tolerances;

    let schedule = config.schedule()?;
    let s_grid = config.s_grid.build()?;
    let specs: Vec<RateSpec> = (1..=config.epochs).map(|n| config.model.rate_spec(n, &schedule)).collect::<Result<_>>()?;
    let workers = workers.unwrap_or(config.workers);

    let summary = timed(&mut times, "simulate", || simulate(config, &schedule, &specs, &s_grid, workers))?;

    let mut laplace = laplace_header();
    for z in &summary.z {
        let mut hist = String::from("epoch,z_bin_lo,z_bin_hi,mass\n");
        z.histogram_csv_rows(&mut hist);
        w.write(&format!("epoch_{:03}.csv", z.epoch), &hist)?;
        z.laplace_csv_rows(&mut laplace)?;
    }
    if config.outputs.interval_law {
        w.write("laplace.csv", &laplace)?;
    }

    let mut interval: Vec<EpochReport> = summary
        .z
        .iter()
        .map(|z| EpochReport { epoch: z.epoch, d_n: schedule.d(z.epoch), count: z.count, mean: z.mean(), min: z.min, oracle: None, limit_sup: None })
        .collect();

    if config.outputs.oracle {
        match timed(&mut times, "oracle", || build_oracle(config, &schedule, &specs)) {
            Ok(oracle) => {
                let mut rows = laplace_header();
                for (k, law) in oracle.laws.iter().enumerate() {
                    let epoch = k + 1;
                    let reference = Reference::from_law(law.clone(), &s_grid);
                    push_exact_rows(&mut rows, epoch, &s_grid, &reference.laplace);
                    let mut body = String::from("epoch,z,mass\n");
                    for (z, p) in law.iter() {
                        writeln!(body, "{epoch},{z:.16e},{p:.16e}").unwrap();
                    }
                    w.write(&format!("oracle_epoch_{epoch:03}.csv"), &body)?;
                    if let Some(rep) = interval.get_mut(k) {
                        let c = compare_report(&summary.z[k], &reference, tol)?;
                        checks.push(Check::new(format!("oracle_laplace_epoch_{epoch}"), c.sup_laplace, tol.laplace_sup));
                        if let Some(ks) = c.ks {
                            checks.push(Check::new(format!("oracle_ks_epoch_{epoch}"), ks, c.dkw_band + tol.ks_slack));
                        }
                        rep.oracle = Some(c);
                    }
                }
                w.write("oracle_laplace.csv", &rows)?;
            }
            Err(Error::Unavailable(why)) => unavailable.push(format!("oracle: {why}")),
            Err(e) => return Err(e),
        }
    }

    let needs_c0 = config.outputs.limit_compare;
    let mut c0 = None;
    if needs_c0 {
        match timed(&mut times, "c0", || initial_measure_for_c0(config).and_then(|mu| c0_estimate(&mu))) {
            Ok(est) => {
                if !est.converged {
                    unavailable.push(format!("limit: c0 extrapolation did not settle (residual {:.3e})", est.residual));
                }
                c0 = Some(est.value);
            }
            Err(Error::Unavailable(why)) => unavailable.push(format!("limit: {why}")),
            Err(e) => return Err(e),
        }
    }

    if let (true, Some(c0)) = (config.outputs.limit_compare, c0) {
        match common_transform(&specs) {
            Ok(t) => {
                let params = LimitLawParams::new(t, c0)?;
                let limit: Vec<f64> = s_grid.iter().map(|&s| limit_interval_laplace(&params, s)).collect::<Result<_>>()?;
                let mut rows = laplace_header();
                push_exact_rows(&mut rows, 0, &s_grid, &limit);
                w.write("limit_laplace.csv", &rows)?;
                for (rep, z) in interval.iter_mut().zip(&summary.z) {
                    rep.limit_sup = Some(sup_distance(&empirical_laplace(z)?, &limit));
                }
                if let (Some(t), Some(last)) = (tol.limit_sup, interval.last()) {
                    checks.push(Check::new(format!("limit_laplace_epoch_{}", last.epoch), last.limit_sup.unwrap_or(f64::INFINITY), t));
                }
            }
            Err(Error::Unavailable(why)) => unavailable.push(format!("limit: {why}")),
            Err(e) => return Err(e),
        }
    }

    let mut leftmost = Vec::new();
    if config.outputs.leftmost {
        let mut rows = laplace_header();
        for y in summary.y.iter().filter(|y| y.count > 0) {
            y.laplace_csv_rows(&mut rows)?;
            leftmost.push(LeftmostReport { epoch: y.epoch, count: y.count, oracle_sup: None, limit_sup: None });
        }
        w.write("leftmost_laplace.csv", &rows)?;
        let exact = timed(&mut times, "leftmost", || -> Result<Vec<(usize, Vec<f64>)>> {
            let case = common_leftmost(&specs)?;
            let h = config.initial.lattice().ok_or_else(|| Error::Unavailable("the initial law is not on a lattice".into()))?;
            let (x_max, _) = oracle_range(h, schedule.d(config.epochs))?;
            let mu = interval_law_preset(&config.initial, x_max)?;
            let t = match case {
                LeftmostCase::I { .. } => Transform::CaseI,
                LeftmostCase::II | LeftmostCase::Frozen => Transform::CaseII { gamma: 0.0 },
            };
            let m = m_measure(&mu, t, x_max)?;
            (1..=config.epochs).map(|n| Ok((n, leftmost_laplace(n, case, &mu, &m, &schedule, None, &s_grid)?))).collect()
        });
        match exact {
            Ok(exact) => {
                let mut rows = laplace_header();
                for (n, v) in &exact {
                    push_exact_rows(&mut rows, *n, &s_grid, v);
                }
                w.write("leftmost_oracle_laplace.csv", &rows)?;
                for rep in leftmost.iter_mut() {
                    let y = &summary.y[rep.epoch - 1];
                    let d = sup_distance(&empirical_laplace(y)?, &exact[rep.epoch - 1].1);
                    rep.oracle_sup = Some(d);
                    checks.push(Check::new(format!("leftmost_oracle_epoch_{}", rep.epoch), d, tol.laplace_sup));
                }
            }
            Err(Error::Unavailable(why)) | Err(Error::Law(why)) => unavailable.push(format!("leftmost oracle: {why}")),
            Err(e) => return Err(e),
        }
        let limit = match (common_leftmost(&specs), c0) {
            (Ok(LeftmostCase::II), _) => Some(s_grid.iter().map(|&s| limit_leftmost_laplace_case_ii(s)).collect::<Result<Vec<_>>>()?),
            (Ok(LeftmostCase::I { gamma }), Some(c0)) => {
                Some(s_grid.iter().map(|&s| limit_leftmost_laplace_case_i(c0, gamma, s)).collect::<Result<Vec<_>>>()?)
            }
            (Ok(LeftmostCase::I { .. }), None) => {
                unavailable.push("leftmost limit: needs limit_compare for c0".into());
                None
            }
            (Ok(LeftmostCase::Frozen), _) => {
                unavailable.push("leftmost limit: the first point never moves".into());
                None
            }
            (Err(_), _) => {
                unavailable.push("leftmost limit: no closed form under these rates".into());
                None
            }
        };
        if let Some(limit) = limit {
            let mut rows = laplace_header();
            push_exact_rows(&mut rows, 0, &s_grid, &limit);
            w.write("leftmost_limit_laplace.csv", &rows)?;
            for rep in leftmost.iter_mut() {
                rep.limit_sup = Some(sup_distance(&empirical_laplace(&summary.y[rep.epoch - 1])?, &limit));
            }
        }
    }

    let frontier = matches!(config.topology, TopologyConfig::HalfLine { .. }).then(|| FrontierReport {
        min_trusted_points: if summary.min_trusted_points == usize::MAX { 0 } else { summary.min_trusted_points },
        truncated_replicas: summary.truncated_replicas,
    });

    let mut ode = None;
    if config.outputs.ode_check {
        match timed(&mut times, "ode", || ode_check(config, &schedule, &specs, &s_grid)) {
            Ok((rep, csv)) => {
                w.write("ode_epoch_001.csv", &csv)?;
                checks.push(Check::new("ode_invariant_drift", rep.drift, tol.ode_drift));
                if let Some(d) = rep.leftmost_drift {
                    checks.push(Check::new("ode_leftmost_invariant_drift", d, tol.ode_drift));
                }
                checks.push(Check::new("ode_endpoint", rep.endpoint, tol.ode_tv));
                checks.push(Check::new("ode_tv_epoch_2", rep.tv_epoch2, tol.ode_tv));
                ode = Some(rep);
            }
            Err(Error::Unavailable(why)) => unavailable.push(format!("ode: {why}")),
            Err(e) => return Err(e),
        }
    }

    let case = specs[0].case();
    let mut report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        replicas: config.replicas,
        epochs: config.epochs,
        model: config.model.name().to_string(),
        case,
        leftmost_case: specs[0].leftmost_case(),
        c0,
        interval,
        leftmost,
        ode,
        frontier,
        unavailable,
        passed: checks.iter().all(|c| c.passed),
        checks,
        wall_time_s: times,
        files: Vec::new(),
    };
    w.files.push("report.json".into());
    report.files = w.files.clone();
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    w.write("report.json", &json)?;
    Ok(report)
}

/// Integrates epoch 1 from the initial law and compares the endpoint with the
/// exact epoch-2 law.
fn ode_check(config: &ExperimentConfig, schedule: &EpochSchedule, specs: &[RateSpec], s_grid: &[f64]) -> Result<(OdeReport, String)> {
    let h = config.initial.lattice().ok_or_else(|| Error::Unavailable("the initial law is not on a lattice".into()))?;
    let transform = Transform::from_case(specs[0].case())?;
    let d2 = schedule.d(2);
    let (x_max, _) = oracle_range(h, d2)?;
    let mu = interval_law_preset(&config.initial, x_max)?;
    let spec = &specs[0];
    let leftmost = spec.leftmost_case();
    let nu = match (config.topology.clone(), leftmost) {
        (TopologyConfig::HalfLine { .. }, Some(_)) => Some(GridMeasure::point(h, 0, 1.0)?),
        _ => None,
    };
    let steps = (config.ode.t_end / config.ode.dt).ceil() as usize;
    let opts = OdeOptions::new(config.ode.t_end, config.ode.dt, x_max, s_grid.to_vec()).record_every((steps / 200).max(1));
    let traj = evolve_epoch_ode(&mu, nu.as_ref(), spec, &opts)?;
    let left = nu.as_ref().and(leftmost);
    let drift = invariant_drift(&traj, transform, left)?;
    let end = endpoint_check(&traj, transform, left)?;
    let m = m_measure(&mu, transform, x_max)?;
    let exact = epoch_interval_law(&m, d2, transform, x_max / d2)?;
    let last = traj.mu_measure(traj.snapshots.len() - 1)?;
    let tv = last.rescaled(d2).total_variation(&exact.law);
    let csv = traj.to_csv(Some(transform))?;
    Ok((
        OdeReport { drift: drift.interval, leftmost_drift: drift.leftmost, endpoint: end.interval.max(end.leftmost.unwrap_or(0.0)), leftmost_endpoint: end.leftmost, tv_epoch2: tv },
        csv,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ISING: &str = r#"
seed = 11
epochs = 3
replicas = 4

[model]
preset = "ising_t0"

[initial]
kind = "geometric"
p = 0.5

[schedule]
kind = "linear"

[topology]
kind = "torus"
intervals = 20000

[outputs]
oracle = true
limit_compare = true
ode_check = true

[s_grid]
points = 16
"#;

    #[test]
    fn ising_run_writes_outputs_and_passes() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig::from_toml(ISING).unwrap();
        let report = run_experiment(&config, dir.path(), Some(1)).unwrap();
        for f in ["epoch_001.csv", "laplace.csv", "oracle_laplace.csv", "limit_laplace.csv", "ode_epoch_001.csv", "report.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(report.unavailable.is_empty(), "{:?}", report.unavailable);
        assert!(report.passed, "{:#?}", report.checks);
        assert!((report.c0.unwrap() - 1.0).abs() < 1e-3);
        let ode = report.ode.unwrap();
        assert!(ode.tv_epoch2 < 1e-5 && ode.drift < 1e-6, "{ode:?}");
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(json["schema_version"], 1);
    }

    #[test]
    fn general_rates_mark_the_oracle_unavailable() {
        let text = ISING.replace("preset = \"ising_t0\"", "preset = \"custom\"\nleft = 1.0\nann = { z = [1.0, 2.0], rate = [0.5, 1.0] }").replace("ode_check = true", "");
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&ExperimentConfig::from_toml(&text).unwrap(), dir.path(), Some(1)).unwrap();
        assert!(report.unavailable.iter().any(|u| u.starts_with("oracle")), "{:?}", report.unavailable);
        assert!(!dir.path().join("oracle_laplace.csv").exists());
    }
}
