use crate::error::{Error, Result};
use crate::model::schedule::DEFAULT_HORIZON;
use crate::model::{make_rate_spec, CaseTag, EpochSchedule, PiecewiseLinear, Preset, RateFn, RateSpec};
use crate::runner::log_grid;
use crate::spp::IntervalLawPreset;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "HCP_SEED";

/// One experiment, as read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub epochs: usize,
    #[serde(default = "one")]
    pub replicas: usize,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub model: ModelConfig,
    pub initial: IntervalLawPreset,
    pub schedule: ScheduleConfig,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub s_grid: SGridConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub ode: OdeConfig,
}

fn one() -> usize {
    1
}

/// A rate as a constant or as a piecewise-linear table in the rescaled length
/// `d/d⁽ⁿ⁾`, so the same table serves every epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum RateConfig {
    Const(f64),
    Table { z: Vec<f64>, rate: Vec<f64> },
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig::Const(0.0)
    }
}

impl RateConfig {
    fn to_rate_fn(&self, d_min: f64) -> Result<RateFn> {
        Ok(match self {
            RateConfig::Const(c) => RateFn::Const(*c),
            RateConfig::Table { z, rate } => {
                let t = PiecewiseLinear::new(z.clone(), rate.clone())?;
                RateFn::func(move |d| t.eval(d / d_min))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    East {
        #[serde(default = "unit_rate")]
        left: RateConfig,
    },
    PasteAll,
    IsingT0,
    Custom {
        #[serde(default)]
        left: RateConfig,
        #[serde(default)]
        right: RateConfig,
        #[serde(default)]
        ann: RateConfig,
        #[serde(default)]
        expect: Option<CaseTag>,
    },
}

fn unit_rate() -> RateConfig {
    RateConfig::Const(1.0)
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::East { .. } => "east",
            ModelConfig::PasteAll => "paste_all",
            ModelConfig::IsingT0 => "ising_t0",
            ModelConfig::Custom { .. } => "custom",
        }
    }

    /// Rates of epoch `n`.
    pub fn rate_spec(&self, n: usize, schedule: &EpochSchedule) -> Result<RateSpec> {
        let d_min = schedule.d(n);
        let preset = match self {
            ModelConfig::East { left } => Preset::East { left: left.to_rate_fn(d_min)? },
            ModelConfig::PasteAll => Preset::PasteAll,
            ModelConfig::IsingT0 => Preset::IsingT0,
            ModelConfig::Custom { left, right, ann, expect } => Preset::Custom {
                left: left.to_rate_fn(d_min)?,
                right: right.to_rate_fn(d_min)?,
                ann: ann.to_rate_fn(d_min)?,
                expect: *expect,
            },
        };
        make_rate_spec(&preset, n, schedule)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Linear,
    East,
    Geometric {
        a: f64,
    },
    Explicit {
        values: Vec<f64>,
        #[serde(default)]
        acknowledge_divergence: bool,
    },
}

impl ScheduleConfig {
    /// Materializes at least `epochs + 1` values.
    pub fn build(&self, epochs: usize) -> Result<EpochSchedule> {
        let horizon = (epochs + 1).max(DEFAULT_HORIZON);
        let s = match self {
            ScheduleConfig::Linear => EpochSchedule::linear(horizon),
            ScheduleConfig::East => EpochSchedule::east(horizon),
            ScheduleConfig::Geometric { a } => {
                if !(*a > 1.0 && *a <= 2.0) {
                    return Err(Error::Schedule(format!("geometric ratio a = {a} outside (1, 2]: assumption (A2) needs a ≤ 2")));
                }
                EpochSchedule::geometric(*a, horizon)
            }
            ScheduleConfig::Explicit { values, acknowledge_divergence } => {
                if values.len() < epochs + 1 {
                    return Err(Error::Schedule(format!("{} values cannot cover {epochs} epochs; need {}", values.len(), epochs + 1)));
                }
                let s = EpochSchedule::explicit(values.clone());
                if *acknowledge_divergence {
                    s.acknowledge_divergence()
                } else {
                    s
                }
            }
        };
        s.validate().into_result()?;
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    /// Stationary start on a circle, of the given length or of `intervals` mean gaps.
    Torus {
        #[serde(default)]
        length: Option<f64>,
        #[serde(default)]
        intervals: Option<usize>,
    },
    /// A point at the origin followed by `intervals` independent gaps.
    HalfLine { intervals: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SGridConfig {
    #[serde(default = "s_lo")]
    pub lo: f64,
    #[serde(default = "s_hi")]
    pub hi: f64,
    #[serde(default = "s_points")]
    pub points: usize,
    /// Explicit values; overrides the log-spaced grid.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

fn s_lo() -> f64 {
    0.05
}
fn s_hi() -> f64 {
    10.0
}
fn s_points() -> usize {
    64
}

impl Default for SGridConfig {
    fn default() -> Self {
        Self { lo: s_lo(), hi: s_hi(), points: s_points(), values: None }
    }
}

impl SGridConfig {
    pub fn build(&self) -> Result<Vec<f64>> {
        let g = match &self.values {
            Some(v) => v.clone(),
            None => {
                if !(self.lo > 0.0 && self.hi > self.lo && self.points >= 1) {
                    return Err(Error::Config(format!("s_grid needs 0 < lo < hi and points ≥ 1, got lo = {}, hi = {}, points = {}", self.lo, self.hi, self.points)));
                }
                log_grid(self.lo, self.hi, self.points)
            }
        };
        if g.is_empty() || g.iter().any(|&s| !(s > 0.0 && s.is_finite())) || g.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("s_grid values must be positive and increasing".into()));
        }
        Ok(g)
    }
}

/// What to compute and write.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "yes")]
    pub interval_law: bool,
    #[serde(default)]
    pub leftmost: bool,
    #[serde(default)]
    pub ode_check: bool,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub limit_compare: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self { interval_law: true, leftmost: false, ode_check: false, oracle: false, limit_compare: false }
    }
}

/// Pass thresholds for the requested checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Sup over the s-grid of `|ĝ - g_ref|` against an exact reference.
    #[serde(default = "tol_laplace")]
    pub laplace_sup: f64,
    /// Allowed excess of the KS distance over the 99% DKW band.
    #[serde(default = "tol_ks")]
    pub ks_slack: f64,
    /// Total variation between the ODE endpoint and the exact epoch-2 law.
    #[serde(default = "tol_ode_tv")]
    pub ode_tv: f64,
    /// Relative drift of the conserved combinations along the ODE trajectory.
    #[serde(default = "tol_ode_drift")]
    pub ode_drift: f64,
    /// Threshold on the distance to the limit law at the last epoch; unchecked when absent.
    #[serde(default)]
    pub limit_sup: Option<f64>,
}

fn tol_laplace() -> f64 {
    0.02
}
fn tol_ks() -> f64 {
    0.005
}
fn tol_ode_tv() -> f64 {
    1e-5
}
fn tol_ode_drift() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { laplace_sup: tol_laplace(), ks_slack: tol_ks(), ode_tv: tol_ode_tv(), ode_drift: tol_ode_drift(), limit_sup: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeConfig {
    #[serde(default = "ode_dt")]
    pub dt: f64,
    #[serde(default = "ode_t_end")]
    pub t_end: f64,
}

fn ode_dt() -> f64 {
    0.01
}
fn ode_t_end() -> f64 {
    20.0
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { dt: ode_dt(), t_end: ode_t_end() }
    }
}

impl ExperimentConfig {
    /// Parses TOML; syntax and schema errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a file and applies the seed override from the environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Ok(v) = std::env::var(SEED_ENV) {
            config.seed = v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV} = {v:?} is not an unsigned integer")))?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Cross-field checks beyond the schema.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        let schedule = self.schedule.build(self.epochs)?;
        self.initial.validate()?;
        for n in 1..=self.epochs {
            let spec = self.model.rate_spec(n, &schedule)?;
            if !spec.satisfies_a2() {
                return Err(Error::Rates(format!("epoch {n}: assumption (A2) violated")));
            }
        }
        match self.topology {
            TopologyConfig::Torus { length, intervals } => match (length, intervals) {
                (Some(l), None) if l > 0.0 && l.is_finite() => {}
                (None, Some(n)) if n > 0 => {}
                _ => return Err(Error::Config("torus needs exactly one of a positive `length` or `intervals`".into())),
            },
            TopologyConfig::HalfLine { intervals } => {
                if intervals == 0 {
                    return Err(Error::Config("half_line needs intervals ≥ 1".into()));
                }
            }
        }
        if self.outputs.leftmost && !matches!(self.topology, TopologyConfig::HalfLine { .. }) {
            return Err(Error::Config("leftmost statistics need the half_line topology".into()));
        }
        self.s_grid.build()?;
        if !(self.ode.dt > 0.0 && self.ode.t_end > 0.0) {
            return Err(Error::Config("ode.dt and ode.t_end must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<EpochSchedule> {
        self.schedule.build(self.epochs)
    }
}
