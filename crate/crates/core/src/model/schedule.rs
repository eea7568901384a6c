use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default number of epochs materialized by the closed-form schedules.
pub const DEFAULT_HORIZON: usize = 64;

/// How the schedule was produced. Closed-form families are known to grow without
/// bound; explicit lists are only checked on the materialized prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Linear,
    East,
    Geometric { a: f64 },
    Explicit,
}

/// The increasing sequence of minimal active lengths `d[1] = 1 < d[2] < …`.
///
/// Stored zero-based: `d(1)` is `values()[0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSchedule {
    d: Vec<f64>,
    kind: ScheduleKind,
    /// User acknowledgement that the explicit list diverges even if the finite prefix
    /// grows slowly.
    pub divergence_acknowledged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Empty,
    FirstNotOne { value: f64 },
    NotIncreasing { index: usize },
    /// `2·d[n] < d[n+1]`: a merged domain could be active again.
    A2 { index: usize },
    /// The prefix grows slower than `2^(horizon/4)` without acknowledgement.
    A3 { horizon: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Empty => write!(f, "schedule is empty"),
            Violation::FirstNotOne { value } => write!(f, "d[1] must be 1, got {value}"),
            Violation::NotIncreasing { index } => write!(f, "d[{index}] >= d[{}]: not strictly increasing", index + 1),
            Violation::A2 { index } => {
                write!(f, "assumption (A2) violated: 2*d[{index}] < d[{}]", index + 1)
            }
            Violation::A3 { horizon } => write!(
                f,
                "assumption (A3) not established: d[{horizon}] < 2^({horizon}/4) and divergence not acknowledged"
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let msg: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        Err(Error::Schedule(msg.join("; ")))
    }
}

impl EpochSchedule {
    /// `d[n] = n`.
    pub fn linear(horizon: usize) -> Self {
        Self { d: (1..=horizon + 1).map(|n| n as f64).collect(), kind: ScheduleKind::Linear, divergence_acknowledged: false }
    }

    /// `d[1] = 1`, `d[n] = 2^(n-2) + 1` for `n ≥ 2`.
    pub fn east(horizon: usize) -> Self {
        let horizon = horizon.min(60);
        let d = (1..=horizon + 1)
            .map(|n| if n == 1 { 1.0 } else { (1u64 << (n - 2)) as f64 + 1.0 })
            .collect();
        Self { d, kind: ScheduleKind::East, divergence_acknowledged: false }
    }

    /// `d[n] = a^(n-1)`. Not validated here; `a > 2` violates (A2).
    pub fn geometric(a: f64, horizon: usize) -> Self {
        Self { d: (0..=horizon).map(|k| a.powi(k as i32)).collect(), kind: ScheduleKind::Geometric { a }, divergence_acknowledged: false }
    }

    /// Explicit list `d[1], d[2], …`.
    pub fn explicit(d: Vec<f64>) -> Self {
        Self { d, kind: ScheduleKind::Explicit, divergence_acknowledged: false }
    }

    pub fn acknowledge_divergence(mut self) -> Self {
        self.divergence_acknowledged = true;
        self
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.d
    }

    /// `d[n]`, one-based. Panics past the materialized range.
    pub fn d(&self, n: usize) -> f64 {
        self.d[n - 1]
    }

    /// Number of epochs with both ends `d[n]`, `d[n+1]` materialized.
    pub fn horizon(&self) -> usize {
        self.d.len().saturating_sub(1)
    }

    /// `a_n = d[n+1]/d[n]`.
    pub fn ratio(&self, n: usize) -> f64 {
        self.d(n + 1) / self.d(n)
    }

    /// Checks `d[1] = 1`, strict increase, (A2) at every materialized step and a
    /// finite-prefix proxy for (A3).
    pub fn validate(&self) -> ValidationReport {
        validate_schedule(self)
    }
}

/// Lists every violated schedule constraint with its (one-based) index.
pub fn validate_schedule(schedule: &EpochSchedule) -> ValidationReport {
    let d = &schedule.d;
    let mut violations = Vec::new();
    if d.is_empty() {
        violations.push(Violation::Empty);
        return ValidationReport { violations };
    }
    if d[0] != 1.0 {
        violations.push(Violation::FirstNotOne { value: d[0] });
    }
    for (i, w) in d.windows(2).enumerate() {
        let n = i + 1;
        if !(w[1] > w[0]) {
            violations.push(Violation::NotIncreasing { index: n });
        }
        if 2.0 * w[0] < w[1] {
            violations.push(Violation::A2 { index: n });
        }
    }
    // Closed-form families diverge by construction; explicit lists need a visibly
    // fast-growing prefix or an acknowledgement.
    if schedule.kind == ScheduleKind::Explicit && !schedule.divergence_acknowledged {
        let horizon = d.len();
        let needed = d[0] * 2f64.powf(horizon as f64 / 4.0);
        if d[horizon - 1] < needed {
            violations.push(Violation::A3 { horizon });
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn east_schedule_is_valid() {
        let s = EpochSchedule::explicit(vec![1.0, 2.0, 3.0, 5.0, 9.0, 17.0]);
        assert!(validate_schedule(&s).is_valid(), "{:?}", validate_schedule(&s));
        let e = EpochSchedule::east(20);
        assert_eq!(&e.values()[..6], &[1.0, 2.0, 3.0, 5.0, 9.0, 17.0]);
        assert!(e.validate().is_valid());
    }

    #[test]
    fn linear_prefix_is_valid() {
        let s = EpochSchedule::explicit(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(validate_schedule(&s).is_valid());
        assert!(EpochSchedule::linear(DEFAULT_HORIZON).validate().is_valid());
    }

    #[test]
    fn a2_violation_is_reported_with_index() {
        let s = EpochSchedule::explicit(vec![1.0, 3.0]);
        let r = validate_schedule(&s);
        assert!(!r.is_valid());
        assert!(r.violations.contains(&Violation::A2 { index: 1 }));
        assert!(r.into_result().unwrap_err().to_string().contains("(A2)"));
    }

    #[test]
    fn geometric_family() {
        for a in [1.1, 1.5, 2.0] {
            assert!(EpochSchedule::geometric(a, 64).validate().is_valid(), "a={a}");
        }
        let r = EpochSchedule::geometric(2.5, 10).validate();
        assert!(r.violations.iter().all(|v| matches!(v, Violation::A2 { .. })));
        assert_eq!(r.violations.len(), 10);
    }

    #[test]
    fn other_violations() {
        assert_eq!(validate_schedule(&EpochSchedule::explicit(vec![])).violations, vec![Violation::Empty]);
        let r = validate_schedule(&EpochSchedule::explicit(vec![2.0, 3.0]));
        assert!(r.violations.contains(&Violation::FirstNotOne { value: 2.0 }));
        let r = validate_schedule(&EpochSchedule::explicit(vec![1.0, 1.0]));
        assert!(r.violations.contains(&Violation::NotIncreasing { index: 1 }));
        // a long slowly growing explicit list needs acknowledgement
        let slow: Vec<f64> = (1..=40).map(|n| n as f64).collect();
        assert!(!validate_schedule(&EpochSchedule::explicit(slow.clone())).is_valid());
        assert!(validate_schedule(&EpochSchedule::explicit(slow).acknowledge_divergence()).is_valid());
    }
}
