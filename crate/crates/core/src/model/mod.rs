//! Domain types shared by the simulator and the analytic oracle: epoch
//! schedules, coalescence rates and point configurations.

pub mod configuration;
pub mod rates;
pub mod schedule;

pub use configuration::{Configuration, Topology};
pub use rates::{classify_case, make_rate_spec, CaseTag, LeftmostCase, PiecewiseLinear, Preset, RateFn, RateSpec};
pub use schedule::{validate_schedule, EpochSchedule, ScheduleKind, ValidationReport, Violation};
