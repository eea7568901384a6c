//! Exact interval and first-point laws for lattice interval laws in the two
//! solvable rate families.
//!
//! The epoch recursion becomes linear after the transform `F`: the measure `m`
//! with `∫ e^(-sx) m(dx) = F(g(s))` is the same for every epoch, and the law at
//! epoch `n` is `R` applied to `m` restricted to `[d⁽ⁿ⁾, ∞)`.

pub mod laws;
pub mod series;

pub use laws::{
    active_laplace, c0_estimate, epoch_interval_law, epoch_interval_law_direct, interval_laplace, leftmost_laplace, log_sum_h,
    m_measure, m_measure_direct, recursion_step_laplace, C0Estimate, EpochLaw,
};
pub use series::{f_coefficients, r_coefficients, revert, SeriesCoefficients, Transform};
