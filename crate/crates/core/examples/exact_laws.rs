//! Exact finite-epoch laws of the rescaled interval and of the first point.

use hcp::analytic::{epoch_interval_law, leftmost_laplace, m_measure, Transform};
use hcp::model::{EpochSchedule, LeftmostCase};
use hcp::spp::{interval_law_preset, IntervalLawPreset};

fn main() -> hcp::Result<()> {
    let x_max = 1024.0;
    let mu = interval_law_preset(&IntervalLawPreset::Geometric { p: 0.5, h: 1.0 }, x_max)?;
    let schedule = EpochSchedule::linear(16);
    let t = Transform::CaseII { gamma: 0.0 };
    let m = m_measure(&mu, t, x_max)?;
    for n in [1, 2, 4, 8] {
        let d = schedule.d(n);
        let law = epoch_interval_law(&m, d, t, x_max / d)?;
        println!("epoch {n}: P(Z = 1) = {:.6}, E[Z; Z ≤ 64] = {:.4}", law.law.at_index(law.law.start()), law.law.mean());
    }
    let s = [0.1, 1.0, 5.0];
    let ell = leftmost_laplace(8, LeftmostCase::II, &mu, &m, &schedule, None, &s)?;
    println!("first point at epoch 8: E[exp(-sY)] = {ell:.5?} at s = {s:?}");
    Ok(())
}
