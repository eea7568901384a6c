//! Mean-field evolution of the interval law through one epoch.

use hcp::analytic::Transform;
use hcp::measure::GridMeasure;
use hcp::model::{make_rate_spec, EpochSchedule, Preset};
use hcp::ode::{endpoint_check, evolve_epoch_ode, invariant_drift, OdeOptions};

fn main() -> hcp::Result<()> {
    let schedule = EpochSchedule::linear(8);
    let spec = make_rate_spec(&Preset::IsingT0, 1, &schedule)?;
    let mu0 = GridMeasure::point(1.0, 1, 1.0)?;
    let nu0 = GridMeasure::point(1.0, 0, 1.0)?;
    let opts = OdeOptions::new(20.0, 0.01, 192.0, vec![0.1, 0.5, 1.0, 2.0]).record_every(100);
    let traj = evolve_epoch_ode(&mu0, Some(&nu0), &spec, &opts)?;
    let t = Transform::CaseII { gamma: 0.0 };
    let case = spec.leftmost_case();
    let drift = invariant_drift(&traj, t, case)?;
    let end = endpoint_check(&traj, t, case)?;
    for snap in &traj.snapshots {
        println!("t = {:>5.1}  active mass {:.3e}  G(1) = {:.6}", snap.t, snap.active_mass, snap.g[2]);
    }
    println!("invariant drift: interval {:.2e}, first point {:.2e}", drift.interval, drift.leftmost.unwrap_or(0.0));
    println!("distance to closed-form endpoint: {:.2e}", end.interval);
    Ok(())
}
