//! One epoch of the one-sided coalescence process on a torus.

use hcp::model::{make_rate_spec, EpochSchedule, Preset};
use hcp::ocp::{run_epoch, RunOptions};
use hcp::rng::StreamRng;
use hcp::spp::{sample_ren_stationary, GapLaw, IntervalLawPreset, Region};

fn main() -> hcp::Result<()> {
    let law = GapLaw::from_preset(&IntervalLawPreset::Geometric { p: 0.5, h: 1.0 })?;
    let mut rng = StreamRng::new(2024, 0);
    let config = sample_ren_stationary(&law, Region::Torus { length: 20_000.0 }, &mut rng)?;
    let schedule = EpochSchedule::linear(8);
    let spec = make_rate_spec(&Preset::IsingT0, 1, &schedule)?;
    let (next, trace) = run_epoch(&config, &spec, &mut rng, &RunOptions::default())?;
    println!("points before: {}", config.len());
    println!("points after:  {}", next.len());
    println!("events: {} (left {}, right {}, both {})", trace.events, trace.merges.left, trace.merges.right, trace.merges.both);
    let shortest = next.gaps().into_iter().fold(f64::INFINITY, f64::min);
    println!("shortest gap after the epoch: {shortest}");
    Ok(())
}
