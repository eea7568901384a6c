//! Several epochs over independent replicas, with rescaled gap statistics.

use hcp::model::{make_rate_spec, EpochSchedule, Preset};
use hcp::runner::{empirical_laplace, run_hcp, run_replicas, HcpOptions};
use hcp::spp::{sample_ren_stationary, GapLaw, IntervalLawPreset, Region};

fn main() -> hcp::Result<()> {
    let epochs = 6;
    let schedule = EpochSchedule::linear(16);
    let law = GapLaw::from_preset(&IntervalLawPreset::Geometric { p: 0.5, h: 1.0 })?;
    let opts = HcpOptions { lattice: Some(1.0), s_grid: vec![0.5, 1.0, 2.0], ..Default::default() };
    let rates = |n: usize| make_rate_spec(&Preset::PasteAll, n, &schedule);
    let run = |_: usize, rng: &mut hcp::rng::StreamRng| {
        let config = sample_ren_stationary(&law, Region::Torus { length: 50_000.0 }, rng)?;
        run_hcp(&config, &schedule, &rates, epochs, rng, &opts)
    };
    let summary = run_replicas(4, 7, 0, epochs, &run)?;
    println!("epoch  d_n  count    mean(Z)  g(0.5)   g(1)     g(2)");
    for z in &summary.z {
        let g = empirical_laplace(z)?;
        println!("{:>5}  {:>3}  {:>7}  {:.4}   {:.4}   {:.4}   {:.4}", z.epoch, schedule.d(z.epoch), z.count, z.mean(), g[0], g[1], g[2]);
    }
    Ok(())
}
