//! Distributional properties of simulated epochs.

use hcp::model::{make_rate_spec, EpochSchedule, Preset};
use hcp::ocp::{run_epoch, RunOptions};
use hcp::rng::StreamRng;
use hcp::runner::{run_hcp, HcpOptions};
use hcp::spp::{sample_ren_delta0, GapLaw, IntervalLawPreset};
use hcp::stats::{dkw_half_width, lag1_correlation};

fn geometric() -> GapLaw {
    GapLaw::from_preset(&IntervalLawPreset::Geometric { p: 0.5, h: 1.0 }).unwrap()
}

#[test]
fn gaps_stay_renewal_after_an_epoch() {
    let schedule = EpochSchedule::linear(8);
    for preset in [Preset::IsingT0, Preset::PasteAll] {
        let spec = make_rate_spec(&preset, 1, &schedule).unwrap();
        let mut rng = StreamRng::new(31, 0);
        let config = sample_ren_delta0(&geometric(), 400_000, &mut rng).unwrap();
        let (out, _) = run_epoch(&config, &spec, &mut rng, &RunOptions::default()).unwrap();
        let gaps = out.trusted_gaps();
        let m = gaps.len();
        let rho = lag1_correlation(&gaps);
        assert!(rho.abs() <= 3.0 / (m as f64).sqrt(), "{} rho {rho} over {m} gaps", preset.name());

        // the two halves of the line carry the same gap law
        let (a, b) = gaps.split_at(m / 2);
        let cdf = |xs: &[f64], x: f64| xs.iter().filter(|&&g| g <= x).count() as f64 / xs.len() as f64;
        let ks = (2..40).map(|x| (cdf(a, x as f64) - cdf(b, x as f64)).abs()).fold(0.0, f64::max);
        let band = dkw_half_width(a.len() as u64, 0.001) + dkw_half_width(b.len() as u64, 0.001);
        assert!(ks <= band, "{} ks {ks} band {band}", preset.name());
    }
}

/// Mean and `E e^(-Z)` of the final gaps whose right end lies left of `cut`.
fn restricted_stats(n_intervals: usize, cut: f64, replicas: u64) -> (f64, f64, f64, f64) {
    let schedule = EpochSchedule::linear(16);
    let rates = |n: usize| make_rate_spec(&Preset::IsingT0, n, &schedule);
    let law = geometric();
    let (mut sum, mut sq, mut lap, mut lap_sq, mut count) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..replicas {
        let mut rng = StreamRng::new(77 + n_intervals as u64, i);
        let config = sample_ren_delta0(&law, n_intervals, &mut rng).unwrap();
        let run = run_hcp(&config, &schedule, &rates, 5, &mut rng, &HcpOptions::default()).unwrap();
        let pts = run.final_configuration.points();
        for w in pts.windows(2).filter(|w| w[1] < cut) {
            let z = (w[1] - w[0]) / schedule.d(5);
            let e = (-z).exp();
            sum += z;
            sq += z * z;
            lap += e;
            lap_sq += e * e;
            count += 1.0;
        }
    }
    let mean = sum / count;
    let g = lap / count;
    (mean, ((sq / count - mean * mean) / count).sqrt(), g, ((lap_sq / count - g * g) / count).sqrt())
}

#[test]
fn doubling_the_line_leaves_the_front_unchanged() {
    let n = 2000;
    let cut = n as f64 / 4.0 * 2.0;
    let (m1, s1, g1, e1) = restricted_stats(n, cut, 300);
    let (m2, s2, g2, e2) = restricted_stats(2 * n, cut, 300);
    assert!((m1 - m2).abs() <= 4.0 * (s1 * s1 + s2 * s2).sqrt(), "mean {m1} vs {m2}");
    assert!((g1 - g2).abs() <= 4.0 * (e1 * e1 + e2 * e2).sqrt(), "laplace {g1} vs {g2}");
}
