mod common;

use common::{torus, StepRates};
use hcp::analytic::{epoch_interval_law, m_measure, Transform};
use hcp::limits::{limit_interval_laplace, LimitLawParams};
use hcp::measure::GridMeasure;
use hcp::model::{classify_case, CaseTag, RateFn, RateSpec};
use hcp::ocp::{active_domains, run_epoch, RunOptions};
use hcp::rng::StreamRng;
use hcp::runner::EmpiricalSummary;
use proptest::prelude::*;

fn transform() -> impl Strategy<Value = Transform> {
    prop_oneof![Just(Transform::CaseI), (0.0f64..5.0).prop_map(|gamma| Transform::CaseII { gamma })]
}

fn rate() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.1f64..3.0]
}

fn step_rates() -> impl Strategy<Value = StepRates> {
    ((rate(), rate(), rate()), (rate(), rate(), rate())).prop_filter("positive on the active range", |(a, b)| a.0 + a.1 + a.2 > 0.0 && b.0 + b.1 + b.2 > 0.0).prop_map(|(short, long)| StepRates { short, long })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn epoch_removes_points_and_clears_the_active_range(gaps in proptest::collection::vec(2u32..9, 2..40), rates in step_rates(), seed in any::<u64>()) {
        let config = torus(&gaps);
        let spec = rates.spec();
        let active = active_domains(&config, &spec).len() as u64;
        let (out, trace) = run_epoch(&config, &spec, &mut StreamRng::new(seed, 0), &RunOptions::default()).unwrap();
        prop_assert!(out.points().iter().all(|p| config.points().contains(p)));
        prop_assert!(trace.events <= active);
        prop_assert_eq!(config.len() as u64 - out.len() as u64 >= trace.events, true);
        prop_assert!(active_domains(&out, &spec).is_empty());
    }

    #[test]
    fn classification_ignores_time_rescaling(l in rate(), r in rate(), a in rate(), c in 0.01f64..100.0) {
        prop_assume!(l + r + a > 0.0);
        let spec = RateSpec::new(1.0, 2.0, RateFn::Const(l), RateFn::Const(r), RateFn::Const(a)).unwrap();
        let case = classify_case(&spec, 1e-12);
        let same = |a: CaseTag, b: CaseTag| match (a, b) {
            (CaseTag::CaseII { gamma: x }, CaseTag::CaseII { gamma: y }) => (x - y).abs() <= 1e-12 * (1.0 + x),
            _ => a == b,
        };
        prop_assert!(same(classify_case(&spec.scaled(c).unwrap(), 1e-12), case));
        prop_assert!(same(classify_case(&spec, 1e-12), case));
        prop_assert!(same(spec.case(), case));
    }

    #[test]
    fn first_epoch_law_is_the_initial_law(weights in proptest::collection::vec(0.0f64..1.0, 1..40), t in transform()) {
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 1e-3);
        let mu = GridMeasure::new(1.0, 1, weights.iter().map(|w| w / total).collect(), 0.0).unwrap();
        let x_max = 64.0;
        let m = m_measure(&mu, t, x_max).unwrap();
        prop_assert!(m.masses().iter().all(|&v| v >= 0.0));
        let law = epoch_interval_law(&m, 1.0, t, x_max).unwrap().law;
        prop_assert!(law.total_variation(&mu) <= 1e-10);
    }

    #[test]
    fn transforms_round_trip(x in 0.0f64..0.95, t in transform()) {
        let y = t.f(x).unwrap();
        prop_assert!((t.r(y).unwrap() - x).abs() <= 1e-12 * (1.0 + y));
    }

    #[test]
    fn summaries_are_consistent(zs in proptest::collection::vec(1.0f64..50.0, 1..200)) {
        let mut e = EmpiricalSummary::new(1, vec![0.0, 0.1, 1.0, 10.0], 0.5, true);
        zs.iter().for_each(|&z| e.push(z));
        prop_assert_eq!(e.histogram.values().sum::<u64>(), e.count);
        for acc in &e.laplace_acc {
            let g = acc / e.count as f64;
            prop_assert!(g > 0.0 && g <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn limit_law_is_monotone(a in 0.01f64..20.0, b in 0.01f64..20.0, c0 in 0.0f64..=1.0, t in transform()) {
        let p = LimitLawParams::new(t, c0).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(limit_interval_laplace(&p, hi).unwrap() <= limit_interval_laplace(&p, lo).unwrap() + 1e-15);
    }
}
