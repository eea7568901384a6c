use crate::error::{Error, Result};
use crate::model::schedule::EpochSchedule;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Default tolerance for [`classify_case`], relative to the rate bound.
pub const DEFAULT_CASE_TOL: f64 = 1e-12;

/// Number of uniformly spaced lengths used to sample rate functions.
const SAMPLE_POINTS: usize = 257;

/// Piecewise-linear function through `(xs[i], ys[i])`, constant beyond the ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Rates("rate table needs matching, nonempty knots and values".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Rates("rate table knots must be strictly increasing".into()));
        }
        Ok(Self { xs, ys })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }
}

/// One rate as a function of domain length.
#[derive(Clone)]
pub enum RateFn {
    Const(f64),
    Table(PiecewiseLinear),
    Func(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl RateFn {
    pub fn zero() -> Self {
        RateFn::Const(0.0)
    }

    pub fn func(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RateFn::Func(Arc::new(f))
    }

    pub fn eval(&self, d: f64) -> f64 {
        match self {
            RateFn::Const(c) => *c,
            RateFn::Table(t) => t.eval(d),
            RateFn::Func(f) => f(d),
        }
    }

    fn scaled(&self, c: f64) -> RateFn {
        match self {
            RateFn::Const(v) => RateFn::Const(v * c),
            RateFn::Table(t) => RateFn::Table(PiecewiseLinear { xs: t.xs.clone(), ys: t.ys.iter().map(|y| y * c).collect() }),
            RateFn::Func(f) => {
                let f = f.clone();
                RateFn::Func(Arc::new(move |d| c * f(d)))
            }
        }
    }

    fn knots(&self) -> &[f64] {
        match self {
            RateFn::Table(t) => t.knots(),
            _ => &[],
        }
    }
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Const(c) => write!(f, "Const({c})"),
            RateFn::Table(t) => write!(f, "Table({} knots)", t.xs.len()),
            RateFn::Func(_) => write!(f, "Func(..)"),
        }
    }
}

/// Which closed-form recursion, if any, the rates admit for the interval law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum CaseTag {
    /// No triple merging.
    CaseI,
    /// `λ_ℓ + λ_r = γ·λ_a`.
    CaseII { gamma: f64 },
    /// Neither; simulation only.
    General,
}

/// Which closed-form recursion the first-point law admits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LeftmostCase {
    /// `λ_a = 0`, `λ_r = γ·λ_ℓ`.
    I { gamma: f64 },
    /// `λ_ℓ = λ_r = 0`.
    II,
    /// `λ_a = λ_ℓ = 0`: the first point never moves.
    Frozen,
}

/// The three coalescence rates of one epoch, zero outside `[d_min, d_max)`.
#[derive(Clone, Debug)]
pub struct RateSpec {
    d_min: f64,
    d_max: f64,
    left: RateFn,
    right: RateFn,
    ann: RateFn,
    bound: f64,
    case: CaseTag,
    leftmost: Option<LeftmostCase>,
}

impl RateSpec {
    /// Checks nonnegativity and boundedness on a length grid and derives the case tags.
    pub fn new(d_min: f64, d_max: f64, left: RateFn, right: RateFn, ann: RateFn) -> Result<Self> {
        if !(d_min > 0.0 && d_max > d_min && d_min.is_finite()) {
            return Err(Error::Rates(format!("need 0 < d_min < d_max, got [{d_min}, {d_max})")));
        }
        let mut spec = Self { d_min, d_max, left, right, ann, bound: 0.0, case: CaseTag::General, leftmost: None };
        let mut bound = 0.0f64;
        for d in spec.sample_lengths() {
            for (name, r) in [("left", &spec.left), ("right", &spec.right), ("annihilation", &spec.ann)] {
                let v = r.eval(d);
                if !v.is_finite() {
                    return Err(Error::Rates(format!("{name} rate is unbounded at length {d}")));
                }
                if v < 0.0 {
                    return Err(Error::Rates(format!("{name} rate is negative ({v}) at length {d}")));
                }
            }
            bound = bound.max(spec.total_raw(d));
        }
        spec.bound = bound;
        spec.case = classify_case(&spec, DEFAULT_CASE_TOL);
        spec.leftmost = spec.derive_leftmost(DEFAULT_CASE_TOL);
        Ok(spec)
    }

    /// Rates identically zero on `[d_min, d_max)`.
    pub fn inert(d_min: f64, d_max: f64) -> Result<Self> {
        Self::new(d_min, d_max, RateFn::zero(), RateFn::zero(), RateFn::zero())
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Upper bound `‖λ‖∞` of the total rate.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn case(&self) -> CaseTag {
        self.case
    }

    pub fn leftmost_case(&self) -> Option<LeftmostCase> {
        self.leftmost
    }

    /// (A2): a merged domain is never active.
    pub fn satisfies_a2(&self) -> bool {
        2.0 * self.d_min >= self.d_max
    }

    /// True iff `d ∈ [d_min, d_max)`.
    #[inline]
    pub fn in_range(&self, d: f64) -> bool {
        let eps = 1e-12 * self.d_max;
        d >= self.d_min - eps && d < self.d_max - eps
    }

    #[inline]
    pub fn left(&self, d: f64) -> f64 {
        if self.in_range(d) { self.left.eval(d) } else { 0.0 }
    }

    #[inline]
    pub fn right(&self, d: f64) -> f64 {
        if self.in_range(d) { self.right.eval(d) } else { 0.0 }
    }

    #[inline]
    pub fn ann(&self, d: f64) -> f64 {
        if self.in_range(d) { self.ann.eval(d) } else { 0.0 }
    }

    /// `(λ_ℓ, λ_r, λ_a)` at length `d`.
    #[inline]
    pub fn rates(&self, d: f64) -> (f64, f64, f64) {
        if self.in_range(d) {
            (self.left.eval(d), self.right.eval(d), self.ann.eval(d))
        } else {
            (0.0, 0.0, 0.0)
        }
    }

    /// Total rate `λ(d)`.
    #[inline]
    pub fn total(&self, d: f64) -> f64 {
        let (l, r, a) = self.rates(d);
        l + r + a
    }

    fn total_raw(&self, d: f64) -> f64 {
        self.left.eval(d) + self.right.eval(d) + self.ann.eval(d)
    }

    /// Same rates multiplied by `c > 0` (a time rescaling).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.d_min, self.d_max, self.left.scaled(c), self.right.scaled(c), self.ann.scaled(c))
    }

    /// Lengths on which rate functions are sampled: a uniform grid over
    /// `[d_min, d_max)` plus every table knot inside it.
    pub fn sample_lengths(&self) -> Vec<f64> {
        let width = self.d_max - self.d_min;
        let mut xs: Vec<f64> = (0..SAMPLE_POINTS).map(|i| self.d_min + width * i as f64 / SAMPLE_POINTS as f64).collect();
        for r in [&self.left, &self.right, &self.ann] {
            xs.extend(r.knots().iter().copied().filter(|&k| k >= self.d_min && k < self.d_max));
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    fn derive_leftmost(&self, tol: f64) -> Option<LeftmostCase> {
        let xs = self.sample_lengths();
        let scale = self.bound;
        let sup = |f: &dyn Fn(f64) -> f64| xs.iter().map(|&d| f(d).abs()).fold(0.0, f64::max);
        let ann = sup(&|d| self.ann(d));
        let left = sup(&|d| self.left(d));
        let right = sup(&|d| self.right(d));
        if scale == 0.0 {
            return Some(LeftmostCase::Frozen);
        }
        if ann <= tol * scale {
            if left <= tol * scale {
                return Some(LeftmostCase::Frozen);
            }
            let gamma = least_squares_ratio(&xs, |d| self.right(d), |d| self.left(d));
            let resid = sup(&|d| self.right(d) - gamma * self.left(d));
            return (resid <= tol * scale).then_some(LeftmostCase::I { gamma });
        }
        (left <= tol * scale && right <= tol * scale).then_some(LeftmostCase::II)
    }
}

fn least_squares_ratio(xs: &[f64], num: impl Fn(f64) -> f64, den: impl Fn(f64) -> f64) -> f64 {
    let (mut nd, mut dd) = (0.0, 0.0);
    for &x in xs {
        nd += num(x) * den(x);
        dd += den(x) * den(x);
    }
    if dd == 0.0 { 0.0 } else { (nd / dd).max(0.0) }
}

/// Classifies the rates by sampling them on a length grid over `[d_min, d_max)`.
///
/// `tol` is relative to the rate bound, which makes the result invariant under a
/// common rescaling of the three rates.
pub fn classify_case(spec: &RateSpec, tol: f64) -> CaseTag {
    let xs = spec.sample_lengths();
    let scale = xs.iter().map(|&d| spec.total(d)).fold(0.0, f64::max);
    if scale == 0.0 {
        return CaseTag::CaseI;
    }
    let ann = xs.iter().map(|&d| spec.ann(d)).fold(0.0, f64::max);
    if ann <= tol * scale {
        return CaseTag::CaseI;
    }
    let lr = |d: f64| spec.left(d) + spec.right(d);
    let gamma = least_squares_ratio(&xs, lr, |d| spec.ann(d));
    let resid = xs.iter().map(|&d| (lr(d) - gamma * spec.ann(d)).abs()).fold(0.0, f64::max);
    if resid <= tol * scale {
        // snap values that are integers up to rounding
        let g = if (gamma - gamma.round()).abs() <= 1e-12 * (1.0 + gamma) { gamma.round() } else { gamma };
        CaseTag::CaseII { gamma: g }
    } else {
        CaseTag::General
    }
}

/// Named model families.
#[derive(Clone, Debug)]
pub enum Preset {
    /// Only the left neighbor is incorporated, at a user-supplied rate.
    East { left: RateFn },
    /// Left and right incorporation at rate one.
    PasteAll,
    /// Triple merging at rate one.
    IsingT0,
    /// Arbitrary rates; `expect` rejects the result if it classifies differently.
    Custom { left: RateFn, right: RateFn, ann: RateFn, expect: Option<CaseTag> },
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::East { .. } => "east",
            Preset::PasteAll => "paste_all",
            Preset::IsingT0 => "ising_t0",
            Preset::Custom { .. } => "custom",
        }
    }
}

/// Rates of epoch `n` (one-based) with active range `[d[n], d[n+1])`.
pub fn make_rate_spec(preset: &Preset, epoch: usize, schedule: &EpochSchedule) -> Result<RateSpec> {
    if epoch == 0 || epoch > schedule.horizon() {
        return Err(Error::Rates(format!("epoch {epoch} outside schedule horizon 1..={}", schedule.horizon())));
    }
    let (d_min, d_max) = (schedule.d(epoch), schedule.d(epoch + 1));
    let one = || RateFn::Const(1.0);
    let spec = match preset {
        Preset::East { left } => RateSpec::new(d_min, d_max, left.clone(), RateFn::zero(), RateFn::zero())?,
        Preset::PasteAll => RateSpec::new(d_min, d_max, one(), one(), RateFn::zero())?,
        Preset::IsingT0 => RateSpec::new(d_min, d_max, RateFn::zero(), RateFn::zero(), one())?,
        Preset::Custom { left, right, ann, expect } => {
            let spec = RateSpec::new(d_min, d_max, left.clone(), right.clone(), ann.clone())?;
            if let Some(want) = expect {
                if !same_case(*want, spec.case()) {
                    return Err(Error::Rates(format!("rates classify as {:?}, expected {:?}", spec.case(), want)));
                }
            }
            spec
        }
    };
    Ok(spec)
}

fn same_case(a: CaseTag, b: CaseTag) -> bool {
    match (a, b) {
        (CaseTag::CaseII { gamma: x }, CaseTag::CaseII { gamma: y }) => (x - y).abs() <= 1e-9 * (1.0 + x.abs()),
        _ => a == b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> EpochSchedule {
        EpochSchedule::linear(10)
    }

    #[test]
    fn ising_preset() {
        let s = make_rate_spec(&Preset::IsingT0, 1, &linear()).unwrap();
        assert_eq!((s.d_min(), s.d_max()), (1.0, 2.0));
        assert_eq!(s.rates(1.0), (0.0, 0.0, 1.0));
        assert_eq!(s.rates(1.5), (0.0, 0.0, 1.0));
        assert_eq!(s.total(2.0), 0.0);
        assert_eq!(s.total(0.5), 0.0);
        assert_eq!(s.case(), CaseTag::CaseII { gamma: 0.0 });
        assert_eq!(s.leftmost_case(), Some(LeftmostCase::II));
    }

    #[test]
    fn paste_all_preset() {
        let s = make_rate_spec(&Preset::PasteAll, 3, &linear()).unwrap();
        assert_eq!((s.d_min(), s.d_max()), (3.0, 4.0));
        assert_eq!(s.rates(3.0), (1.0, 1.0, 0.0));
        assert_eq!(s.case(), CaseTag::CaseI);
        assert_eq!(s.leftmost_case(), Some(LeftmostCase::I { gamma: 1.0 }));
    }

    #[test]
    fn east_preset_takes_user_rate() {
        let p = Preset::East { left: RateFn::func(|d| 1.0 / d) };
        let s = make_rate_spec(&p, 2, &EpochSchedule::east(8)).unwrap();
        assert_eq!((s.d_min(), s.d_max()), (2.0, 3.0));
        assert_eq!(s.left(2.0), 0.5);
        assert_eq!(s.case(), CaseTag::CaseI);
        assert_eq!(s.leftmost_case(), Some(LeftmostCase::I { gamma: 0.0 }));
    }

    #[test]
    fn custom_classification() {
        let p = Preset::Custom { left: RateFn::func(|d| d), right: RateFn::zero(), ann: RateFn::zero(), expect: None };
        assert_eq!(make_rate_spec(&p, 1, &linear()).unwrap().case(), CaseTag::CaseI);
        let bad = Preset::Custom { left: RateFn::Const(-1.0), right: RateFn::zero(), ann: RateFn::zero(), expect: None };
        assert!(make_rate_spec(&bad, 1, &linear()).is_err());
        let inf = Preset::Custom { left: RateFn::func(|d| 1.0 / (d - 1.0)), right: RateFn::zero(), ann: RateFn::zero(), expect: None };
        assert!(make_rate_spec(&inf, 1, &linear()).is_err());
        let wrong = Preset::Custom { left: RateFn::Const(1.0), right: RateFn::zero(), ann: RateFn::zero(), expect: Some(CaseTag::CaseII { gamma: 0.0 }) };
        assert!(make_rate_spec(&wrong, 1, &linear()).is_err());
        assert!(make_rate_spec(&Preset::IsingT0, 11, &linear()).is_err());
    }

    #[test]
    fn classify_examples() {
        let s = RateSpec::new(1.0, 2.0, RateFn::Const(1.0), RateFn::Const(2.0), RateFn::zero()).unwrap();
        assert_eq!(classify_case(&s, 1e-12), CaseTag::CaseI);
        let s = RateSpec::new(1.0, 2.0, RateFn::Const(1.0), RateFn::zero(), RateFn::Const(1.0)).unwrap();
        assert_eq!(classify_case(&s, 1e-12), CaseTag::CaseII { gamma: 1.0 });
        let s = RateSpec::new(1.0, 2.0, RateFn::func(|d| d), RateFn::zero(), RateFn::Const(1.0)).unwrap();
        assert_eq!(classify_case(&s, 1e-12), CaseTag::General);
        let t = PiecewiseLinear::new(vec![1.0, 2.0], vec![1.0, 3.0]).unwrap();
        let s = RateSpec::new(1.0, 2.0, RateFn::Table(t.clone()), RateFn::Table(t.clone()), RateFn::Table(t)).unwrap();
        assert_eq!(classify_case(&s, 1e-12), CaseTag::CaseII { gamma: 2.0 });
    }

    #[test]
    fn classification_is_scale_invariant_and_idempotent() {
        let base = RateSpec::new(1.0, 2.0, RateFn::func(|d| 0.3 * d), RateFn::func(|d| 0.2 * d), RateFn::func(|d| 0.5 * d)).unwrap();
        let c0 = classify_case(&base, 1e-12);
        assert_eq!(c0, classify_case(&base, 1e-12));
        for c in [1e-6, 0.37, 42.0, 1e6] {
            let scaled = base.scaled(c).unwrap();
            let got = classify_case(&scaled, 1e-12);
            match (c0, got) {
                (CaseTag::CaseII { gamma: a }, CaseTag::CaseII { gamma: b }) => assert!((a - b).abs() < 1e-9),
                _ => panic!("{c0:?} vs {got:?}"),
            }
        }
    }

    #[test]
    fn a1_holds_for_presets() {
        let sched = EpochSchedule::east(12);
        for preset in [Preset::PasteAll, Preset::IsingT0, Preset::East { left: RateFn::Const(2.0) }] {
            for n in 1..=10 {
                let s = make_rate_spec(&preset, n, &sched).unwrap();
                assert!(s.total(s.d_min()) > 0.0);
                assert_eq!(s.total(s.d_max()), 0.0);
                assert_eq!(s.total(s.d_max() * 1.7), 0.0);
                assert_eq!(s.total(s.d_min() * 0.99), 0.0);
                assert!(s.satisfies_a2());
            }
        }
    }

    #[test]
    fn piecewise_linear_interpolates() {
        let t = PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(2.0), 1.0);
        assert_eq!(t.eval(5.0), 0.0);
        assert!(PiecewiseLinear::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }
}
