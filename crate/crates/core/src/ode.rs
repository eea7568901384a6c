//! Within-epoch evolution of the interval law `μ_t` and the first-point law
//! `ν_t` on a lattice, integrated by fixed-step RK4.
//!
//! For `x` on the lattice `hℕ`:
//!
//! ```text
//! dμ(x)/dt = -λ(x)μ(x) + Σ_{y+z=x} (λ_r(y) + λ_ℓ(z))μ(y)μ(z) + Σ_{u+y+z=x} λ_a(y)μ(u)μ(y)μ(z)
//! dν(x)/dt = -ν(x)·Σ_y (λ_ℓ + λ_a)(y)μ(y) + Σ_y λ_ℓ(y)μ(y)ν(x-y) + Σ_{y,z} λ_a(y)μ(y)μ(z)ν(x-y-z)
//! ```
//!
//! Mass pushed beyond `x_max` is dropped from the lattice and counted as leak.

use crate::analytic::Transform;
use crate::error::{Error, Result};
use crate::measure::{convolve_slices, GridMeasure};
use crate::model::{LeftmostCase, RateSpec};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Largest negative mass tolerated before the step is declared too large.
pub const NEGATIVE_MASS_TOL: f64 = 1e-8;

/// Integration settings for [`evolve_epoch_ode`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Last lattice site kept.
    pub x_max: f64,
    /// Laplace variables at which `G_t`, `H_t`, `L_t` are recorded.
    pub s_grid: Vec<f64>,
    /// Record every this many steps (the final time is always recorded).
    pub record_every: usize,
}

impl OdeOptions {
    pub fn new(t_end: f64, dt: f64, x_max: f64, s_grid: Vec<f64>) -> Self {
        Self { t_end, dt, x_max, s_grid, record_every: 1 }
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }
}

/// State at one recorded time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    /// `μ_t` at lattice indices `0..=N`.
    pub mu: Vec<f64>,
    pub nu: Option<Vec<f64>>,
    pub leak_mu: f64,
    pub leak_nu: f64,
    /// `G_t(s) = Σ e^(-sx) μ_t(x)` on the s-grid.
    pub g: Vec<f64>,
    /// `H_t(s)`, the same sum over `[d_min, d_max)`.
    pub h_act: Vec<f64>,
    /// `H_t(0)`.
    pub active_mass: f64,
    /// `L_t(s) = Σ e^(-sx) ν_t(x)` when `ν` is evolved.
    pub l: Option<Vec<f64>>,
}

/// RK4 trajectory of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrajectory {
    pub h: f64,
    pub dt: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub s_grid: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

/// `(dμ/dt, d leak_μ/dt, (dν/dt, d leak_ν/dt))`.
type Deriv = (Vec<f64>, f64, Option<(Vec<f64>, f64)>);

struct Lattice {
    n: usize,
    left: Vec<f64>,
    right: Vec<f64>,
    ann: Vec<f64>,
    total: Vec<f64>,
    /// Indices with a positive rate.
    active: Vec<usize>,
}

impl Lattice {
    fn new(spec: &RateSpec, h: f64, n: usize) -> Self {
        let mut lat = Lattice { n, left: vec![0.0; n + 1], right: vec![0.0; n + 1], ann: vec![0.0; n + 1], total: vec![0.0; n + 1], active: Vec::new() };
        for i in 1..=n {
            let (l, r, a) = spec.rates(i as f64 * h);
            lat.left[i] = l;
            lat.right[i] = r;
            lat.ann[i] = a;
            lat.total[i] = l + r + a;
            if l + r + a > 0.0 {
                lat.active.push(i);
            }
        }
        lat
    }

    /// `out[x] += Σ_{y active} w[y]·v[x-y]`.
    fn sparse_conv(&self, w: &[f64], v: &[f64], out: &mut [f64]) {
        let top = last_nonzero(v);
        for &y in &self.active {
            if w[y] == 0.0 {
                continue;
            }
            let len = (top + 1).min(self.n + 1 - y);
            for (o, &vk) in out[y..y + len].iter_mut().zip(&v[..len]) {
                *o += w[y] * vk;
            }
        }
    }

    /// Time derivative of `(μ, leak_μ, ν, leak_ν)`.
    fn deriv(&self, mu: &[f64], nu: Option<&[f64]>) -> Deriv {
        let n1 = self.n + 1;
        let mut pair_w = vec![0.0; n1];
        let mut ann_w = vec![0.0; n1];
        let mut left_w = vec![0.0; n1];
        for &y in &self.active {
            pair_w[y] = (self.left[y] + self.right[y]) * mu[y];
            ann_w[y] = self.ann[y] * mu[y];
            left_w[y] = self.left[y] * mu[y];
        }
        let mut d: Vec<f64> = (0..n1).map(|x| -self.total[x] * mu[x]).collect();
        self.sparse_conv(&pair_w, mu, &mut d);
        let has_ann = self.active.iter().any(|&y| ann_w[y] != 0.0);
        let top = last_nonzero(mu) + 1;
        if has_ann {
            let mu2 = convolve_slices(&mu[..top], &mu[..top], n1);
            self.sparse_conv(&ann_w, &mu2, &mut d);
        }
        let leak = -d.iter().sum::<f64>();
        let nu_part = nu.map(|nu| {
            let out_rate: f64 = self.active.iter().map(|&y| left_w[y] + ann_w[y]).sum();
            let mut dn: Vec<f64> = nu.iter().map(|&v| -out_rate * v).collect();
            self.sparse_conv(&left_w, nu, &mut dn);
            if has_ann {
                let ntop = last_nonzero(nu) + 1;
                let numu = convolve_slices(&nu[..ntop], &mu[..top], n1);
                self.sparse_conv(&ann_w, &numu, &mut dn);
            }
            let leak_nu = -dn.iter().sum::<f64>();
            (dn, leak_nu)
        });
        (d, leak, nu_part)
    }
}

fn last_nonzero(v: &[f64]) -> usize {
    v.iter().rposition(|&x| x != 0.0).unwrap_or(0)
}

fn axpy(base: &[f64], k: &[f64], c: f64) -> Vec<f64> {
    base.iter().zip(k).map(|(b, k)| b + c * k).collect()
}

/// Integrates one epoch from `μ₀` (and optionally `ν₀`) under `spec`.
///
/// `μ₀` must live on the lattice `hℕ` with `h` dividing the rate range, and
/// `dt·‖λ‖∞ ≤ 0.1`. The tail mass of `μ₀` beyond its stored range starts as
/// leak.
pub fn evolve_epoch_ode(mu0: &GridMeasure, nu0: Option<&GridMeasure>, spec: &RateSpec, opts: &OdeOptions) -> Result<EpochTrajectory> {
    let h = mu0.h();
    if !(opts.dt > 0.0 && opts.t_end >= 0.0) {
        return Err(Error::Integration(format!("need dt > 0 and t_end ≥ 0, got dt = {} and t_end = {}", opts.dt, opts.t_end)));
    }
    if opts.dt * spec.bound() > 0.1 {
        return Err(Error::Integration(format!("dt·‖λ‖∞ = {} exceeds 0.1", opts.dt * spec.bound())));
    }
    let n = (opts.x_max / h + 1e-9).floor() as usize;
    if n + 1 < mu0.end() {
        return Err(Error::Integration(format!("x_max = {} is below the support of μ₀", opts.x_max)));
    }
    if let Some(nu) = nu0 {
        if (nu.h() - h).abs() > 1e-12 * h || n + 1 < nu.end() {
            return Err(Error::GridMismatch("ν₀ must share the lattice of μ₀ within x_max".into()));
        }
    }
    let lat = Lattice::new(spec, h, n);
    let mut mu = mu0.to_dense(n + 1);
    let mut leak_mu = mu0.tail_mass();
    let mut nu = nu0.map(|v| v.to_dense(n + 1));
    let mut leak_nu = nu0.map_or(0.0, |v| v.tail_mass());

    let steps = (opts.t_end / opts.dt).round() as usize;
    let mut traj = EpochTrajectory { h, dt: opts.dt, d_min: spec.d_min(), d_max: spec.d_max(), s_grid: opts.s_grid.clone(), snapshots: Vec::new() };
    let in_range: Vec<bool> = (0..=n).map(|i| spec.in_range(i as f64 * h)).collect();
    let record = |t: f64, mu: &[f64], nu: Option<&Vec<f64>>, leak_mu: f64, leak_nu: f64| {
        let lap = |v: &[f64], s: f64, mask: bool| -> f64 {
            v.iter().enumerate().filter(|(i, _)| !mask || in_range[*i]).map(|(i, &m)| m * libm::exp(-s * i as f64 * h)).sum()
        };
        Snapshot {
            t,
            mu: mu.to_vec(),
            nu: nu.cloned(),
            leak_mu,
            leak_nu,
            g: opts.s_grid.iter().map(|&s| lap(mu, s, false)).collect(),
            h_act: opts.s_grid.iter().map(|&s| lap(mu, s, true)).collect(),
            active_mass: lap(mu, 0.0, true),
            l: nu.map(|v| opts.s_grid.iter().map(|&s| lap(v, s, false)).collect()),
        }
    };
    traj.snapshots.push(record(0.0, &mu, nu.as_ref(), leak_mu, leak_nu));
    let dt = opts.dt;
    for step in 1..=steps {
        let (k1, l1, n1) = lat.deriv(&mu, nu.as_deref());
        let mu2 = axpy(&mu, &k1, dt / 2.0);
        let nu2 = n1.as_ref().map(|(k, _)| axpy(nu.as_ref().unwrap(), k, dt / 2.0));
        let (k2, l2, n2) = lat.deriv(&mu2, nu2.as_deref());
        let mu3 = axpy(&mu, &k2, dt / 2.0);
        let nu3 = n2.as_ref().map(|(k, _)| axpy(nu.as_ref().unwrap(), k, dt / 2.0));
        let (k3, l3, n3) = lat.deriv(&mu3, nu3.as_deref());
        let mu4 = axpy(&mu, &k3, dt);
        let nu4 = n3.as_ref().map(|(k, _)| axpy(nu.as_ref().unwrap(), k, dt));
        let (k4, l4, n4) = lat.deriv(&mu4, nu4.as_deref());
        for i in 0..=n {
            mu[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        leak_mu += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        if let (Some(v), Some(a), Some(b), Some(c), Some(d)) = (nu.as_mut(), n1, n2, n3, n4) {
            for i in 0..=n {
                v[i] += dt / 6.0 * (a.0[i] + 2.0 * b.0[i] + 2.0 * c.0[i] + d.0[i]);
            }
            leak_nu += dt / 6.0 * (a.1 + 2.0 * b.1 + 2.0 * c.1 + d.1);
        }
        for (i, &m) in mu.iter().chain(nu.iter().flatten()).enumerate() {
            if m < -NEGATIVE_MASS_TOL {
                return Err(Error::Integration(format!("negative mass {m} at state index {i} after step {step}; reduce dt")));
            }
        }
        if step % opts.record_every == 0 || step == steps {
            traj.snapshots.push(record(step as f64 * dt, &mu, nu.as_ref(), leak_mu, leak_nu));
        }
    }
    Ok(traj)
}

impl EpochTrajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("a trajectory holds its initial state")
    }

    /// `μ_t` at snapshot `k` as a measure, tiny negative values set to zero and the
    /// leak kept as tail mass.
    pub fn mu_measure(&self, k: usize) -> Result<GridMeasure> {
        let s = &self.snapshots[k];
        let dense: Vec<f64> = s.mu.iter().map(|&m| m.max(0.0)).collect();
        GridMeasure::from_dense(self.h, &dense, s.leak_mu.max(0.0))
    }

    /// `ν_t` at snapshot `k`, if evolved.
    pub fn nu_measure(&self, k: usize) -> Option<Result<GridMeasure>> {
        let s = &self.snapshots[k];
        s.nu.as_ref().map(|nu| {
            let dense: Vec<f64> = nu.iter().map(|&m| m.max(0.0)).collect();
            GridMeasure::from_dense(self.h, &dense, s.leak_nu.max(0.0))
        })
    }

    /// CSV with columns `t,s,G,H,L,drift`; `drift` is the relative change of the
    /// interval invariant of `transform` since `t = 0`, empty without one.
    pub fn to_csv(&self, transform: Option<Transform>) -> Result<String> {
        let mut out = String::from("t,s,G,H,L,drift\n");
        let first = &self.snapshots[0];
        for snap in &self.snapshots {
            for (j, &s) in self.s_grid.iter().enumerate() {
                let l = snap.l.as_ref().map_or(String::new(), |l| format!("{:.16e}", l[j]));
                let drift = match transform {
                    Some(t) => {
                        let i0 = interval_invariant(t, first.g[j], first.h_act[j])?;
                        let it = interval_invariant(t, snap.g[j], snap.h_act[j])?;
                        format!("{:.16e}", ((it - i0) / i0).abs())
                    }
                    None => String::new(),
                };
                writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{l},{drift}", snap.t, s, snap.g[j], snap.h_act[j]).unwrap();
            }
        }
        Ok(out)
    }
}

/// Conserved interval combination: `(1 - G)e^H` in case (i),
/// `e^(-cH)(γ+1+G)/(1-G)` with `c = (γ+2)/(γ+1)` in case (ii).
fn interval_invariant(t: Transform, g: f64, h: f64) -> Result<f64> {
    if g >= 1.0 {
        return Err(Error::Domain { what: "G_t(s) (s too small for the tolerance)", value: g });
    }
    Ok(match t {
        Transform::CaseI => (1.0 - g) * libm::exp(h),
        Transform::CaseII { gamma } => libm::exp(-(gamma + 2.0) / (gamma + 1.0) * h) * (gamma + 1.0 + g) / (1.0 - g),
    })
}

/// Conserved first-point combination for `ν₀ = δ₀`.
fn leftmost_invariant(case: LeftmostCase, l: f64, g: f64, h: f64, h0: f64) -> f64 {
    match case {
        LeftmostCase::I { gamma } => l * libm::exp((h - h0) / (1.0 + gamma)),
        LeftmostCase::II => l / (libm::sqrt((1.0 - g) * (1.0 + g)) * libm::exp(h0)),
        LeftmostCase::Frozen => l,
    }
}

/// Largest relative deviations of the conserved combinations from their `t = 0` values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub interval: f64,
    pub leftmost: Option<f64>,
}

/// Maximum relative drift over all snapshots and s-grid points.
///
/// The first-point invariant is checked when `leftmost` is given and `ν` was
/// evolved from `δ₀`.
pub fn invariant_drift(traj: &EpochTrajectory, transform: Transform, leftmost: Option<LeftmostCase>) -> Result<Drift> {
    let first = &traj.snapshots[0];
    let mut interval = 0.0f64;
    let mut left = leftmost.and(first.l.as_ref()).map(|_| 0.0f64);
    for snap in &traj.snapshots {
        for j in 0..traj.s_grid.len() {
            let i0 = interval_invariant(transform, first.g[j], first.h_act[j])?;
            let it = interval_invariant(transform, snap.g[j], snap.h_act[j])?;
            interval = interval.max(((it - i0) / i0).abs());
            if let (Some(case), Some(worst), Some(l0), Some(lt)) = (leftmost, left.as_mut(), first.l.as_ref(), snap.l.as_ref()) {
                let a = leftmost_invariant(case, l0[j], first.g[j], first.h_act[j], first.active_mass);
                let b = leftmost_invariant(case, lt[j], snap.g[j], snap.h_act[j], snap.active_mass);
                *worst = worst.max(((b - a) / a).abs());
            }
        }
    }
    Ok(Drift { interval, leftmost: left })
}

/// Sup-s distances between the trajectory endpoint and the closed-form `t = ∞` laws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointDistance {
    pub interval: f64,
    pub leftmost: Option<f64>,
}

/// `G_∞(s)` from the `t = 0` data.
pub fn interval_endpoint(t: Transform, g0: f64, h0: f64) -> Result<f64> {
    Ok(match t {
        Transform::CaseI => 1.0 - (1.0 - g0) * libm::exp(h0),
        Transform::CaseII { gamma } => {
            let k = libm::exp(-(gamma + 2.0) / (gamma + 1.0) * h0) * (gamma + 1.0 + g0) / (1.0 - g0);
            if !k.is_finite() {
                return Err(Error::Domain { what: "G_0(s)", value: g0 });
            }
            (k - gamma - 1.0) / (k + 1.0)
        }
    })
}

/// Compares the last snapshot with the `t = ∞` identities. Requires
/// `H_{t_end}(0) < 1e-6`.
pub fn endpoint_check(traj: &EpochTrajectory, transform: Transform, leftmost: Option<LeftmostCase>) -> Result<EndpointDistance> {
    let first = &traj.snapshots[0];
    let last = traj.last();
    if last.active_mass >= 1e-6 {
        return Err(Error::Integration(format!("active mass {} remains at t_end; integrate longer", last.active_mass)));
    }
    let mut interval = 0.0f64;
    let mut left = leftmost.and(last.l.as_ref()).map(|_| 0.0f64);
    for j in 0..traj.s_grid.len() {
        let g_inf = interval_endpoint(transform, first.g[j], first.h_act[j])?;
        interval = interval.max((last.g[j] - g_inf).abs());
        if let (Some(case), Some(worst), Some(l0), Some(lt)) = (leftmost, left.as_mut(), first.l.as_ref(), last.l.as_ref()) {
            let l_inf = match case {
                LeftmostCase::I { gamma } => l0[j] * libm::exp((first.h_act[j] - first.active_mass) / (1.0 + gamma)),
                LeftmostCase::II => {
                    l0[j] * libm::sqrt((1.0 - g_inf * g_inf) / (1.0 - first.g[j] * first.g[j])) * libm::exp(-first.active_mass)
                }
                LeftmostCase::Frozen => l0[j],
            };
            *worst = worst.max((lt[j] - l_inf).abs());
        }
    }
    Ok(EndpointDistance { interval, leftmost: left })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_rate_spec, EpochSchedule, Preset, RateFn};
    use crate::spp::{interval_law_preset, IntervalLawPreset};

    fn grid() -> Vec<f64> {
        (0..16).map(|i| 0.1 * 50f64.powf(i as f64 / 15.0)).collect()
    }

    fn delta1() -> GridMeasure {
        GridMeasure::point(1.0, 1, 1.0).unwrap()
    }

    fn delta0() -> GridMeasure {
        GridMeasure::point(1.0, 0, 1.0).unwrap()
    }

    fn ising() -> RateSpec {
        make_rate_spec(&Preset::IsingT0, 1, &EpochSchedule::linear(8)).unwrap()
    }

    #[test]
    fn inert_rates_leave_mu_fixed() {
        let mu = interval_law_preset(&IntervalLawPreset::Geometric { p: 0.5, h: 1.0 }, 30.0).unwrap();
        let spec = RateSpec::inert(1.0, 2.0).unwrap();
        let traj = evolve_epoch_ode(&mu, Some(&delta0()), &spec, &OdeOptions::new(2.0, 0.01, 40.0, grid())).unwrap();
        assert_eq!(traj.last().mu, traj.snapshots[0].mu);
        let d = invariant_drift(&traj, Transform::CaseI, Some(LeftmostCase::Frozen)).unwrap();
        assert_eq!(d.interval, 0.0);
        assert_eq!(d.leftmost, Some(0.0));
    }

    #[test]
    fn ising_conserves_mass_and_drains_active_sites() {
        let traj = evolve_epoch_ode(&delta1(), None, &ising(), &OdeOptions::new(10.0, 1e-3, 192.0, grid()).record_every(1000)).unwrap();
        let last = traj.last();
        assert!((last.mu.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(last.leak_mu.abs() < 1e-10);
        // only length one is active and nothing produces it
        assert!((last.active_mass - (-10.0f64).exp()).abs() < 1e-12);
        assert!(traj.snapshots.windows(2).all(|w| w[1].h_act.iter().zip(&w[0].h_act).all(|(a, b)| a <= b)));
    }

    #[test]
    fn ising_invariant_and_endpoint() {
        let traj = evolve_epoch_ode(&delta1(), Some(&delta0()), &ising(), &OdeOptions::new(20.0, 1e-2, 160.0, grid()).record_every(10)).unwrap();
        let t = Transform::CaseII { gamma: 0.0 };
        let d = invariant_drift(&traj, t, Some(LeftmostCase::II)).unwrap();
        assert!(d.interval < 1e-8 && d.leftmost.unwrap() < 1e-8, "{d:?}");
        let e = endpoint_check(&traj, t, Some(LeftmostCase::II)).unwrap();
        assert!(e.interval < 1e-5 && e.leftmost.unwrap() < 1e-5, "{e:?}");
    }

    #[test]
    fn paste_all_matches_analytic_endpoint() {
        let spec = make_rate_spec(&Preset::PasteAll, 1, &EpochSchedule::linear(8)).unwrap();
        let traj = evolve_epoch_ode(&delta1(), Some(&delta0()), &spec, &OdeOptions::new(20.0, 1e-2, 64.0, grid()).record_every(100)).unwrap();
        let e = endpoint_check(&traj, Transform::CaseI, Some(LeftmostCase::I { gamma: 1.0 })).unwrap();
        assert!(e.interval < 1e-5 && e.leftmost.unwrap() < 1e-5, "{e:?}");
        let d = invariant_drift(&traj, Transform::CaseI, Some(LeftmostCase::I { gamma: 1.0 })).unwrap();
        assert!(d.interval < 1e-8 && d.leftmost.unwrap() < 1e-8, "{d:?}");
    }

    #[test]
    fn general_gamma_case_ii() {
        let spec = RateSpec::new(1.0, 2.0, RateFn::Const(0.5), RateFn::Const(0.5), RateFn::Const(1.0)).unwrap();
        let mu = interval_law_preset(&IntervalLawPreset::Geometric { p: 0.5, h: 1.0 }, 40.0).unwrap();
        let traj = evolve_epoch_ode(&mu, None, &spec, &OdeOptions::new(5.0, 1e-2, 256.0, grid()).record_every(50)).unwrap();
        let d = invariant_drift(&traj, Transform::CaseII { gamma: 1.0 }, None).unwrap();
        assert!(d.interval < 1e-8, "{d:?}");
        assert!(d.leftmost.is_none());
    }

    #[test]
    fn rejects_large_steps_and_small_range() {
        assert!(evolve_epoch_ode(&delta1(), None, &ising(), &OdeOptions::new(1.0, 0.5, 10.0, grid())).is_err());
        let mu = interval_law_preset(&IntervalLawPreset::Geometric { p: 0.5, h: 1.0 }, 40.0).unwrap();
        assert!(evolve_epoch_ode(&mu, None, &ising(), &OdeOptions::new(1.0, 0.01, 10.0, grid())).is_err());
    }

    #[test]
    fn endpoint_needs_drained_trajectory() {
        let traj = evolve_epoch_ode(&delta1(), None, &ising(), &OdeOptions::new(1.0, 0.01, 32.0, grid())).unwrap();
        assert!(endpoint_check(&traj, Transform::CaseII { gamma: 0.0 }, None).is_err());
    }

    #[test]
    fn csv_has_one_row_per_time_and_s() {
        let traj = evolve_epoch_ode(&delta1(), None, &ising(), &OdeOptions::new(1.0, 0.01, 32.0, grid()).record_every(50)).unwrap();
        let csv = traj.to_csv(Some(Transform::CaseII { gamma: 0.0 })).unwrap();
        assert_eq!(csv.lines().count(), 1 + traj.snapshots.len() * grid().len());
        assert!(csv.starts_with("t,s,G,H,L,drift\n"));
    }
}
