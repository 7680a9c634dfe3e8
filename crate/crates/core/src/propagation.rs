//! Fixed-step RK4 integration of `i dψ/dt = H(t)ψ`, fidelity curves, the
//! first-crossing actual-time oracle, time-averaged energy uncertainty and
//! the geodesic path ratio.
//!
//! Long horizons at NMR frequencies need millions of steps, so the
//! integrator is streaming: [`rk4_for_each`] hands every grid state to a
//! visitor instead of storing it. [`rk4_propagate`] is the storing
//! convenience wrapper for short runs.

use std::ops::ControlFlow;

use num_complex::Complex;

use crate::error::{QslError, Result};
use crate::quantum::{energy_uncertainty, expm_unitary, fidelity, CVector, HermitianOperator, PureState};
use crate::scalar::{unit_clamp, Real};

/// Samples per shortest period used by the crossing scans.
pub const DEFAULT_SCAN_OVERSAMPLE: usize = 40;

/// Relative time tolerance of crossing bisections.
pub const CROSSING_REL_TOL: f64 = 1e-10;

/// A (possibly time-dependent) Hermitian generator.
pub trait Hamiltonian<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn at(&self, t: T) -> HermitianOperator<T>;

    /// `H(t)|v⟩`.
    fn apply(&self, t: T, v: &CVector<T>) -> CVector<T> {
        self.at(t).matrix() * v
    }

    /// `out ← H(t)|v⟩`; override to avoid allocating in the integrator.
    fn apply_into(&self, t: T, v: &CVector<T>, out: &mut CVector<T>) {
        *out = self.apply(t, v);
    }
}

impl<T: Real> Hamiltonian<T> for HermitianOperator<T> {
    fn dim(&self) -> usize {
        HermitianOperator::dim(self)
    }

    fn at(&self, _t: T) -> HermitianOperator<T> {
        self.clone()
    }

    fn apply(&self, _t: T, v: &CVector<T>) -> CVector<T> {
        self.matrix() * v
    }

    fn apply_into(&self, _t: T, v: &CVector<T>, out: &mut CVector<T>) {
        out.gemv(Complex::new(T::one(), T::zero()), self.matrix(), v, Complex::new(T::zero(), T::zero()));
    }
}

/// Wraps a closure `t ↦ H(t)`.
pub struct FnHamiltonian<F> {
    dim: usize,
    f: F,
}

impl<F> FnHamiltonian<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Real, F: Fn(T) -> HermitianOperator<T> + Sync> Hamiltonian<T> for FnHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, t: T) -> HermitianOperator<T> {
        (self.f)(t)
    }
}

/// Largest eigenvalue magnitude of `H(t)` over 33 evenly spaced instants
/// in `[0, horizon]`.
pub fn max_frequency<T: Real>(model: &dyn Hamiltonian<T>, horizon: T) -> T {
    const SAMPLES: usize = 32;
    (0..=SAMPLES)
        .map(|k| model.at(horizon * T::lit(k as f64 / SAMPLES as f64)).spectral().max_abs())
        .fold(T::zero(), |a, b| a.max(b))
}

/// Largest admissible RK4 step, `(2π/ω_max)/40`.
pub fn step_limit<T: Real>(model: &dyn Hamiltonian<T>, horizon: T) -> T {
    let w = max_frequency(model, horizon);
    if w > T::zero() {
        T::two_pi() / w / T::lit(40.0)
    } else {
        T::max_value().unwrap_or_else(T::one)
    }
}

fn check_step<T: Real>(model: &dyn Hamiltonian<T>, horizon: T, dt: T) -> Result<()> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(QslError::InvalidParams(format!("time step must be positive, got {}", dt.as_f64())));
    }
    if horizon < T::zero() || !horizon.is_finite() {
        return Err(QslError::InvalidParams(format!("horizon must be non-negative, got {}", horizon.as_f64())));
    }
    let limit = step_limit(model, horizon);
    if dt > limit * (T::one() + T::tol(1e-12)) {
        return Err(QslError::StepTooLarge { dt: dt.as_f64(), limit: limit.as_f64() });
    }
    Ok(())
}

/// Uniform grid covering `[0, horizon]` with step at most `dt`.
fn grid<T: Real>(horizon: T, dt: T) -> (usize, T) {
    if horizon == T::zero() {
        return (0, T::zero());
    }
    let n = (horizon / dt).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    (n, horizon / T::lit(n as f64))
}

/// Scratch buffers for one RK4 step.
struct Workspace<T: Real> {
    k1: CVector<T>,
    k2: CVector<T>,
    k3: CVector<T>,
    k4: CVector<T>,
    tmp: CVector<T>,
}

impl<T: Real> Workspace<T> {
    fn new(dim: usize) -> Self {
        let z = CVector::zeros(dim);
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }
}

/// `k ← −i·k`.
fn times_minus_i<T: Real>(k: &mut CVector<T>) {
    for z in k.iter_mut() {
        *z = Complex::new(z.im, -z.re);
    }
}

/// One RK4 step of size `h` from `(t, psi)` into `out`, renormalized.
/// Returns `|‖out‖ − 1|` before renormalization.
fn step_into<T: Real>(
    model: &dyn Hamiltonian<T>,
    t: T,
    h: T,
    psi: &CVector<T>,
    out: &mut CVector<T>,
    ws: &mut Workspace<T>,
) -> T {
    let half = h * T::lit(0.5);
    let c = |x: T| Complex::new(x, T::zero());

    model.apply_into(t, psi, &mut ws.k1);
    times_minus_i(&mut ws.k1);

    ws.tmp.copy_from(psi);
    ws.tmp.axpy(c(half), &ws.k1, Complex::new(T::one(), T::zero()));
    model.apply_into(t + half, &ws.tmp, &mut ws.k2);
    times_minus_i(&mut ws.k2);

    ws.tmp.copy_from(psi);
    ws.tmp.axpy(c(half), &ws.k2, Complex::new(T::one(), T::zero()));
    model.apply_into(t + half, &ws.tmp, &mut ws.k3);
    times_minus_i(&mut ws.k3);

    ws.tmp.copy_from(psi);
    ws.tmp.axpy(c(h), &ws.k3, Complex::new(T::one(), T::zero()));
    model.apply_into(t + h, &ws.tmp, &mut ws.k4);
    times_minus_i(&mut ws.k4);

    let sixth = h / T::lit(6.0);
    let one = Complex::new(T::one(), T::zero());
    out.copy_from(psi);
    out.axpy(c(sixth), &ws.k1, one);
    out.axpy(c(sixth * T::lit(2.0)), &ws.k2, one);
    out.axpy(c(sixth * T::lit(2.0)), &ws.k3, one);
    out.axpy(c(sixth), &ws.k4, one);

    let norm = out.norm();
    out.unscale_mut(norm);
    (norm - T::one()).abs()
}

/// A single renormalized RK4 step of size `h` from `psi` at time `t`.
pub fn rk4_step<T: Real>(model: &dyn Hamiltonian<T>, t: T, psi: &PureState<T>, h: T) -> Result<PureState<T>> {
    if psi.dim() != model.dim() {
        return Err(QslError::DimensionMismatch { expected: model.dim(), found: psi.dim() });
    }
    let mut ws = Workspace::new(psi.dim());
    let mut out = CVector::zeros(psi.dim());
    step_into(model, t, h, psi.amplitudes(), &mut out, &mut ws);
    Ok(PureState::renormalized(out))
}

/// View of the integrator at grid point `k`.
pub struct Rk4Sample<'a, T: Real> {
    pub k: usize,
    pub t: T,
    pub psi: &'a CVector<T>,
    /// Previous grid point, absent at `k = 0`.
    pub prev: Option<(T, &'a CVector<T>)>,
}

/// Outcome of a streaming run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rk4Summary<T: Real> {
    /// Steps actually taken.
    pub steps: usize,
    /// Uniform step `horizon / ceil(horizon / dt)`.
    pub step: T,
    /// Sum of `|‖ψ‖ − 1|` removed by renormalization.
    pub renorm_drift: T,
    /// False if the visitor stopped early.
    pub completed: bool,
}

/// Integrates over `[0, horizon]` on the grid `t_k = k·h`, `h ≤ dt`,
/// calling `visit` at every grid point including `t = 0`.
pub fn rk4_for_each<T: Real, F>(
    model: &dyn Hamiltonian<T>,
    psi0: &PureState<T>,
    horizon: T,
    dt: T,
    mut visit: F,
) -> Result<Rk4Summary<T>>
where
    F: FnMut(&Rk4Sample<'_, T>) -> ControlFlow<()>,
{
    if psi0.dim() != model.dim() {
        return Err(QslError::DimensionMismatch { expected: model.dim(), found: psi0.dim() });
    }
    check_step(model, horizon, dt)?;
    let (n, h) = grid(horizon, dt);
    let mut ws = Workspace::new(psi0.dim());
    let mut cur = psi0.amplitudes().clone();
    let mut next = CVector::zeros(psi0.dim());
    let mut drift = T::zero();
    let summary = |steps, drift, completed| Rk4Summary { steps, step: h, renorm_drift: drift, completed };

    if visit(&Rk4Sample { k: 0, t: T::zero(), psi: &cur, prev: None }).is_break() {
        return Ok(summary(0, drift, n == 0));
    }
    for k in 0..n {
        let t = h * T::lit(k as f64);
        drift += step_into(model, t, h, &cur, &mut next, &mut ws);
        let t_next = if k + 1 == n { horizon } else { h * T::lit((k + 1) as f64) };
        let sample = Rk4Sample { k: k + 1, t: t_next, psi: &next, prev: Some((t, &cur)) };
        if visit(&sample).is_break() {
            return Ok(summary(k + 1, drift, k + 1 == n));
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(summary(n, drift, true))
}

/// Stored sequence of states on an increasing time grid starting at 0.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    times: Vec<T>,
    states: Vec<PureState<T>>,
    renorm_drift: T,
}

impl<T: Real> Trajectory<T> {
    pub fn new(times: Vec<T>, states: Vec<PureState<T>>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(QslError::DimensionMismatch { expected: times.len(), found: states.len() });
        }
        if times.first() != Some(&T::zero()) {
            return Err(QslError::InvalidParams("trajectory must start at t = 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(QslError::InvalidParams("trajectory times must be strictly increasing".into()));
        }
        Ok(Self { times, states, renorm_drift: T::zero() })
    }

    /// Samples an exact state function on `times`.
    pub fn sample<F>(times: Vec<T>, mut state_at: F) -> Result<Self>
    where
        F: FnMut(T) -> Result<PureState<T>>,
    {
        let states = times.iter().map(|&t| state_at(t)).collect::<Result<Vec<_>>>()?;
        Self::new(times, states)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn states(&self) -> &[PureState<T>] {
        &self.states
    }

    pub fn renorm_drift(&self) -> T {
        self.renorm_drift
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> T {
        *self.times.last().expect("trajectory is nonempty")
    }
}

/// RK4 trajectory on `[0, horizon]` storing every grid state.
pub fn rk4_propagate<T: Real>(
    model: &dyn Hamiltonian<T>,
    psi0: &PureState<T>,
    horizon: T,
    dt: T,
) -> Result<Trajectory<T>> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let summary = rk4_for_each(model, psi0, horizon, dt, |s| {
        times.push(s.t);
        states.push(PureState::renormalized(s.psi.clone()));
        ControlFlow::Continue(())
    })?;
    let mut traj = Trajectory::new(times, states)?;
    traj.renorm_drift = summary.renorm_drift;
    Ok(traj)
}

/// `F(t_k) = |⟨ψ(0)|ψ(t_k)⟩|²` along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityCurve<T: Real> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> FidelityCurve<T> {
    pub fn min(&self) -> T {
        self.values.iter().fold(T::one(), |a, &b| a.min(b))
    }
}

pub fn fidelity_curve<T: Real>(traj: &Trajectory<T>) -> Result<FidelityCurve<T>> {
    let first = traj.states.first().ok_or(QslError::InvalidParams("empty trajectory".into()))?;
    let values = traj.states.iter().map(|s| fidelity(first, s)).collect::<Result<Vec<_>>>()?;
    Ok(FidelityCurve { times: traj.times.clone(), values })
}

fn validate_target<T: Real>(target: T) -> Result<()> {
    if target >= T::zero() && target <= T::one() {
        Ok(())
    } else {
        Err(QslError::InvalidFidelity(target.as_f64()))
    }
}

/// Bisects `[lo, hi]` where `above(lo)` holds and `above(hi)` does not.
fn bisect_crossing<T: Real>(mut lo: T, mut hi: T, mut above: impl FnMut(T) -> Result<bool>) -> Result<T> {
    // tighter than the contract so the returned point is well inside it
    let tol = T::tol(CROSSING_REL_TOL * 1e-3);
    for _ in 0..200 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = lo + (hi - lo) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + (hi - lo) * T::lit(0.5))
}

/// First `t > 0` with `F(t) = target` for a fidelity function, by scanning
/// `t_k = k·h` (`h ≤ step`) and bisecting the first bracket.
pub fn actual_time_fn<T: Real, F>(mut f: F, target: T, horizon: T, step: T) -> Result<T>
where
    F: FnMut(T) -> Result<T>,
{
    validate_target(target)?;
    if target == T::one() {
        return Ok(T::zero());
    }
    if !(step > T::zero()) {
        return Err(QslError::InvalidParams("scan step must be positive".into()));
    }
    let (n, h) = grid(horizon, step);
    let mut min_f = f(T::zero())?;
    let mut prev = T::zero();
    for k in 1..=n {
        let t = h * T::lit(k as f64);
        let v = f(t)?;
        if v <= target {
            return bisect_crossing(prev, t, |s| Ok(f(s)? > target));
        }
        min_f = min_f.min(v);
        prev = t;
    }
    Err(QslError::FidelityNeverReached { target: target.as_f64(), min_fidelity: min_f.as_f64() })
}

/// First crossing on a sampled curve by linear interpolation between the
/// bracketing samples.
pub fn actual_time_curve<T: Real>(curve: &FidelityCurve<T>, target: T) -> Result<T> {
    validate_target(target)?;
    if target == T::one() {
        return Ok(T::zero());
    }
    for k in 1..curve.values.len() {
        let (f0, f1) = (curve.values[k - 1], curve.values[k]);
        if f1 <= target {
            let (t0, t1) = (curve.times[k - 1], curve.times[k]);
            let w = if f0 > f1 { (f0 - target) / (f0 - f1) } else { T::one() };
            return Ok(t0 + (t1 - t0) * w);
        }
    }
    Err(QslError::FidelityNeverReached { target: target.as_f64(), min_fidelity: curve.min().as_f64() })
}

/// First crossings of several fidelity targets along one RK4 run.
///
/// Brackets are refined with partial RK4 steps from the grid state
/// preceding the crossing. Entries are `FidelityNeverReached` for targets
/// not reached within `horizon`.
pub fn actual_times<T: Real>(
    model: &dyn Hamiltonian<T>,
    psi0: &PureState<T>,
    targets: &[T],
    horizon: T,
    dt: T,
) -> Result<Vec<Result<T>>> {
    for &target in targets {
        validate_target(target)?;
    }
    let mut found: Vec<Option<Result<T>>> =
        targets.iter().map(|&f| if f == T::one() { Some(Ok(T::zero())) } else { None }).collect();
    let mut pending = found.iter().filter(|r| r.is_none()).count();
    let mut min_f = T::one();
    let reference = psi0.amplitudes();
    let fid = |v: &CVector<T>| unit_clamp(reference.dotc(v).norm_sqr());
    let mut ws = Workspace::new(psi0.dim());
    let mut partial = CVector::zeros(psi0.dim());
    let mut failure = None;

    if pending > 0 {
        rk4_for_each(model, psi0, horizon, dt, |s| {
            let Some((t_prev, prev)) = s.prev else {
                return ControlFlow::Continue(());
            };
            let f_now = fid(s.psi);
            min_f = min_f.min(f_now);
            for (slot, &target) in found.iter_mut().zip(targets) {
                if slot.is_some() || f_now > target {
                    continue;
                }
                let crossing = bisect_crossing(T::zero(), s.t - t_prev, |dt_part| {
                    step_into(model, t_prev, dt_part, prev, &mut partial, &mut ws);
                    Ok(fid(&partial) > target)
                });
                match crossing {
                    Ok(off) => *slot = Some(Ok(t_prev + off)),
                    Err(e) => failure = Some(e),
                }
                pending -= 1;
            }
            if pending == 0 || failure.is_some() {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(found
        .into_iter()
        .zip(targets)
        .map(|(slot, &target)| {
            slot.unwrap_or(Err(QslError::FidelityNeverReached {
                target: target.as_f64(),
                min_fidelity: min_f.as_f64(),
            }))
        })
        .collect())
}

/// First crossing of one target along an RK4 run.
pub fn actual_time<T: Real>(
    model: &dyn Hamiltonian<T>,
    psi0: &PureState<T>,
    target: T,
    horizon: T,
    dt: T,
) -> Result<T> {
    actual_times(model, psi0, &[target], horizon, dt)?.remove(0)
}

/// Time averages `(1/t)∫₀ᵗ f(τ)dτ` of the speed-related integrands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathAverages<T: Real> {
    /// Energy uncertainty ΔH = ‖(H − ⟨H⟩)ψ‖.
    pub uncertainty: T,
    /// ‖Hψ‖, the single nonzero singular value of `H|ψ⟩⟨ψ|`.
    pub h_psi_norm: T,
    /// ‖Hψ‖².
    pub h_psi_norm_sq: T,
}

impl<T: Real> PathAverages<T> {
    fn zero() -> Self {
        Self { uncertainty: T::zero(), h_psi_norm: T::zero(), h_psi_norm_sq: T::zero() }
    }

    fn combine(self, other: Self, a: T, b: T) -> Self {
        Self {
            uncertainty: self.uncertainty * a + other.uncertainty * b,
            h_psi_norm: self.h_psi_norm * a + other.h_psi_norm * b,
            h_psi_norm_sq: self.h_psi_norm_sq * a + other.h_psi_norm_sq * b,
        }
    }
}

/// Integrands at one instant, with a preallocated buffer for `Hψ`.
fn integrands<T: Real>(model: &dyn Hamiltonian<T>, t: T, psi: &CVector<T>, h_psi: &mut CVector<T>) -> PathAverages<T> {
    model.apply_into(t, psi, h_psi);
    let norm = h_psi.norm();
    let mean = psi.dotc(h_psi).re;
    h_psi.axpy(Complex::new(-mean, T::zero()), psi, Complex::new(T::one(), T::zero()));
    PathAverages { uncertainty: h_psi.norm(), h_psi_norm: norm, h_psi_norm_sq: norm * norm }
}

/// Trapezoid accumulator; `t = 0` yields the instantaneous values.
struct Trapezoid<T: Real> {
    integral: PathAverages<T>,
    prev: PathAverages<T>,
    prev_t: T,
}

impl<T: Real> Trapezoid<T> {
    fn new(first: PathAverages<T>) -> Self {
        Self { integral: PathAverages::zero(), prev: first, prev_t: T::zero() }
    }

    fn push(&mut self, t: T, value: PathAverages<T>) {
        let w = (t - self.prev_t) * T::lit(0.5);
        self.integral = self.integral.combine(self.prev.combine(value, w, w), T::one(), T::one());
        self.prev = value;
        self.prev_t = t;
    }

    /// Average over `[0, t]` closing with `value` at `t ≥ prev_t`.
    fn average_to(&self, t: T, value: PathAverages<T>) -> PathAverages<T> {
        if t == T::zero() {
            return value;
        }
        let w = (t - self.prev_t) * T::lit(0.5);
        let total = self.integral.combine(self.prev.combine(value, w, w), T::one(), T::one());
        total.combine(PathAverages::zero(), T::one() / t, T::zero())
    }
}

/// Time averages over `[0, t]` by the trapezoid rule on a stored
/// trajectory, closing the last partial interval with a partial RK4 step.
pub fn trajectory_averages<T: Real>(model: &dyn Hamiltonian<T>, traj: &Trajectory<T>, t: T) -> Result<PathAverages<T>> {
    let last = traj.last_time();
    if !(t > T::zero()) || t > last * (T::one() + T::tol(1e-12)) {
        return Err(QslError::TimeOutOfRange { t: t.as_f64(), lo: 0.0, hi: last.as_f64() });
    }
    let t = t.min(last);
    let mut h_psi = CVector::zeros(model.dim());
    let mut acc = Trapezoid::new(integrands(model, T::zero(), traj.states[0].amplitudes(), &mut h_psi));
    let mut k_last = 0;
    for k in 1..traj.len() {
        let tk = traj.times[k];
        if tk > t {
            break;
        }
        acc.push(tk, integrands(model, tk, traj.states[k].amplitudes(), &mut h_psi));
        k_last = k;
    }
    let end = if t > acc.prev_t {
        let psi = rk4_step(model, acc.prev_t, &traj.states[k_last], t - acc.prev_t)?;
        integrands(model, t, psi.amplitudes(), &mut h_psi)
    } else {
        acc.prev
    };
    Ok(acc.average_to(t, end))
}

/// `(1/t)∫₀ᵗ ΔH(τ)dτ` on a stored trajectory.
pub fn avg_uncertainty<T: Real>(model: &dyn Hamiltonian<T>, traj: &Trajectory<T>, t: T) -> Result<T> {
    Ok(trajectory_averages(model, traj, t)?.uncertainty)
}

/// Time averages at several end times along one RK4 run. An end time of
/// zero yields the instantaneous values at `t = 0`.
pub fn path_averages<T: Real>(
    model: &dyn Hamiltonian<T>,
    psi0: &PureState<T>,
    end_times: &[T],
    dt: T,
) -> Result<Vec<PathAverages<T>>> {
    let horizon = end_times.iter().fold(T::zero(), |a, &b| a.max(b));
    for &t in end_times {
        if t < T::zero() || !t.is_finite() {
            return Err(QslError::TimeOutOfRange { t: t.as_f64(), lo: 0.0, hi: horizon.as_f64() });
        }
    }
    let mut order: Vec<usize> = (0..end_times.len()).collect();
    order.sort_by(|&a, &b| end_times[a].partial_cmp(&end_times[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![PathAverages::zero(); end_times.len()];
    let mut next_query = 0;
    let mut h_psi = CVector::zeros(model.dim());
    let mut ws = Workspace::new(model.dim());
    let mut partial = CVector::zeros(model.dim());
    let mut acc: Option<Trapezoid<T>> = None;

    rk4_for_each(model, psi0, horizon, dt, |s| {
        let value = integrands(model, s.t, s.psi, &mut h_psi);
        match (&mut acc, s.prev) {
            (None, _) => {
                let first = Trapezoid::new(value);
                while next_query < order.len() && end_times[order[next_query]] == T::zero() {
                    out[order[next_query]] = value;
                    next_query += 1;
                }
                acc = Some(first);
            }
            (Some(trap), Some((t_prev, prev))) => {
                // queries falling inside (t_prev, s.t]
                while next_query < order.len() && end_times[order[next_query]] <= s.t {
                    let q = end_times[order[next_query]];
                    let end = if q < s.t {
                        step_into(model, t_prev, q - t_prev, prev, &mut partial, &mut ws);
                        integrands(model, q, &partial, &mut h_psi)
                    } else {
                        value
                    };
                    out[order[next_query]] = trap.average_to(q, end);
                    next_query += 1;
                }
                trap.push(s.t, value);
            }
            (Some(_), None) => unreachable!("only the first sample lacks a predecessor"),
        }
        if next_query == order.len() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(out)
}

/// Time-averaged uncertainty at several positive end times along one RK4 run.
pub fn avg_uncertainties<T: Real>(
    model: &dyn Hamiltonian<T>,
    psi0: &PureState<T>,
    end_times: &[T],
    dt: T,
) -> Result<Vec<T>> {
    for &t in end_times {
        if !(t > T::zero()) {
            return Err(QslError::TimeOutOfRange { t: t.as_f64(), lo: 0.0, hi: f64::INFINITY });
        }
    }
    Ok(path_averages(model, psi0, end_times, dt)?.into_iter().map(|a| a.uncertainty).collect())
}

/// `ℓ_geodes / ℓ_real = arccos√F_R(t) / (ΔH_R·t)` for a stationary frame
/// Hamiltonian, with `F_R(t) = |⟨ψ0|e^{−iH_R t}|ψ0⟩|²`.
pub fn path_ratio<T: Real>(h_rot: &HermitianOperator<T>, psi0: &PureState<T>, t: T) -> Result<T> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(QslError::TimeOutOfRange { t: t.as_f64(), lo: 0.0, hi: f64::INFINITY });
    }
    let dh = energy_uncertainty(h_rot, psi0)?;
    let scale = h_rot.max_abs_entry();
    if !(dh > T::tol(1e-14) * scale) {
        return Err(QslError::ZeroSpeed);
    }
    let psi_t = psi0.evolve(&expm_unitary(h_rot, t))?;
    let geodesic = fidelity(psi0, &psi_t)?.sqrt().acos();
    Ok((geodesic / (dh * t)).min(T::one()))
}
