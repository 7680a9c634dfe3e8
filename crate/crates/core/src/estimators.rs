//! Evolution-time estimators: the Anandan–Aharonov bound, the rotating-frame
//! transcendental method, the ε-family of frames for time-independent
//! Hamiltonians, and norm-based speed limits.
//!
//! The transcendental method parametrizes every state at fidelity `F` from
//! `ψ0` as
//!
//! ```text
//! |ψ̄⟩ = √F |ψ0⟩ + Σⱼ aⱼ e^{iφⱼ} |ψ⊥ⱼ⟩,   Σⱼ aⱼ² = 1 − F,
//! ```
//!
//! and for each sweep point solves `arccos√F̄_R(t) = ΔH_R·t`, where
//! `F̄_R(t) = |⟨ψ0|R†(t)|ψ̄⟩|²`. The estimate is the smallest first root.

use std::cmp::Ordering;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{QslError, Result};
use crate::propagation::{actual_time_fn, actual_times, path_averages, path_ratio, Hamiltonian};
use crate::quantum::{energy_uncertainty, gram_schmidt_complement, CVector, HermitianOperator, PureState};
use crate::scalar::{cis, re, unit_clamp, Real};
use crate::spin::RotatingFrame;

/// Largest sweep grid accepted by the solver.
pub const MAX_SWEEP_POINTS: usize = 50_000_000;

/// Relative width below which crossing bisections stop.
const ROOT_REL_TOL: f64 = 1e-13;

/// Roots within this relative distance of the minimum count as ties.
const TIE_REL_TOL: f64 = 1e-10;

/// Time samples tabulated per chunk of the crossing scan.
const SCAN_CHUNK: usize = 4096;

/// `arccos√F / avg ΔH` (ħ = 1).
pub fn aa_time<T: Real>(f_target: T, avg_dh: T) -> Result<T> {
    validate_fidelity(f_target)?;
    if !(avg_dh > T::zero()) {
        return Err(QslError::ZeroSpeed);
    }
    Ok(unit_clamp(f_target).sqrt().acos() / avg_dh)
}

fn validate_fidelity<T: Real>(f: T) -> Result<()> {
    if f >= T::zero() && f <= T::one() {
        Ok(())
    } else {
        Err(QslError::InvalidFidelity(f.as_f64()))
    }
}

/// Resolution of the parameter sweep and the time scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepGrid {
    /// Phases per axis, `φ_k = 2πk/n_phase`.
    pub n_phase: usize,
    /// Angle steps per hyperspherical axis, `u_k = (π/2)k/n_angle`, `k = 0..=n_angle`.
    pub n_angle: usize,
    /// Time samples per shortest oscillation period of `R†`.
    pub oversample: usize,
    /// Coarse→fine refinement passes around the incumbent minimum.
    pub refine_levels: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { n_phase: 16, n_angle: 8, oversample: 40, refine_levels: 0 }
    }
}

impl SweepGrid {
    pub fn new(n_phase: usize, n_angle: usize, oversample: usize, refine_levels: usize) -> Result<Self> {
        Self { n_phase, n_angle, oversample, refine_levels }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n_phase < 2 {
            return Err(QslError::InvalidGrid(format!("n_phase must be >= 2, got {}", self.n_phase)));
        }
        if self.n_angle < 2 {
            return Err(QslError::InvalidGrid(format!("n_angle must be >= 2, got {}", self.n_angle)));
        }
        if self.oversample < 8 {
            return Err(QslError::InvalidGrid(format!("oversample must be >= 8, got {}", self.oversample)));
        }
        Ok(self)
    }
}

/// Inputs of the transcendental method.
#[derive(Clone, Debug)]
pub struct EstimationProblem<T: Real> {
    pub psi0: PureState<T>,
    pub f_target: T,
    pub frame: RotatingFrame<T>,
    /// Stationary frame Hamiltonian `R†HR − Λ`.
    pub h_rot: HermitianOperator<T>,
    pub sweep: SweepGrid,
}

impl<T: Real> EstimationProblem<T> {
    pub fn new(
        psi0: PureState<T>,
        f_target: T,
        frame: RotatingFrame<T>,
        h_rot: HermitianOperator<T>,
        sweep: SweepGrid,
    ) -> Result<Self> {
        validate_fidelity(f_target)?;
        let sweep = sweep.validated()?;
        for dim in [frame.dim(), h_rot.dim()] {
            if dim != psi0.dim() {
                return Err(QslError::DimensionMismatch { expected: psi0.dim(), found: dim });
            }
        }
        Ok(Self { psi0, f_target, frame, h_rot, sweep })
    }

    pub fn with_target(&self, f_target: T) -> Result<Self> {
        validate_fidelity(f_target)?;
        Ok(Self { f_target, ..self.clone() })
    }
}

/// Solution of the transcendental equation at the minimizing sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct TranscendentalRoot<T: Real> {
    pub t_star: T,
    /// Hyperspherical angles of the minimizer (`n − 2` values).
    pub angles: Vec<T>,
    /// Relative phases φⱼ of the minimizer (`n − 1` values).
    pub phases: Vec<T>,
    /// Amplitudes aⱼ with `Σ aⱼ² = 1 − F`.
    pub amplitudes: Vec<T>,
    /// `g(t_star) = arccos√F̄_R − ΔH_R·t_star`.
    pub residual: T,
    /// Scan interval that bracketed the root.
    pub bracket: (T, T),
    /// ΔH_R of the initial state.
    pub dh_rot: T,
}

/// Amplitudes on the sphere of radius `rho` from `m − 1` hyperspherical
/// angles: `a_m = ρ cos α₁`, then recursively with `ρ sin α₁`; the last
/// pair is `(ρ cos α, ρ sin α)`.
pub fn hyperspherical_amplitudes<T: Real>(rho: T, angles: &[T]) -> Vec<T> {
    let m = angles.len() + 1;
    let mut out = vec![T::zero(); m];
    let mut r = rho;
    let mut top = m;
    for (i, &a) in angles.iter().enumerate() {
        if i + 2 == m {
            out[0] = r * a.cos();
            out[1] = r * a.sin();
            return out;
        }
        out[top - 1] = r * a.cos();
        r *= a.sin();
        top -= 1;
    }
    out[0] = r;
    out
}

/// Precomputed spectral data for evaluating `⟨ψ0|R†(t)|χ⟩` cheaply.
struct Prepared<T: Real> {
    /// Eigenvalues of Λ.
    eig: Vec<T>,
    /// `p[j][k] = conj(⟨v_k|ψ0⟩)·⟨v_k|χⱼ⟩` with χ₀ = ψ0 and χⱼ the complement.
    weights: Vec<Vec<Complex<T>>>,
    dh_rot: T,
    bracket_end: T,
    samples: usize,
    step: T,
}

impl<T: Real> Prepared<T> {
    fn new(problem: &EstimationProblem<T>) -> Result<Self> {
        let psi0 = &problem.psi0;
        let dh_rot = energy_uncertainty(&problem.h_rot, psi0)?;
        if !(dh_rot > T::tol(1e-14) * problem.h_rot.max_abs_entry()) {
            return Err(QslError::ZeroSpeed);
        }
        let spectral = problem.frame.generator.spectral();
        let w0 = spectral.coordinates(psi0.amplitudes());
        let mut chis = vec![psi0.clone()];
        chis.extend(gram_schmidt_complement(psi0));
        let weights = chis
            .iter()
            .map(|chi| {
                let w = spectral.coordinates(chi.amplitudes());
                w0.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).collect()
            })
            .collect();
        let bracket_end = T::frac_pi_2() / dh_rot;
        let span = spectral.span();
        let oversample = T::lit(problem.sweep.oversample as f64);
        let target_step =
            if span > T::zero() { T::two_pi() / span / oversample } else { bracket_end / oversample };
        let samples = (bracket_end / target_step).ceil().to_usize().unwrap_or(usize::MAX).max(1);
        Ok(Self { eig: spectral.values, weights, dh_rot, bracket_end, samples, step: bracket_end / T::lit(samples as f64) })
    }

    fn n_complement(&self) -> usize {
        self.weights.len() - 1
    }

    fn time(&self, k: usize) -> T {
        if k == self.samples {
            self.bracket_end
        } else {
            self.step * T::lit(k as f64)
        }
    }

    /// `⟨ψ0|R†(t)|χⱼ⟩` for every j.
    fn overlaps(&self, t: T, out: &mut [Complex<T>]) {
        let phases: Vec<Complex<T>> = self.eig.iter().map(|&d| cis(d * t)).collect();
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o = w.iter().zip(&phases).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b);
        }
    }

    fn fbar(&self, coeffs: &[Complex<T>], overlaps: &[Complex<T>]) -> T {
        let amp = coeffs.iter().zip(overlaps).fold(Complex::new(T::zero(), T::zero()), |acc, (c, o)| acc + c * o);
        unit_clamp(amp.norm_sqr())
    }

    /// `g(t) ≤ 0`, i.e. `F̄_R(t) ≥ cos²(ΔH_R t)`; always true at the bracket end.
    fn crossed_at(&self, coeffs: &[Complex<T>], t: T, buf: &mut [Complex<T>]) -> bool {
        if t >= self.bracket_end {
            return true;
        }
        self.overlaps(t, buf);
        let c = (self.dh_rot * t).cos();
        self.fbar(coeffs, buf) >= c * c
    }

    fn g(&self, coeffs: &[Complex<T>], t: T) -> T {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.weights.len()];
        self.overlaps(t, &mut buf);
        self.fbar(coeffs, &buf).sqrt().acos() - self.dh_rot * t
    }
}

/// One sweep point: angles then phases.
#[derive(Clone, Debug, PartialEq)]
struct SweepPoint<T: Real> {
    angles: Vec<T>,
    phases: Vec<T>,
}

impl<T: Real> SweepPoint<T> {
    fn coefficients(&self, f_target: T) -> (Vec<T>, Vec<Complex<T>>) {
        let rho = unit_clamp(T::one() - f_target).sqrt();
        let amps = hyperspherical_amplitudes(rho, &self.angles);
        let mut coeffs = vec![re(f_target.sqrt())];
        coeffs.extend(amps.iter().zip(&self.phases).map(|(&a, &p)| cis(p) * a));
        (amps, coeffs)
    }

    fn lex_cmp(&self, other: &Self) -> Ordering {
        self.angles
            .iter()
            .chain(&self.phases)
            .zip(other.angles.iter().chain(&other.phases))
            .map(|(a, b)| a.partial_cmp(b).unwrap_or(Ordering::Equal))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    }
}

/// Cartesian product of per-axis value lists (angle axes first).
struct AxisGrid<T: Real> {
    angle_axes: Vec<Vec<T>>,
    phase_axes: Vec<Vec<T>>,
}

impl<T: Real> AxisGrid<T> {
    fn coarse(sweep: &SweepGrid, m: usize) -> Self {
        let angles: Vec<T> =
            (0..=sweep.n_angle).map(|k| T::frac_pi_2() * T::lit(k as f64 / sweep.n_angle as f64)).collect();
        let phases: Vec<T> =
            (0..sweep.n_phase).map(|k| T::two_pi() * T::lit(k as f64 / sweep.n_phase as f64)).collect();
        Self { angle_axes: vec![angles; m - 1], phase_axes: vec![phases; m] }
    }

    /// Five points per axis at `center + w·{−1, −½, 0, ½, 1}`, angles
    /// clamped to `[0, π/2]` and phases wrapped to `[0, 2π)`.
    fn refined(center: &SweepPoint<T>, angle_width: T, phase_width: T) -> Self {
        let offsets = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let axis = |c: T, w: T, map: &dyn Fn(T) -> T| {
            let mut v: Vec<T> = offsets.iter().map(|&o| map(c + w * T::lit(o))).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            v.dedup();
            v
        };
        let clamp = |a: T| a.max(T::zero()).min(T::frac_pi_2());
        let wrap = |p: T| {
            if p < T::zero() {
                p + T::two_pi()
            } else if p >= T::two_pi() {
                p - T::two_pi()
            } else {
                p
            }
        };
        Self {
            angle_axes: center.angles.iter().map(|&a| axis(a, angle_width, &clamp)).collect(),
            phase_axes: center.phases.iter().map(|&p| axis(p, phase_width, &wrap)).collect(),
        }
    }

    fn len(&self) -> Result<usize> {
        self.angle_axes.iter().chain(&self.phase_axes).try_fold(1usize, |acc, a| {
            acc.checked_mul(a.len())
                .filter(|&n| n <= MAX_SWEEP_POINTS)
                .ok_or_else(|| QslError::InvalidGrid(format!("sweep exceeds {MAX_SWEEP_POINTS} points")))
        })
    }

    /// Mixed-radix decoding, last phase axis fastest.
    fn point(&self, mut index: usize) -> SweepPoint<T> {
        let mut phases = vec![T::zero(); self.phase_axes.len()];
        for (slot, axis) in phases.iter_mut().zip(&self.phase_axes).rev() {
            *slot = axis[index % axis.len()];
            index /= axis.len();
        }
        let mut angles = vec![T::zero(); self.angle_axes.len()];
        for (slot, axis) in angles.iter_mut().zip(&self.angle_axes).rev() {
            *slot = axis[index % axis.len()];
            index /= axis.len();
        }
        SweepPoint { angles, phases }
    }
}

#[derive(Clone, Debug)]
struct Candidate<T: Real> {
    t: T,
    bracket: (T, T),
    point: SweepPoint<T>,
}

fn better<T: Real>(a: Candidate<T>, b: Candidate<T>, t_min: T) -> Candidate<T> {
    let tie = t_min * T::lit(TIE_REL_TOL);
    let a_tied = a.t <= t_min + tie;
    let b_tied = b.t <= t_min + tie;
    match (a_tied, b_tied) {
        (true, true) => {
            if b.point.lex_cmp(&a.point) == Ordering::Less {
                b
            } else {
                a
            }
        }
        (false, true) => b,
        (true, false) => a,
        (false, false) => {
            if b.t < a.t {
                b
            } else {
                a
            }
        }
    }
}

/// Smallest first root over one grid. Deterministic for any thread count:
/// every reduction is over values computed independently per point.
fn solve_grid<T: Real>(prep: &Prepared<T>, f_target: T, grid: &AxisGrid<T>) -> Result<Candidate<T>> {
    let n_points = grid.len()?;
    let width = prep.weights.len();
    let coeffs: Vec<Vec<Complex<T>>> =
        (0..n_points).into_par_iter().map(|i| grid.point(i).coefficients(f_target).1).collect();

    // Pass 1: the earliest sample index at which any point has crossed.
    let mut first = None;
    let mut chunk_start = 1;
    let mut table = Vec::with_capacity(SCAN_CHUNK * width);
    let mut cos2 = Vec::with_capacity(SCAN_CHUNK);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); width];
    while first.is_none() && chunk_start <= prep.samples {
        let chunk_end = (chunk_start + SCAN_CHUNK).min(prep.samples + 1);
        table.clear();
        cos2.clear();
        for k in chunk_start..chunk_end {
            let t = prep.time(k);
            prep.overlaps(t, &mut buf);
            table.extend_from_slice(&buf);
            let c = (prep.dh_rot * t).cos();
            cos2.push(if k == prep.samples { T::zero() } else { c * c });
        }
        first = coeffs
            .par_iter()
            .filter_map(|c| {
                (0..chunk_end - chunk_start)
                    .find(|&s| prep.fbar(c, &table[s * width..(s + 1) * width]) >= cos2[s])
                    .map(|s| chunk_start + s)
            })
            .min();
        chunk_start = chunk_end;
    }
    let k_min = first.ok_or_else(|| QslError::NoBracket("no sign change of g within [0, π/(2ΔH_R)]".into()))?;

    // Pass 2: bisect every point that crossed at k_min.
    let (t_lo, t_hi) = (prep.time(k_min - 1), prep.time(k_min));
    let candidates: Vec<Candidate<T>> = coeffs
        .par_iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let mut buf = vec![Complex::new(T::zero(), T::zero()); width];
            // points that had not crossed at k_min − 1 by construction
            if !prep.crossed_at(c, t_hi, &mut buf) {
                return None;
            }
            let (mut lo, mut hi) = (t_lo, t_hi);
            for _ in 0..200 {
                if hi - lo <= T::tol(ROOT_REL_TOL) * hi {
                    break;
                }
                let mid = lo + (hi - lo) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if prep.crossed_at(c, mid, &mut buf) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(Candidate { t: lo + (hi - lo) * T::lit(0.5), bracket: (t_lo, t_hi), point: grid.point(i) })
        })
        .collect();
    let t_min = candidates.iter().fold(t_hi, |m, c| m.min(c.t));
    candidates
        .into_iter()
        .reduce(|a, b| better(a, b, t_min))
        .ok_or_else(|| QslError::NoBracket("crossing vanished during bisection".into()))
}

fn finish<T: Real>(prep: &Prepared<T>, f_target: T, best: Candidate<T>) -> TranscendentalRoot<T> {
    let (amplitudes, coeffs) = best.point.coefficients(f_target);
    TranscendentalRoot {
        t_star: best.t,
        residual: prep.g(&coeffs, best.t),
        angles: best.point.angles,
        phases: best.point.phases,
        amplitudes,
        bracket: best.bracket,
        dh_rot: prep.dh_rot,
    }
}

fn trivial_root<T: Real>(problem: &EstimationProblem<T>, dh_rot: T) -> TranscendentalRoot<T> {
    let m = problem.psi0.dim() - 1;
    TranscendentalRoot {
        t_star: T::zero(),
        angles: vec![T::zero(); m - 1],
        phases: vec![T::zero(); m],
        amplitudes: vec![T::zero(); m],
        residual: T::zero(),
        bracket: (T::zero(), T::zero()),
        dh_rot,
    }
}

/// Smallest first chronological root of `g` over the sweep grid, with
/// optional coarse→fine refinement around the incumbent.
pub fn solve_transcendental<T: Real>(problem: &EstimationProblem<T>) -> Result<TranscendentalRoot<T>> {
    let prep = Prepared::new(problem)?;
    if problem.f_target == T::one() {
        return Ok(trivial_root(problem, prep.dh_rot));
    }
    let sweep = &problem.sweep;
    let m = prep.n_complement();
    let mut best = solve_grid(&prep, problem.f_target, &AxisGrid::coarse(sweep, m))?;
    let mut angle_width = T::frac_pi_2() / T::lit(sweep.n_angle as f64);
    let mut phase_width = T::two_pi() / T::lit(sweep.n_phase as f64);
    for _ in 0..sweep.refine_levels {
        let grid = AxisGrid::refined(&best.point, angle_width, phase_width);
        let local = solve_grid(&prep, problem.f_target, &grid)?;
        let t_min = best.t.min(local.t);
        best = better(best, local, t_min);
        angle_width *= T::lit(0.5);
        phase_width *= T::lit(0.5);
    }
    Ok(finish(&prep, problem.f_target, best))
}

/// First root of `g` for one explicit parameter choice.
pub fn first_root<T: Real>(problem: &EstimationProblem<T>, angles: &[T], phases: &[T]) -> Result<TranscendentalRoot<T>> {
    let prep = Prepared::new(problem)?;
    let m = prep.n_complement();
    if angles.len() + 1 != m || phases.len() != m {
        return Err(QslError::InvalidGrid(format!("expected {} angles and {m} phases", m - 1)));
    }
    if problem.f_target == T::one() {
        return Ok(trivial_root(problem, prep.dh_rot));
    }
    let grid = AxisGrid {
        angle_axes: angles.iter().map(|&a| vec![a]).collect(),
        phase_axes: phases.iter().map(|&p| vec![p]).collect(),
    };
    let best = solve_grid(&prep, problem.f_target, &grid)?;
    Ok(finish(&prep, problem.f_target, best))
}

/// `F̄_R(t) = |√F⟨ψ0|R†(t)|ψ0⟩ + Σⱼ aⱼe^{iφⱼ}⟨ψ0|R†(t)|ψ⊥ⱼ⟩|²`.
pub fn fbar_rotating<T: Real>(problem: &EstimationProblem<T>, t: T, phases: &[T], amplitudes: &[T]) -> Result<T> {
    let psi0 = &problem.psi0;
    let complement = gram_schmidt_complement(psi0);
    if phases.len() != complement.len() || amplitudes.len() != complement.len() {
        return Err(QslError::DimensionMismatch { expected: complement.len(), found: phases.len().max(amplitudes.len()) });
    }
    let r_dag = problem.frame.unitary(t).adjoint();
    let mut target: CVector<T> = psi0.amplitudes() * re(problem.f_target.sqrt());
    for ((chi, &a), &p) in complement.iter().zip(amplitudes).zip(phases) {
        target += chi.amplitudes() * (cis(p) * a);
    }
    let amp = psi0.amplitudes().dotc(&(r_dag * target));
    Ok(unit_clamp(amp.norm_sqr()))
}

fn epsilon_problem<T: Real>(
    h: &HermitianOperator<T>,
    psi0: &PureState<T>,
    f_target: T,
    epsilon: T,
    sweep: SweepGrid,
) -> Result<EstimationProblem<T>> {
    if !(epsilon > T::zero() && epsilon <= T::one()) {
        return Err(QslError::InvalidParams(format!("epsilon must lie in (0, 1], got {}", epsilon.as_f64())));
    }
    let frame = RotatingFrame::new(h.scaled(T::one() - epsilon));
    EstimationProblem::new(psi0.clone(), f_target, frame, h.scaled(epsilon), sweep)
}

/// Transcendental estimate in the frame `Λ = (1 − ε)H`, `H_R = εH`.
pub fn epsilon_estimate<T: Real>(
    h: &HermitianOperator<T>,
    psi0: &PureState<T>,
    f_target: T,
    epsilon: T,
    sweep: SweepGrid,
) -> Result<T> {
    Ok(solve_transcendental(&epsilon_problem(h, psi0, f_target, epsilon, sweep)?)?.t_star)
}

/// Rotating-frame AA time `arccos√F_R(t)/(εΔH)` at the evolution time `t`,
/// with `F_R(t) = |⟨ψ0|e^{−iεHt}|ψ0⟩|²`; tends to `t` as `ε → 0` with an
/// `O(ε²)` error.
pub fn epsilon_rotating_aa_time<T: Real>(h: &HermitianOperator<T>, psi0: &PureState<T>, epsilon: T, t: T) -> Result<T> {
    if !(epsilon > T::zero() && epsilon <= T::one()) {
        return Err(QslError::InvalidParams(format!("epsilon must lie in (0, 1], got {}", epsilon.as_f64())));
    }
    if t == T::zero() {
        return Ok(T::zero());
    }
    let h_rot = h.scaled(epsilon);
    let ratio = path_ratio(&h_rot, psi0, t)?;
    Ok(ratio * t)
}

/// Which norm of the rank-one generator `H|ψ⟩⟨ψ|` enters the speed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Trace,
    Operator,
    HilbertSchmidt,
}

/// Hilbert–Schmidt convention: Frobenius `√Σσ²`, or the literal `Σσ²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HsConvention {
    #[default]
    Frobenius,
    Literal,
}

/// Singular values of `H|ψ⟩⟨ψ|` in descending order: `‖Hψ‖` then zeros.
pub fn rank_one_singular_values<T: Real>(h: &HermitianOperator<T>, psi: &PureState<T>) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); psi.dim()];
    out[0] = h.apply(psi)?.norm();
    Ok(out)
}

/// The chosen norm from descending singular values.
pub fn norm_from_singular_values<T: Real>(sigma: &[T], kind: NormKind, hs: HsConvention) -> T {
    match kind {
        NormKind::Trace => sigma.iter().fold(T::zero(), |a, &s| a + s),
        NormKind::Operator => sigma.first().copied().unwrap_or_else(T::zero),
        NormKind::HilbertSchmidt => {
            let sq = sigma.iter().fold(T::zero(), |a, &s| a + s * s);
            match hs {
                HsConvention::Frobenius => sq.sqrt(),
                HsConvention::Literal => sq,
            }
        }
    }
}

/// Time-averaged norms Λ^ℓ of the rank-one generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormLambdas<T: Real> {
    pub trace: T,
    pub operator: T,
    pub hilbert_schmidt: T,
}

impl<T: Real> NormLambdas<T> {
    /// From the averages of `‖Hψ‖` and `‖Hψ‖²`: trace = operator = avg σ₁.
    pub fn from_averages(avg_norm: T, avg_norm_sq: T, hs: HsConvention) -> Self {
        let hilbert_schmidt = match hs {
            HsConvention::Frobenius => avg_norm,
            HsConvention::Literal => avg_norm_sq,
        };
        Self { trace: avg_norm, operator: avg_norm, hilbert_schmidt }
    }

    pub fn get(&self, kind: NormKind) -> T {
        match kind {
            NormKind::Trace => self.trace,
            NormKind::Operator => self.operator,
            NormKind::HilbertSchmidt => self.hilbert_schmidt,
        }
    }
}

/// `Λ^ℓ_t = (1/t)∫₀ᵗ ‖H(t′)|ψ(t′)⟩⟨ψ(t′)|‖_ℓ dt′` on a stored trajectory.
pub fn norm_lambda<T: Real>(
    model: &dyn Hamiltonian<T>,
    traj: &crate::propagation::Trajectory<T>,
    t: T,
    kind: NormKind,
    hs: HsConvention,
) -> Result<T> {
    let avg = crate::propagation::trajectory_averages(model, traj, t)?;
    Ok(NormLambdas::from_averages(avg.h_psi_norm, avg.h_psi_norm_sq, hs).get(kind))
}

/// Norm-based times `(τ_tr, τ_op, τ_hs)` with `L = arccos√F`:
/// `τ_tr,op = sin²L/(2Λ)` and `τ_hs = sin²L/Λ_hs`.
pub fn norm_times<T: Real>(f_target: T, lambdas: &NormLambdas<T>) -> Result<(T, T, T)> {
    validate_fidelity(f_target)?;
    for l in [lambdas.trace, lambdas.operator, lambdas.hilbert_schmidt] {
        if !(l > T::zero()) {
            return Err(QslError::ZeroSpeed);
        }
    }
    let s = unit_clamp(f_target).sqrt().acos().sin();
    let s2 = s * s;
    let two = T::lit(2.0);
    Ok((s2 / (two * lambdas.trace), s2 / (two * lambdas.operator), s2 / lambdas.hilbert_schmidt))
}

/// How the reference evolution time is obtained.
pub enum ActualTimeOracle<'a, T: Real> {
    /// Closed-form fidelity scanned with step `scan_step`.
    Exact { fidelity: &'a (dyn Fn(T) -> Result<T> + Sync), scan_step: T },
    /// First crossings along the RK4 run.
    Rk4,
}

/// Everything needed to produce one table of estimates.
pub struct CompareSetup<'a, T: Real> {
    pub model: &'a dyn Hamiltonian<T>,
    pub problem: EstimationProblem<T>,
    pub horizon: T,
    /// RK4 step for trajectory quantities.
    pub rk4_dt: T,
    pub oracle: ActualTimeOracle<'a, T>,
    pub hs: HsConvention,
}

/// Whether the target fidelity is reached within the horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowStatus<T: Real> {
    Ok,
    Unreachable { min_fidelity: T },
}

/// Estimates for one fidelity target.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport<T: Real> {
    pub f_target: T,
    pub status: RowStatus<T>,
    pub t_actual: Option<T>,
    pub t_aa: Option<T>,
    pub t_transcendental: T,
    pub t_epsilon: Option<T>,
    pub t_norm_tr: Option<T>,
    pub t_norm_op: Option<T>,
    pub t_norm_hs: Option<T>,
    pub path_ratio: Option<T>,
    pub dh_rot: T,
    pub avg_dh_lab: Option<T>,
    pub root: TranscendentalRoot<T>,
}

impl<T: Real> EstimateReport<T> {
    pub fn is_reachable(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

/// Runs every estimator for each fidelity target. Unreachable targets are
/// reported with `RowStatus::Unreachable` rather than dropped.
pub fn compare<T: Real>(setup: &CompareSetup<'_, T>, targets: &[T]) -> Result<Vec<EstimateReport<T>>> {
    let psi0 = &setup.problem.psi0;
    for &f in targets {
        validate_fidelity(f)?;
    }
    let actual: Vec<Result<T>> = match &setup.oracle {
        ActualTimeOracle::Exact { fidelity, scan_step } => targets
            .par_iter()
            .map(|&f| actual_time_fn(fidelity, f, setup.horizon, *scan_step))
            .collect(),
        ActualTimeOracle::Rk4 => actual_times(setup.model, psi0, targets, setup.horizon, setup.rk4_dt)?,
    };
    let mut actual_ok = Vec::with_capacity(targets.len());
    let mut status = Vec::with_capacity(targets.len());
    for r in actual {
        match r {
            Ok(t) => {
                actual_ok.push(Some(t));
                status.push(RowStatus::Ok);
            }
            Err(QslError::FidelityNeverReached { min_fidelity, .. }) => {
                actual_ok.push(None);
                status.push(RowStatus::Unreachable { min_fidelity: T::lit(min_fidelity) });
            }
            Err(e) => return Err(e),
        }
    }
    let ends: Vec<T> = actual_ok.iter().flatten().copied().collect();
    let mut averages = path_averages(setup.model, psi0, &ends, setup.rk4_dt)?.into_iter();

    let mut rows = Vec::with_capacity(targets.len());
    for ((&f, t_actual), status) in targets.iter().zip(actual_ok).zip(status) {
        let root = solve_transcendental(&setup.problem.with_target(f)?)?;
        let mut row = EstimateReport {
            f_target: f,
            status,
            t_actual,
            t_aa: None,
            t_transcendental: root.t_star,
            t_epsilon: None,
            t_norm_tr: None,
            t_norm_op: None,
            t_norm_hs: None,
            path_ratio: None,
            dh_rot: root.dh_rot,
            avg_dh_lab: None,
            root,
        };
        if let Some(t) = t_actual {
            let avg = averages.next().expect("one average per reachable row");
            let lambdas = NormLambdas::from_averages(avg.h_psi_norm, avg.h_psi_norm_sq, setup.hs);
            let (tr, op, hs) = norm_times(f, &lambdas)?;
            row.t_aa = Some(aa_time(f, avg.uncertainty)?);
            row.t_norm_tr = Some(tr);
            row.t_norm_op = Some(op);
            row.t_norm_hs = Some(hs);
            row.avg_dh_lab = Some(avg.uncertainty);
            row.path_ratio = Some(if t > T::zero() { path_ratio(&setup.problem.h_rot, psi0, t)? } else { T::one() });
        }
        rows.push(row);
    }
    Ok(rows)
}
