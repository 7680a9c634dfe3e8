//! NMR Hamiltonian families in the laboratory frame, the rotating-frame
//! transformation, and closed-form dynamics for the spin-1/2 and
//! stretched-state spin-3/2 cases.
//!
//! Lab Hamiltonian (ħ = 1):
//!
//! ```text
//! H(t) = ω₀ Iz + ω₁ (cos(ω_p t) Ix + sin(ω_p t) Iy) [+ (ω_Q/6)(3Iz² − I²)]
//! ```
//!
//! The frame `R(t) = e^{−iω_p Iz t}` removes the drive's time dependence,
//! leaving `H_R = Δ Iz + ω₁ Ix` with detuning `Δ = ω₀ − ω_p`.

use num_complex::Complex;

use crate::error::{QslError, Result};
use crate::propagation::Hamiltonian;
use crate::quantum::{
    bloch_state, fidelity, CMatrix, CVector, HermitianOperator, PureState, Spin, SpinOperators,
};
use crate::scalar::{cis, re, unit_clamp, Real};

/// Angular frequencies (rad/s) and spin defining a lab Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NmrParams<T: Real> {
    pub spin: Spin,
    /// Larmor frequency ω₀.
    pub omega0: T,
    /// Transverse drive amplitude ω₁.
    pub omega1: T,
    /// Drive rotation frequency ω_p.
    pub omegap: T,
    /// Quadrupolar coupling ω_Q.
    pub omega_q: T,
    pub quadrupolar_included: bool,
}

impl<T: Real> NmrParams<T> {
    /// Resonant drive (ω_p = ω₀) without quadrupolar term.
    pub fn resonant(spin: Spin, omega0: T, omega1: T) -> Result<Self> {
        Self { spin, omega0, omega1, omegap: omega0, omega_q: T::zero(), quadrupolar_included: false }
            .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let finite = [self.omega0, self.omega1, self.omegap, self.omega_q].iter().all(|w| w.is_finite());
        if !finite {
            return Err(QslError::InvalidParams("frequencies must be finite".into()));
        }
        if self.omega1 <= T::zero() {
            return Err(QslError::InvalidParams("omega1 must be positive".into()));
        }
        if self.quadrupolar_included && self.spin.twice() < 2 {
            return Err(QslError::InvalidParams("quadrupolar term requires j >= 1".into()));
        }
        Ok(self)
    }

    /// Multiplies every frequency by `lambda`.
    pub fn scaled(&self, lambda: T) -> Self {
        Self {
            omega0: self.omega0 * lambda,
            omega1: self.omega1 * lambda,
            omegap: self.omegap * lambda,
            omega_q: self.omega_q * lambda,
            ..*self
        }
    }

    /// Δ = ω₀ − ω_p.
    pub fn detuning(&self) -> T {
        self.omega0 - self.omegap
    }

    fn require_spin(&self, spin: Spin) -> Result<()> {
        if self.spin == spin {
            Ok(())
        } else {
            Err(QslError::WrongSpin { expected: spin.j(), found: self.spin.j() })
        }
    }
}

/// Lab-frame Hamiltonian with the spin matrices precomputed.
#[derive(Clone, Debug)]
pub struct NmrModel<T: Real> {
    params: NmrParams<T>,
    ops: SpinOperators<T>,
    /// ω₀Iz [+ quadrupolar term]: the static part.
    fixed: CMatrix<T>,
    ix: CMatrix<T>,
    iy: CMatrix<T>,
}

impl<T: Real> NmrModel<T> {
    pub fn new(params: NmrParams<T>) -> Result<Self> {
        let params = params.validated()?;
        let ops = SpinOperators::new(params.spin);
        let mut fixed = ops.iz.scaled(params.omega0);
        if params.quadrupolar_included {
            fixed = &fixed + &ops.quadrupolar().scaled(params.omega_q / T::lit(6.0));
        }
        Ok(Self {
            fixed: fixed.matrix().clone(),
            ix: ops.ix.matrix() * re(params.omega1),
            iy: ops.iy.matrix() * re(params.omega1),
            params,
            ops,
        })
    }

    pub fn params(&self) -> &NmrParams<T> {
        &self.params
    }

    pub fn ops(&self) -> &SpinOperators<T> {
        &self.ops
    }

    /// The standard frame `Λ = ω_p Iz`.
    pub fn drive_frame(&self) -> RotatingFrame<T> {
        RotatingFrame::new(self.ops.iz.scaled(self.params.omegap))
    }
}

impl<T: Real> Hamiltonian<T> for NmrModel<T> {
    fn dim(&self) -> usize {
        self.params.spin.dim()
    }

    fn at(&self, t: T) -> HermitianOperator<T> {
        let phase = self.params.omegap * t;
        let m = &self.fixed + &self.ix * re(phase.cos()) + &self.iy * re(phase.sin());
        HermitianOperator::new(m).expect("lab Hamiltonian is Hermitian by construction")
    }

    fn apply(&self, t: T, v: &CVector<T>) -> CVector<T> {
        let phase = self.params.omegap * t;
        let mut out = &self.fixed * v;
        out += (&self.ix * v) * re(phase.cos());
        out += (&self.iy * v) * re(phase.sin());
        out
    }
}

/// H(t) for the given parameters.
pub fn lab_hamiltonian<T: Real>(p: &NmrParams<T>, t: T) -> Result<HermitianOperator<T>> {
    Ok(NmrModel::new(*p)?.at(t))
}

/// Frame defined by `R(t) = e^{−iΛt}` with a time-independent generator Λ.
#[derive(Clone, Debug)]
pub struct RotatingFrame<T: Real> {
    pub generator: HermitianOperator<T>,
}

impl<T: Real> RotatingFrame<T> {
    pub fn new(generator: HermitianOperator<T>) -> Self {
        Self { generator }
    }

    /// `Λ = ω_p Iz`.
    pub fn about_z(spin: Spin, omegap: T) -> Self {
        Self::new(SpinOperators::<T>::new(spin).iz.scaled(omegap))
    }

    /// The trivial frame `R = 1`.
    pub fn identity(dim: usize) -> Self {
        Self::new(HermitianOperator::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    /// `R(t)`.
    pub fn unitary(&self, t: T) -> CMatrix<T> {
        self.generator.spectral().propagator(t)
    }

    /// `R†(t) H(t) R(t) − Λ` at one instant.
    pub fn transform_at(&self, model: &dyn Hamiltonian<T>, t: T) -> HermitianOperator<T> {
        let r = self.unitary(t);
        let conj = r.adjoint() * model.at(t).matrix() * &r;
        let m = conj - self.generator.matrix();
        HermitianOperator::new(m).expect("unitary conjugation preserves Hermiticity")
    }

    /// Verifies that the frame Hamiltonian is constant at 16 instants over
    /// `period` and returns it. The maximum entry deviation must stay below
    /// `1e-9·‖H_R‖`.
    pub fn stationary_hamiltonian(&self, model: &dyn Hamiltonian<T>, period: T) -> Result<HermitianOperator<T>> {
        const SAMPLES: usize = 16;
        let reference = self.transform_at(model, T::zero());
        let scale = match reference.max_abs_entry() {
            s if s > T::zero() => s,
            _ => T::one(),
        };
        let mut worst = T::zero();
        for k in 1..SAMPLES {
            let t = period * T::lit(k as f64 / SAMPLES as f64);
            worst = worst.max(self.transform_at(model, t).max_abs_diff(&reference));
        }
        let relative = worst / scale;
        if relative > T::tol(1e-9) {
            return Err(QslError::FrameNotStationary { deviation: relative.as_f64() });
        }
        Ok(reference)
    }
}

/// Constant rotating-frame Hamiltonian for `p` in `frame`, checked over one
/// drive period.
pub fn rotating_hamiltonian<T: Real>(p: &NmrParams<T>, frame: &RotatingFrame<T>) -> Result<HermitianOperator<T>> {
    let model = NmrModel::new(*p)?;
    if frame.dim() != model.dim() {
        return Err(QslError::DimensionMismatch { expected: model.dim(), found: frame.dim() });
    }
    let drive = if p.omegap != T::zero() { p.omegap.abs() } else { p.omega1 };
    frame.stationary_hamiltonian(&model, T::two_pi() / drive)
}

/// Detuning, effective Rabi frequency, tilt angle χ and the overlaps of a
/// Bloch initial state with the eigenvectors of `H_R = ΔIz + ω₁Ix`.
///
/// `|+⟩ = (cos χ/2, sin χ/2)` and `|−⟩ = (sin χ/2, −cos χ/2)` with
/// `cos χ = Δ/Ω`, `sin χ = ω₁/Ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedFrameQuantities<T: Real> {
    pub delta: T,
    pub omega: T,
    pub chi: T,
    pub cos_chi: T,
    pub sin_chi: T,
    pub cplus: Complex<T>,
    pub cminus: Complex<T>,
}

impl<T: Real> DerivedFrameQuantities<T> {
    pub fn new(p: &NmrParams<T>, theta: T, phi: T) -> Self {
        let delta = p.detuning();
        let omega = (delta * delta + p.omega1 * p.omega1).sqrt();
        let cos_chi = delta / omega;
        let sin_chi = p.omega1 / omega;
        let chi = sin_chi.atan2(cos_chi);
        let half = T::lit(0.5);
        let (ch, sh) = ((chi * half).cos(), (chi * half).sin());
        let (ct, st) = ((theta * half).cos(), (theta * half).sin());
        let e = cis(phi);
        let cplus = re(ch * ct) + e * (sh * st);
        let cminus = re(sh * ct) - e * (ch * st);
        Self { delta, omega, chi, cos_chi, sin_chi, cplus, cminus }
    }

    /// `|c₊|² − |c₋|² = cos θ cos χ + cos φ sin θ sin χ`.
    pub fn polarization(&self, theta: T, phi: T) -> T {
        theta.cos() * self.cos_chi + phi.cos() * theta.sin() * self.sin_chi
    }
}

/// Closed-form `|ψ(t)⟩ = e^{−iIzω_p t} e^{−i(ΔIz + ω₁Ix)t} |ψ(θ, φ)⟩`.
pub fn exact_state_spin_half<T: Real>(p: &NmrParams<T>, theta: T, phi: T, t: T) -> Result<PureState<T>> {
    p.require_spin(Spin::HALF)?;
    let d = DerivedFrameQuantities::new(p, theta, phi);
    let half = T::lit(0.5);
    let (ch, sh) = ((d.chi * half).cos(), (d.chi * half).sin());
    let fwd = cis(-d.omega * t * half) * d.cplus;
    let back = cis(d.omega * t * half) * d.cminus;
    let up = (fwd * ch + back * sh) * cis(-p.omegap * t * half);
    let down = (fwd * sh - back * ch) * cis(p.omegap * t * half);
    Ok(PureState::renormalized(CVector::from_column_slice(&[up, down])))
}

/// `F(t) = |⟨ψ(θ,φ)|ψ(t)⟩|²` for the spin-1/2 model.
pub fn exact_fidelity_spin_half<T: Real>(p: &NmrParams<T>, theta: T, phi: T, t: T) -> Result<T> {
    let psi0 = bloch_state(theta, phi);
    fidelity(&psi0, &exact_state_spin_half(p, theta, phi, t)?)
}

fn require_resonant_three_half<T: Real>(p: &NmrParams<T>) -> Result<()> {
    p.require_spin(Spin::THREE_HALVES)?;
    if p.quadrupolar_included {
        return Err(QslError::InvalidParams("closed form neglects the quadrupolar term".into()));
    }
    if (p.omegap - p.omega0).abs() > T::tol(1e-12) * p.omega0.abs() {
        return Err(QslError::InvalidParams("closed form requires omegap = omega0".into()));
    }
    Ok(())
}

/// Closed-form `e^{−iIzω₀t} e^{−iIxω₁t} |3/2, +3/2⟩`.
///
/// Components are listed in the crate's basis order m = +3/2 … −3/2:
/// `(e^{−3iω₀t/2} c³, −i√3 e^{−iω₀t/2} c²s, −√3 e^{iω₀t/2} c s², i e^{3iω₀t/2} s³)`
/// with `c = cos(ω₁t/2)`, `s = sin(ω₁t/2)`.
pub fn exact_state_spin_three_half<T: Real>(p: &NmrParams<T>, t: T) -> Result<PureState<T>> {
    require_resonant_three_half(p)?;
    let half = T::lit(0.5);
    let beta = p.omega1 * t * half;
    let (c, s) = (beta.cos(), beta.sin());
    let r3 = T::lit(3.0).sqrt();
    let w = p.omega0 * t * half;
    let i = Complex::new(T::zero(), T::one());
    let amps = [
        cis(-w * T::lit(3.0)) * (c * c * c),
        -i * cis(-w) * (r3 * c * c * s),
        -cis(w) * (r3 * c * s * s),
        i * cis(w * T::lit(3.0)) * (s * s * s),
    ];
    Ok(PureState::renormalized(CVector::from_column_slice(&amps)))
}

/// `F(t) = cos⁶(ω₁t/2)`.
pub fn exact_fidelity_spin_three_half<T: Real>(p: &NmrParams<T>, t: T) -> Result<T> {
    require_resonant_three_half(p)?;
    let c = (p.omega1 * t * T::lit(0.5)).cos();
    let c2 = c * c;
    Ok(c2 * c2 * c2)
}

/// ΔH_R = (Ω/2)·√(1 − (cos χ cos θ + cos φ sin χ sin θ)²).
pub fn uncertainty_rotating_spin_half<T: Real>(p: &NmrParams<T>, theta: T, phi: T) -> Result<T> {
    p.require_spin(Spin::HALF)?;
    let d = DerivedFrameQuantities::new(p, theta, phi);
    let pol = d.polarization(theta, phi);
    Ok(d.omega * T::lit(0.5) * unit_clamp(T::one() - pol * pol).sqrt())
}

/// Closed-form lab-frame ⟨H(t)⟩ for the spin-1/2 model:
/// `½(|c₊|²−|c₋|²)(Ω + ω_p cos χ) + ω_p sin χ [cos(Ωt) Re(c₊*c₋) − sin(Ωt) Im(c₊*c₋)]`.
pub fn mean_energy_lab_spin_half<T: Real>(p: &NmrParams<T>, theta: T, phi: T, t: T) -> Result<T> {
    p.require_spin(Spin::HALF)?;
    let d = DerivedFrameQuantities::new(p, theta, phi);
    let half = T::lit(0.5);
    let pol = d.polarization(theta, phi);
    let re_cc = half * (theta.cos() * d.sin_chi - phi.cos() * theta.sin() * d.cos_chi);
    let im_cc = -half * theta.sin() * phi.sin();
    let wt = d.omega * t;
    Ok(half * pol * (d.omega + p.omegap * d.cos_chi) + p.omegap * d.sin_chi * (wt.cos() * re_cc - wt.sin() * im_cc))
}

/// ΔH(t) = √((ω₀² + ω₁²)/4 − ⟨H(t)⟩²) in the lab frame.
pub fn uncertainty_lab_spin_half<T: Real>(p: &NmrParams<T>, theta: T, phi: T, t: T) -> Result<T> {
    let mean = mean_energy_lab_spin_half(p, theta, phi, t)?;
    let second = (p.omega0 * p.omega0 + p.omega1 * p.omega1) * T::lit(0.25);
    Ok((second - mean * mean).max(T::zero()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{energy_uncertainty, expm_unitary};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn two_pi(hz: f64) -> f64 {
        2.0 * PI * hz
    }

    fn nmr_half() -> NmrParams<f64> {
        NmrParams::resonant(Spin::HALF, two_pi(161.975e6), two_pi(21.930e3)).unwrap()
    }

    fn nmr_three_half() -> NmrParams<f64> {
        NmrParams {
            omega_q: two_pi(15e3),
            ..NmrParams::resonant(Spin::THREE_HALVES, two_pi(105.842e6), PI / 8e-6).unwrap()
        }
    }

    fn detuned_half() -> NmrParams<f64> {
        NmrParams {
            spin: Spin::HALF,
            omega0: 3.0,
            omega1: 1.3,
            omegap: 2.2,
            omega_q: 0.0,
            quadrupolar_included: false,
        }
    }

    #[test]
    fn params_validation() {
        let p = detuned_half();
        assert!(NmrParams { omega1: 0.0, ..p }.validated().is_err());
        assert!(NmrParams { omega0: f64::NAN, ..p }.validated().is_err());
        assert!(NmrParams { quadrupolar_included: true, ..p }.validated().is_err());
        let q = nmr_three_half();
        assert!(NmrParams { quadrupolar_included: true, ..q }.validated().is_ok());
    }

    #[test]
    fn lab_hamiltonian_at_zero() {
        let p = detuned_half();
        let h = lab_hamiltonian(&p, 0.0).unwrap();
        let ops = SpinOperators::<f64>::new(Spin::HALF);
        let expected = &ops.iz.scaled(p.omega0) + &ops.ix.scaled(p.omega1);
        assert!(h.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn lab_hamiltonian_quadrupolar_term() {
        let base = NmrParams { omega_q: 0.4, ..nmr_three_half().scaled(1e-6) };
        let with = NmrParams { quadrupolar_included: true, ..base };
        let ops = SpinOperators::<f64>::new(Spin::THREE_HALVES);
        // (ω_Q/6)(3Iz² − (15/4)·1)
        let iz2 = HermitianOperator::new(ops.iz.matmul(&ops.iz)).unwrap();
        let quad = &iz2.scaled(3.0) - &HermitianOperator::identity(4).scaled(15.0 / 4.0);
        for t in [0.0, 0.37, 5.1] {
            let diff = &lab_hamiltonian(&with, t).unwrap() - &lab_hamiltonian(&base, t).unwrap();
            assert!(diff.max_abs_diff(&quad.scaled(0.4 / 6.0)) < 1e-12);
        }
    }

    #[test]
    fn lab_hamiltonian_does_not_commute_with_itself() {
        let p = detuned_half();
        let a = lab_hamiltonian(&p, 0.1).unwrap();
        let b = lab_hamiltonian(&p, 0.9).unwrap();
        assert!(a.commutator_norm(&b) > 1e-3);
    }

    #[test]
    fn model_apply_matches_matrix() {
        let model = NmrModel::new(NmrParams { quadrupolar_included: true, omega_q: 0.3, ..nmr_three_half().scaled(1e-6) })
            .unwrap();
        let v = CVector::from_fn(4, |k, _| Complex::new(k as f64 + 0.5, 1.0 - k as f64));
        for t in [0.0, 1e-3, 2.5] {
            let direct = model.at(t).matrix() * &v;
            let applied = model.apply(t, &v);
            assert!((direct - applied).norm() < 1e-12);
        }
    }

    #[test]
    fn resonant_frames_leave_pure_drive() {
        for p in [nmr_half(), nmr_three_half()] {
            let frame = RotatingFrame::about_z(p.spin, p.omegap);
            let hr = rotating_hamiltonian(&p, &frame).unwrap();
            let ops = SpinOperators::<f64>::new(p.spin);
            let rel = hr.max_abs_diff(&ops.ix.scaled(p.omega1)) / p.omega1;
            assert!(rel < 1e-9, "relative deviation {rel}");
        }
    }

    #[test]
    fn detuned_frame_gives_delta_iz_plus_drive() {
        let p = detuned_half();
        let frame = RotatingFrame::about_z(p.spin, p.omegap);
        let hr = rotating_hamiltonian(&p, &frame).unwrap();
        let ops = SpinOperators::<f64>::new(Spin::HALF);
        let expected = &ops.iz.scaled(p.detuning()) + &ops.ix.scaled(p.omega1);
        assert!(hr.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn quadrupolar_frame_stays_stationary() {
        let p = NmrParams { quadrupolar_included: true, omegap: 2.0, ..nmr_three_half().scaled(1e-6) };
        let frame = RotatingFrame::about_z(p.spin, p.omegap);
        let hr = rotating_hamiltonian(&p, &frame).unwrap();
        // Oracle: direct conjugation at several instants.
        let model = NmrModel::new(p).unwrap();
        let ops = SpinOperators::<f64>::new(Spin::THREE_HALVES);
        let expected = &(&ops.iz.scaled(p.detuning()) + &ops.ix.scaled(p.omega1)) + &ops.quadrupolar().scaled(p.omega_q / 6.0);
        assert!(hr.max_abs_diff(&expected) < 1e-10);
        for t in [0.3, 1.7, 4.4] {
            let r = expm_unitary(&frame.generator, t);
            let direct = r.adjoint() * model.at(t).matrix() * &r - frame.generator.matrix();
            let diff = (direct - expected.matrix()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            assert!(diff < 1e-10);
        }
    }

    #[test]
    fn wrong_frame_is_not_stationary() {
        let p = detuned_half();
        let frame = RotatingFrame::identity(2);
        assert!(matches!(rotating_hamiltonian(&p, &frame), Err(QslError::FrameNotStationary { .. })));
    }

    #[test]
    fn spin_half_state_at_zero_is_initial() {
        let p = detuned_half();
        let s = exact_state_spin_half(&p, 0.8, 1.9, 0.0).unwrap();
        assert_abs_diff_eq!(fidelity(&s, &bloch_state(0.8, 1.9)).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn spin_half_state_matches_composed_propagator() {
        let p = detuned_half();
        let ops = SpinOperators::<f64>::new(Spin::HALF);
        let hr = &ops.iz.scaled(p.detuning()) + &ops.ix.scaled(p.omega1);
        let psi0 = bloch_state(1.1, -0.4);
        for t in [0.0, 0.3, 2.9, 17.0] {
            let u = expm_unitary(&ops.iz.scaled(p.omegap), t) * expm_unitary(&hr, t);
            let direct = psi0.evolve(&u).unwrap();
            let closed = exact_state_spin_half(&p, 1.1, -0.4, t).unwrap();
            // same vector, not just same ray
            assert!((direct.amplitudes() - closed.amplitudes()).norm() < 1e-12);
        }
    }

    #[test]
    fn resonant_north_pole_fidelity_is_cos_squared() {
        let p = NmrParams::resonant(Spin::HALF, 40.0, 1.7).unwrap();
        for t in [0.0f64, 0.2, 1.1, 3.0] {
            let f = exact_fidelity_spin_half(&p, 0.0, 0.0, t).unwrap();
            assert_abs_diff_eq!(f, (p.omega1 * t / 2.0f64).cos().powi(2), epsilon = 1e-12);
        }
        let f = exact_fidelity_spin_half(&p, 0.0, 0.0, PI / p.omega1).unwrap();
        assert!(f < 1e-24);
        assert_eq!(exact_fidelity_spin_half(&p, 0.4, 0.1, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn spin_half_nmr_fidelity_oscillates_at_larmor_period() {
        // Over short windows the fast Larmor precession dominates; count
        // local minima over 10 periods of 2π/ω₀.
        let p = nmr_half();
        let (theta, phi) = (24.48f64.to_radians(), 4.02f64.to_radians());
        let period = 2.0 * PI / p.omega0;
        assert!((period - 6.17e-9).abs() < 0.01e-9);
        let rabi = 2.0 * PI / DerivedFrameQuantities::new(&p, theta, phi).omega;
        assert!(rabi / period > 1000.0);
        let n = 4000;
        let horizon = 10.0 * period;
        let f: Vec<f64> = (0..=n)
            .map(|k| exact_fidelity_spin_half(&p, theta, phi, horizon * k as f64 / n as f64).unwrap())
            .collect();
        let minima = (1..n).filter(|&k| f[k] < f[k - 1] && f[k] <= f[k + 1]).count();
        assert!((9..=11).contains(&minima), "minima = {minima}");
    }

    #[test]
    fn three_half_closed_form_matches_propagator() {
        let p = nmr_three_half().scaled(1e-3);
        let ops = SpinOperators::<f64>::new(Spin::THREE_HALVES);
        let psi0 = PureState::<f64>::basis(4, 0).unwrap();
        for t in [0.0, 1.3e-3, 4.0e-3, 7.9e-3] {
            let u = expm_unitary(&ops.iz.scaled(p.omega0), t) * expm_unitary(&ops.ix.scaled(p.omega1), t);
            let direct = psi0.evolve(&u).unwrap();
            let closed = exact_state_spin_three_half(&p, t).unwrap();
            assert!((direct.amplitudes() - closed.amplitudes()).norm() < 1e-10);
            assert_abs_diff_eq!(closed.amplitudes().norm(), 1.0, epsilon = 1e-12);
            let f = fidelity(&psi0, &closed).unwrap();
            assert_abs_diff_eq!(f, exact_fidelity_spin_three_half(&p, t).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn three_half_inversion_and_quarter_turn() {
        let p = nmr_three_half();
        let t0 = exact_state_spin_three_half(&p, 0.0).unwrap();
        assert_abs_diff_eq!(t0.amplitudes()[0].norm(), 1.0, epsilon = 1e-15);
        let inverted = exact_state_spin_three_half(&p, PI / p.omega1).unwrap();
        assert_abs_diff_eq!(inverted.amplitudes()[3].norm(), 1.0, epsilon = 1e-12);
        let quarter = exact_state_spin_three_half(&p, PI / (2.0 * p.omega1)).unwrap();
        let expected = [1.0 / 8f64.sqrt(), (3.0 / 8.0f64).sqrt(), (3.0 / 8.0f64).sqrt(), 1.0 / 8f64.sqrt()];
        for (a, e) in quarter.amplitudes().iter().zip(expected) {
            assert_abs_diff_eq!(a.norm(), e, epsilon = 1e-12);
        }
    }

    #[test]
    fn three_half_fidelity_values() {
        let p = nmr_three_half();
        assert_eq!(exact_fidelity_spin_three_half(&p, 0.0).unwrap(), 1.0);
        assert!(exact_fidelity_spin_three_half(&p, 8e-6).unwrap() < 1e-30);
        assert_abs_diff_eq!(exact_fidelity_spin_three_half(&p, 4e-6).unwrap(), 0.125, epsilon = 1e-14);
    }

    #[test]
    fn three_half_closed_form_preconditions() {
        let p = nmr_three_half();
        assert!(matches!(
            exact_state_spin_three_half(&NmrParams { quadrupolar_included: true, ..p }, 1e-6),
            Err(QslError::InvalidParams(_))
        ));
        assert!(matches!(exact_state_spin_three_half(&nmr_half(), 1e-6), Err(QslError::WrongSpin { .. })));
        assert!(matches!(exact_state_spin_half(&p, 0.0, 0.0, 1e-6), Err(QslError::WrongSpin { .. })));
        assert!(exact_fidelity_spin_three_half(&NmrParams { omegap: p.omega0 * 0.5, ..p }, 1e-6).is_err());
    }

    #[test]
    fn three_half_has_no_fast_oscillation() {
        let p = nmr_three_half();
        let psi0 = PureState::<f64>::basis(4, 0).unwrap();
        for k in 0..=200 {
            let t = 8e-6 * k as f64 / 200.0;
            let f = fidelity(&psi0, &exact_state_spin_three_half(&p, t).unwrap()).unwrap();
            assert_abs_diff_eq!(f, (p.omega1 * t / 2.0).cos().powi(6), epsilon = 1e-12);
        }
    }

    #[test]
    fn rotating_uncertainty_examples() {
        let p = NmrParams::resonant(Spin::HALF, 50.0, 2.5).unwrap();
        let ops = SpinOperators::<f64>::new(Spin::HALF);
        let oracle = energy_uncertainty(&ops.ix.scaled(2.5), &bloch_state(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(uncertainty_rotating_spin_half(&p, 0.0, 0.0).unwrap(), oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(oracle, 1.25, epsilon = 1e-14);

        let q = detuned_half();
        let chi = DerivedFrameQuantities::new(&q, 0.0, 0.0).chi;
        assert!(uncertainty_rotating_spin_half(&q, chi, 0.0).unwrap() < 1e-7);
    }

    #[test]
    fn lab_to_rotating_uncertainty_ratio_order() {
        let p = nmr_half();
        let (theta, phi) = (24.48f64.to_radians(), 4.02f64.to_radians());
        let dhr = uncertainty_rotating_spin_half(&p, theta, phi).unwrap();
        let n = 2000;
        let mean: f64 = (0..n)
            .map(|k| uncertainty_lab_spin_half(&p, theta, phi, 22e-6 * (k as f64 + 0.5) / n as f64).unwrap())
            .sum::<f64>()
            / n as f64;
        let ratio = (mean / dhr).log10();
        assert!((3.0..5.0).contains(&ratio), "log10 ratio {ratio}");
        for k in 0..50 {
            let dh = uncertainty_lab_spin_half(&p, theta, phi, 22e-6 * k as f64 / 50.0).unwrap();
            assert!(dh <= (p.omega0.hypot(p.omega1)) / 2.0 * (1.0 + 1e-15));
        }
    }

    proptest! {
        #[test]
        fn rotating_uncertainty_matches_matrix(
            w0 in -5.0f64..5.0, w1 in 0.1f64..5.0, wp in -5.0f64..5.0,
            theta in 0.0f64..PI, phi in 0.0f64..(2.0 * PI),
        ) {
            let p = NmrParams { spin: Spin::HALF, omega0: w0, omega1: w1, omegap: wp, omega_q: 0.0, quadrupolar_included: false };
            let ops = SpinOperators::<f64>::new(Spin::HALF);
            let hr = &ops.iz.scaled(p.detuning()) + &ops.ix.scaled(w1);
            let direct = energy_uncertainty(&hr, &bloch_state(theta, phi)).unwrap();
            prop_assert!((uncertainty_rotating_spin_half(&p, theta, phi).unwrap() - direct).abs() < 1e-12);
            let d = DerivedFrameQuantities::new(&p, theta, phi);
            prop_assert!((d.cplus.norm_sqr() + d.cminus.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn lab_uncertainty_matches_matrix(
            w0 in -8.0f64..8.0, w1 in 0.1f64..5.0, wp in -8.0f64..8.0,
            theta in 0.0f64..PI, phi in 0.0f64..(2.0 * PI), t in 0.0f64..10.0,
        ) {
            let p = NmrParams { spin: Spin::HALF, omega0: w0, omega1: w1, omegap: wp, omega_q: 0.0, quadrupolar_included: false };
            let psi = exact_state_spin_half(&p, theta, phi, t).unwrap();
            let h = lab_hamiltonian(&p, t).unwrap();
            let mean = h.expectation(&psi).unwrap();
            prop_assert!((mean_energy_lab_spin_half(&p, theta, phi, t).unwrap() - mean).abs() < 1e-10);
            let direct = energy_uncertainty(&h, &psi).unwrap();
            // the closed form loses precision as ΔH → 0 through the square root
            let closed = uncertainty_lab_spin_half(&p, theta, phi, t).unwrap();
            prop_assert!((closed * closed - direct * direct).abs() < 1e-10);
        }

        #[test]
        fn frequency_scaling_covariance(
            lambda in 1e-3f64..1e3, theta in 0.0f64..PI, phi in 0.0f64..(2.0 * PI), t in 0.0f64..10.0,
        ) {
            let p = detuned_half();
            let s = p.scaled(lambda);
            let a = exact_state_spin_half(&p, theta, phi, t).unwrap();
            let b = exact_state_spin_half(&s, theta, phi, t / lambda).unwrap();
            prop_assert!((a.amplitudes() - b.amplitudes()).norm() < 1e-10);
            let dh = uncertainty_lab_spin_half(&p, theta, phi, t).unwrap() * t;
            let dhs = uncertainty_lab_spin_half(&s, theta, phi, t / lambda).unwrap() * (t / lambda);
            prop_assert!((dh - dhs).abs() < 1e-10 * (1.0 + dh.abs()));
            let q = nmr_three_half().scaled(1e-6);
            let fq = exact_fidelity_spin_three_half(&q, t).unwrap();
            let fs = exact_fidelity_spin_three_half(&q.scaled(lambda), t / lambda).unwrap();
            prop_assert!((fq - fs).abs() < 1e-10);
        }
    }
}
