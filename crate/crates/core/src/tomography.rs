//! Spin-1/2 state tomography from transverse magnetization readouts, and
//! the high-temperature polarization of a thermal NMR ensemble.
//!
//! A qubit density matrix is written
//!
//! ```text
//! ρ = [ x₁          x₂ + i x₃ ]
//!     [ x₂ − i x₃   x₄        ]
//! ```
//!
//! and recovered from `⟨Ix⟩`, `⟨Iy⟩` before and after a `π/2` rotation about y.

use num_complex::Complex;

use crate::error::{QslError, Result};
use crate::quantum::{expm_unitary, CMatrix, PureState, Spin, SpinOperators};
use crate::scalar::{re, Real};

/// Reduced Planck constant (J·s), CODATA 2018 exact.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant (J/K), CODATA 2018 exact.
pub const K_B: f64 = 1.380_649e-23;

/// Tolerance on Hermiticity and unit trace.
const DENSITY_TOL: f64 = 1e-12;

/// Tolerance of the readout redundancy check.
const READOUT_TOL: f64 = 1e-9;

/// Hermitian, unit-trace 2×2 density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix2<T: Real> {
    m: CMatrix<T>,
}

impl<T: Real> DensityMatrix2<T> {
    pub fn new(m: CMatrix<T>) -> Result<Self> {
        if m.shape() != (2, 2) {
            return Err(QslError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let herm = (&m - m.adjoint()).iter().fold(T::zero(), |a, z| a.max(z.norm_sqr().sqrt()));
        if herm > T::tol(DENSITY_TOL) {
            return Err(QslError::NotHermitian { deviation: herm.as_f64() });
        }
        let trace = m[(0, 0)].re + m[(1, 1)].re;
        if (trace - T::one()).abs() > T::tol(DENSITY_TOL) {
            return Err(QslError::InvalidParams(format!("density matrix trace {} differs from 1", trace.as_f64())));
        }
        Ok(Self { m })
    }

    /// From `(x₁, x₂, x₃, x₄)`.
    pub fn from_params(x: [T; 4]) -> Result<Self> {
        let i = Complex::new(T::zero(), T::one());
        let m = CMatrix::from_row_slice(2, 2, &[re(x[0]), re(x[1]) + i * x[2], re(x[1]) - i * x[2], re(x[3])]);
        Self::new(m)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &PureState<T>) -> Result<Self> {
        if psi.dim() != 2 {
            return Err(QslError::DimensionMismatch { expected: 2, found: psi.dim() });
        }
        let v = psi.amplitudes();
        Self::new(v * v.adjoint())
    }

    pub fn maximally_mixed() -> Self {
        Self { m: CMatrix::identity(2, 2) * re(T::lit(0.5)) }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.m
    }

    /// `(x₁, x₂, x₃, x₄)`.
    pub fn params(&self) -> [T; 4] {
        [self.m[(0, 0)].re, self.m[(0, 1)].re, self.m[(0, 1)].im, self.m[(1, 1)].re]
    }

    /// Smallest eigenvalue; nonnegative for physical states.
    pub fn min_eigenvalue(&self) -> T {
        let [x1, x2, x3, x4] = self.params();
        let half = T::lit(0.5);
        let mean = (x1 + x4) * half;
        let gap = ((x1 - x4) * half).hypot((x2 * x2 + x3 * x3).sqrt());
        mean - gap
    }

    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue() >= -T::tol(1e-10)
    }

    /// `U ρ U†`.
    pub fn conjugated(&self, u: &CMatrix<T>) -> Result<Self> {
        Self::new(u * &self.m * u.adjoint())
    }

    /// `R_y(π/2) ρ R_y†(π/2)` in closed form:
    /// `½[[x₁+x₄−2x₂, x₁−x₄+2ix₃], [x₁−x₄−2ix₃, x₁+x₄+2x₂]]`.
    pub fn rotated_y_half_pi(&self) -> Self {
        let [x1, x2, x3, x4] = self.params();
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let i = Complex::new(T::zero(), T::one());
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                re((x1 + x4 - two * x2) * half),
                re((x1 - x4) * half) + i * x3,
                re((x1 - x4) * half) - i * x3,
                re((x1 + x4 + two * x2) * half),
            ],
        );
        Self { m }
    }
}

/// `R_y(π/2) = e^{−i(π/2)Iy}`.
pub fn ry_half_pi<T: Real>() -> CMatrix<T> {
    expm_unitary(&SpinOperators::<T>::new(Spin::HALF).iy, T::frac_pi_2())
}

/// Transverse magnetizations before and after the `π/2` y-rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagnetizationReadout<T: Real> {
    pub mx: T,
    pub my: T,
    pub mx_rot: T,
    pub my_rot: T,
}

fn transverse<T: Real>(rho: &CMatrix<T>) -> (T, T) {
    // Tr{Ix ρ} = Re ρ₀₁, Tr{Iy ρ} = −Im ρ₀₁ for Hermitian ρ
    let ops = SpinOperators::<T>::new(Spin::HALF);
    ((ops.ix.matrix() * rho).trace().re, (ops.iy.matrix() * rho).trace().re)
}

/// `(Tr{Ixρ}, Tr{Iyρ}, Tr{Ixρ′}, Tr{Iyρ′})` with `ρ′ = R_y(π/2) ρ R_y†(π/2)`.
pub fn measure<T: Real>(rho: &DensityMatrix2<T>) -> MagnetizationReadout<T> {
    let (mx, my) = transverse(rho.matrix());
    let (mx_rot, my_rot) = transverse(rho.rotated_y_half_pi().matrix());
    MagnetizationReadout { mx, my, mx_rot, my_rot }
}

/// Solves `x₂ = mx`, `x₃ = −my`, `x₁ − x₄ = 2·mx_rot`, `x₁ + x₄ = 1`.
///
/// A rotation about y leaves `⟨Iy⟩` unchanged, so `my_rot` must equal `my`.
pub fn reconstruct<T: Real>(r: &MagnetizationReadout<T>) -> Result<DensityMatrix2<T>> {
    if (r.my_rot - r.my).abs() > T::tol(READOUT_TOL) {
        return Err(QslError::InconsistentReadout(format!(
            "my after rotation ({}) differs from my ({})",
            r.my_rot.as_f64(),
            r.my.as_f64()
        )));
    }
    let half = T::lit(0.5);
    let diff = r.mx_rot * T::lit(2.0);
    DensityMatrix2::from_params([(T::one() + diff) * half, r.mx, -r.my, (T::one() - diff) * half])
}

/// `ε = βħω₀/(2Z)` with `Z = 2cosh(βħω₀/2)`; `omega0` in rad/s, SI units.
pub fn thermal_polarization<T: Real>(omega0: T, temperature: T) -> Result<T> {
    if !(temperature > T::zero()) || !temperature.is_finite() {
        return Err(QslError::InvalidTemperature(temperature.as_f64()));
    }
    let x = omega0.as_f64() * HBAR / (K_B * temperature.as_f64());
    let z = 2.0 * (x / 2.0).cosh();
    Ok(T::lit(x / (2.0 * z)))
}
