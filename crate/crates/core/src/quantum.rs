//! Dense complex linear algebra for small spin systems: pure states,
//! Hermitian operators, angular-momentum matrices, unitary propagators,
//! fidelity and energy uncertainty.
//!
//! Units follow the ħ = 1 convention throughout: Hamiltonian entries are
//! angular frequencies in rad/s and times are seconds.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{QslError, Result};
use crate::scalar::{cis, re, unit_clamp, Real};

pub type CVector<T> = DVector<Complex<T>>;
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Normalized state vector |ψ⟩ of dimension ≥ 2.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState<T: Real> {
    amps: CVector<T>,
}

impl<T: Real> PureState<T> {
    /// Wraps already-normalized amplitudes.
    pub fn new(amps: CVector<T>) -> Result<Self> {
        check_dim(amps.len())?;
        let norm_sqr = amps.norm_squared();
        if (norm_sqr - T::one()).abs() > T::tol(1e-12) {
            return Err(QslError::NotNormalized { norm_sqr: norm_sqr.as_f64() });
        }
        Ok(Self { amps })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amps: CVector<T>) -> Result<Self> {
        check_dim(amps.len())?;
        let norm = amps.norm();
        if norm <= T::zero() || !norm.is_finite() {
            return Err(QslError::ZeroVector);
        }
        Ok(Self { amps: amps.unscale(norm) })
    }

    pub fn from_slice(amps: &[Complex<T>]) -> Result<Self> {
        Self::new(CVector::from_column_slice(amps))
    }

    /// Canonical basis vector `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        check_dim(dim)?;
        if k >= dim {
            return Err(QslError::DimensionMismatch { expected: dim, found: k + 1 });
        }
        let mut amps = CVector::zeros(dim);
        amps[k] = Complex::new(T::one(), T::zero());
        Ok(Self { amps })
    }

    /// Renormalizes a vector known to be close to unit norm.
    pub(crate) fn renormalized(amps: CVector<T>) -> Self {
        let norm = amps.norm();
        Self { amps: amps.unscale(norm) }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector<T> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVector<T> {
        self.amps
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState<T>) -> Result<Complex<T>> {
        same_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// Multiplies by the global phase `e^{iα}`.
    pub fn with_global_phase(&self, alpha: T) -> Self {
        Self { amps: self.amps.map(|a| a * cis(alpha)) }
    }

    /// Applies a unitary matrix and renormalizes to absorb rounding.
    pub fn evolve(&self, unitary: &CMatrix<T>) -> Result<Self> {
        same_dim(unitary.ncols(), self.dim())?;
        Ok(Self::renormalized(unitary * &self.amps))
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(QslError::DimensionTooSmall(dim))
    } else {
        Ok(())
    }
}

fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(QslError::DimensionMismatch { expected, found })
    }
}

/// Dense Hermitian matrix. Hermiticity is enforced on construction by
/// symmetrizing after the tolerance check.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator<T: Real> {
    m: CMatrix<T>,
}

impl<T: Real> HermitianOperator<T> {
    /// Accepts `m` if `m[i][j] = conj(m[j][i])` to within `1e-12` relative
    /// to the largest entry.
    pub fn new(m: CMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(QslError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let scale = m.iter().fold(T::one(), |acc, z| acc.max(z.norm_sqr().sqrt()));
        let adj = m.adjoint();
        let deviation = (&m - &adj).iter().fold(T::zero(), |acc, z| acc.max(z.norm_sqr().sqrt()));
        if deviation > T::tol(1e-12) * scale {
            return Err(QslError::NotHermitian { deviation: (deviation / scale).as_f64() });
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: CMatrix<T>) -> Self {
        let half = re(T::lit(0.5));
        let adj = m.adjoint();
        Self { m: (m + adj) * half }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim) }
    }

    pub fn from_real_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = re(d);
        }
        Self { m }
    }

    /// Row-major complex entries.
    pub fn from_row_slice(dim: usize, entries: &[Complex<T>]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(QslError::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Self::new(CMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.m
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { m: &self.m * re(s) }
    }

    pub fn matmul(&self, other: &HermitianOperator<T>) -> CMatrix<T> {
        &self.m * &other.m
    }

    /// `H|ψ⟩` as a raw vector.
    pub fn apply(&self, psi: &PureState<T>) -> Result<CVector<T>> {
        same_dim(self.dim(), psi.dim())?;
        Ok(&self.m * psi.amplitudes())
    }

    /// ⟨ψ|H|ψ⟩ (real for Hermitian H).
    pub fn expectation(&self, psi: &PureState<T>) -> Result<T> {
        let h_psi = self.apply(psi)?;
        Ok(psi.amplitudes().dotc(&h_psi).re)
    }

    /// Frobenius norm of the commutator `[self, other]`.
    pub fn commutator_norm(&self, other: &HermitianOperator<T>) -> T {
        let ab = &self.m * &other.m;
        let ba = &other.m * &self.m;
        (ab - ba).iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
    }

    /// Largest absolute entry deviation from `other`.
    pub fn max_abs_diff(&self, other: &HermitianOperator<T>) -> T {
        (&self.m - &other.m).iter().fold(T::zero(), |acc, z| acc.max(z.norm_sqr().sqrt()))
    }

    /// Largest absolute entry.
    pub fn max_abs_entry(&self) -> T {
        self.m.iter().fold(T::zero(), |acc, z| acc.max(z.norm_sqr().sqrt()))
    }

    pub fn spectral(&self) -> Spectral<T> {
        Spectral::of(self)
    }
}

impl<'a, T: Real> Add<&'a HermitianOperator<T>> for &'a HermitianOperator<T> {
    type Output = HermitianOperator<T>;
    fn add(self, rhs: Self) -> HermitianOperator<T> {
        HermitianOperator { m: &self.m + &rhs.m }
    }
}

impl<'a, T: Real> Sub<&'a HermitianOperator<T>> for &'a HermitianOperator<T> {
    type Output = HermitianOperator<T>;
    fn sub(self, rhs: Self) -> HermitianOperator<T> {
        HermitianOperator { m: &self.m - &rhs.m }
    }
}

impl<T: Real> Mul<T> for &HermitianOperator<T> {
    type Output = HermitianOperator<T>;
    fn mul(self, s: T) -> HermitianOperator<T> {
        self.scaled(s)
    }
}

/// Eigendecomposition `G = V·diag(λ)·V†` with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectral<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> Spectral<T> {
    fn of(op: &HermitianOperator<T>) -> Self {
        let eig = SymmetricEigen::new(op.m.clone());
        let mut order: Vec<usize> = (0..op.dim()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(op.dim(), op.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
        Self { values, vectors }
    }

    /// `e^{-iGs}`.
    pub fn propagator(&self, s: T) -> CMatrix<T> {
        let n = self.values.len();
        let phases = DVector::from_iterator(n, self.values.iter().map(|&l| cis(-l * s)));
        let scaled = CMatrix::from_fn(n, n, |i, j| self.vectors[(i, j)] * phases[j]);
        scaled * self.vectors.adjoint()
    }

    /// Spread between the largest and smallest eigenvalue.
    pub fn span(&self) -> T {
        match (self.values.first(), self.values.last()) {
            (Some(&lo), Some(&hi)) => hi - lo,
            _ => T::zero(),
        }
    }

    /// Largest eigenvalue magnitude.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Coordinates `V†|v⟩` of a vector in the eigenbasis.
    pub fn coordinates(&self, v: &CVector<T>) -> CVector<T> {
        self.vectors.adjoint() * v
    }
}

/// `e^{-iGs}` via Hermitian eigendecomposition; exact for any `s`.
pub fn expm_unitary<T: Real>(g: &HermitianOperator<T>, s: T) -> CMatrix<T> {
    g.spectral().propagator(s)
}

/// `|⟨a|b⟩|²`, clamped to `[0, 1]`.
pub fn fidelity<T: Real>(a: &PureState<T>, b: &PureState<T>) -> Result<T> {
    Ok(unit_clamp(a.inner(b)?.norm_sqr()))
}

/// ΔH = √(⟨H²⟩ − ⟨H⟩²), evaluated as ‖(H − ⟨H⟩)ψ‖ to avoid cancellation
/// when ‖H‖ is large.
pub fn energy_uncertainty<T: Real>(h: &HermitianOperator<T>, psi: &PureState<T>) -> Result<T> {
    let h_psi = h.apply(psi)?;
    let mean = psi.amplitudes().dotc(&h_psi).re;
    let residual = h_psi - psi.amplitudes() * re(mean);
    Ok(residual.norm())
}

/// Orthonormal basis of the complement of `psi0`.
///
/// Seeds are the canonical basis vectors, skipping the one with the largest
/// overlap with `psi0` (first index on ties), orthogonalized with two passes
/// of modified Gram–Schmidt.
pub fn gram_schmidt_complement<T: Real>(psi0: &PureState<T>) -> Vec<PureState<T>> {
    let n = psi0.dim();
    let amps = psi0.amplitudes();
    let mut skip = 0;
    for k in 1..n {
        if amps[k].norm_sqr() > amps[skip].norm_sqr() {
            skip = k;
        }
    }

    let mut basis: Vec<CVector<T>> = Vec::with_capacity(n);
    basis.push(amps.clone());
    for k in (0..n).filter(|&k| k != skip) {
        let mut v = CVector::zeros(n);
        v[k] = Complex::new(T::one(), T::zero());
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        basis.push(v.unscale(norm));
    }
    basis.into_iter().skip(1).map(|v| PureState { amps: v }).collect()
}

/// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
pub fn bloch_state<T: Real>(theta: T, phi: T) -> PureState<T> {
    let half = theta * T::lit(0.5);
    let amps = CVector::from_column_slice(&[re(half.cos()), cis(phi) * half.sin()]);
    PureState::renormalized(amps)
}

/// Half-integer spin quantum number, stored as `2j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { twice: 1 };
    pub const ONE: Spin = Spin { twice: 2 };
    pub const THREE_HALVES: Spin = Spin { twice: 3 };

    /// Rejects anything that is not a positive multiple of 1/2.
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !(twice.is_finite() && twice >= 1.0 && (twice - twice.round()).abs() < 1e-9) {
            return Err(QslError::InvalidSpin(j));
        }
        Ok(Self { twice: twice.round() as u32 })
    }

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(QslError::InvalidSpin(0.0));
        }
        Ok(Self { twice })
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn j(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    /// Hilbert-space dimension `2j + 1`.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Magnetic quantum number of basis index `k` (ordering m = j … −j).
    pub fn m(self, k: usize) -> f64 {
        self.j() - k as f64
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Angular-momentum matrices in the `Iz` eigenbasis, ordered m = j … −j.
#[derive(Clone, Debug)]
pub struct SpinOperators<T: Real> {
    pub spin: Spin,
    pub ix: HermitianOperator<T>,
    pub iy: HermitianOperator<T>,
    pub iz: HermitianOperator<T>,
    /// Casimir operator `Ix² + Iy² + Iz²`.
    pub isq: HermitianOperator<T>,
}

impl<T: Real> SpinOperators<T> {
    pub fn new(spin: Spin) -> Self {
        let n = spin.dim();
        let j = spin.j();
        // I+ |m⟩ = √(j(j+1) − m(m+1)) |m+1⟩; index k−1 holds m_k + 1.
        let mut raise = CMatrix::<T>::zeros(n, n);
        for k in 1..n {
            let m = spin.m(k);
            raise[(k - 1, k)] = re(T::lit((j * (j + 1.0) - m * (m + 1.0)).sqrt()));
        }
        let lower = raise.adjoint();
        let half = re(T::lit(0.5));
        let half_i = Complex::new(T::zero(), T::lit(0.5));
        let ix = HermitianOperator::symmetrized((&raise + &lower) * half);
        // (I+ − I−)/(2i) = −(i/2)(I+ − I−)
        let iy = HermitianOperator::symmetrized((&raise - &lower) * (-half_i));
        let diag: Vec<T> = (0..n).map(|k| T::lit(spin.m(k))).collect();
        let iz = HermitianOperator::from_real_diagonal(&diag);
        let isq = HermitianOperator::symmetrized(ix.matmul(&ix) + iy.matmul(&iy) + iz.matmul(&iz));
        Self { spin, ix, iy, iz, isq }
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    /// `(3Iz² − I²)`, the quadrupolar tensor component.
    pub fn quadrupolar(&self) -> HermitianOperator<T> {
        let iz2 = HermitianOperator::symmetrized(self.iz.matmul(&self.iz));
        &iz2.scaled(T::lit(3.0)) - &self.isq
    }
}

/// Angular-momentum matrices for spin `j`; rejects non-half-integer `j`.
pub fn spin_operators<T: Real>(j: f64) -> Result<SpinOperators<T>> {
    Ok(SpinOperators::new(Spin::new(j)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn max_diff(a: &CMatrix<f64>, b: &CMatrix<f64>) -> f64 {
        (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    fn commutator(a: &HermitianOperator<f64>, b: &HermitianOperator<f64>) -> CMatrix<f64> {
        a.matmul(b) - b.matmul(a)
    }

    fn random_state(dim: usize, seed: &[f64]) -> PureState<f64> {
        let amps = CVector::from_fn(dim, |k, _| c(seed[2 * k] - 0.5, seed[2 * k + 1] - 0.5));
        PureState::normalized(amps).unwrap()
    }

    #[test]
    fn spin_half_matches_pauli_over_two() {
        let ops = SpinOperators::<f64>::new(Spin::HALF);
        let iz = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        let ix = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        let iy = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.0, 0.0)]);
        assert!(max_diff(ops.iz.matrix(), &iz) < 1e-15);
        assert!(max_diff(ops.ix.matrix(), &ix) < 1e-15);
        assert!(max_diff(ops.iy.matrix(), &iy) < 1e-15);
    }

    #[test]
    fn su2_commutation_relations() {
        for twice in 1..=6 {
            let ops = SpinOperators::<f64>::new(Spin::from_twice(twice).unwrap());
            let i = c(0.0, 1.0);
            assert!(max_diff(&commutator(&ops.ix, &ops.iy), &(ops.iz.matrix() * i)) < 1e-12);
            assert!(max_diff(&commutator(&ops.iy, &ops.iz), &(ops.ix.matrix() * i)) < 1e-12);
            assert!(max_diff(&commutator(&ops.iz, &ops.ix), &(ops.iy.matrix() * i)) < 1e-12);
            let j = f64::from(twice) / 2.0;
            let casimir = CMatrix::identity(ops.dim(), ops.dim()) * c(j * (j + 1.0), 0.0);
            assert!(max_diff(ops.isq.matrix(), &casimir) < 1e-12);
        }
    }

    #[test]
    fn spin_three_half_casimir_by_explicit_ladder() {
        // Independent construction: I± from the textbook 4x4 ladder entries
        // √3, 2, √3 and brute-force products.
        let s3 = 3f64.sqrt();
        let mut up = CMatrix::<f64>::zeros(4, 4);
        up[(0, 1)] = c(s3, 0.0);
        up[(1, 2)] = c(2.0, 0.0);
        up[(2, 3)] = c(s3, 0.0);
        let down = up.adjoint();
        let ix = (&up + &down) * c(0.5, 0.0);
        let iy = (&up - &down) * c(0.0, -0.5);
        let iz = CMatrix::from_diagonal(&CVector::from_column_slice(&[
            c(1.5, 0.0),
            c(0.5, 0.0),
            c(-0.5, 0.0),
            c(-1.5, 0.0),
        ]));
        let casimir = &ix * &ix + &iy * &iy + &iz * &iz;
        let expected = CMatrix::identity(4, 4) * c(15.0 / 4.0, 0.0);
        assert!(max_diff(&casimir, &expected) < 1e-12);

        let ops = spin_operators::<f64>(1.5).unwrap();
        assert!(max_diff(ops.isq.matrix(), &expected) < 1e-12);
        assert!(max_diff(ops.ix.matrix(), &ix) < 1e-15);
        assert!(max_diff(ops.iy.matrix(), &iy) < 1e-15);
    }

    #[test]
    fn invalid_spins_rejected() {
        assert!(matches!(spin_operators::<f64>(0.0), Err(QslError::InvalidSpin(_))));
        assert!(matches!(spin_operators::<f64>(-0.5), Err(QslError::InvalidSpin(_))));
        assert!(matches!(spin_operators::<f64>(0.7), Err(QslError::InvalidSpin(_))));
        assert!(Spin::new(2.5).is_ok());
        assert_eq!(Spin::THREE_HALVES.to_string(), "3/2");
        assert_eq!(Spin::ONE.to_string(), "1");
    }

    #[test]
    fn single_precision_spin_algebra() {
        let ops = SpinOperators::<f32>::new(Spin::THREE_HALVES);
        let comm = ops.ix.matmul(&ops.iy) - ops.iy.matmul(&ops.ix);
        let expected = ops.iz.matrix() * Complex::new(0.0f32, 1.0);
        let err = (comm - expected).iter().fold(0.0f32, |m, z| m.max(z.norm()));
        assert!(err < 1e-5);
    }

    #[test]
    fn expm_at_zero_is_identity() {
        let ops = SpinOperators::<f64>::new(Spin::THREE_HALVES);
        let g = &ops.ix + &ops.iz.scaled(0.3);
        assert!(max_diff(&expm_unitary(&g, 0.0), &CMatrix::identity(4, 4)) < 1e-14);
    }

    #[test]
    fn expm_full_turn_of_half_sigma_z_is_minus_identity() {
        let ops = SpinOperators::<f64>::new(Spin::HALF);
        let u = expm_unitary(&ops.iz, 2.0 * PI);
        // diag(e^{-iπ}, e^{iπ})
        assert!(max_diff(&u, &(CMatrix::identity(2, 2) * c(-1.0, 0.0))) < 1e-14);
    }

    #[test]
    fn expm_pi_about_x_is_minus_i_sigma_x() {
        let ops = SpinOperators::<f64>::new(Spin::HALF);
        let s = PI;
        let u = expm_unitary(&ops.ix, s);
        // cos(s/2)·1 − i sin(s/2)·σx
        let cs = (s / 2.0).cos();
        let sn = (s / 2.0).sin();
        let expected = CMatrix::from_row_slice(2, 2, &[c(cs, 0.0), c(0.0, -sn), c(0.0, -sn), c(cs, 0.0)]);
        assert!(max_diff(&u, &expected) < 1e-14);
    }

    #[test]
    fn fidelity_examples() {
        let zero = PureState::<f64>::basis(2, 0).unwrap();
        let one = PureState::<f64>::basis(2, 1).unwrap();
        let plus = PureState::from_slice(&[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        assert_eq!(fidelity(&zero, &zero).unwrap(), 1.0);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        assert_abs_diff_eq!(fidelity(&zero, &plus).unwrap(), 0.5, epsilon = 1e-15);
        let three = PureState::<f64>::basis(3, 0).unwrap();
        assert!(matches!(fidelity(&zero, &three), Err(QslError::DimensionMismatch { .. })));
    }

    #[test]
    fn energy_uncertainty_examples() {
        let ops = SpinOperators::<f64>::new(Spin::HALF);
        let zero = PureState::<f64>::basis(2, 0).unwrap();
        assert_eq!(energy_uncertainty(&ops.iz, &zero).unwrap(), 0.0);
        assert_abs_diff_eq!(energy_uncertainty(&ops.ix, &zero).unwrap(), 0.5, epsilon = 1e-15);

        let ops = SpinOperators::<f64>::new(Spin::THREE_HALVES);
        let omega1 = 2.0e5;
        let stretched = PureState::<f64>::basis(4, 0).unwrap();
        let dh = energy_uncertainty(&ops.ix.scaled(omega1), &stretched).unwrap();
        assert_abs_diff_eq!(dh, 3f64.sqrt() / 2.0 * omega1, epsilon = 1e-9);

        let wrong = PureState::<f64>::basis(2, 0).unwrap();
        assert!(energy_uncertainty(&ops.ix, &wrong).is_err());
    }

    #[test]
    fn energy_uncertainty_stable_for_large_eigenstate() {
        let ops = SpinOperators::<f64>::new(Spin::HALF);
        let h = ops.iz.scaled(1.0e9);
        let zero = PureState::<f64>::basis(2, 0).unwrap();
        assert_eq!(energy_uncertainty(&h, &zero).unwrap(), 0.0);
    }

    #[test]
    fn complement_examples() {
        let zero = PureState::<f64>::basis(2, 0).unwrap();
        let comp = gram_schmidt_complement(&zero);
        assert_eq!(comp.len(), 1);
        assert_abs_diff_eq!(fidelity(&comp[0], &PureState::basis(2, 1).unwrap()).unwrap(), 1.0, epsilon = 1e-15);

        let plus = PureState::from_slice(&[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        let comp = gram_schmidt_complement(&plus);
        assert!(plus.inner(&comp[0]).unwrap().norm() < 1e-12);
        assert_abs_diff_eq!(comp[0].amplitudes().norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bloch_state_poles_and_antipode() {
        let north = bloch_state(0.0_f64, 0.0);
        assert_abs_diff_eq!(fidelity(&north, &PureState::basis(2, 0).unwrap()).unwrap(), 1.0, epsilon = 1e-15);
        let south = bloch_state(PI, 0.0_f64);
        assert_abs_diff_eq!(fidelity(&south, &PureState::basis(2, 1).unwrap()).unwrap(), 1.0, epsilon = 1e-15);
        let (theta, phi) = (0.7, 2.1);
        let s = bloch_state(theta, phi);
        let perp = bloch_state(theta - PI, phi);
        assert!(fidelity(&s, &perp).unwrap() < 1e-30);
    }

    #[test]
    fn state_constructors_validate() {
        let bad = CVector::from_column_slice(&[c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(PureState::new(bad.clone()), Err(QslError::NotNormalized { .. })));
        assert!(PureState::normalized(bad).is_ok());
        let small = CVector::from_column_slice(&[c(1.0, 0.0)]);
        assert!(matches!(PureState::new(small), Err(QslError::DimensionTooSmall(1))));
        let zero = CVector::<f64>::zeros(3);
        assert!(matches!(PureState::normalized(zero), Err(QslError::ZeroVector)));
        let not_herm = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(HermitianOperator::new(not_herm), Err(QslError::NotHermitian { .. })));
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = PureState<f64>> {
        prop::collection::vec(0.0f64..1.0, 2 * dim).prop_map(move |seed| random_state(dim, &seed))
    }

    fn arb_hermitian(dim: usize) -> impl Strategy<Value = HermitianOperator<f64>> {
        prop::collection::vec(-1.0f64..1.0, 2 * dim * dim).prop_map(move |v| {
            let m = CMatrix::from_fn(dim, dim, |i, j| c(v[2 * (i * dim + j)], v[2 * (i * dim + j) + 1]));
            HermitianOperator::symmetrized(m)
        })
    }

    proptest! {
        #[test]
        fn propagator_preserves_norm_and_composes(
            (g, psi) in (2usize..6).prop_flat_map(|d| (arb_hermitian(d), arb_state(d))),
            s in -20.0f64..20.0,
            t in -20.0f64..20.0,
        ) {
            let spectral = g.spectral();
            let us = spectral.propagator(s);
            let ut = spectral.propagator(t);
            let evolved = &us * psi.amplitudes();
            prop_assert!((evolved.norm() - 1.0).abs() < 1e-11);
            let ust = spectral.propagator(s + t);
            prop_assert!(max_diff(&ust, &(&us * &ut)) < 1e-10);
            let unitarity = us.adjoint() * &us;
            prop_assert!(max_diff(&unitarity, &CMatrix::identity(g.dim(), g.dim())) < 1e-11);
        }

        #[test]
        fn global_phase_invariance(
            (h, a, b) in (2usize..6).prop_flat_map(|d| (arb_hermitian(d), arb_state(d), arb_state(d))),
            alpha in -10.0f64..10.0,
        ) {
            let rotated = b.with_global_phase(alpha);
            prop_assert!((fidelity(&a, &b).unwrap() - fidelity(&a, &rotated).unwrap()).abs() < 1e-12);
            let du = energy_uncertainty(&h, &b).unwrap() - energy_uncertainty(&h, &rotated).unwrap();
            prop_assert!(du.abs() < 1e-12);
        }

        #[test]
        fn complement_gram_matrix_is_identity(psi in (2usize..=5).prop_flat_map(arb_state)) {
            let mut all = vec![psi.clone()];
            all.extend(gram_schmidt_complement(&psi));
            prop_assert_eq!(all.len(), psi.dim());
            // brute-force Gram matrix assembly
            for (i, a) in all.iter().enumerate() {
                for (j, b) in all.iter().enumerate() {
                    let g = a.inner(b).unwrap();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g - c(expected, 0.0)).norm() < 1e-12);
                }
            }
        }
    }
}
