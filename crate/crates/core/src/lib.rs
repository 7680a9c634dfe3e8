//! Evolution-time estimation for driven spin systems.
//!
//! Compares the rotating-frame transcendental estimator against the
//! Anandan–Aharonov bound, norm-based speed limits and exact or RK4
//! reference dynamics. Units: ħ = 1, angular frequencies in rad/s,
//! times in seconds.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod propagation;
pub mod quantum;
pub mod scalar;
pub mod spin;
pub mod tomography;

pub use error::{QslError, Result};
pub use estimators::{
    aa_time, compare, epsilon_estimate, epsilon_rotating_aa_time, fbar_rotating, norm_lambda, norm_times,
    solve_transcendental, ActualTimeOracle, CompareSetup, EstimateReport, EstimationProblem, HsConvention,
    NormKind, NormLambdas, RowStatus, SweepGrid, TranscendentalRoot,
};
pub use propagation::{
    actual_time, actual_time_fn, actual_times, avg_uncertainty, fidelity_curve, path_ratio, rk4_for_each,
    rk4_propagate, FidelityCurve, Hamiltonian, Trajectory,
};
pub use quantum::{
    bloch_state, energy_uncertainty, expm_unitary, fidelity, gram_schmidt_complement, HermitianOperator,
    PureState, Spin, SpinOperators,
};
pub use scalar::Real;
pub use spin::{rotating_hamiltonian, DerivedFrameQuantities, NmrModel, NmrParams, RotatingFrame};
pub use tomography::{measure, reconstruct, thermal_polarization, DensityMatrix2, MagnetizationReadout};

pub type PureStateF64 = PureState<f64>;
pub type PureStateF32 = PureState<f32>;
pub type HermitianOperatorF64 = HermitianOperator<f64>;
pub type HermitianOperatorF32 = HermitianOperator<f32>;
pub type NmrParamsF64 = NmrParams<f64>;
pub type NmrParamsF32 = NmrParams<f32>;
pub type NmrModelF64 = NmrModel<f64>;
pub type NmrModelF32 = NmrModel<f32>;
pub type EstimationProblemF64 = EstimationProblem<f64>;
pub type EstimationProblemF32 = EstimationProblem<f32>;
pub type EstimateReportF64 = EstimateReport<f64>;
pub type EstimateReportF32 = EstimateReport<f32>;
pub type DensityMatrix2F64 = DensityMatrix2<f64>;
pub type DensityMatrix2F32 = DensityMatrix2<f32>;
