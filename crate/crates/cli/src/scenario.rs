//! Scenario descriptions: model, initial state, frame, grids and horizon.

use crate::config::{
    check_fidelity_grid, parse_angle, parse_bool, parse_count, parse_fidelity_grid, parse_frequency, parse_matrix,
    parse_seconds, ConfigFile,
};
use crate::error::{invalid, CliError};
use qsl_core::propagation::max_frequency;
use qsl_core::spin::{exact_fidelity_spin_half, exact_fidelity_spin_three_half};
use qsl_core::{
    bloch_state, rotating_hamiltonian, EstimationProblem, Hamiltonian, HermitianOperatorF64, HsConvention, NmrModel,
    NmrParamsF64, PureStateF64, QslError, RotatingFrame, Spin, SweepGrid,
};
use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

/// Shipped scenario names.
pub const PRESETS: [&str; 6] = [
    "spin-half-paper",
    "spin-half-paper-desk",
    "spin-half-toy",
    "spin-half-toy-desk",
    "spin-three-half-paper",
    "spin-three-half-paper-desk",
];

/// Frequency factor of the `-desk` variants.
pub const DESK_SCALE: f64 = 1e-3;

pub const DEFAULT_FIDELITY_GRID: &str = "0.05:0.95:19";
pub const DEFAULT_RK4_STEPS_PER_PERIOD: usize = 256;
/// Closed-form fidelity samples per shortest lab period.
const EXACT_SCAN_PER_PERIOD: f64 = 64.0;

#[derive(Clone, Debug, PartialEq)]
pub enum System {
    Nmr(NmrParamsF64),
    /// Time-independent Hamiltonian in rad/s.
    Matrix(HermitianOperatorF64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    Bloch { theta: f64, phi: f64 },
    Basis(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FrameSpec {
    /// Λ = ω_p·Iz, co-rotating with the drive.
    Drive,
    Identity,
    /// Λ = s·H for a time-independent H.
    Scaled(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleChoice {
    /// Closed form when one exists, RK4 otherwise.
    Auto,
    Exact,
    Rk4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub system: System,
    pub initial: InitialState,
    pub frame: FrameSpec,
    pub fidelity_grid: Vec<f64>,
    pub sweep: SweepGrid,
    /// Seconds.
    pub horizon: f64,
    pub rk4_steps_per_period: usize,
    pub oracle: OracleChoice,
    pub hs: HsConvention,
    pub out: Option<PathBuf>,
}

impl Scenario {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        if let Some(base) = name.strip_suffix("-desk") {
            let mut s = Self::preset(base)?;
            s.name = name.to_string();
            return Ok(s.scaled(DESK_SCALE));
        }
        let grid = parse_fidelity_grid(DEFAULT_FIDELITY_GRID)?;
        let half_sweep = SweepGrid { n_phase: 64, n_angle: 2, oversample: 40, refine_levels: 2 };
        let base = |params: NmrParamsF64, initial, horizon, sweep| Scenario {
            name: name.to_string(),
            system: System::Nmr(params),
            initial,
            frame: FrameSpec::Drive,
            fidelity_grid: grid.clone(),
            sweep,
            horizon,
            rk4_steps_per_period: DEFAULT_RK4_STEPS_PER_PERIOD,
            oracle: OracleChoice::Auto,
            hs: HsConvention::default(),
            out: None,
        };
        let s = match name {
            "spin-half-paper" => {
                let w0 = TAU * 161.975e6;
                let p = NmrParamsF64::resonant(Spin::HALF, w0, TAU * 21.930e3).map_err(invalid)?;
                let initial = InitialState::Bloch { theta: 24.48f64.to_radians(), phi: 4.02f64.to_radians() };
                base(p, initial, 22e-6, half_sweep)
            }
            "spin-half-toy" => {
                let p = NmrParamsF64 {
                    spin: Spin::HALF,
                    omega0: TAU * 16_000.0,
                    omega1: TAU * 1_250.0,
                    omegap: TAU * 15_278.0,
                    omega_q: 0.0,
                    quadrupolar_included: false,
                };
                let initial = InitialState::Bloch { theta: 30f64.to_radians(), phi: PI };
                base(p, initial, 0.4e-3, half_sweep)
            }
            "spin-three-half-paper" => {
                let w0 = TAU * 105.842e6;
                let p = NmrParamsF64 {
                    spin: Spin::THREE_HALVES,
                    omega0: w0,
                    omega1: PI / 8e-6,
                    omegap: w0,
                    omega_q: TAU * 15e3,
                    quadrupolar_included: false,
                };
                let sweep = SweepGrid { n_phase: 8, n_angle: 8, oversample: 8, refine_levels: 2 };
                base(p, InitialState::Basis(0), 8e-6, sweep)
            }
            other => {
                return Err(CliError::scenario(format!(
                    "unknown preset {other:?}; available: {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(s)
    }

    /// Builds a scenario from a config file: the optional `preset` key
    /// supplies defaults, every other key overrides it.
    pub fn from_config(config: &ConfigFile) -> Result<Self, CliError> {
        let mut s = match config.get("preset") {
            Some(p) => Self::preset(p)?,
            None => Self::blank(),
        };
        for (k, v) in &config.entries {
            if k != "preset" {
                s.set(k, v)?;
            }
        }
        s.validated()
    }

    fn blank() -> Self {
        Scenario {
            name: "custom".into(),
            system: System::Nmr(NmrParamsF64 {
                spin: Spin::HALF,
                omega0: 0.0,
                omega1: 0.0,
                omegap: 0.0,
                omega_q: 0.0,
                quadrupolar_included: false,
            }),
            initial: InitialState::Basis(0),
            frame: FrameSpec::Drive,
            fidelity_grid: parse_fidelity_grid(DEFAULT_FIDELITY_GRID).expect("default grid parses"),
            sweep: SweepGrid::default(),
            horizon: 0.0,
            rk4_steps_per_period: DEFAULT_RK4_STEPS_PER_PERIOD,
            oracle: OracleChoice::Auto,
            hs: HsConvention::default(),
            out: None,
        }
    }

    fn nmr_mut(&mut self, key: &str) -> Result<&mut NmrParamsF64, CliError> {
        match &mut self.system {
            System::Nmr(p) => Ok(p),
            System::Matrix(_) => Err(CliError::scenario(format!("key {key:?} needs an NMR hamiltonian"))),
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "name" => self.name = value.to_string(),
            "hamiltonian" => {
                self.system = match value.trim() {
                    "nmr" => System::Nmr(Self::blank_params()),
                    spec => {
                        let (dim, entries) = parse_matrix(spec)?;
                        System::Matrix(HermitianOperatorF64::from_row_slice(dim, &entries).map_err(invalid)?)
                    }
                }
            }
            "spin" => {
                let j = match value.trim() {
                    "1/2" => 0.5,
                    "3/2" => 1.5,
                    "5/2" => 2.5,
                    other => other.parse().map_err(|_| CliError::scenario(format!("bad spin {other:?}")))?,
                };
                self.nmr_mut(key)?.spin = Spin::new(j).map_err(invalid)?;
            }
            "omega0" => self.nmr_mut(key)?.omega0 = parse_frequency(value)?,
            "omega1" => self.nmr_mut(key)?.omega1 = parse_frequency(value)?,
            "omegap" => self.nmr_mut(key)?.omegap = parse_frequency(value)?,
            "omega_q" => self.nmr_mut(key)?.omega_q = parse_frequency(value)?,
            "quadrupolar" => self.nmr_mut(key)?.quadrupolar_included = parse_bool(value)?,
            "frame" => {
                self.frame = match value.trim() {
                    "drive" => FrameSpec::Drive,
                    "identity" => FrameSpec::Identity,
                    other => match other.strip_prefix("scaled:") {
                        Some(s) => FrameSpec::Scaled(
                            s.parse().map_err(|_| CliError::scenario(format!("bad frame scale {s:?}")))?,
                        ),
                        None => return Err(CliError::scenario(format!("unknown frame {other:?}"))),
                    },
                }
            }
            "theta" => {
                let phi = match self.initial {
                    InitialState::Bloch { phi, .. } => phi,
                    InitialState::Basis(_) => 0.0,
                };
                self.initial = InitialState::Bloch { theta: parse_angle(value)?, phi };
            }
            "phi" => {
                let theta = match self.initial {
                    InitialState::Bloch { theta, .. } => theta,
                    InitialState::Basis(_) => 0.0,
                };
                self.initial = InitialState::Bloch { theta, phi: parse_angle(value)? };
            }
            "basis" => self.initial = InitialState::Basis(parse_count(value, key)?),
            "fidelity_grid" => self.fidelity_grid = parse_fidelity_grid(value)?,
            "n_phase" => self.sweep.n_phase = parse_count(value, key)?,
            "n_angle" => self.sweep.n_angle = parse_count(value, key)?,
            "oversample" => self.sweep.oversample = parse_count(value, key)?,
            "refine_levels" => self.sweep.refine_levels = parse_count(value, key)?,
            "horizon" => self.horizon = parse_seconds(value)?,
            "rk4_steps_per_period" => self.rk4_steps_per_period = parse_count(value, key)?,
            "oracle" => {
                self.oracle = match value.trim() {
                    "auto" => OracleChoice::Auto,
                    "exact" => OracleChoice::Exact,
                    "rk4" => OracleChoice::Rk4,
                    other => return Err(CliError::scenario(format!("unknown oracle {other:?}"))),
                }
            }
            "hs_convention" => {
                self.hs = match value.trim() {
                    "frobenius" => HsConvention::Frobenius,
                    "literal" => HsConvention::Literal,
                    other => return Err(CliError::scenario(format!("unknown hs convention {other:?}"))),
                }
            }
            "out" => self.out = Some(PathBuf::from(value.trim())),
            other => return Err(CliError::scenario(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    fn blank_params() -> NmrParamsF64 {
        match Self::blank().system {
            System::Nmr(p) => p,
            System::Matrix(_) => unreachable!(),
        }
    }

    /// Multiplies every frequency by `lambda` and divides the horizon by it.
    pub fn scaled(mut self, lambda: f64) -> Self {
        self.system = match self.system {
            System::Nmr(p) => System::Nmr(p.scaled(lambda)),
            System::Matrix(h) => System::Matrix(h.scaled(lambda)),
        };
        self.horizon /= lambda;
        self
    }

    /// Checks the settings that individual keys cannot check alone.
    pub fn validated(self) -> Result<Self, CliError> {
        if let System::Nmr(p) = &self.system {
            p.validated().map_err(invalid)?;
        }
        check_fidelity_grid(&self.fidelity_grid)?;
        self.sweep.validated().map_err(invalid)?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CliError::scenario("horizon must be a positive number of seconds"));
        }
        if self.rk4_steps_per_period < 40 {
            return Err(CliError::scenario("rk4_steps_per_period must be at least 40"));
        }
        match (&self.system, self.frame) {
            (System::Nmr(_), FrameSpec::Scaled(_)) => {
                return Err(CliError::scenario("scaled frames need a time-independent matrix hamiltonian"))
            }
            (System::Matrix(_), FrameSpec::Drive) => {
                return Err(CliError::scenario("the drive frame needs an NMR hamiltonian"))
            }
            _ => {}
        }
        let dim = self.dim();
        match self.initial {
            InitialState::Bloch { .. } if dim != 2 => {
                return Err(CliError::scenario("theta/phi initial states need a two-level system"))
            }
            InitialState::Basis(k) if k >= dim => {
                return Err(CliError::scenario(format!("basis index {k} out of range for dimension {dim}")))
            }
            _ => {}
        }
        if self.oracle == OracleChoice::Exact && !self.has_closed_form() {
            return Err(CliError::scenario(format!("scenario {:?} has no closed-form oracle", self.name)));
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        match &self.system {
            System::Nmr(p) => p.spin.dim(),
            System::Matrix(h) => h.dim(),
        }
    }

    pub fn psi0(&self) -> Result<PureStateF64, CliError> {
        match self.initial {
            InitialState::Bloch { theta, phi } => Ok(bloch_state(theta, phi)),
            InitialState::Basis(k) => PureStateF64::basis(self.dim(), k).map_err(invalid),
        }
    }

    fn bloch_angles(&self) -> Option<(f64, f64)> {
        match (self.initial, self.dim()) {
            (InitialState::Bloch { theta, phi }, _) => Some((theta, phi)),
            (InitialState::Basis(0), 2) => Some((0.0, 0.0)),
            (InitialState::Basis(1), 2) => Some((PI, 0.0)),
            _ => None,
        }
    }

    /// Whether the lab fidelity has a closed form for this scenario.
    pub fn has_closed_form(&self) -> bool {
        match (&self.system, self.frame) {
            (System::Matrix(_), _) => true,
            (System::Nmr(p), FrameSpec::Drive | FrameSpec::Identity) if p.spin == Spin::HALF => true,
            (System::Nmr(p), _) => {
                p.spin == Spin::THREE_HALVES
                    && !p.quadrupolar_included
                    && p.omegap == p.omega0
                    && self.initial == InitialState::Basis(0)
            }
        }
    }

    /// Resolves the scenario into a model, an estimation problem and an oracle.
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let psi0 = self.psi0()?;
        let model: Box<dyn Hamiltonian<f64>> = match &self.system {
            System::Nmr(p) => Box::new(NmrModel::new(*p)?),
            System::Matrix(h) => Box::new(h.clone()),
        };
        let (frame, h_rot) = match (&self.system, self.frame) {
            (System::Nmr(p), FrameSpec::Drive) => {
                let frame = RotatingFrame::about_z(p.spin, p.omegap);
                let h_rot = rotating_hamiltonian(p, &frame)?;
                (frame, h_rot)
            }
            (System::Nmr(p), FrameSpec::Identity) => {
                let frame = RotatingFrame::identity(p.spin.dim());
                let h_rot = rotating_hamiltonian(p, &frame)?;
                (frame, h_rot)
            }
            (System::Matrix(h), spec) => {
                let s = match spec {
                    FrameSpec::Scaled(s) => s,
                    _ => 0.0,
                };
                (RotatingFrame::new(h.scaled(s)), h.scaled(1.0 - s))
            }
            (System::Nmr(_), FrameSpec::Scaled(_)) => {
                return Err(CliError::scenario("scaled frames need a time-independent matrix hamiltonian"))
            }
        };
        let problem = EstimationProblem::new(psi0.clone(), 1.0, frame, h_rot, self.sweep)?;
        let w_max = max_frequency(model.as_ref(), self.horizon);
        if w_max <= 0.0 || w_max.is_nan() {
            return Err(QslError::ZeroSpeed.into());
        }
        let period = TAU / w_max;
        let use_exact = match self.oracle {
            OracleChoice::Rk4 => false,
            OracleChoice::Exact => true,
            OracleChoice::Auto => self.has_closed_form(),
        };
        let exact = if use_exact { Some(self.exact_fidelity(&psi0)?) } else { None };
        Ok(Prepared {
            model,
            problem,
            horizon: self.horizon,
            rk4_dt: period / self.rk4_steps_per_period as f64,
            exact,
            exact_scan_step: period / EXACT_SCAN_PER_PERIOD,
            hs: self.hs,
        })
    }

    fn exact_fidelity(&self, psi0: &PureStateF64) -> Result<ExactFidelity, CliError> {
        match &self.system {
            System::Matrix(h) => {
                let spectral = h.spectral();
                let weights: Vec<f64> =
                    spectral.coordinates(psi0.amplitudes()).iter().map(|c| c.norm_sqr()).collect();
                let values = spectral.values.clone();
                Ok(Box::new(move |t: f64| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (w, e) in weights.iter().zip(&values) {
                        re += w * (e * t).cos();
                        im -= w * (e * t).sin();
                    }
                    Ok((re * re + im * im).clamp(0.0, 1.0))
                }))
            }
            System::Nmr(p) if p.spin == Spin::HALF => {
                let (theta, phi) = self.bloch_angles().expect("two-level initial state");
                let p = *p;
                Ok(Box::new(move |t| exact_fidelity_spin_half(&p, theta, phi, t)))
            }
            System::Nmr(p) if self.has_closed_form() => {
                let p = *p;
                Ok(Box::new(move |t| exact_fidelity_spin_three_half(&p, t)))
            }
            System::Nmr(_) => Err(CliError::scenario(format!("scenario {:?} has no closed-form oracle", self.name))),
        }
    }
}

pub type ExactFidelity = Box<dyn Fn(f64) -> qsl_core::Result<f64> + Sync>;

/// A scenario resolved into numerical objects.
pub struct Prepared {
    pub model: Box<dyn Hamiltonian<f64>>,
    /// Problem with a placeholder target; `compare` sets each row's target.
    pub problem: EstimationProblem<f64>,
    pub horizon: f64,
    pub rk4_dt: f64,
    pub exact: Option<ExactFidelity>,
    pub exact_scan_step: f64,
    pub hs: HsConvention,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            let s = Scenario::preset(name).unwrap().validated().unwrap();
            assert_eq!(s.name, name);
            assert_eq!(s.fidelity_grid.len(), 19);
            assert!(s.prepare().is_ok(), "{name}");
            assert!(s.has_closed_form(), "{name}");
        }
        assert!(Scenario::preset("spin-five-half").is_err());
    }

    #[test]
    fn desk_variants_are_scaled() {
        let full = Scenario::preset("spin-three-half-paper").unwrap();
        let desk = Scenario::preset("spin-three-half-paper-desk").unwrap();
        let (System::Nmr(a), System::Nmr(b)) = (&full.system, &desk.system) else { panic!() };
        assert_eq!(b.omega1, a.omega1 * DESK_SCALE);
        assert_eq!(b.omega0, a.omega0 * DESK_SCALE);
        assert!((desk.horizon - 8e-3).abs() < 1e-15);
    }

    #[test]
    fn config_overrides_preset() {
        let cfg = ConfigFile::parse(
            "preset = spin-half-toy\nname = mine\nn_phase = 32\nfidelity_grid = 0.9,0.5\ntheta = deg:10\n",
        )
        .unwrap();
        let s = Scenario::from_config(&cfg).unwrap();
        assert_eq!(s.name, "mine");
        assert_eq!(s.sweep.n_phase, 32);
        assert_eq!(s.fidelity_grid, vec![0.9, 0.5]);
        assert_eq!(s.initial, InitialState::Bloch { theta: 10f64.to_radians(), phi: PI });
    }

    #[test]
    fn config_errors() {
        let unknown = ConfigFile::parse("preset = spin-half-toy\ncolour = blue\n").unwrap();
        assert!(matches!(Scenario::from_config(&unknown), Err(CliError::Scenario(_))));
        let unitless = ConfigFile::parse("omega1 = 1000\n").unwrap();
        assert!(Scenario::from_config(&unitless).is_err());
        let no_drive = ConfigFile::parse("omega0 = hz:10\nhorizon = 1\n").unwrap();
        assert!(Scenario::from_config(&no_drive).is_err());
        let bad_basis = ConfigFile::parse("preset = spin-three-half-paper\nbasis = 4\n").unwrap();
        assert!(Scenario::from_config(&bad_basis).is_err());
        let quad = ConfigFile::parse("preset = spin-three-half-paper\nquadrupolar = true\noracle = exact\n").unwrap();
        assert!(Scenario::from_config(&quad).is_err());
    }

    #[test]
    fn matrix_scenario() {
        let cfg = ConfigFile::parse(
            "hamiltonian = matrix:1,1;1,-1\nframe = scaled:0.9\nbasis = 0\nhorizon = 10\nfidelity_grid = 0.75\n",
        )
        .unwrap();
        let s = Scenario::from_config(&cfg).unwrap();
        let prepared = s.prepare().unwrap();
        assert!((prepared.problem.h_rot.matrix()[(0, 1)].re - 0.1).abs() < 1e-15);
        let f = prepared.exact.as_ref().unwrap();
        assert!((f(0.0).unwrap() - 1.0).abs() < 1e-15);
        // σz+σx from |0⟩: F(t) = 1 − sin²(√2 t)/2
        let t = 0.4f64;
        let want = 1.0 - (2f64.sqrt() * t).sin().powi(2) / 2.0;
        assert!((f(t).unwrap() - want).abs() < 1e-14);
    }
}
