//! Command implementations: compare tables, the ε-family study and the
//! tomography demo.

use crate::config::{parse_angle, parse_matrix};
use crate::error::{invalid, CliError};
use crate::scenario::Scenario;
use qsl_core::estimators::epsilon_estimate;
use qsl_core::{
    actual_time_fn, bloch_state, compare, epsilon_rotating_aa_time, measure, reconstruct, thermal_polarization,
    ActualTimeOracle, CompareSetup, DensityMatrix2F64, EstimateReportF64, HermitianOperatorF64, MagnetizationReadout,
    PureStateF64, Spin, SpinOperators, SweepGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::Write;

pub const COMPARE_HEADER: [&str; 11] = [
    "F",
    "t_actual",
    "t_aa",
    "t_transcendental",
    "t_norm_tr",
    "t_norm_op",
    "t_norm_hs",
    "path_ratio",
    "dH_R",
    "avg_dH_lab",
    "status",
];

pub const EPSILON_HEADER: [&str; 4] = ["epsilon", "t_estimate", "t_actual", "abs_error"];

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::scenario("--threads must be at least 1")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::scenario(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// One estimate row per fidelity target of the scenario.
pub fn run_compare(scenario: &Scenario) -> Result<Vec<EstimateReportF64>, CliError> {
    let prepared = scenario.prepare()?;
    let oracle = match &prepared.exact {
        Some(f) => ActualTimeOracle::Exact { fidelity: f.as_ref(), scan_step: prepared.exact_scan_step },
        None => ActualTimeOracle::Rk4,
    };
    let setup = CompareSetup {
        model: prepared.model.as_ref(),
        problem: prepared.problem.clone(),
        horizon: prepared.horizon,
        rk4_dt: prepared.rk4_dt,
        oracle,
        hs: prepared.hs,
    };
    Ok(compare(&setup, &scenario.fidelity_grid)?)
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Writes the compare table. Time columns of unreachable rows are empty.
pub fn write_compare_csv<W: Write>(out: W, rows: &[EstimateReportF64]) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record(COMPARE_HEADER)?;
    for r in rows {
        let ok = r.is_reachable();
        let t_tr = if ok { Some(r.t_transcendental) } else { None };
        w.write_record([
            sci(r.f_target),
            opt(r.t_actual),
            opt(r.t_aa),
            opt(t_tr),
            opt(r.t_norm_tr),
            opt(r.t_norm_op),
            opt(r.t_norm_hs),
            opt(r.path_ratio),
            sci(r.dh_rot),
            opt(r.avg_dh_lab),
            (if ok { "ok" } else { "unreachable" }).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn compare_csv_bytes(rows: &[EstimateReportF64]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_compare_csv(&mut buf, rows)?;
    Ok(buf)
}

/// Which estimate the ε-study reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpsilonEstimator {
    /// `arccos√F_R(t)/(εΔH)` at the actual time.
    RotatingAa,
    /// First root of the transcendental equation in the frame `Λ = (1 − ε)H`.
    Transcendental,
}

#[derive(Clone, Debug)]
pub struct EpsilonStudy {
    pub h: HermitianOperatorF64,
    pub psi0: PureStateF64,
    pub fidelity: f64,
    pub epsilons: Vec<f64>,
    pub estimator: EpsilonEstimator,
    /// Scan horizon for the actual time; `20π/span(H)` when unset.
    pub horizon: Option<f64>,
    pub sweep: SweepGrid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub t_estimate: f64,
    pub t_actual: f64,
    pub abs_error: f64,
}

/// `pauli-z+x`, `pauli-x`, `pauli-z` or a `matrix:` spec.
pub fn parse_hamiltonian_spec(spec: &str) -> Result<HermitianOperatorF64, CliError> {
    let ops = SpinOperators::<f64>::new(Spin::HALF);
    match spec.trim() {
        "pauli-z+x" => Ok(&ops.iz.scaled(2.0) + &ops.ix.scaled(2.0)),
        "pauli-x" => Ok(ops.ix.scaled(2.0)),
        "pauli-z" => Ok(ops.iz.scaled(2.0)),
        other => {
            let (dim, entries) = parse_matrix(other)?;
            HermitianOperatorF64::from_row_slice(dim, &entries).map_err(invalid)
        }
    }
}

/// `basis:<k>` or `bloch:<θ>,<φ>` with `deg:`/`rad:` angles.
pub fn parse_state_spec(spec: &str, dim: usize) -> Result<PureStateF64, CliError> {
    let spec = spec.trim();
    if let Some(k) = spec.strip_prefix("basis:") {
        let k = k.parse().map_err(|_| CliError::scenario(format!("bad basis index {k:?}")))?;
        PureStateF64::basis(dim, k).map_err(invalid)
    } else if let Some(angles) = spec.strip_prefix("bloch:") {
        let Some((theta, phi)) = angles.split_once(',') else {
            return Err(CliError::scenario(format!("expected bloch:<theta>,<phi>, got {spec:?}")));
        };
        if dim != 2 {
            return Err(CliError::scenario("bloch states need a two-level hamiltonian"));
        }
        Ok(bloch_state(parse_angle(theta)?, parse_angle(phi)?))
    } else {
        Err(CliError::scenario(format!("unknown state spec {spec:?}")))
    }
}

pub fn run_epsilon_study(study: &EpsilonStudy) -> Result<Vec<EpsilonRow>, CliError> {
    if study.h.dim() != study.psi0.dim() {
        return Err(CliError::scenario("state and hamiltonian dimensions differ"));
    }
    let spectral = study.h.spectral();
    let span = spectral.span();
    if span <= 0.0 || span.is_nan() {
        return Err(qsl_core::QslError::ZeroSpeed.into());
    }
    let weights: Vec<f64> = spectral.coordinates(study.psi0.amplitudes()).iter().map(|c| c.norm_sqr()).collect();
    let lab_fidelity = |t: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (w, e) in weights.iter().zip(&spectral.values) {
            re += w * (e * t).cos();
            im -= w * (e * t).sin();
        }
        Ok((re * re + im * im).clamp(0.0, 1.0))
    };
    let horizon = study.horizon.unwrap_or(10.0 * TAU / span);
    let t_actual = actual_time_fn(lab_fidelity, study.fidelity, horizon, TAU / span / 256.0)?;
    study
        .epsilons
        .iter()
        .map(|&eps| {
            let t_estimate = match study.estimator {
                EpsilonEstimator::RotatingAa => epsilon_rotating_aa_time(&study.h, &study.psi0, eps, t_actual)?,
                EpsilonEstimator::Transcendental => {
                    epsilon_estimate(&study.h, &study.psi0, study.fidelity, eps, study.sweep)?
                }
            };
            Ok(EpsilonRow { epsilon: eps, t_estimate, t_actual, abs_error: (t_estimate - t_actual).abs() })
        })
        .collect()
}

pub fn write_epsilon_csv<W: Write>(out: W, rows: &[EpsilonRow]) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record(EPSILON_HEADER)?;
    for r in rows {
        w.write_record([sci(r.epsilon), sci(r.t_estimate), sci(r.t_actual), sci(r.abs_error)])?;
    }
    w.flush()?;
    Ok(())
}

/// Larmor frequency and temperature of the polarisation line in the demo.
pub const DEMO_OMEGA0: f64 = TAU * 161.975e6;
pub const DEMO_TEMPERATURE: f64 = 298.15;

#[derive(Clone, Debug)]
pub struct TomographyRow {
    pub label: String,
    pub rho: DensityMatrix2F64,
    pub readout: MagnetizationReadout<f64>,
    pub reconstructed: DensityMatrix2F64,
    /// Largest entry deviation between `rho` and the reconstruction.
    pub round_trip_error: f64,
}

#[derive(Clone, Debug)]
pub struct TomographyDemo {
    pub seed: u64,
    pub rows: Vec<TomographyRow>,
    pub polarization: f64,
}

/// Pure state with `cos θ` and `φ` drawn uniformly, i.e. uniform on the sphere.
pub fn random_bloch_state(rng: &mut impl Rng) -> PureStateF64 {
    let cos_theta: f64 = rng.gen_range(-1.0..=1.0);
    let phi = rng.gen_range(0.0..TAU);
    bloch_state(cos_theta.acos(), phi)
}

fn tomography_row(label: String, rho: DensityMatrix2F64) -> Result<TomographyRow, CliError> {
    let readout = measure(&rho);
    let reconstructed = reconstruct(&readout)?;
    let round_trip_error =
        (rho.matrix() - reconstructed.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(TomographyRow { label, rho, readout, reconstructed, round_trip_error })
}

/// Ground state plus `n_random` seeded random pure states.
pub fn run_tomography_demo(seed: u64, n_random: usize) -> Result<TomographyDemo, CliError> {
    let mut rows = vec![tomography_row("ground |up><up|".into(), DensityMatrix2F64::from_pure(&bloch_state(0.0, 0.0))?)?];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..n_random {
        let psi = random_bloch_state(&mut rng);
        rows.push(tomography_row(format!("random #{}", k + 1), DensityMatrix2F64::from_pure(&psi)?)?);
    }
    let polarization = thermal_polarization(DEMO_OMEGA0, DEMO_TEMPERATURE)?;
    Ok(TomographyDemo { seed, rows, polarization })
}

fn fmt_matrix(m: &DensityMatrix2F64) -> String {
    let a = m.matrix();
    let z = |i, j| {
        let c: num_complex::Complex64 = a[(i, j)];
        format!("{:+.6}{:+.6}i", c.re, c.im)
    };
    format!("[[{}, {}], [{}, {}]]", z(0, 0), z(0, 1), z(1, 0), z(1, 1))
}

impl TomographyDemo {
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tomography demo (seed {})", self.seed);
        for r in &self.rows {
            let m = &r.readout;
            let _ = writeln!(s, "{}", r.label);
            let _ = writeln!(s, "  rho           = {}", fmt_matrix(&r.rho));
            let _ = writeln!(
                s,
                "  readout       = (mx, my, mx_rot, my_rot) = ({:+.6}, {:+.6}, {:+.6}, {:+.6})",
                m.mx, m.my, m.mx_rot, m.my_rot
            );
            let _ = writeln!(s, "  reconstructed = {}", fmt_matrix(&r.reconstructed));
            let _ = writeln!(s, "  round-trip error = {:.3e}", r.round_trip_error);
        }
        let _ = writeln!(
            s,
            "thermal polarization at {:.3} MHz, {} K: {:.4e}",
            DEMO_OMEGA0 / TAU / 1e6,
            DEMO_TEMPERATURE,
            self.polarization
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hamiltonian_specs() {
        let h = parse_hamiltonian_spec("pauli-z+x").unwrap();
        assert_eq!(h.matrix()[(0, 0)].re, 1.0);
        assert_eq!(h.matrix()[(0, 1)].re, 1.0);
        assert_eq!(parse_hamiltonian_spec("matrix:0,1;1,0").unwrap(), parse_hamiltonian_spec("pauli-x").unwrap());
        assert!(parse_hamiltonian_spec("matrix:0,1;2,0").is_err());
        assert!(parse_hamiltonian_spec("sigma").is_err());
    }

    #[test]
    fn state_specs() {
        assert_eq!(parse_state_spec("basis:1", 3).unwrap(), PureStateF64::basis(3, 1).unwrap());
        assert_eq!(parse_state_spec("bloch:deg:180,rad:0", 2).unwrap(), bloch_state(PI, 0.0));
        assert!(parse_state_spec("bloch:deg:10,deg:0", 3).is_err());
        assert!(parse_state_spec("basis:3", 3).is_err());
        assert!(parse_state_spec("up", 2).is_err());
    }

    fn study(h: &str, eps: Vec<f64>) -> EpsilonStudy {
        EpsilonStudy {
            h: parse_hamiltonian_spec(h).unwrap(),
            psi0: PureStateF64::basis(2, 0).unwrap(),
            fidelity: 0.75,
            epsilons: eps,
            estimator: EpsilonEstimator::RotatingAa,
            horizon: None,
            sweep: SweepGrid::default(),
        }
    }

    #[test]
    fn epsilon_one_is_lab_aa_time() {
        let rows = run_epsilon_study(&study("pauli-z+x", vec![1.0])).unwrap();
        // ΔH = 1 on |0⟩ for σz+σx
        let aa = 0.75f64.sqrt().acos();
        assert!((rows[0].t_estimate - aa).abs() < 1e-12);
        // F(t) = 1 − sin²(√2 t)/2 = 0.75
        let t = (0.5f64.sqrt().asin()) / 2f64.sqrt();
        assert!((rows[0].t_actual - t).abs() < 1e-10 * t);
    }

    #[test]
    fn geodesic_epsilon_study_is_exact() {
        let rows = run_epsilon_study(&study("pauli-x", vec![0.2, 0.1, 0.05])).unwrap();
        for r in rows {
            assert!(r.abs_error < 1e-9 * r.t_actual, "{r:?}");
        }
    }

    #[test]
    fn eigenstate_is_zero_speed() {
        let e = run_epsilon_study(&study("pauli-z", vec![0.1])).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn tomography_demo_is_seeded() {
        let a = run_tomography_demo(7, 5).unwrap();
        let b = run_tomography_demo(7, 5).unwrap();
        let c = run_tomography_demo(8, 5).unwrap();
        assert_eq!(a.report(), b.report());
        assert_ne!(a.report(), c.report());
        assert_eq!(a.rows.len(), 6);
        let g = &a.rows[0].readout;
        assert_eq!((g.mx, g.my, g.mx_rot, g.my_rot), (0.0, 0.0, 0.5, 0.0));
        assert!(a.rows.iter().all(|r| r.round_trip_error < 1e-12));
        assert!((a.polarization - 0.652e-5).abs() < 0.01 * 0.652e-5);
    }
}
