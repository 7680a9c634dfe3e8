use clap::{Args, Parser, Subcommand, ValueEnum};
use qsl_cli::config::{parse_count, parse_fidelity_grid, parse_seconds};
use qsl_cli::scenario::OracleChoice;
use qsl_cli::{
    run_compare, run_epsilon_study, run_tomography_demo, with_threads, write_compare_csv, write_epsilon_csv,
    CliError, ConfigFile, EpsilonEstimator, EpsilonStudy, Scenario, PRESETS,
};
use qsl_core::{HsConvention, SweepGrid};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qsl", version, about = "Evolution-time estimators for driven spin systems")]
struct Cli {
    /// Worker threads for the parameter sweep (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate evolution times for every fidelity target of a scenario.
    Compare(CompareArgs),
    /// Convergence of the ε-family estimate towards the actual time.
    EpsilonStudy(EpsilonArgs),
    /// Simulated spin-1/2 tomography round trips.
    TomographyDemo(TomographyArgs),
    /// List the shipped scenarios.
    Presets,
}

#[derive(Args)]
struct CompareArgs {
    /// Preset name or path to a key = value scenario file.
    #[arg(long, default_value = "spin-half-toy")]
    scenario: String,
    /// `lo:hi:count` or a comma list.
    #[arg(long)]
    fidelity_grid: Option<String>,
    #[arg(long)]
    sweep_n_phase: Option<usize>,
    #[arg(long)]
    sweep_n_angle: Option<usize>,
    #[arg(long)]
    oversample: Option<usize>,
    #[arg(long)]
    refine_levels: Option<usize>,
    /// Seconds.
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    rk4_steps_per_period: Option<String>,
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
    #[arg(long, value_enum)]
    hs_convention: Option<HsArg>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Auto,
    Exact,
    Rk4,
}

#[derive(Clone, Copy, ValueEnum)]
enum HsArg {
    Frobenius,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    RotatingAa,
    Transcendental,
}

#[derive(Args)]
struct EpsilonArgs {
    /// `pauli-z+x`, `pauli-x`, `pauli-z` or `matrix:<row>;<row>` (rad/s).
    #[arg(long, default_value = "pauli-z+x")]
    hamiltonian: String,
    /// `basis:<k>` or `bloch:<θ>,<φ>` with deg:/rad: angles.
    #[arg(long, default_value = "basis:0")]
    state: String,
    #[arg(long, default_value_t = 0.75)]
    fidelity: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
    epsilons: Vec<f64>,
    #[arg(long, value_enum, default_value = "rotating-aa")]
    estimator: EstimatorArg,
    /// Seconds; defaults to ten periods of the largest Bohr frequency.
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TomographyArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Number of random states after the ground state.
    #[arg(long, default_value_t = 5)]
    states: usize,
}

fn load_scenario(args: &CompareArgs) -> Result<Scenario, CliError> {
    let mut s = if Path::new(&args.scenario).is_file() {
        let text = std::fs::read_to_string(&args.scenario)
            .map_err(|e| CliError::scenario(format!("{}: {e}", args.scenario)))?;
        Scenario::from_config(&ConfigFile::parse(&text)?)?
    } else {
        Scenario::preset(&args.scenario)?
    };
    if let Some(g) = &args.fidelity_grid {
        s.fidelity_grid = parse_fidelity_grid(g)?;
    }
    let sweep = SweepGrid {
        n_phase: args.sweep_n_phase.unwrap_or(s.sweep.n_phase),
        n_angle: args.sweep_n_angle.unwrap_or(s.sweep.n_angle),
        oversample: args.oversample.unwrap_or(s.sweep.oversample),
        refine_levels: args.refine_levels.unwrap_or(s.sweep.refine_levels),
    };
    s.sweep = sweep;
    if let Some(h) = &args.horizon {
        s.horizon = parse_seconds(h)?;
    }
    if let Some(n) = &args.rk4_steps_per_period {
        s.rk4_steps_per_period = parse_count(n, "rk4-steps-per-period")?;
    }
    if let Some(o) = args.oracle {
        s.oracle = match o {
            OracleArg::Auto => OracleChoice::Auto,
            OracleArg::Exact => OracleChoice::Exact,
            OracleArg::Rk4 => OracleChoice::Rk4,
        };
    }
    if let Some(hs) = args.hs_convention {
        s.hs = match hs {
            HsArg::Frobenius => HsConvention::Frobenius,
            HsArg::Literal => HsConvention::Literal,
        };
    }
    if let Some(out) = &args.out {
        s.out = Some(out.clone());
    }
    s.validated()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::scenario(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compare(args) => {
            let scenario = load_scenario(&args)?;
            let rows = with_threads(cli.threads, || run_compare(&scenario))??;
            let unreachable = rows.iter().filter(|r| !r.is_reachable()).count();
            if unreachable > 0 {
                eprintln!("{}: {unreachable} target(s) not reached within the horizon", scenario.name);
            }
            write_compare_csv(output(scenario.out.as_deref())?, &rows)
        }
        Command::EpsilonStudy(args) => {
            let h = qsl_cli::run::parse_hamiltonian_spec(&args.hamiltonian)?;
            let psi0 = qsl_cli::run::parse_state_spec(&args.state, h.dim())?;
            let study = EpsilonStudy {
                h,
                psi0,
                fidelity: args.fidelity,
                epsilons: args.epsilons,
                estimator: match args.estimator {
                    EstimatorArg::RotatingAa => EpsilonEstimator::RotatingAa,
                    EstimatorArg::Transcendental => EpsilonEstimator::Transcendental,
                },
                horizon: args.horizon.as_deref().map(parse_seconds).transpose()?,
                sweep: SweepGrid::default(),
            };
            let rows = with_threads(cli.threads, || run_epsilon_study(&study))??;
            write_epsilon_csv(output(args.out.as_deref())?, &rows)
        }
        Command::TomographyDemo(args) => {
            let demo = run_tomography_demo(args.seed, args.states)?;
            let mut out = io::stdout().lock();
            out.write_all(demo.report().as_bytes())?;
            Ok(())
        }
        Command::Presets => {
            let mut out = io::stdout().lock();
            for p in PRESETS {
                writeln!(out, "{p}")?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qsl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
