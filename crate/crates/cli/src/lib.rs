//! Scenario runner for the evolution-time estimators: presets, config
//! parsing and CSV emitters behind the `qsl` binary.

pub mod config;
pub mod error;
pub mod run;
pub mod scenario;

pub use config::ConfigFile;
pub use error::CliError;
pub use run::{
    compare_csv_bytes, run_compare, run_epsilon_study, run_tomography_demo, with_threads, write_compare_csv,
    write_epsilon_csv, EpsilonEstimator, EpsilonRow, EpsilonStudy, TomographyDemo,
};
pub use scenario::{Scenario, PRESETS};
