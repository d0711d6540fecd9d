//! Experiment runners for the `qclab` command-line tool.
//!
//! Each runner reads an [`ExperimentConfig`], writes CSV tables, SVG plots and a
//! `report.json` into an output directory and returns a [`RunReport`]. The exit
//! code contract is 0 for a passing run, 2 for configuration or precondition
//! errors, 3 for failed assertions and 4 when a solver does not converge.

pub mod config;
pub mod plot;
pub mod report;
pub mod runners;

pub use config::ExperimentConfig;
pub use report::{Assertion, RunReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] quasiclassical::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(e) if e.is_convergence() => EXIT_SOLVER,
            _ => EXIT_PRECONDITION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Effective,
    Gse,
    Trap,
    Check,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Effective => "effective",
            Experiment::Gse => "gse",
            Experiment::Trap => "trap",
            Experiment::Check => "check",
        }
    }
}

/// Runs one experiment and writes `report.json` next to its artifacts.
pub fn run(exp: Experiment, cfg: &ExperimentConfig, out: &std::path::Path) -> Result<RunReport, HarnessError> {
    std::fs::create_dir_all(out)?;
    let report = match exp {
        Experiment::Effective => runners::cmd_effective(cfg, out)?,
        Experiment::Gse => runners::cmd_gse(cfg, out)?,
        Experiment::Trap => runners::cmd_trap(cfg, out)?,
        Experiment::Check => runners::cmd_check(cfg, out)?,
    };
    report.write(&out.join("report.json"))?;
    Ok(report)
}
