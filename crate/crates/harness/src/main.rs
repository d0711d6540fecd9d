use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasiclassical_harness::{run, Experiment, ExperimentConfig, HarnessError, EXIT_PASS};

#[derive(Parser)]
#[command(name = "qclab", version, about = "Quasi-classical limit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partial-trace potentials along an ε sweep against the classical limit.
    Effective(RunArgs),
    /// Quantum ground energies against the classical infimum.
    Gse(RunArgs),
    /// Coherent states reproducing a confining trap.
    Trap(RunArgs),
    /// Invariant battery on seeded random states.
    Check(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `run.output_dir` or `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated ε values replacing `sweep.eps`.
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// Validate the configuration and print the resolved setup without running.
    #[arg(long)]
    dry_run: bool,
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(eps) = &args.eps_list {
        cfg = cfg.with_eps(eps.clone())?;
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn dry_run(exp: Experiment, cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let particles = cfg.particles()?;
    let modes = cfg.modes()?;
    let mu = cfg.measure(modes.len())?;
    println!("experiment {}", exp.name());
    println!("config hash {}", quasiclassical_harness::report::config_hash(cfg));
    println!(
        "grid d={} G={} N={} configurations={}",
        particles.grid().dim(),
        particles.grid().points_per_axis(),
        particles.n_particles(),
        particles.config_len()
    );
    println!("modes {} ({:?})", modes.len(), modes.family());
    if exp == Experiment::Effective {
        for &eps in &cfg.sweep.eps {
            let cut = cfg.cutoffs(&mu, eps)?;
            println!("eps {eps:e}: cutoffs {cut:?}");
        }
    }
    for t in cfg.tags(&modes) {
        println!("tag: {t}");
    }
    Ok(())
}

fn execute(exp: Experiment, args: &RunArgs) -> Result<i32, HarnessError> {
    let cfg = resolve(args)?;
    if let Some(named) = cfg.run.experiment.as_deref() {
        if named != exp.name() {
            return Err(HarnessError::Config(format!(
                "config declares run.experiment = \"{named}\" but `{}` was invoked",
                exp.name()
            )));
        }
    }
    if args.dry_run {
        dry_run(exp, &cfg)?;
        return Ok(EXIT_PASS);
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.run.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let report = run(exp, &cfg, &out)?;
    for t in &report.tags {
        println!("tag: {t}");
    }
    for a in &report.assertions {
        println!("[{}] {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.id, a.detail);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    if !report.passed() {
        eprintln!("failing invariants: {}", report.failing().join(", "));
    }
    println!("report {}", out.join("report.json").display());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (exp, args) = match &cli.command {
        Command::Effective(a) => (Experiment::Effective, a),
        Command::Gse(a) => (Experiment::Gse, a),
        Command::Trap(a) => (Experiment::Trap, a),
        Command::Check(a) => (Experiment::Check, a),
    };
    let code = match execute(exp, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
