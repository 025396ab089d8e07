use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ris_hybrid::experiments::{emit_csv, emit_trace, load_config, parse_list, run_sweep, SweepKind, SweepSpec, Variant};
use ris_hybrid::system::SystemConfig;
use ris_hybrid::{Error, Result};

/// Monte Carlo sweeps for RIS-aided hybrid beamforming.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Key-value config file overriding the desk-scale defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sinr, elements, distance or convergence.
    #[arg(long, default_value = "sinr")]
    sweep: String,
    /// Comma-separated sweep points (dB, element counts or metres).
    #[arg(long)]
    values: Option<String>,
    #[arg(long, default_value_t = 20)]
    realizations: usize,
    /// Comma-separated subset of penalty_hybrid, penalty_fully_digital,
    /// random_theta, maxmin_theta_joint_wv, individual.
    #[arg(long)]
    variants: Option<String>,
    /// Overrides the config file seed (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Result CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Convergence trace CSV of the first penalty run.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Record wall-clock time per row; output is then no longer reproducible.
    #[arg(long)]
    timing: bool,
}

fn run(cli: Cli) -> Result<()> {
    let base = SystemConfig::desk_defaults();
    let (config, file_seed) = match &cli.config {
        Some(path) => load_config(path, &base)?,
        None => (base, None),
    };
    let kind: SweepKind = cli.sweep.parse()?;
    let values = match &cli.values {
        Some(text) => parse_list::<f64>(text)?,
        None => kind.default_values(&config),
    };
    let variants = match &cli.variants {
        Some(text) => parse_list::<Variant>(text)?,
        None => Variant::ALL.to_vec(),
    };
    let mut spec = SweepSpec::new(kind, values, cli.realizations, variants, cli.seed.or(file_seed).unwrap_or(0));
    spec.threads = cli.threads;
    spec.record_timing = cli.timing;

    let out = run_sweep(&spec, &config)?;
    emit_csv(&out.rows, &cli.out)?;
    if let Some(path) = &cli.trace {
        let trace = out
            .trace
            .ok_or_else(|| Error::InvalidConfig("a trace needs at least one penalty-method variant".into()))?;
        emit_trace(&trace, path)?;
    }
    let converged = out.rows.iter().filter(|r| r.converged).count();
    eprintln!("{} rows ({converged} converged) written to {}", out.rows.len(), cli.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
