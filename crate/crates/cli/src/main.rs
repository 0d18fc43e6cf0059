use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qct_cli::commands;
use qct_cli::output::OutputDir;
use qct_cli::{CliError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "qct", version, about = "Quantum-to-classical transition experiments for the driven Duffing oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration; defaults are used for every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    margin_factor: Option<f64>,

    /// Worker threads; QCT_THREADS takes precedence. Never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Wigner function of one conditioned trajectory at run.t_final.
    ReproduceFig1,
    /// Mean position of one conditioned trajectory and its noise metric.
    ReproduceFig2,
    /// Lyapunov exponent, phase-space averages and the regime report.
    Classify,
    /// Trajectory-averaged Wigner function against the matched Langevin density.
    WeakDemo,
    Lyapunov,
    SimulateQuantum,
    SimulateClassical,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("QCT_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("QCT_THREADS must be a thread count, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(dir) = &cli.out {
        cfg.output.directory = dir.clone();
    }
    if let Some(m) = cli.margin_factor {
        cfg.criteria.margin_factor = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let (files, summary) = match cli.command {
        Command::ReproduceFig1 => {
            let r = commands::run_fig1(&cfg)?;
            (r.write(&cfg, &OutputDir::create(&cfg.output.directory)?)?, r.summary())
        }
        Command::ReproduceFig2 => {
            let r = commands::run_fig2(&cfg)?;
            (r.write(&cfg, &OutputDir::create(&cfg.output.directory)?)?, r.summary())
        }
        Command::Classify => {
            let r = commands::run_classify(&cfg)?;
            (r.write(&cfg, &OutputDir::create(&cfg.output.directory)?)?, r.summary())
        }
        Command::WeakDemo => {
            let r = commands::run_weak_demo(&cfg)?;
            (r.write(&cfg, &OutputDir::create(&cfg.output.directory)?)?, r.summary())
        }
        Command::Lyapunov => {
            let r = commands::run_lyapunov(&cfg)?;
            let files = commands::write_lyapunov(&r, &cfg, &OutputDir::create(&cfg.output.directory)?)?;
            (files, format!("lambda_bar = {:.4} +- {:.4} over {} orbits", r.lambda_bar, r.std_err, r.n_orbits))
        }
        Command::SimulateQuantum => {
            let r = commands::run_simulate_quantum(&cfg)?;
            let summary = format!("{} rows, {} Wigner grids", r.record.rows.len(), r.wigners.len());
            (r.write(&cfg, &OutputDir::create(&cfg.output.directory)?)?, summary)
        }
        Command::SimulateClassical => {
            let r = commands::run_simulate_classical(&cfg)?;
            let summary = format!("{} rows", r.times.len());
            (r.write(&cfg, &OutputDir::create(&cfg.output.directory)?)?, summary)
        }
    };
    println!("{summary}");
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
