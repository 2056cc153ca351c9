use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use csgl_amp::harness::ExperimentConfig;
use csgl_amp_cli::commands::{threads_from_env, THREADS_ENV};
use csgl_amp_cli::{cmd_calibrate, cmd_region, cmd_sweep, load_config, selftest, RunError};

#[derive(Parser)]
#[command(name = "csgl-amp", version, about = "Monte Carlo experiments for CSGL-AMP preamble detection")]
#[command(after_help = "Worker threads: set CSGL_AMP_THREADS (0 or unset uses every core).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's trials per point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Write wall_time_ms as 0 so repeated runs are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// P_md versus SNR for every configured solver.
    Sweep {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Largest rho_G meeting target_pmd for each delta in delta_grid.
    Region {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Grid search over the AMP threshold multipliers at each SNR point.
    Calibrate {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        alpha1: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        alpha2: Vec<f64>,
        /// Discard candidates whose false-alarm rate exceeds this.
        #[arg(long)]
        pfa_cap: Option<f64>,
    },
    /// Fast invariant checks; exits nonzero if any fails.
    Selftest,
}

fn resolve(cli: &Cli, path: &Path) -> Result<ExperimentConfig, RunError> {
    let mut config = load_config(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if cli.no_timing {
        config.record_timing = false;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<bool, RunError> {
    match &cli.command {
        Command::Sweep { config, output } => {
            let cfg = resolve(cli, config)?;
            let rows = cmd_sweep(&cfg, output, threads_from_env()?)?;
            eprintln!("wrote {} rows to {}", rows.len(), output.display());
        }
        Command::Region { config, output } => {
            let cfg = resolve(cli, config)?;
            let rows = cmd_region(&cfg, output, threads_from_env()?)?;
            eprintln!("wrote {} rows to {}", rows.len(), output.display());
        }
        Command::Calibrate { config, output, alpha1, alpha2, pfa_cap } => {
            let cfg = resolve(cli, config)?;
            let result = cmd_calibrate(&cfg, output, alpha1, alpha2, *pfa_cap, threads_from_env()?)?;
            for r in &result.best {
                eprintln!("{} at {} dB: alpha1 = {}, alpha2 = {} (pmd {}, pfa {})", r.solver, r.snr_db, r.alpha1, r.alpha2, r.pmd, r.pfa);
            }
        }
        Command::Selftest => {
            let (checks, elapsed) = selftest::run_timed();
            let ok =
                selftest::report(&checks, &mut std::io::stdout()).map_err(|source| RunError::Write { path: "stdout".into(), source })?;
            println!("{} in {:.1} s", if ok { "all checks passed" } else { "selftest FAILED" }, elapsed.as_secs_f64());
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, RunError::Threads(_)) {
                eprintln!("hint: {THREADS_ENV} takes a worker count, 0 for automatic");
            }
            ExitCode::FAILURE
        }
    }
}
