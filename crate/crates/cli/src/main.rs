use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use singheat::scenario::ScenarioConfig;
use singheat_cli::{execute, exit_code, Command, SolveFlags};

/// Singular heat potentials, comparison pairs, capacity scans and singular
/// solutions for scenario files.
#[derive(Parser, Debug)]
#[command(name = "singheat", version)]
struct Cli {
    /// Scenario TOML; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the scenario's `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the scenario's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Default)]
struct SolveArgs {
    /// Also run the spatially constant absorption oracle.
    #[arg(long)]
    ode_sanity: bool,
    /// Exhaustion study over a comma-separated N ladder (configured ladder if no value).
    #[arg(long, value_delimiter = ',', num_args = 0..=1, require_equals = true)]
    exhaustion: Option<Vec<usize>>,
}

impl SolveArgs {
    fn flags(&self) -> SolveFlags {
        SolveFlags { ode_sanity: self.ode_sanity, exhaustion: self.exhaustion.clone() }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Asymptotics scan of the potential U.
    Potential {
        /// Compare against the flat-plane closed form.
        #[arg(long)]
        flat_selftest: bool,
    },
    /// Sign verification and minimal offset of the comparison pairs.
    Comparison {
        /// Cross-check closed-form residuals by finite differences.
        #[arg(long)]
        fd_check: bool,
    },
    /// Cutoff-norm scans over the epsilon ladder.
    Capacity,
    /// Monotone-iteration solve and boundary-law report.
    Solve(SolveArgs),
    /// Every stage in order.
    All {
        #[arg(long)]
        flat_selftest: bool,
        #[arg(long)]
        fd_check: bool,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Print the default scenario as TOML.
    Defaults,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let mut cfg = match &cli.config {
        Some(p) => match ScenarioConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e) as u8);
            }
        },
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    let command = match cli.command {
        Cmd::Defaults => {
            match cfg.to_toml() {
                Ok(t) => print!("{t}"),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            return ExitCode::SUCCESS;
        }
        Cmd::Potential { flat_selftest } => Command::Potential { flat_selftest },
        Cmd::Comparison { fd_check } => Command::Comparison { fd_check },
        Cmd::Capacity => Command::Capacity,
        Cmd::Solve(a) => Command::Solve(a.flags()),
        Cmd::All { flat_selftest, fd_check, solve } => Command::All { flat_selftest, fd_check, solve: solve.flags() },
    };
    let out = cfg.output.clone();
    match execute(&cfg, &command, &out) {
        Ok(report) => {
            print!("{}", report.render());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
