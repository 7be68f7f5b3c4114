use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pseudomarket_cli::commands::{cmd_ideal, execute, parse_strategy, preset_experiment};
use pseudomarket_cli::{CliError, ExperimentFile};
use pseudomarket_core::{PresetParams, StrategySpec};

/// Credit-based allocation of reusable resources: ideal utilities,
/// mechanism simulations and reference experiments.
#[derive(Debug, Parser)]
#[command(name = "pseudomarket", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve each agent's ideal-utility program.
    Ideal {
        config: PathBuf,
        /// Cross-check the optimum by vertex enumeration.
        #[arg(long)]
        oracle: bool,
        /// Also simulate the ideal policy without competition for H rounds.
        #[arg(long, value_name = "H")]
        simulate: Option<usize>,
    },
    /// Run Monte-Carlo trials of an experiment file.
    Run {
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a built-in experiment: guarantee, impossibility, hardness, multi,
    /// roundrobin or bpb.
    Preset {
        name: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "kmax")]
        k_max: Option<usize>,
        #[arg(long)]
        reserve: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        units: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Strategy of the focus agent, as `name` or `name:param`.
        #[arg(long, value_parser = parse_strategy)]
        focus: Option<StrategySpec>,
        /// Opponent strategy for the bpb preset.
        #[arg(long, value_parser = parse_strategy)]
        opponent: Option<StrategySpec>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// CSV destination; the summary is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for trials.
    #[arg(long, env = "PSEUDOMARKET_JOBS")]
    jobs: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = &mut std::io::stdout().lock();
    let stderr = &mut std::io::stderr().lock();
    match cli.command {
        Command::Ideal {
            config,
            oracle,
            simulate,
        } => {
            let file = ExperimentFile::load(&config)?;
            write!(stdout, "{}", cmd_ideal(&file, oracle, simulate)?)?;
        }
        Command::Run {
            config,
            trials,
            seed,
            output,
        } => {
            let file = ExperimentFile::load(&config)?;
            let exp = file.experiment("run", seed, trials)?;
            execute(&exp, output.jobs, output.out.as_deref(), stdout, stderr)?;
        }
        Command::Preset {
            name,
            n,
            k_max,
            reserve,
            alpha,
            units,
            horizon,
            trials,
            seed,
            focus,
            opponent,
            output,
        } => {
            let params = PresetParams {
                horizon,
                trials,
                seed,
                reserve,
                alpha,
                units,
                n,
                k_max,
                focus_strategy: focus,
                opponent,
            };
            let exp = preset_experiment(&name, &params)?;
            execute(&exp, output.jobs, output.out.as_deref(), stdout, stderr)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
