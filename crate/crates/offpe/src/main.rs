use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use offpe::commands::{self, Metric};
use offpe::config::{ExperimentConfig, GeneratorConfig};
use offpe::{CliError, CliResult};
use offpe_core::verify::Fault;

#[derive(Parser)]
#[command(name = "offpe", version, about = "Offline policy evaluation and approximate policy iteration on finite MDPs")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random MDP as JSON.
    MdpGen {
        #[arg(long, default_value_t = 5)]
        states: usize,
        #[arg(long, default_value_t = 3)]
        actions: usize,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        reward_min: f64,
        #[arg(long, default_value_t = 1.0)]
        reward_max: f64,
        #[arg(long, default_value_t = 2)]
        reward_support: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run policy evaluation for every seed in the config.
    Evaluate(RunArgs),
    /// Run approximate policy iteration for every seed in the config.
    Learn(RunArgs),
    /// Fit the decay exponent of a recorded metric.
    RateFit {
        /// Records files; several files are averaged per t before the fit.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value = "loss_gap")]
        metric: String,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1e3, 1e5])]
        window: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite.
    Verify {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    DSign,
}

fn load(args: &RunArgs) -> CliResult<(ExperimentConfig, offpe::config::Experiment, PathBuf)> {
    let (mut config, base) = ExperimentConfig::load(&args.config)?;
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    let exp = config.build(&base)?;
    let out = args
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(|p| if p.is_absolute() { p.clone() } else { base.join(p) }))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((config, exp, out))
}

fn dispatch(command: Command) -> CliResult<Vec<String>> {
    match command {
        Command::MdpGen { states, actions, gamma, seed, reward_min, reward_max, reward_support, out } => {
            let gen = GeneratorConfig {
                n_states: states,
                n_actions: actions,
                gamma,
                seed,
                reward_range: (reward_min, reward_max),
                reward_support,
            };
            commands::mdp_gen(&gen, &out)
        }
        Command::Evaluate(args) => {
            let (config, exp, out) = load(&args)?;
            commands::evaluate(&exp, &out, config.save_data, config.dump_counts)
        }
        Command::Learn(args) => {
            let (_, exp, out) = load(&args)?;
            commands::learn(&exp, &out)
        }
        Command::RateFit { files, metric, window, out } => {
            commands::rate_fit(&files, Metric::parse(&metric)?, (window[0], window[1]), out.as_deref())
        }
        Command::Verify { inject_fault } => {
            let fault = match inject_fault {
                Some(FaultArg::DSign) => Fault::FlipDSign,
                None => Fault::None,
            };
            let (lines, failed) = commands::verify(fault)?;
            for l in &lines {
                println!("{l}");
            }
            if failed.is_empty() {
                Ok(Vec::new())
            } else {
                Err(CliError::Check(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(lines) => {
            if !cli.quiet {
                for l in lines {
                    println!("{l}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
