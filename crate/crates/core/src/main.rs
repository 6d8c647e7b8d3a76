use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use eecl_td3::envs::make_env;
use eecl_td3::harness::checkpoint::Checkpoint;
use eecl_td3::harness::{
    emit_plot, load_config, run_comparison, run_training, HarnessError, RunConfig,
};
use eecl_td3::seeding::{stream, stream_rng};

#[derive(Parser)]
#[command(
    name = "eecl-td3",
    version,
    about = "TD3 with a novelty exploration bonus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment name (pointmass, armlift).
    #[arg(long)]
    env: Option<String>,
    /// Total environment steps.
    #[arg(long)]
    steps: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write its learning curve and checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Plain TD3 without the exploration bonus.
        #[arg(long)]
        no_eecl: bool,
    },
    /// Mean return of a checkpointed policy.
    Eval {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = RunConfig::EVAL_EPISODES)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Paired EECL-vs-TD3 runs over several seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Render a learning-curve or comparison CSV as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Without a config file the bonus is on; with one, it is on exactly when the
/// file has an `[eecl]` table.
fn resolve(common: &Common, default_eecl: bool) -> Result<RunConfig, HarnessError> {
    let mut config = match &common.config {
        Some(path) => load_config(path)?,
        None if default_eecl => RunConfig::with_eecl(RunConfig::ENV)?,
        None => RunConfig::baseline(RunConfig::ENV)?,
    };
    if let Some(env) = &common.env {
        config.set_env(env)?;
    }
    if let Some(steps) = common.steps {
        config.td3.total_steps = steps;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train {
            common,
            seed,
            no_eecl,
        } => {
            let mut config = resolve(&common, true)?;
            if no_eecl {
                config.eecl = None;
            }
            let started = Instant::now();
            let curve = run_training(&config, seed)?;
            let last = curve.last().expect("curve has the step-0 point");
            println!(
                "{} seed {seed} ({}): final mean return {:.4}, novel states {}, {:.1}s -> {}",
                config.env,
                if config.eecl.is_some() { "eecl" } else { "td3" },
                last.mean_eval_return,
                last.novel_state_count,
                started.elapsed().as_secs_f64(),
                config.out_dir.display()
            );
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => {
            if episodes == 0 {
                return Err(HarnessError::OutOfRange {
                    field: "episodes".into(),
                    message: "must be positive".into(),
                });
            }
            let ck = Checkpoint::load(&checkpoint)?;
            let env = make_env(&ck.env)?;
            let (agent, _) = ck.restore(&checkpoint)?;
            let mut rng = stream_rng(seed, stream::EVALUATION);
            let mean = agent.evaluate(env.as_ref(), episodes, &mut rng)?;
            println!("{mean:.16e}");
        }
        Command::Compare { common, seeds } => {
            let mut config = resolve(&common, true)?;
            if config.eecl.is_none() {
                return Err(HarnessError::MissingNovelty);
            }
            if let Some(seeds) = seeds {
                config.seeds = seeds;
            }
            config.validate()?;
            let started = Instant::now();
            let report = run_comparison(&config)?;
            for s in &report.seeds {
                println!(
                    "seed {:>3}: eecl {:>12.4}  td3 {:>12.4}  novel {:>5} vs {:>5}  converged at {:>5} vs {:>5}",
                    s.seed, s.final_eecl, s.final_base, s.novel_eecl, s.novel_base, s.convergence_eecl, s.convergence_base
                );
            }
            println!(
                "median final return: eecl {:.4}, td3 {:.4}; eecl wins {}/{}; {:.1}s -> {}",
                report.eecl.median_final_return,
                report.baseline.median_final_return,
                report.eecl_wins,
                report.seeds.len(),
                started.elapsed().as_secs_f64(),
                config.out_dir.display()
            );
        }
        Command::Plot { csv, out } => {
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            emit_plot(&csv, &out)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
