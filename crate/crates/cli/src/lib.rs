//! Staged command-line driver: each verb reads the artifacts of earlier
//! stages from the output directory and writes its own with a manifest.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod plots;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vmsr_core::eval::AblationAxis;
use vmsr_core::{RewardMode, TaskKind};

use commands::{Ctx, HrlOptions};
use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "vmsr", version, about = "Learn navigation subroutines from action-free videos and evaluate them")]
pub struct Cli {
    /// TOML run configuration; defaults are used for absent keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    PointGoal,
    AreaGoal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RewardArg {
    Sparse,
    Dense,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the maps of every split.
    GenEnvs,
    /// Collect random interaction data on Einv and expert videos on Evideo.
    Collect,
    /// Train the inverse dynamics model.
    TrainInverse,
    /// Pseudo-label the expert videos.
    Label,
    /// Train subroutines and the affordance model.
    TrainSubroutines,
    /// Run the exploration benchmark on Etest.
    Explore {
        /// Skip the learned policy and run only the hand-crafted baselines.
        #[arg(long)]
        baselines_only: bool,
    },
    /// Same- and cross-subroutine coverage overlap.
    Iou,
    /// Sweep one pipeline factor at a time.
    Ablate {
        /// Axis to sweep; repeatable. Defaults to the configured axes.
        #[arg(long, value_parser = parse_axis)]
        axis: Vec<AblationAxis>,
    },
    /// Fine-tune hierarchical policies on a goal task.
    Hrl {
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
        #[arg(long, value_enum)]
        reward: Option<RewardArg>,
        /// Also train flat one-subroutine and random policies.
        #[arg(long)]
        flat: bool,
        /// Keep the sub-policies fixed.
        #[arg(long)]
        freeze: bool,
    },
    /// Collate results into a table and plots.
    Report {
        /// Report results produced with different master seeds.
        #[arg(long)]
        force: bool,
    },
}

fn parse_axis(s: &str) -> Result<AblationAxis, String> {
    AblationAxis::parse(s).map_err(|e| e.to_string())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.validate()?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        // A pool built earlier in the same process is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let ctx = Ctx::new(cfg, cli.seed, cli.out);
    ctx.layout.create(std::path::Path::new(""))?;
    artifacts::write_json(&ctx.layout.root.join("config.json"), &ctx.cfg)?;
    match cli.command {
        Command::GenEnvs => commands::gen_envs(&ctx).map(drop),
        Command::Collect => commands::collect(&ctx).map(drop),
        Command::TrainInverse => commands::train_inverse(&ctx).map(drop),
        Command::Label => commands::label(&ctx).map(drop),
        Command::TrainSubroutines => commands::train_subroutines(&ctx).map(drop),
        Command::Explore { baselines_only } => commands::explore(&ctx, baselines_only).map(drop),
        Command::Iou => commands::iou(&ctx).map(drop),
        Command::Ablate { axis } => commands::ablate(&ctx, &axis).map(drop),
        Command::Hrl { task, reward, flat, freeze } => commands::hrl(
            &ctx,
            HrlOptions {
                task: task.map(|t| match t {
                    TaskArg::PointGoal => TaskKind::PointGoal,
                    TaskArg::AreaGoal => TaskKind::AreaGoal,
                }),
                reward: reward.map(|r| match r {
                    RewardArg::Sparse => RewardMode::Sparse,
                    RewardArg::Dense => RewardMode::Dense,
                }),
                flat,
                freeze,
            },
        )
        .map(drop),
        Command::Report { force } => commands::report(&ctx, force).map(drop),
    }
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
