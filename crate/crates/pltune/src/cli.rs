//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{check, eval, grid, matching, optimize, pseudo, synth};
use crate::config::Mode;

#[derive(Debug, Parser)]
#[command(
    name = "pltune",
    version,
    about = "Pseudo-label threshold selection for multi-dataset object detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Directory for every file this command writes.
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
}

impl OutputArgs {
    fn dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Debug, Args)]
struct Jobs {
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tag detections as true or false positives against ground truth.
    Match {
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
        #[arg(long, value_name = "FILE")]
        det: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[command(flatten)]
        out: OutputArgs,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// Precision/recall tables from a match-records file.
    PrCurve {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        /// Curves of human plus pseudo labels; needs --ratios.
        #[arg(long, requires = "ratios")]
        combined: bool,
        #[arg(long, value_name = "FILE", requires = "combined")]
        ratios: Option<PathBuf>,
        /// Also draw the curves to curves.svg.
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Select thresholds from validation curves.
    Optimize {
        #[arg(long, value_enum)]
        method: optimize::SelectMethod,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// Turn detections into pseudo labels under a policy.
    PseudoLabel {
        #[arg(long, value_name = "FILE")]
        policy: PathBuf,
        #[arg(long, value_name = "FILE")]
        det: PathBuf,
        #[arg(long, value_name = "FILE")]
        target_gt: PathBuf,
        #[arg(long, default_value = "teacher")]
        detector: String,
        /// Emit whole-image pseudo_background records (two-threshold policies).
        #[arg(long)]
        emit_background: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Merge a bundle with its pseudo-label sets into one dataset.
    Merge {
        #[arg(long, value_name = "FILE")]
        bundle: PathBuf,
        /// Pseudo-label files in bundle order, or INDEX=FILE.
        #[arg(long, value_name = "FILE", num_args = 0..)]
        pseudo: Vec<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Score uniform thresholds from a candidate pool.
    GridSearch {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// Synthetic worlds, bundles and teacher detections.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
    /// Metrics.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Run configuration tools.
    Config {
        #[command(subcommand)]
        command: ConfigCommand,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// A fully annotated world.
    World {
        #[command(flatten)]
        args: SynthArgs,
    },
    /// Split a world into datasets with disjoint class sets.
    Partition {
        #[command(flatten)]
        args: SynthArgs,
        /// Partition this world instead of generating one.
        #[arg(long, value_name = "FILE")]
        world: Option<PathBuf>,
    },
    /// Teacher detections for each dataset's missing classes, and a
    /// validation set.
    Detect {
        #[command(flatten)]
        args: SynthArgs,
        #[arg(long, value_name = "FILE")]
        bundle: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Mean AP at IoU 0.5; --pred is a detection-results file.
    Map50 {
        #[command(flatten)]
        args: EvalArgs,
    },
    /// Precision, recall and F1 of a pseudo-label file against full truth.
    PlQuality {
        #[command(flatten)]
        args: EvalArgs,
    },
}

#[derive(Debug, Subcommand)]
enum ConfigCommand {
    /// Validate a run configuration and the files it references.
    Check {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
    },
}

fn synth_options(
    a: SynthArgs,
    world: Option<PathBuf>,
    bundle: Option<PathBuf>,
) -> synth::SynthOptions {
    synth::SynthOptions {
        config: a.config,
        world,
        bundle,
        output_dir: a.out.output_dir,
        jobs: a.jobs.jobs.into(),
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Match {
            gt,
            det,
            iou,
            out,
            jobs,
        } => matching::run_match(&matching::MatchOptions {
            gt,
            det,
            iou,
            output_dir: out.dir(),
            jobs: jobs.jobs.into(),
        }),
        Command::PrCurve {
            records,
            ratios,
            svg,
            out,
            ..
        } => matching::run_pr_curve(&matching::CurveOptions {
            records,
            ratios,
            svg,
            output_dir: out.dir(),
        }),
        Command::Optimize {
            method,
            mode,
            config,
            out,
            jobs,
        } => optimize::run(&optimize::OptimizeOptions {
            config,
            method,
            mode,
            output_dir: out.output_dir,
            jobs: jobs.jobs.into(),
        }),
        Command::PseudoLabel {
            policy,
            det,
            target_gt,
            detector,
            emit_background,
            out,
        } => pseudo::run_pseudo_label(&pseudo::PseudoLabelOptions {
            policy,
            det,
            target_gt,
            detector,
            emit_background,
            output_dir: out.dir(),
        }),
        Command::Merge {
            bundle,
            pseudo,
            out,
        } => pseudo::run_merge(&pseudo::MergeOptions {
            bundle,
            pseudo,
            output_dir: out.dir(),
        }),
        Command::GridSearch { config, out, jobs } => grid::run(&grid::GridOptions {
            config,
            output_dir: out.output_dir,
            jobs: jobs.jobs.into(),
        }),
        Command::Synth { command } => match command {
            SynthCommand::World { args } => synth::run_world(&synth_options(args, None, None)),
            SynthCommand::Partition { args, world } => {
                synth::run_partition(&synth_options(args, world, None))
            }
            SynthCommand::Detect { args, bundle } => {
                synth::run_detect(&synth_options(args, None, bundle))
            }
        },
        Command::Eval { command } => match command {
            EvalCommand::Map50 { args } => eval::run_map50(&eval::EvalOptions {
                gt: args.gt,
                pred: args.pred,
                output_dir: args.out.dir(),
            }),
            EvalCommand::PlQuality { args } => eval::run_pl_quality(&eval::EvalOptions {
                gt: args.gt,
                pred: args.pred,
                output_dir: args.out.dir(),
            }),
        },
        Command::Config {
            command: ConfigCommand::Check { config },
        } => check::run(&config),
    }
}

/// Runs one invocation and returns the process exit status: 0 on success,
/// 2 on usage errors, 1 on any other failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
