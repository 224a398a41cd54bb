//! `replsynth`: build datasets, train policy/value networks, synthesize
//! programs and benchmark search strategies.

mod commands;
mod config;
mod domains;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use replsynth::datagen::{DatagenError, DomainKind};
use replsynth::learner::LearnError;
use replsynth::mdp::MdpError;
use replsynth::search::Strategy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::Invalid(m) => CliError::Usage(m),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<MdpError> for CliError {
    fn from(e: MdpError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "replsynth", version, about = "Execution-guided program synthesis over CSG and string-editing DSLs")]
struct Cli {
    /// JSON file whose keys mirror the long flags; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of demonstration episodes.
    Datagen(DatagenArgs),
    /// Pretrain the policy, then train policy and value with REINFORCE.
    Train(TrainArgs),
    /// Search for a program satisfying one task.
    Synth(SynthArgs),
    /// Run search strategies over a task suite and write CSV and plots.
    Bench(BenchArgs),
    /// Decode a program without executing partial programs.
    Norepl(SynthArgs),
    /// Show random scenes or tasks and what search makes of them.
    Demo(DemoArgs),
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatagenArgs {
    #[arg(long)]
    pub domain: Option<DomainKind>,
    /// Number of episodes [default: 1000].
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSG: object count is uniform over 1..=N.
    #[arg(long)]
    pub max_objects: Option<usize>,
    /// Strings: most expressions per program.
    #[arg(long)]
    pub max_expressions: Option<usize>,
    /// Strings: longest input or output.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Existing output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSize {
    Tiny,
    Small,
    Full,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    #[arg(long)]
    pub domain: Option<DomainKind>,
    /// Checkpoint path to write (and resume from with --resume).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Dataset directory from `datagen`; without it episodes are generated on the fly.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub max_objects: Option<usize>,
    #[arg(long)]
    pub pretrain_steps: Option<u64>,
    #[arg(long)]
    pub rl_steps: Option<u64>,
    /// Episodes per pretraining step.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Specs per REINFORCE step.
    #[arg(long)]
    pub b1: Option<usize>,
    /// Rollouts per spec.
    #[arg(long)]
    pub b2: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Gradient-norm clip.
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub model: Option<ModelSize>,
    /// Train networks that never see execution results.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_repl: Option<bool>,
    /// Continue from the checkpoint at --out.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub resume: Option<bool>,
    /// Stop after this many total steps.
    #[arg(long)]
    pub until: Option<u64>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Training log CSV [default: <out>.log.csv].
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthArgs {
    #[arg(long)]
    pub domain: Option<DomainKind>,
    /// Trained checkpoint; without it a uniform policy and no value are used.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Task file: an encoded spec, or a string task list (first task used).
    #[arg(long, value_name = "FILE")]
    pub task: Option<PathBuf>,
    /// Strings: an example as INPUT=>OUTPUT; repeatable.
    #[arg(long = "example", value_name = "INPUT=>OUTPUT")]
    pub examples: Option<Vec<String>>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Node budget (REPL executions).
    #[arg(long)]
    pub nodes: Option<u64>,
    /// Seconds [default: 120, or 10 for micro domains].
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Actions expanded per A* node.
    #[arg(long)]
    pub astar_m: Option<usize>,
    #[arg(long)]
    pub max_objects: Option<usize>,
    /// Write the best program's output (grey-map, voxel dump or strings).
    #[arg(long, value_name = "FILE")]
    pub render: Option<PathBuf>,
    /// Print the report as JSON, including the quality trace.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub json: Option<bool>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchArgs {
    #[arg(long)]
    pub domain: Option<DomainKind>,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Checkpoint trained with --no-repl, enabling the norepl strategy.
    #[arg(long, value_name = "FILE")]
    pub norepl_checkpoint: Option<PathBuf>,
    /// Task suite file; without it tasks are generated.
    #[arg(long, value_name = "FILE")]
    pub suite: Option<PathBuf>,
    /// Generated suite size [default: 100].
    #[arg(long)]
    pub tasks: Option<usize>,
    /// Seed of the generated suite.
    #[arg(long)]
    pub task_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<Strategy>>,
    /// Node budget per task and strategy [default: 2000].
    #[arg(long)]
    pub nodes: Option<u64>,
    /// Seconds per task and strategy [default: 120, or 10 for micro domains].
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub astar_m: Option<usize>,
    #[arg(long)]
    pub max_objects: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoArgs {
    #[arg(long)]
    pub domain: Option<DomainKind>,
    /// Scenes to show [default: 3].
    #[arg(long)]
    pub count: Option<usize>,
    /// CSG: most objects per scene.
    #[arg(long)]
    pub max_shapes: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub nodes: Option<u64>,
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = cli.config.as_deref().map(config::read_config).transpose()?;
    let file = file.as_ref();
    match cli.command {
        Command::Datagen(a) => commands::datagen(config::layer("datagen", file, &a)?),
        Command::Train(a) => commands::train(config::layer("train", file, &a)?),
        Command::Synth(a) => commands::synth(config::layer("synth", file, &a)?, false),
        Command::Bench(a) => commands::bench(config::layer("bench", file, &a)?),
        Command::Norepl(a) => commands::synth(config::layer("norepl", file, &a)?, true),
        Command::Demo(a) => commands::demo(config::layer("demo", file, &a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
