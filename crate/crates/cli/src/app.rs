//! Argument parsing and dispatch to the subcommands.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vinject_core::{Error, ErrorKind, Result};

use crate::commands::{self, eval::EvalKind};
use crate::config::{BackendKind, Overrides, PersonaSetting, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "vinject",
    version,
    about = "Inject and evaluate value distributions in language models"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// Base URL of a chat-completion server.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long = "top-p", global = true)]
    pub top_p: Option<f64>,
    /// Maximum backend requests in flight.
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// Threshold for the "I would say" frame.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Number of clusters.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub persona: Option<PersonaArg>,
    /// Exemplars prefixed to each prompt.
    #[arg(long = "few-shot", global = true)]
    pub few_shot: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PersonaArg {
    Short,
    Long,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Pvq,
    Argue,
    Behavior,
    Opinion,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the corpora and write a manifest with counts and checksums.
    Ingest,
    /// Cluster respondents and write target distributions.
    Targets,
    /// Write AG and QA training files per target.
    Gendata {
        /// Target ids, or `all`.
        #[arg(default_value = "all")]
        targets: Vec<String>,
    },
    /// Evaluate a backend on one task.
    Eval {
        #[arg(value_enum)]
        task: TaskArg,
        /// Target ids; defaults to the configured set.
        targets: Vec<String>,
    },
    /// Paired t-tests between two run directories.
    Compare { a: PathBuf, b: PathBuf },
    /// Rebuild summary tables; tally annotation judgments when given.
    Report {
        #[arg(long)]
        judgments: Option<PathBuf>,
    },
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            backend: self.backend.map(|b| match b {
                BackendArg::Mock => BackendKind::Mock,
                BackendArg::Http => BackendKind::Http,
            }),
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            temperature: self.temperature,
            top_p: self.top_p,
            concurrency: self.concurrency,
            gamma: self.gamma,
            k: self.k,
            persona: self.persona.map(|p| match p {
                PersonaArg::Short => PersonaSetting::Short,
                PersonaArg::Long => PersonaSetting::Long,
                PersonaArg::None => PersonaSetting::None,
            }),
            few_shot: self.few_shot,
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Validation => 1,
        ErrorKind::Transport => 2,
        ErrorKind::Internal => 3,
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.global.config.as_deref(), &cli.global.overrides())?;
    match cli.command {
        Command::Ingest => {
            commands::ingest::run(&cfg)?;
        }
        Command::Targets => {
            commands::targets::run(&cfg)?;
        }
        Command::Gendata { targets } => {
            commands::gendata::run(&cfg, &targets)?;
        }
        Command::Eval { task, targets } => {
            let kind = match task {
                TaskArg::Pvq => EvalKind::Pvq,
                TaskArg::Argue => EvalKind::Argue,
                TaskArg::Behavior => EvalKind::Behavior,
                TaskArg::Opinion => EvalKind::Opinion,
            };
            let ids = if targets.is_empty() {
                cfg.targets.clone()
            } else {
                targets
            };
            commands::eval::run(&cfg, kind, &ids)?;
        }
        Command::Compare { a, b } => {
            commands::compare::run(&cfg, &a, &b)?;
        }
        Command::Report { judgments } => {
            commands::report::run(&cfg, judgments.as_deref())?;
        }
    }
    Ok(())
}

/// Parse `args` and run; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
