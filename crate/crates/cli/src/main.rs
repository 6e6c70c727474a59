//! `statviz`: fetch tables, build the retrieval index, run chart-generation
//! experiments and score graded outputs.
//!
//! Exit codes: 0 success, 1 user error (bad flags, config or input files),
//! 2 internal error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use statviz_core::agent::{AgentError, Mode};
use statviz_core::catalog::CatalogError;
use statviz_core::evaluation::{EvalError, ReportFormat};
use statviz_core::llm::LlmError;
use statviz_core::prompting::PromptError;
use statviz_core::retrieval::RetrievalError;
use statviz_core::tasks::{Difficulty, TaskError};

use config::{CliConfig, Overrides};

#[derive(Debug, Parser)]
#[command(name = "statviz", version, about = "Chart generation over official statistics tables")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Config file (default: ./statviz.toml when present).
    #[arg(long, global = true, env = "STATVIZ_CONFIG")]
    config: Option<PathBuf>,
    /// OData endpoint; `file://<dir>` reads a local mirror.
    #[arg(long, global = true, env = "STATVIZ_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long, global = true, env = "STATVIZ_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "STATVIZ_INDEX_DIR")]
    index_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "STATVIZ_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download tables and their metadata into the data directory.
    Fetch {
        /// Table identifiers, e.g. 85332ENG.
        #[arg(required = true)]
        refs: Vec<String>,
        #[arg(long)]
        page_size: Option<usize>,
    },
    /// Embed every materialized table and persist the index.
    Index,
    /// Rank tables for a prompt, or score gold tables of a task file.
    Retrieve {
        #[arg(conflicts_with = "task_file", required_unless_present = "task_file")]
        prompt: Option<String>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Report hits@1/5/10 over the tasks that name a gold table.
        #[arg(long)]
        task_file: Option<PathBuf>,
    },
    /// Run one mode and model configuration over a task file or one prompt.
    Run(RunArgs),
    /// Emit a blank grade form for every finished run.
    Grade {
        #[arg(long)]
        forms_dir: Option<PathBuf>,
        /// Only runs of this model configuration.
        #[arg(long)]
        model_config: Option<String>,
    },
    /// Aggregate filled grade sheets into per-configuration scores.
    Report {
        #[arg(long)]
        sheets: Option<PathBuf>,
        #[arg(long)]
        task_file: Option<PathBuf>,
        #[arg(long)]
        by_difficulty: bool,
        #[arg(long, default_value = "text")]
        format: ReportFormat,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "prompt")]
    task_file: Option<PathBuf>,
    /// Inline task text instead of a task file.
    #[arg(long)]
    prompt: Option<String>,
    /// Task id for `--prompt`.
    #[arg(long, default_value = "adhoc", requires = "prompt")]
    task_id: String,
    /// Difficulty recorded for `--prompt`.
    #[arg(long, default_value = "medium", requires = "prompt")]
    difficulty: Difficulty,
    #[arg(long, default_value = "agentic")]
    mode: Mode,
    /// Comma-separated prompt modules: viz_context, lessons_learned, viz_checklist.
    #[arg(long, value_delimiter = ',')]
    modules: Vec<String>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Name of the model configuration; also the `[models.<name>]` config key.
    #[arg(long)]
    model_config: String,
    /// Provider override: `mock:<script.json>` or `replay:<llm_log>`.
    #[arg(long)]
    provider: Option<String>,
    /// Rerun tasks that already have a run record.
    #[arg(long)]
    force: bool,
    #[arg(long, env = "STATVIZ_WORKERS")]
    workers: Option<usize>,
}

/// Errors caused by the invocation rather than by the program.
#[derive(Debug)]
pub struct UserError(String);

impl UserError {
    pub fn new(msg: impl Into<String>) -> Self {
        UserError(msg.into())
    }
}

impl std::fmt::Display for UserError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

fn is_user_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        if e.is::<UserError>() || e.is::<PromptError>() || e.is::<TaskError>() || e.is::<EvalError>() {
            return true;
        }
        if let Some(e) = e.downcast_ref::<CatalogError>() {
            return matches!(
                e,
                CatalogError::InvalidRef(_)
                    | CatalogError::NotFound(_)
                    | CatalogError::MissingDataDir(_)
                    | CatalogError::InvalidPageSize
            );
        }
        if let Some(e) = e.downcast_ref::<RetrievalError>() {
            return matches!(
                e,
                RetrievalError::EmptyCatalog
                    | RetrievalError::EmptyIndex
                    | RetrievalError::EmptyText
                    | RetrievalError::InvalidK
                    | RetrievalError::ProviderMismatch { .. }
                    | RetrievalError::Storage { .. }
            );
        }
        if let Some(e) = e.downcast_ref::<LlmError>() {
            return matches!(e, LlmError::Config(_));
        }
        if let Some(e) = e.downcast_ref::<AgentError>() {
            return matches!(
                e,
                AgentError::Config(_)
                    | AgentError::Prompt(_)
                    | AgentError::Llm(LlmError::Config(_))
                    | AgentError::Retrieval(RetrievalError::EmptyText)
            );
        }
        false
    })
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("STATVIZ_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let overrides = Overrides {
        endpoint: cli.global.endpoint,
        data_dir: cli.global.data_dir,
        index_dir: cli.global.index_dir,
        output_dir: cli.global.output_dir,
        workers: match &cli.command {
            Command::Run(r) => r.workers,
            _ => None,
        },
    };
    let cfg = CliConfig::load(cli.global.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Fetch { refs, page_size } => commands::fetch(&cfg, &refs, page_size),
        Command::Index => commands::index(&cfg),
        Command::Retrieve { prompt, k, task_file } => match (prompt, task_file) {
            (Some(p), _) => commands::retrieve(&cfg, &p, k),
            (None, Some(f)) => commands::hit_rates(&cfg, &f),
            (None, None) => Err(UserError::new("give a prompt or --task-file").into()),
        },
        Command::Run(args) => commands::run(&cfg, args),
        Command::Grade { forms_dir, model_config } => commands::grade(&cfg, forms_dir, model_config.as_deref()),
        Command::Report { sheets, task_file, by_difficulty, format } => {
            commands::report(&cfg, sheets, task_file, by_difficulty, format)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.global.verbose);
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_user_error(&e) { 1 } else { 2 })
        }
    }
}
