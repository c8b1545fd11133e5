use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use incontext_ad::error::Error;

mod commands;
mod table;

/// Exit codes.
const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Environment variable overriding the worker thread count.
const THREADS_ENV: &str = "INCONTEXT_AD_THREADS";

#[derive(Parser, Debug)]
#[command(name = "incontext-ad", version, about = "In-context anomaly detection for tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic tasks into a shard directory.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n_tasks: u64,
        /// Index of the first task in the generator stream.
        #[arg(long, default_value_t = 0)]
        start_index: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the model on synthetic tasks.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Stop after this many optimizer steps in total.
        #[arg(long)]
        steps: Option<u64>,
        /// Continue from `<out>/checkpoint`.
        #[arg(long)]
        resume: bool,
        /// Train on pre-generated shards (cycled) instead of fresh tasks.
        #[arg(long = "shards")]
        shards: Vec<PathBuf>,
    },
    /// Fit a detector on a training CSV and score a test CSV.
    FitScore {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        train: PathBuf,
        /// `none`, `one-class` or `column:<name>`.
        #[arg(long, default_value = "none")]
        labels: String,
        #[arg(long)]
        test: PathBuf,
        /// Output scores CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional config supplying the `[ensemble]` section.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the benchmark registry of a config.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `eval.checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score the moons and circles dev sets in the one-class setting.
    DevDemo {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Failure of a command, with its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Lib(Error),
    /// Completed, but a configured threshold was missed.
    Threshold(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Failure::Usage(format!("{THREADS_ENV} must be a positive integer")))?;
    if n == 0 {
        return Err(Failure::Usage(format!("{THREADS_ENV} must be a positive integer")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Generate { config, n_tasks, start_index, out } => {
            commands::generate(config.as_deref(), n_tasks, start_index, &out)
        }
        Command::Train { config, out, steps, resume, shards } => {
            commands::train(config.as_deref(), &out, steps, resume, &shards)
        }
        Command::FitScore { checkpoint, train, labels, test, out, config } => {
            commands::fit_score(&checkpoint, &train, &labels, &test, &out, config.as_deref())
        }
        Command::Eval { config, out, checkpoint } => commands::eval(&config, &out, checkpoint.as_deref()),
        Command::DevDemo { checkpoint, out, n, seed } => commands::dev_demo(&checkpoint, &out, n, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Threshold(msg)) => {
            eprintln!("threshold violated: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}

