//! `opcnn` binary: train, evaluate, predict, gradient-check, benchmark,
//! and sweep the pooling size, all driven by a key=value config file.

use std::io::Read as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use opcnn_cli::commands;
use opcnn_cli::config::RunConfig;
use opcnn_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "opcnn", version, about = "Order-preserving CNN text classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint.json, history.csv, manifest.json.
    Train {
        /// Path to a key=value run configuration file.
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint on the configured corpus; writes metrics.csv.
    Eval {
        #[arg(short, long)]
        config: PathBuf,
        /// Checkpoint path; defaults to <out_dir>/checkpoint.json.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Classify one document per input line (file or stdin).
    Predict {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Input text file; stdin when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Verify analytic gradients against finite differences.
    Gradcheck {
        /// Model initialization seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Corrupt the analytic kernel gradients to exercise failure.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Compare OPCNN against tf-idf+SVM, bigram+SVM and a max-pool CNN.
    Bench {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Cross-validated sweep over pooling sizes k.
    Ksweep {
        #[arg(short, long)]
        config: PathBuf,
    },
}

fn default_checkpoint(cfg: &RunConfig, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| PathBuf::from(&cfg.out_dir).join("checkpoint.json"))
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Train { config } => commands::cmd_train(&RunConfig::from_file(config)?),
        Command::Eval { config, checkpoint } => {
            let cfg = RunConfig::from_file(config)?;
            let ckpt = default_checkpoint(&cfg, checkpoint);
            commands::cmd_eval(&cfg, &ckpt)
        }
        Command::Predict {
            config,
            checkpoint,
            input,
        } => {
            let cfg = RunConfig::from_file(config)?;
            let ckpt = default_checkpoint(&cfg, checkpoint);
            let text = match input {
                Some(path) => std::fs::read_to_string(&path).map_err(|e| {
                    CliError::Data(format!("cannot read {}: {e}", path.display()))
                })?,
                None => {
                    let mut buf = String::new();
                    std::io::stdin()
                        .read_to_string(&mut buf)
                        .map_err(|e| CliError::Data(format!("cannot read stdin: {e}")))?;
                    buf
                }
            };
            commands::cmd_predict(&cfg, &ckpt, &text)
        }
        Command::Gradcheck { seed, inject_fault } => commands::cmd_gradcheck(seed, inject_fault),
        Command::Bench { config } => commands::cmd_bench(&RunConfig::from_file(config)?),
        Command::Ksweep { config } => commands::cmd_ksweep(&RunConfig::from_file(config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
