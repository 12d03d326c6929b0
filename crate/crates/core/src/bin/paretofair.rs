use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paretofair::cli::{self, load_scenario};
use paretofair::Result;

/// Group-fair classifiers without unnecessary harm.
#[derive(Parser)]
#[command(name = "paretofair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset CSV from a scenario.
    Synth {
        /// Scenario file (default: built-in asymmetric scenario).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact Pareto front and reference points of a scenario.
    Oracle {
        /// Scenario file (default: built-in asymmetric scenario).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1001)]
        num_lambda: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one method and score it on the test split.
    Train {
        /// Experiment config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// naive, rebalanced or paretofair.
        #[arg(long)]
        method: Option<String>,
    },
    /// Equalize group accuracies of a trained model by randomized mixing.
    Postproc {
        /// Model checkpoint.
        #[arg(long)]
        model: PathBuf,
        /// Dataset CSV to fit and apply the rule on.
        #[arg(long)]
        data: PathBuf,
        /// Apply this rule CSV instead of fitting one.
        #[arg(long)]
        rule: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Method label for the metrics rows.
        #[arg(long, default_value = "model")]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine metrics CSVs into one table.
    Report {
        inputs: Vec<PathBuf>,
        /// Directory for report.csv and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { config, seed, n, out } => {
            let ds = cli::cmd_synth(&load_scenario(config.as_deref())?, n, seed, &out)?;
            println!("wrote {} samples to {}", ds.len(), out.display());
        }
        Command::Oracle { config, num_lambda, out } => {
            let refs = cli::cmd_oracle(&load_scenario(config.as_deref())?, num_lambda, &out)?;
            for (name, r) in refs.named() {
                println!("{name:<17} risks {:?} gap {:.4}", r.risks, r.max_gap());
            }
        }
        Command::Train { config, seed, out, method } => {
            let cfg = cli::experiment_config(config.as_deref(), seed, out.as_deref(), method.as_deref())?;
            let res = cli::cmd_train(&cfg)?;
            if let Some(stop) = res.stop {
                println!("stopped after {} outer iterations ({stop:?})", res.trace.len());
            }
            print!("{}", paretofair::report::text_table(std::slice::from_ref(&res.metrics))?);
        }
        Command::Postproc { model, data, rule, seed, method, out } => {
            let res = cli::cmd_postproc(&model, &data, seed, &method, rule.as_deref(), &out)?;
            print!("{}", paretofair::report::text_table(&[res.before, res.after])?);
        }
        Command::Report { inputs, out } => {
            print!("{}", cli::cmd_report(&inputs, out.as_deref())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(parsed.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
