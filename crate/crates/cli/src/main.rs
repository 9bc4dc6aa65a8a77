//! `teegen`: one binary for the whole pipeline. Every command prints a JSON
//! summary on stdout and, when it has an output directory, also writes it to
//! `summary.json` there.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 partial
//! failure.

mod data;
mod error;
mod evaluate;
mod generate;
mod models;
mod quiz;
mod summary;

use clap::{Args, Parser, Subcommand};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;
use summary::Summary;

#[derive(Parser, Debug)]
#[command(name = "teegen", version, about = "Synthetic TEE pseudo-image generation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render pseudo-images and label masks for one or more views.
    Generate(generate::GenerateArgs),
    /// Fréchet distance between two feature CSV files.
    Score(evaluate::ScoreArgs),
    /// Built-in feature vectors for a directory of grayscale images.
    Features(evaluate::FeaturesArgs),
    /// Dice scores of prediction runs against ground-truth masks.
    EvalSeg(evaluate::EvalSegArgs),
    /// Dataset manifest operations.
    #[command(subcommand)]
    Data(data::DataCommand),
    /// Evaluate loss fixtures from a JSON file.
    LossesEval(evaluate::LossesArgs),
    /// Perception quiz service.
    #[command(subcommand)]
    Quiz(quiz::QuizCommand),
    /// Anatomical model population: phantoms and shape models.
    #[command(subcommand)]
    Models(models::ModelsCommand),
}

/// Flags shared by commands that draw random numbers.
#[derive(Args, Debug, Clone, Copy)]
pub struct SeedArgs {
    /// Master seed; identical invocations produce identical artifacts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn ensure_dir(dir: &std::path::Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn run(command: Command) -> Result<(Summary, Option<PathBuf>), CliError> {
    match command {
        Command::Generate(a) => generate::run(a),
        Command::Score(a) => evaluate::score(a),
        Command::Features(a) => evaluate::features(a),
        Command::EvalSeg(a) => evaluate::eval_seg(a),
        Command::Data(c) => data::run(c),
        Command::LossesEval(a) => evaluate::losses(a),
        Command::Quiz(c) => quiz::run(c),
        Command::Models(c) => models::run(c),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Generate(_) => "generate",
        Command::Score(_) => "score",
        Command::Features(_) => "features",
        Command::EvalSeg(_) => "eval-seg",
        Command::Data(_) => "data",
        Command::LossesEval(_) => "losses-eval",
        Command::Quiz(_) => "quiz",
        Command::Models(_) => "models",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            if code != 0 {
                println!("{}", Summary::error("usage", &CliError::Usage(e.kind().to_string())).to_json());
            }
            return ExitCode::from(code);
        }
    };
    let name = command_name(&cli.command);
    let (summary, out_dir) = match run(cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("teegen {name}: {e}");
            (Summary::error(name, &e), None)
        }
    };
    let text = summary.to_json();
    println!("{text}");
    if let Some(dir) = out_dir {
        if std::fs::create_dir_all(&dir).is_ok() {
            if let Err(e) = std::fs::write(dir.join("summary.json"), format!("{text}\n")) {
                eprintln!("teegen {name}: cannot write summary: {e}");
            }
        }
    }
    ExitCode::from(summary.exit_code)
}
