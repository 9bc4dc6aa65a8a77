use crate::error::CliError;
use crate::summary::Summary;
use clap::{Args, Subcommand};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use teegen_quiz::{export_results, QuizConfig, QuizError, QuizService};

#[derive(Subcommand, Debug)]
pub enum QuizCommand {
    /// Serve the quiz HTTP API.
    Serve(ServeArgs),
    /// Write responses and analytics for all completed sessions.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Quiz config JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory holding the session logs.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn quiz_err(e: QuizError) -> CliError {
    match e {
        QuizError::Config(_) | QuizError::InsufficientPool { .. } => CliError::Config(e.to_string()),
        e => CliError::Data(e.to_string()),
    }
}

pub fn run(cmd: QuizCommand) -> Result<(Summary, Option<PathBuf>), CliError> {
    match cmd {
        QuizCommand::Serve(a) => {
            let cfg = QuizConfig::load(&a.config).map_err(quiz_err)?;
            let service = Arc::new(QuizService::open(cfg, Some(a.data)).map_err(quiz_err)?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
            eprintln!("teegen quiz: listening on http://{}", a.addr);
            rt.block_on(teegen_quiz::http::serve(a.addr, service))
                .map_err(|e| CliError::Data(format!("{}: {e}", a.addr)))?;
            Ok((Summary::ok("quiz serve", serde_json::json!({ "addr": a.addr.to_string() })), None))
        }
        QuizCommand::Export(a) => {
            let cfg = QuizConfig::load(&a.config).map_err(quiz_err)?;
            let service = QuizService::open(cfg, Some(a.data)).map_err(quiz_err)?;
            let (n, responses) = service.completed_responses();
            std::fs::create_dir_all(&a.out).map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))?;
            let report = export_results(&a.out, &responses, n).map_err(quiz_err)?;
            let files = vec!["responses.json".into(), "responses.csv".into(), "analytics.json".into()];
            Ok((Summary::ok("quiz export", report).files(files), Some(a.out)))
        }
    }
}
