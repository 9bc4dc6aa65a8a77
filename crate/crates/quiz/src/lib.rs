//! Perception quiz: participants label images as real or synthetic without
//! ever seeing where an image came from. Sessions persist as append-only
//! JSON-lines logs and are rebuilt on startup.

pub mod config;
pub mod http;
pub mod service;
pub mod session;

pub use config::{PoolImage, QuizConfig, QuizCounts};
pub use service::{analytics_report, export_results, AnalyticsReport, ItemKey, QuizService, SessionResults, SessionView};
pub use session::SessionState;

use teegen_core::metrics::Generator;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuizError {
    #[error("config: {0}")]
    Config(String),
    #[error("pool has {available} {generator:?} images, {requested} requested")]
    InsufficientPool {
        generator: Generator,
        requested: usize,
        available: usize,
    },
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown image `{0}`")]
    UnknownImage(String),
    #[error("image unavailable")]
    ImageUnavailable,
    #[error("session already complete")]
    SessionComplete,
    #[error("image {0} already answered and revisiting is disabled")]
    RevisitDisallowed(usize),
    #[error("session not complete")]
    NotComplete,
    #[error("none completed: no quiz session has been completed")]
    NoneCompleted,
    #[error("io: {0}")]
    Io(String),
    #[error("session log: {0}")]
    Log(String),
    #[error("metrics: {0}")]
    Metrics(String),
}
