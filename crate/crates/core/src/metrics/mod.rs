//! Evaluation metrics: feature statistics and Fréchet distance, the
//! built-in image descriptor, segmentation Dice/delta tables and quiz
//! analytics.

mod features;
mod frechet;
mod quiz;
mod seg;
mod stats;

pub use features::{builtin_features, image_features, ANGULAR_BINS, FEATURE_DIM, GLCM_LEVELS, HIST_BINS, RADIAL_BINS};
pub use frechet::{frechet_distance, sqrt_psd};
pub use quiz::{
    cohort_confidence_interval, cohort_summaries, generator_accuracy, mean_counts, quiz_analytics, CohortSummary,
    ConfusionSummary, Generator, GroupBy, QuizResponse, Role, Verdict,
};
pub use seg::{delta_metric, dice, dice_label, mean_dice, round1, DiceRow, DiceTable};
pub use stats::{accumulate_stats, read_feature_csv, write_feature_csv, FeatureStats, StatsAccumulator};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("no pixels inside the cone")]
    EmptyCone,
    #[error("shape mismatch: {left} vs {right} elements")]
    ShapeMismatch { left: usize, right: usize },
    #[error("no responses for {0}")]
    NoResponses(String),
    #[error("confidence level {0} must lie in (0, 1)")]
    InvalidLevel(f64),
    #[error("{0}")]
    Input(String),
}
