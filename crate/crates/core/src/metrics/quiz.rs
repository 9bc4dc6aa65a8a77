//! Real-vs-synthetic perception quiz analytics. The positive class for
//! precision, recall and F1 is "real".

use super::MetricsError;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    None,
    Cut,
    Cyclegan,
}

impl Generator {
    pub fn truth(self) -> Verdict {
        match self {
            Generator::None => Verdict::Real,
            _ => Verdict::Synthetic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Expert,
    Researcher,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Expert => "expert",
            Role::Researcher => "researcher",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizResponse {
    pub participant_id: String,
    pub participant_role: Role,
    pub image_id: String,
    pub truth: Verdict,
    pub source_generator: Generator,
    pub answer: Verdict,
    /// RFC 3339.
    pub timestamp: String,
}

impl QuizResponse {
    pub fn is_consistent(&self) -> bool {
        self.truth == self.source_generator.truth()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSummary {
    pub r_as_r: u64,
    pub r_as_s: u64,
    pub s_as_r: u64,
    pub s_as_s: u64,
    /// Percent.
    pub accuracy: f64,
    /// Percent; real is the positive class.
    pub f1: f64,
}

impl ConfusionSummary {
    pub fn from_counts(r_as_r: u64, r_as_s: u64, s_as_r: u64, s_as_s: u64) -> Self {
        let total = r_as_r + r_as_s + s_as_r + s_as_s;
        let accuracy = if total == 0 {
            0.0
        } else {
            100.0 * (r_as_r + s_as_s) as f64 / total as f64
        };
        // 2PR/(P+R) simplifies to 2TP/(2TP+FP+FN).
        let denom = 2 * r_as_r + s_as_r + r_as_s;
        let f1 = if denom == 0 {
            0.0
        } else {
            100.0 * (2 * r_as_r) as f64 / denom as f64
        };
        Self {
            r_as_r,
            r_as_s,
            s_as_r,
            s_as_s,
            accuracy,
            f1,
        }
    }

    pub fn total(&self) -> u64 {
        self.r_as_r + self.r_as_s + self.s_as_r + self.s_as_s
    }

    pub fn precision(&self) -> f64 {
        let d = self.r_as_r + self.s_as_r;
        if d == 0 { 0.0 } else { self.r_as_r as f64 / d as f64 }
    }

    pub fn recall(&self) -> f64 {
        let d = self.r_as_r + self.r_as_s;
        if d == 0 { 0.0 } else { self.r_as_r as f64 / d as f64 }
    }

    pub fn of(responses: &[&QuizResponse]) -> Self {
        let mut c = [0u64; 4];
        for r in responses {
            let i = match (r.truth, r.answer) {
                (Verdict::Real, Verdict::Real) => 0,
                (Verdict::Real, Verdict::Synthetic) => 1,
                (Verdict::Synthetic, Verdict::Real) => 2,
                (Verdict::Synthetic, Verdict::Synthetic) => 3,
            };
            c[i] += 1;
        }
        Self::from_counts(c[0], c[1], c[2], c[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Participant,
    Role,
}

/// Per-group confusion summaries. Role groups report each count as the
/// per-participant mean rounded to the nearest integer, with accuracy and
/// F1 recomputed from those rounded counts.
pub fn quiz_analytics(responses: &[QuizResponse], group_by: GroupBy) -> Result<BTreeMap<String, ConfusionSummary>, MetricsError> {
    if responses.is_empty() {
        return Err(MetricsError::NoResponses("quiz analytics".into()));
    }
    let per_participant = by_participant(responses);
    Ok(match group_by {
        GroupBy::Participant => per_participant
            .iter()
            .map(|(id, (_, rs))| (id.clone(), ConfusionSummary::of(rs)))
            .collect(),
        GroupBy::Role => {
            let mut roles: BTreeMap<Role, Vec<ConfusionSummary>> = BTreeMap::new();
            for (role, rs) in per_participant.values() {
                roles.entry(*role).or_default().push(ConfusionSummary::of(rs));
            }
            roles
                .into_iter()
                .map(|(role, sums)| (role.as_str().to_string(), mean_counts(&sums)))
                .collect()
        }
    })
}

fn by_participant(responses: &[QuizResponse]) -> BTreeMap<String, (Role, Vec<&QuizResponse>)> {
    let mut out: BTreeMap<String, (Role, Vec<&QuizResponse>)> = BTreeMap::new();
    for r in responses {
        out.entry(r.participant_id.clone())
            .or_insert_with(|| (r.participant_role, Vec::new()))
            .1
            .push(r);
    }
    out
}

/// Rounded per-participant mean of each confusion count.
pub fn mean_counts(summaries: &[ConfusionSummary]) -> ConfusionSummary {
    let n = summaries.len().max(1) as f64;
    let avg = |f: fn(&ConfusionSummary) -> u64| (summaries.iter().map(|s| f(s) as f64).sum::<f64>() / n).round() as u64;
    ConfusionSummary::from_counts(avg(|s| s.r_as_r), avg(|s| s.r_as_s), avg(|s| s.s_as_r), avg(|s| s.s_as_s))
}

/// Cohort row: rounded mean counts plus the unrounded mean accuracy of the
/// individual participants and its normal-approximation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub role: Role,
    pub participants: usize,
    pub counts: ConfusionSummary,
    pub mean_accuracy: f64,
    pub confidence_interval: Option<(f64, f64)>,
}

pub fn cohort_summaries(responses: &[QuizResponse], level: f64) -> Result<Vec<CohortSummary>, MetricsError> {
    if responses.is_empty() {
        return Err(MetricsError::NoResponses("cohort summary".into()));
    }
    let mut roles: BTreeMap<Role, Vec<ConfusionSummary>> = BTreeMap::new();
    for (role, rs) in by_participant(responses).values() {
        roles.entry(*role).or_default().push(ConfusionSummary::of(rs));
    }
    roles
        .into_iter()
        .map(|(role, sums)| {
            let accs: Vec<f64> = sums.iter().map(|s| s.accuracy).collect();
            let ci = if accs.len() >= 2 {
                Some(cohort_confidence_interval(&accs, level)?)
            } else {
                None
            };
            Ok(CohortSummary {
                role,
                participants: sums.len(),
                counts: mean_counts(&sums),
                mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
                confidence_interval: ci,
            })
        })
        .collect()
}

/// Percent of `generator`'s images called synthetic, pooled over the
/// participants of `role` (all roles when `None`).
pub fn generator_accuracy(responses: &[QuizResponse], generator: Generator, role: Option<Role>) -> Result<f64, MetricsError> {
    let matching: Vec<&QuizResponse> = responses
        .iter()
        .filter(|r| r.source_generator == generator && role.is_none_or(|x| x == r.participant_role))
        .collect();
    if matching.is_empty() {
        return Err(MetricsError::NoResponses(format!("generator {generator:?}")));
    }
    let hits = matching.iter().filter(|r| r.answer == Verdict::Synthetic).count();
    Ok(100.0 * hits as f64 / matching.len() as f64)
}

/// `mean ± z·s/√n` with the two-sided normal quantile for `level`.
pub fn cohort_confidence_interval(accuracies: &[f64], level: f64) -> Result<(f64, f64), MetricsError> {
    if accuracies.len() < 2 {
        return Err(MetricsError::TooFewSamples(accuracies.len()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::InvalidLevel(level));
    }
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let s = (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let half = z * s / n.sqrt();
    Ok((mean - half, mean + half))
}
