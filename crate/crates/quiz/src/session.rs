use crate::config::QuizConfig;
use crate::QuizError;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use teegen_core::metrics::{Generator, Role, Verdict};
use teegen_core::rng::{salted_seed, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Familiarizing,
    Active,
    Complete,
}

/// One line of a session's append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        session_id: String,
        participant_id: String,
        role: Role,
        order: Vec<String>,
        tokens: Vec<String>,
        familiarization: Vec<String>,
        allow_revisit: bool,
        at: String,
    },
    Started {
        at: String,
    },
    Answered {
        index: usize,
        answer: Verdict,
        at: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub verdict: Verdict,
    pub at: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub participant_id: String,
    pub role: Role,
    /// Scored image ids in presentation order.
    pub order: Vec<String>,
    /// Opaque per-item handles, parallel to `order`.
    pub tokens: Vec<String>,
    pub familiarization: Vec<String>,
    pub allow_revisit: bool,
    pub answers: Vec<Option<Answer>>,
    pub state: SessionState,
    pub created_at: String,
}

/// Scored image ids for a participant: per-category samples and the final
/// order all come from the participant-salted shuffle seed.
pub fn sample_order(config: &QuizConfig, participant_id: &str) -> Vec<String> {
    let fam = config.familiarization_ids();
    let mut rng = stream_rng(salted_seed(config.shuffle_seed, participant_id), 0);
    let mut order = Vec::with_capacity(config.counts.total());
    for g in [Generator::None, Generator::Cut, Generator::Cyclegan] {
        let mut ids: Vec<&str> = config
            .pool
            .iter()
            .filter(|p| p.source == g && !fam.contains(&p.image_id))
            .map(|p| p.image_id.as_str())
            .collect();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        order.extend(ids.into_iter().take(config.counts.of(g)).map(str::to_string));
    }
    order.shuffle(&mut rng);
    order
}

/// What to do with a submitted answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Record,
    /// Same answer already stored; nothing to log.
    Unchanged,
}

impl Session {
    pub fn from_created(event: &Event) -> Result<Self, QuizError> {
        match event {
            Event::Created {
                session_id,
                participant_id,
                role,
                order,
                tokens,
                familiarization,
                allow_revisit,
                at,
            } => {
                if tokens.len() != order.len() {
                    return Err(QuizError::Log(format!("session {session_id}: token count mismatch")));
                }
                Ok(Self {
                    session_id: session_id.clone(),
                    participant_id: participant_id.clone(),
                    role: *role,
                    order: order.clone(),
                    tokens: tokens.clone(),
                    familiarization: familiarization.clone(),
                    allow_revisit: *allow_revisit,
                    answers: vec![None; order.len()],
                    state: SessionState::Familiarizing,
                    created_at: at.clone(),
                })
            }
            _ => Err(QuizError::Log("log does not start with a created event".into())),
        }
    }

    pub fn answered(&self) -> usize {
        self.answers.iter().filter(|a| a.is_some()).count()
    }

    pub fn index_of_token(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }

    pub fn check_answer(&self, index: usize, verdict: Verdict) -> Result<Decision, QuizError> {
        if index >= self.order.len() {
            return Err(QuizError::UnknownImage(index.to_string()));
        }
        let previous = self.answers[index].as_ref().map(|a| a.verdict);
        if previous == Some(verdict) {
            return Ok(Decision::Unchanged);
        }
        if self.state == SessionState::Complete {
            return Err(QuizError::SessionComplete);
        }
        if previous.is_some() && !self.allow_revisit {
            return Err(QuizError::RevisitDisallowed(index));
        }
        Ok(Decision::Record)
    }

    /// Applies a logged event. The first answer also ends familiarization.
    pub fn apply(&mut self, event: &Event) -> Result<(), QuizError> {
        match event {
            Event::Created { .. } => return Err(QuizError::Log("duplicate created event".into())),
            Event::Started { .. } => {
                if self.state == SessionState::Familiarizing {
                    self.state = SessionState::Active;
                }
            }
            Event::Answered { index, answer, at } => {
                if self.check_answer(*index, *answer)? == Decision::Record {
                    self.answers[*index] = Some(Answer {
                        verdict: *answer,
                        at: at.clone(),
                    });
                }
                self.state = if self.answered() == self.order.len() {
                    SessionState::Complete
                } else {
                    SessionState::Active
                };
            }
        }
        Ok(())
    }
}
