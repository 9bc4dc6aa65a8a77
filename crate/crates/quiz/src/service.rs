use crate::config::{PoolImage, QuizConfig};
use crate::session::{sample_order, Decision, Event, Session, SessionState};
use crate::QuizError;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use teegen_core::imageio::{encode_gray_png, read_gray};
use teegen_core::metrics::{
    cohort_summaries, generator_accuracy, quiz_analytics, CohortSummary, ConfusionSummary, Generator, GroupBy,
    QuizResponse, Role, Verdict,
};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Participant-facing session state. Carries no truth or source labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub participant_id: String,
    pub state: SessionState,
    pub total: usize,
    pub answered: usize,
    pub allow_revisit: bool,
    pub familiarization_count: usize,
    pub items: Vec<ItemView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    pub index: usize,
    pub token: String,
    pub answer: Option<Verdict>,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        Self {
            session_id: s.session_id.clone(),
            participant_id: s.participant_id.clone(),
            state: s.state,
            total: s.order.len(),
            answered: s.answered(),
            allow_revisit: s.allow_revisit,
            familiarization_count: s.familiarization.len(),
            items: s
                .tokens
                .iter()
                .zip(&s.answers)
                .enumerate()
                .map(|(index, (token, a))| ItemView {
                    index,
                    token: token.clone(),
                    answer: a.as_ref().map(|a| a.verdict),
                })
                .collect(),
        }
    }
}

/// Unblinded record of a completed session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResults {
    pub session_id: String,
    pub participant_id: String,
    pub role: Role,
    pub summary: ConfusionSummary,
    pub responses: Vec<QuizResponse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorAccuracy {
    pub generator: Generator,
    pub role: Option<Role>,
    pub accuracy: f64,
    pub responses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub completed_sessions: usize,
    pub responses: usize,
    pub by_participant: BTreeMap<String, ConfusionSummary>,
    pub by_role: BTreeMap<String, ConfusionSummary>,
    pub cohorts: Vec<CohortSummary>,
    pub generator_accuracy: Vec<GeneratorAccuracy>,
}

/// Confusion summaries per participant and role plus synthetic-only
/// accuracy per generator, overall and per role.
pub fn analytics_report(responses: &[QuizResponse], completed_sessions: usize) -> Result<AnalyticsReport, QuizError> {
    if responses.is_empty() {
        return Err(QuizError::NoneCompleted);
    }
    let metrics = |e: teegen_core::metrics::MetricsError| QuizError::Metrics(e.to_string());
    let mut gen = Vec::new();
    for g in [Generator::Cut, Generator::Cyclegan] {
        for role in [None, Some(Role::Expert), Some(Role::Researcher)] {
            let n = responses
                .iter()
                .filter(|r| r.source_generator == g && role.is_none_or(|x| x == r.participant_role))
                .count();
            if n > 0 {
                gen.push(GeneratorAccuracy {
                    generator: g,
                    role,
                    accuracy: generator_accuracy(responses, g, role).map_err(metrics)?,
                    responses: n,
                });
            }
        }
    }
    Ok(AnalyticsReport {
        completed_sessions,
        responses: responses.len(),
        by_participant: quiz_analytics(responses, GroupBy::Participant).map_err(metrics)?,
        by_role: quiz_analytics(responses, GroupBy::Role).map_err(metrics)?,
        cohorts: cohort_summaries(responses, 0.95).map_err(metrics)?,
        generator_accuracy: gen,
    })
}

/// Addresses a scored item by position or by its opaque token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ItemKey {
    Index(usize),
    Token(String),
}

impl ItemKey {
    pub fn parse(s: &str) -> Self {
        s.parse().map(ItemKey::Index).unwrap_or_else(|_| ItemKey::Token(s.to_string()))
    }
}

pub struct QuizService {
    config: QuizConfig,
    images: HashMap<String, PoolImage>,
    data_dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
}

impl QuizService {
    /// Opens the service, replaying every session log under
    /// `<data_dir>/sessions`. Without a data directory nothing persists.
    pub fn open(config: QuizConfig, data_dir: Option<PathBuf>) -> Result<Self, QuizError> {
        config.validate()?;
        let images = config.pool.iter().map(|p| (p.image_id.clone(), p.clone())).collect();
        let svc = Self {
            config,
            images,
            data_dir,
            sessions: RwLock::new(BTreeMap::new()),
        };
        if let Some(dir) = svc.session_dir() {
            fs::create_dir_all(&dir).map_err(|e| QuizError::Io(format!("{}: {e}", dir.display())))?;
            let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| QuizError::Io(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            paths.sort();
            let mut map = svc.sessions.write().expect("session map lock");
            for p in paths {
                let s = replay_log(&p)?;
                if let Some(id) = s.order.iter().chain(&s.familiarization).find(|id| !svc.images.contains_key(*id)) {
                    return Err(QuizError::Config(format!(
                        "session {} references image `{id}` missing from the pool",
                        s.session_id
                    )));
                }
                map.insert(s.session_id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(svc)
    }

    pub fn config(&self) -> &QuizConfig {
        &self.config
    }

    fn session_dir(&self) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join("sessions"))
    }

    fn append(&self, session_id: &str, event: &Event) -> Result<(), QuizError> {
        let Some(dir) = self.session_dir() else {
            return Ok(());
        };
        let path = dir.join(format!("{session_id}.jsonl"));
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| QuizError::Io(format!("{}: {e}", path.display())))?;
        f.write_all(line.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(|e| QuizError::Io(format!("{}: {e}", path.display())))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, QuizError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| QuizError::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self, participant_id: &str, role: Role) -> Result<SessionView, QuizError> {
        let participant_id = participant_id.trim();
        if participant_id.is_empty() {
            return Err(QuizError::BadRequest("participant_id must not be empty".into()));
        }
        let order = sample_order(&self.config, participant_id);
        let event = Event::Created {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            participant_id: participant_id.to_string(),
            role,
            tokens: order.iter().map(|_| uuid::Uuid::new_v4().simple().to_string()).collect(),
            order,
            familiarization: self.config.familiarization_ids(),
            allow_revisit: self.config.allow_revisit,
            at: now(),
        };
        let session = Session::from_created(&event)?;
        self.append(&session.session_id, &event)?;
        let view = SessionView::from(&session);
        self.sessions
            .write()
            .expect("session map lock")
            .insert(session.session_id.clone(), Arc::new(Mutex::new(session)));
        Ok(view)
    }

    pub fn view(&self, id: &str) -> Result<SessionView, QuizError> {
        let s = self.session(id)?;
        let s = s.lock().expect("session lock");
        Ok(SessionView::from(&*s))
    }

    /// Ends familiarization. Idempotent.
    pub fn start(&self, id: &str) -> Result<SessionView, QuizError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session lock");
        if s.state == SessionState::Familiarizing {
            let event = Event::Started { at: now() };
            self.append(id, &event)?;
            s.apply(&event)?;
        }
        Ok(SessionView::from(&*s))
    }

    pub fn respond(&self, id: &str, key: &ItemKey, answer: Verdict) -> Result<SessionView, QuizError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session lock");
        let index = match key {
            ItemKey::Index(i) => *i,
            ItemKey::Token(t) => s.index_of_token(t).ok_or_else(|| QuizError::UnknownImage(t.clone()))?,
        };
        if s.check_answer(index, answer)? == Decision::Record {
            let event = Event::Answered { index, answer, at: now() };
            self.append(id, &event)?;
            s.apply(&event)?;
        }
        Ok(SessionView::from(&*s))
    }

    fn png_for(&self, image_id: &str) -> Result<Vec<u8>, QuizError> {
        let img = self.images.get(image_id).ok_or(QuizError::ImageUnavailable)?;
        let bytes = fs::read(&img.path).map_err(|e| {
            eprintln!("quiz: cannot read {}: {e}", img.path.display());
            QuizError::ImageUnavailable
        })?;
        if bytes.starts_with(PNG_MAGIC) {
            return Ok(bytes);
        }
        let g = read_gray(&img.path).map_err(|e| {
            eprintln!("quiz: cannot decode {e}");
            QuizError::ImageUnavailable
        })?;
        Ok(encode_gray_png(g.width, g.height, &g.data, false))
    }

    pub fn image(&self, id: &str, key: &ItemKey) -> Result<Vec<u8>, QuizError> {
        let s = self.session(id)?;
        let image_id = {
            let s = s.lock().expect("session lock");
            let index = match key {
                ItemKey::Index(i) if *i < s.order.len() => *i,
                ItemKey::Index(i) => return Err(QuizError::UnknownImage(i.to_string())),
                ItemKey::Token(t) => s.index_of_token(t).ok_or_else(|| QuizError::UnknownImage(t.clone()))?,
            };
            s.order[index].clone()
        };
        self.png_for(&image_id)
    }

    pub fn familiarization_image(&self, id: &str, n: usize) -> Result<Vec<u8>, QuizError> {
        let s = self.session(id)?;
        let image_id = {
            let s = s.lock().expect("session lock");
            s.familiarization.get(n).cloned().ok_or_else(|| QuizError::UnknownImage(n.to_string()))?
        };
        self.png_for(&image_id)
    }

    fn responses_of(&self, s: &Session) -> Vec<QuizResponse> {
        s.order
            .iter()
            .zip(&s.answers)
            .filter_map(|(id, a)| {
                let a = a.as_ref()?;
                let source = self.images.get(id).map(|p| p.source).unwrap_or(Generator::None);
                Some(QuizResponse {
                    participant_id: s.participant_id.clone(),
                    participant_role: s.role,
                    image_id: id.clone(),
                    truth: source.truth(),
                    source_generator: source,
                    answer: a.verdict,
                    timestamp: a.at.clone(),
                })
            })
            .collect()
    }

    pub fn results(&self, id: &str) -> Result<SessionResults, QuizError> {
        let s = self.session(id)?;
        let s = s.lock().expect("session lock");
        if s.state != SessionState::Complete {
            return Err(QuizError::NotComplete);
        }
        let responses = self.responses_of(&s);
        Ok(SessionResults {
            session_id: s.session_id.clone(),
            participant_id: s.participant_id.clone(),
            role: s.role,
            summary: ConfusionSummary::of(&responses.iter().collect::<Vec<_>>()),
            responses,
        })
    }

    /// Responses of every completed session, ordered by session id.
    pub fn completed_responses(&self) -> (usize, Vec<QuizResponse>) {
        let sessions: Vec<_> = self.sessions.read().expect("session map lock").values().cloned().collect();
        let mut n = 0;
        let mut out = Vec::new();
        for s in sessions {
            let s = s.lock().expect("session lock");
            if s.state == SessionState::Complete {
                n += 1;
                out.extend(self.responses_of(&s));
            }
        }
        (n, out)
    }

    pub fn analytics(&self) -> Result<AnalyticsReport, QuizError> {
        let (n, responses) = self.completed_responses();
        analytics_report(&responses, n)
    }
}

/// Rebuilds a session from its log. A torn final line (no trailing
/// newline) is ignored; any other malformed line is an error.
pub fn replay_log(path: &Path) -> Result<Session, QuizError> {
    let text = fs::read_to_string(path).map_err(|e| QuizError::Io(format!("{}: {e}", path.display())))?;
    let complete_lines = if text.ends_with('\n') { usize::MAX } else { text.lines().count() - 1 };
    let mut session: Option<Session> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = match serde_json::from_str(line) {
            Ok(e) => e,
            Err(_) if i >= complete_lines => break,
            Err(e) => return Err(QuizError::Log(format!("{} line {}: {e}", path.display(), i + 1))),
        };
        match &mut session {
            None => session = Some(Session::from_created(&event)?),
            Some(s) => s.apply(&event)?,
        }
    }
    session.ok_or_else(|| QuizError::Log(format!("{}: empty log", path.display())))
}

/// Writes `responses.json`, `responses.csv` and `analytics.json` into `dir`.
pub fn export_results(dir: &Path, responses: &[QuizResponse], completed_sessions: usize) -> Result<AnalyticsReport, QuizError> {
    let report = analytics_report(responses, completed_sessions)?;
    let io = |e: std::io::Error| QuizError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join("responses.json"), serde_json::to_string_pretty(responses).expect("serializable")).map_err(io)?;
    let mut w = csv::Writer::from_path(dir.join("responses.csv")).map_err(|e| QuizError::Io(e.to_string()))?;
    for r in responses {
        w.serialize(r).map_err(|e| QuizError::Io(e.to_string()))?;
    }
    w.flush().map_err(io)?;
    fs::write(dir.join("analytics.json"), serde_json::to_string_pretty(&report).expect("serializable")).map_err(io)?;
    Ok(report)
}
