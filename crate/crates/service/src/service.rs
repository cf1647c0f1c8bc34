use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use transition_core::engine::{
    Action, ActionDetail, ActionError, ActionOutcome, ActionRecord, Game, GameStatus, ReplayError, ShockChoice,
    ShockKind, StateView,
};
use transition_core::metrics::{rank, MetricKey, MetricsError, RankedCard, ScoreCard};
use transition_core::params::PolicyId;
use transition_core::{Model, ObjectiveFrame};
use uuid::Uuid;

use crate::store::{EventStore, LeaderboardEntry, SessionHeader, StoreError};

/// Words that may not appear in leaderboard names.
const DENY_LIST: &[&str] = &[
    "arse", "asshole", "bastard", "bitch", "bollocks", "cock", "cunt", "dick", "fick", "fuck", "merde", "nazi",
    "nigger", "piss", "putain", "scheiss", "shit", "slut", "twat", "wank", "whore", "wichser",
];

pub const MAX_NAME_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(Uuid),
    #[error("sequence conflict: expected {expected}, got {got}")]
    Conflict { expected: u64, got: u64 },
    #[error(transparent)]
    Rejected(ActionError),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("session {0} is not completed")]
    NotCompleted(Uuid),
    #[error("session {0} already has a leaderboard entry")]
    AlreadyListed(Uuid),
    #[error("display name rejected")]
    NameRejected,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("storage unavailable: {0}")]
    Storage(#[from] StoreError),
    #[error("stored log of session {session} does not replay: {source}")]
    Replay {
        session: Uuid,
        #[source]
        source: ReplayError,
    },
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::Conflict { .. } => "sequence_conflict",
            ServiceError::Rejected(e) => e.code(),
            ServiceError::Invalid(_) => "invalid_request",
            ServiceError::NotCompleted(_) => "not_completed",
            ServiceError::AlreadyListed(_) => "already_listed",
            ServiceError::NameRejected => "name_rejected",
            ServiceError::Metrics(MetricsError::UnknownMetric(_)) => "invalid_parameter",
            ServiceError::Metrics(_) => "metrics_error",
            ServiceError::Storage(_) => "storage_unavailable",
            ServiceError::Replay { .. } => "replay_failed",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSession {
    pub survey_token: Option<String>,
    pub objective_frame: Option<ObjectiveFrame>,
    pub language: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PostAction {
    /// Expected sequence number of this action; omitted to append.
    pub seq: Option<u64>,
    pub action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SessionStatus {
    Active,
    Completed,
    Abandoned,
}

impl From<GameStatus> for SessionStatus {
    fn from(s: GameStatus) -> Self {
        match s {
            GameStatus::Playing => SessionStatus::Active,
            GameStatus::Completed => SessionStatus::Completed,
            GameStatus::Abandoned => SessionStatus::Abandoned,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub session_id: Uuid,
    pub survey_token: Option<String>,
    pub objective_frame: ObjectiveFrame,
    pub language: Option<String>,
    pub created_at: DateTime<Utc>,
    pub status: SessionStatus,
    /// Sequence number the next action will get.
    pub next_seq: u64,
    pub state: StateView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionResponse {
    pub record: ActionRecord,
    pub session: SessionView,
}

#[derive(Debug, Clone, Default)]
pub struct ExportFilter {
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
    pub tokens: Option<BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShockTiming {
    pub turn: u8,
    pub kind: ShockKind,
    pub options: Vec<ShockChoice>,
    pub choice: Option<ShockChoice>,
    pub chosen_at_seq: Option<u64>,
    pub withstood: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyTiming {
    pub seq: u64,
    pub turn: u8,
    pub policy: PolicyId,
    pub probability: f64,
    pub roll: f64,
    pub enacted: bool,
}

/// One line of the research export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExportRecord {
    pub session_id: Uuid,
    pub survey_token: Option<String>,
    pub seed: u64,
    pub objective_frame: ObjectiveFrame,
    pub language: Option<String>,
    pub created_at: DateTime<Utc>,
    pub status: SessionStatus,
    pub actions: Vec<ActionRecord>,
    pub score_card: ScoreCard,
    pub shocks: Vec<ShockTiming>,
    pub policies: Vec<PolicyTiming>,
}

struct Session {
    header: SessionHeader,
    game: Game,
}

impl Session {
    fn view(&self) -> SessionView {
        SessionView {
            session_id: self.header.session_id,
            survey_token: self.header.survey_token.clone(),
            objective_frame: self.header.objective_frame,
            language: self.header.language.clone(),
            created_at: self.header.created_at,
            status: self.game.state().status.into(),
            next_seq: self.game.log().len() as u64,
            state: self.game.view(),
        }
    }

    fn export(&self) -> ExportRecord {
        let state = self.game.state();
        let log = self.game.log();
        let mut shocks: Vec<ShockTiming> = state
            .shock_log
            .iter()
            .chain(state.active_shock.iter())
            .map(|s| ShockTiming {
                turn: s.turn,
                kind: s.kind,
                options: s.kind.choices().to_vec(),
                choice: s.choice,
                chosen_at_seq: None,
                withstood: s.withstood,
            })
            .collect();
        for r in log {
            if let ActionOutcome::Accepted {
                detail: ActionDetail::ShockAnswered { shock, .. },
                ..
            } = &r.outcome
            {
                if let Some(t) = shocks.iter_mut().find(|t| t.turn == r.turn && t.kind == *shock) {
                    t.chosen_at_seq = Some(r.seq);
                }
            }
        }
        let policies = log
            .iter()
            .filter_map(|r| match &r.outcome {
                ActionOutcome::Accepted {
                    detail:
                        ActionDetail::PolicyVote {
                            policy,
                            probability,
                            roll,
                            enacted,
                        },
                    ..
                } => Some(PolicyTiming {
                    seq: r.seq,
                    turn: r.turn,
                    policy: *policy,
                    probability: *probability,
                    roll: *roll,
                    enacted: *enacted,
                }),
                _ => None,
            })
            .collect();
        ExportRecord {
            session_id: self.header.session_id,
            survey_token: self.header.survey_token.clone(),
            seed: self.header.seed,
            objective_frame: self.header.objective_frame,
            language: self.header.language.clone(),
            created_at: self.header.created_at,
            status: state.status.into(),
            actions: log.to_vec(),
            score_card: self.game.score(),
            shocks,
            policies,
        }
    }
}

/// Sessions, leaderboard and research export over a pluggable event store.
///
/// Each session sits behind its own mutex, so actions on one session are
/// applied strictly in order while different sessions proceed in parallel.
pub struct SessionService {
    model: Arc<Model>,
    store: Arc<dyn EventStore>,
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<Session>>>>,
    leaderboard: Mutex<Vec<LeaderboardEntry>>,
}

impl SessionService {
    /// Opens the service, rebuilding every stored session by replay.
    pub fn open(model: Arc<Model>, store: Arc<dyn EventStore>) -> Result<SessionService, ServiceError> {
        let mut sessions = HashMap::new();
        for stored in store.load_sessions()? {
            let id = stored.header.session_id;
            let game = Game::replay(model.clone(), stored.header.seed, stored.header.objective_frame, &stored.records)
                .map_err(|source| ServiceError::Replay { session: id, source })?;
            sessions.insert(
                id,
                Arc::new(Mutex::new(Session {
                    header: stored.header,
                    game,
                })),
            );
        }
        let leaderboard = store.load_leaderboard()?;
        Ok(SessionService {
            model,
            store,
            sessions: RwLock::new(sessions),
            leaderboard: Mutex::new(leaderboard),
        })
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().len()
    }

    fn session(&self, id: Uuid) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions.read().get(&id).cloned().ok_or(ServiceError::UnknownSession(id))
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionView, ServiceError> {
        self.create_session_at(req, Utc::now())
    }

    pub fn create_session_at(&self, req: CreateSession, at: DateTime<Utc>) -> Result<SessionView, ServiceError> {
        self.create_seeded_session(req, rand::random(), at)
    }

    /// Creates a session with a chosen seed. Not reachable over HTTP:
    /// players never pick their seed, but reproduction runs need to.
    pub fn create_seeded_session(
        &self,
        req: CreateSession,
        seed: u64,
        at: DateTime<Utc>,
    ) -> Result<SessionView, ServiceError> {
        if let Some(token) = &req.survey_token {
            if token.is_empty() || token.len() > 256 {
                return Err(ServiceError::Invalid("survey token must be 1 to 256 characters".into()));
            }
        }
        let objective_frame = req
            .objective_frame
            .unwrap_or_else(|| assign_frame(req.survey_token.as_deref(), seed));
        let header = SessionHeader {
            session_id: Uuid::new_v4(),
            survey_token: req.survey_token,
            seed,
            objective_frame,
            language: req.language,
            created_at: at,
        };
        self.store.create(&header)?;
        let session = Session {
            game: Game::new(self.model.clone(), seed, objective_frame),
            header,
        };
        let view = session.view();
        self.sessions
            .write()
            .insert(view.session_id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    pub fn get_state(&self, id: Uuid) -> Result<SessionView, ServiceError> {
        Ok(self.session(id)?.lock().view())
    }

    /// Applies, logs and persists an action. Engine rejections are logged
    /// and persisted too, then reported as [`ServiceError::Rejected`] along
    /// with the response.
    pub fn post_action(&self, id: Uuid, req: PostAction) -> Result<(ActionResponse, Option<ActionError>), ServiceError> {
        self.post_action_at(id, req, Utc::now())
    }

    pub fn post_action_at(
        &self,
        id: Uuid,
        req: PostAction,
        at: DateTime<Utc>,
    ) -> Result<(ActionResponse, Option<ActionError>), ServiceError> {
        let session = self.session(id)?;
        let mut session = session.lock();
        let expected = session.game.log().len() as u64;
        if let Some(got) = req.seq {
            if got != expected {
                return Err(ServiceError::Conflict { expected, got });
            }
        }
        let before = session.game.clone();
        let outcome = session.game.try_act(req.action, at).err();
        let record = session.game.log().last().expect("action logged").clone();
        if let Err(e) = self.store.append(id, &record) {
            session.game = before;
            return Err(e.into());
        }
        let response = ActionResponse {
            record,
            session: session.view(),
        };
        Ok((response, outcome))
    }

    pub fn submit_score(&self, id: Uuid, display_name: &str) -> Result<LeaderboardEntry, ServiceError> {
        let name = display_name.trim();
        if !acceptable_name(name) {
            return Err(ServiceError::NameRejected);
        }
        let session = self.session(id)?;
        let session = session.lock();
        let state = session.game.state();
        if state.status != GameStatus::Completed {
            return Err(ServiceError::NotCompleted(id));
        }
        let mut board = self.leaderboard.lock();
        if board.iter().any(|e| e.session_id == id) {
            return Err(ServiceError::AlreadyListed(id));
        }
        let completed_at = session
            .game
            .log()
            .iter()
            .rev()
            .find(|r| r.outcome.is_accepted())
            .map_or(session.header.created_at, |r| r.timestamp);
        let entry = LeaderboardEntry {
            session_id: id,
            display_name: name.to_string(),
            score_card: session.game.score(),
            completed_at,
        };
        self.store.add_leaderboard_entry(&entry)?;
        board.push(entry.clone());
        Ok(entry)
    }

    pub fn leaderboard(&self, order_by: &str, limit: usize) -> Result<Vec<LeaderboardEntry>, ServiceError> {
        let board = self.leaderboard.lock().clone();
        let cards = board
            .iter()
            .map(|e| RankedCard {
                label: e.session_id.to_string(),
                card: e.score_card.clone(),
                completed_at: e.completed_at,
            })
            .collect();
        let ranked = rank(cards, order_by)?;
        Ok(ranked
            .into_iter()
            .take(limit)
            .filter_map(|r| board.iter().find(|e| e.session_id.to_string() == r.label).cloned())
            .collect())
    }

    /// Export records in creation order (ties by id).
    pub fn export(&self, filter: &ExportFilter) -> Vec<ExportRecord> {
        let sessions: Vec<_> = self.sessions.read().values().cloned().collect();
        let mut out: Vec<ExportRecord> = sessions
            .iter()
            .filter_map(|s| {
                let s = s.lock();
                let h = &s.header;
                let keep = filter.from.is_none_or(|f| h.created_at >= f)
                    && filter.to.is_none_or(|t| h.created_at <= t)
                    && filter
                        .tokens
                        .as_ref()
                        .is_none_or(|set| h.survey_token.as_ref().is_some_and(|t| set.contains(t)));
                keep.then(|| s.export())
            })
            .collect();
        out.sort_by(|a, b| (a.created_at, a.session_id).cmp(&(b.created_at, b.session_id)));
        out
    }
}

/// Frame for a session without an explicit one: derived from the token when
/// present so a participant always sees the same framing, otherwise a coin
/// flip on the session seed.
pub fn assign_frame(token: Option<&str>, seed: u64) -> ObjectiveFrame {
    let bit = match token {
        Some(t) => {
            // FNV-1a: stable across builds, unlike the std hasher.
            let mut h: u64 = 0xcbf29ce484222325;
            for b in t.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h & 1
        }
        None => seed & 1,
    };
    if bit == 0 {
        ObjectiveFrame::SupplyOnly
    } else {
        ObjectiveFrame::TransitionFocus
    }
}

pub fn acceptable_name(name: &str) -> bool {
    if name.is_empty() || name.chars().count() > MAX_NAME_LEN || name.chars().any(char::is_control) {
        return false;
    }
    let folded: String = name
        .to_lowercase()
        .chars()
        .map(|c| match c {
            '0' => 'o',
            '1' | '!' => 'i',
            '3' => 'e',
            '4' | '@' => 'a',
            '5' | '$' => 's',
            '7' => 't',
            c => c,
        })
        .filter(|c| c.is_alphanumeric())
        .collect();
    !DENY_LIST.iter().any(|w| folded.contains(w))
}

/// Parses a leaderboard key, for callers that validate before querying.
pub fn parse_metric(key: &str) -> Result<MetricKey, ServiceError> {
    key.parse::<MetricKey>().map_err(ServiceError::Metrics)
}
