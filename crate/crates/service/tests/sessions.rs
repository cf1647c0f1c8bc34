mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use common::{model, steer};
use transition_core::engine::{Action, ActionError, ActionOutcome, Game};
use transition_core::ObjectiveFrame;
use transition_service::*;
use uuid::Uuid;

fn memory_service() -> SessionService {
    SessionService::open(model(), Arc::new(MemoryStore::new())).unwrap()
}

fn post(service: &SessionService, id: Uuid, action: Action) -> (ActionResponse, Option<ActionError>) {
    service.post_action(id, PostAction { seq: None, action }).unwrap()
}

fn play_to_end(service: &SessionService, id: Uuid) -> SessionView {
    let mut view = service.get_state(id).unwrap();
    let mut step = 0;
    while view.status == SessionStatus::Active {
        view = post(service, id, steer(&view.state, step)).0.session;
        step += 1;
        assert!(step < 500, "game does not finish");
    }
    view
}

fn token(t: &str) -> CreateSession {
    CreateSession {
        survey_token: Some(t.into()),
        ..CreateSession::default()
    }
}

#[test]
fn fresh_sessions_are_distinct_and_start_in_2022() {
    let service = memory_service();
    let a = service.create_session(CreateSession::default()).unwrap();
    let b = service.create_session(CreateSession::default()).unwrap();
    assert_ne!(a.session_id, b.session_id);
    assert_eq!((a.state.turn, a.state.model_year), (1, 2022));
    assert_eq!(a.next_seq, 0);
    assert_eq!(a.status, SessionStatus::Active);
    let seeds: BTreeSet<u64> = service.export(&ExportFilter::default()).iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), 2);
}

#[test]
fn explicit_frame_wins_over_assignment() {
    let service = memory_service();
    for frame in [ObjectiveFrame::SupplyOnly, ObjectiveFrame::TransitionFocus] {
        let v = service
            .create_session(CreateSession {
                survey_token: Some("abc".into()),
                objective_frame: Some(frame),
                language: Some("de".into()),
            })
            .unwrap();
        assert_eq!(v.objective_frame, frame);
        assert_eq!(v.state.objective_frame, frame);
    }
}

#[test]
fn tokens_are_echoed_and_filterable() {
    let service = memory_service();
    let first = service.create_session(token("abc")).unwrap();
    let second = service.create_session(token("abc")).unwrap();
    service.create_session(token("xyz")).unwrap();
    service.create_session(CreateSession::default()).unwrap();
    assert_eq!(first.objective_frame, second.objective_frame);

    let filter = ExportFilter {
        tokens: Some(["abc".to_string()].into()),
        ..ExportFilter::default()
    };
    let exported = service.export(&filter);
    assert_eq!(exported.len(), 2);
    assert!(exported.iter().all(|r| r.survey_token.as_deref() == Some("abc")));
    assert_eq!(service.export(&ExportFilter::default()).len(), 4);
}

#[test]
fn export_filters_by_creation_time() {
    let service = memory_service();
    let t = |s: i64| DateTime::from_timestamp(1_700_000_000 + s, 0).unwrap();
    for s in [0, 10, 20] {
        service.create_session_at(CreateSession::default(), t(s)).unwrap();
    }
    let filter = ExportFilter {
        from: Some(t(5)),
        to: Some(t(20)),
        tokens: None,
    };
    let got: Vec<DateTime<Utc>> = service.export(&filter).iter().map(|r| r.created_at).collect();
    assert_eq!(got, vec![t(10), t(20)]);
}

#[test]
fn build_shows_up_as_pending() {
    let service = memory_service();
    let id = service.create_session(CreateSession::default()).unwrap().session_id;
    let (resp, err) = post(
        &service,
        id,
        Action::Build {
            technology: transition_core::balance::TechnologyKind::Wind,
            site: transition_core::params::SiteClass::Land,
        },
    );
    assert!(err.is_none());
    assert_eq!(resp.record.seq, 0);
    assert_eq!(resp.session.next_seq, 1);
    assert_eq!(resp.session.state.pending_builds.len(), 1);
}

#[test]
fn eleventh_end_turn_is_rejected_and_logged() {
    let service = memory_service();
    let id = service.create_session(CreateSession::default()).unwrap().session_id;
    let done = play_to_end(&service, id);
    assert_eq!(done.status, SessionStatus::Completed, "{:?}", done.state.supply);
    assert_eq!(done.state.model_year, 2050);
    let (resp, err) = post(&service, id, Action::EndTurn);
    assert_eq!(err, Some(ActionError::GameComplete));
    assert!(matches!(resp.record.outcome, ActionOutcome::Rejected { .. }));
    assert_eq!(resp.session.next_seq, done.next_seq + 1);
}

#[test]
fn duplicate_sequence_number_conflicts_without_logging() {
    let service = memory_service();
    let id = service.create_session(CreateSession::default()).unwrap().session_id;
    let req = |seq| PostAction {
        seq: Some(seq),
        action: Action::SetImport { tj_per_season: 100.0 },
    };
    service.post_action(id, req(0)).unwrap();
    let before = service.get_state(id).unwrap();
    assert!(matches!(
        service.post_action(id, req(0)),
        Err(ServiceError::Conflict { expected: 1, got: 0 })
    ));
    assert!(matches!(service.post_action(id, req(5)), Err(ServiceError::Conflict { .. })));
    assert_eq!(service.get_state(id).unwrap(), before);
    service.post_action(id, req(1)).unwrap();
}

#[test]
fn unknown_session_is_reported() {
    let service = memory_service();
    let id = Uuid::new_v4();
    assert!(matches!(service.get_state(id), Err(ServiceError::UnknownSession(x)) if x == id));
    assert!(matches!(
        service.post_action(id, PostAction { seq: None, action: Action::EndTurn }),
        Err(ServiceError::UnknownSession(_))
    ));
}

#[test]
fn state_equals_headless_replay_after_every_action() {
    let service = memory_service();
    let id = service.create_session(CreateSession::default()).unwrap().session_id;
    let mut view = service.get_state(id).unwrap();
    for step in 0..25 {
        view = post(&service, id, steer(&view.state, step)).0.session;
        let export = service.export(&ExportFilter::default()).remove(0);
        let game = Game::replay(model(), export.seed, export.objective_frame, &export.actions).unwrap();
        assert_eq!(game.view(), view.state, "after {} actions", step + 1);
    }
}

#[test]
fn abandoned_session_keeps_last_state() {
    let service = memory_service();
    let id = service.create_session(CreateSession::default()).unwrap().session_id;
    post(&service, id, Action::SetImport { tj_per_season: 500.0 });
    let before = service.get_state(id).unwrap();
    let (resp, err) = post(&service, id, Action::Abandon);
    assert!(err.is_none());
    assert_eq!(resp.session.status, SessionStatus::Abandoned);
    assert_eq!(resp.session.state.import_level_tj, before.state.import_level_tj);
    assert!(resp.session.state.score_card.as_ref().unwrap().partial);
    let (_, err) = post(&service, id, Action::EndTurn);
    assert_eq!(err, Some(ActionError::GameAbandoned));
}

#[test]
fn export_contains_every_action_exactly_once() {
    let service = memory_service();
    let id = service.create_session(token("research")).unwrap().session_id;
    let mut view = service.get_state(id).unwrap();
    let mut posted = Vec::new();
    for step in 0..40 {
        let action = steer(&view.state, step);
        posted.push(action.clone());
        view = post(&service, id, action).0.session;
    }
    let export = service.export(&ExportFilter::default()).remove(0);
    assert_eq!(export.actions.len(), posted.len());
    let logged: Vec<Action> = export.actions.iter().map(|r| r.action.clone()).collect();
    assert_eq!(logged, posted);
    assert!(export.actions.iter().any(|r| !r.outcome.is_accepted()));
    let seqs: Vec<u64> = export.actions.iter().map(|r| r.seq).collect();
    assert_eq!(seqs, (0..40).collect::<Vec<_>>());
    // Every drawn shock is reported with the options offered.
    assert!(export.shocks.iter().all(|s| s.options == s.kind.choices()));
    for s in export.shocks.iter().filter(|s| s.choice.is_some()) {
        assert!(s.chosen_at_seq.is_some());
    }
}

#[test]
fn leaderboard_orders_limits_and_validates() {
    let service = memory_service();
    let mut ids = Vec::new();
    for _ in 0..3 {
        let id = service.create_session(CreateSession::default()).unwrap().session_id;
        assert_eq!(play_to_end(&service, id).status, SessionStatus::Completed);
        ids.push(id);
    }
    let open = service.create_session(CreateSession::default()).unwrap().session_id;
    assert!(matches!(service.submit_score(open, "Early"), Err(ServiceError::NotCompleted(_))));
    assert!(matches!(service.submit_score(ids[0], "sh1t"), Err(ServiceError::NameRejected)));
    for (i, id) in ids.iter().enumerate() {
        service.submit_score(*id, &format!("Player {i}")).unwrap();
    }
    assert!(matches!(service.submit_score(ids[0], "Again"), Err(ServiceError::AlreadyListed(_))));

    let board = service.leaderboard("emissions", 10).unwrap();
    assert_eq!(board.len(), 3);
    assert!(board.windows(2).all(|w| w[0].score_card.emissions_mt <= w[1].score_card.emissions_mt));
    assert_eq!(service.leaderboard("emissions", 10).unwrap(), board);
    assert_eq!(service.leaderboard("landUse", 2).unwrap().len(), 2);
    assert!(matches!(service.leaderboard("happiness", 10), Err(ServiceError::Metrics(_))));
}

#[test]
fn restart_from_files_restores_sessions_and_leaderboard() {
    let dir = tempfile::tempdir().unwrap();
    let open = || SessionService::open(model(), Arc::new(FileStore::open(dir.path()).unwrap())).unwrap();
    let service = open();
    let id = service.create_session(token("t1")).unwrap().session_id;
    let done = play_to_end(&service, id);
    service.submit_score(id, "Keeper").unwrap();
    drop(service);

    let again = open();
    assert_eq!(again.get_state(id).unwrap(), done);
    assert_eq!(again.leaderboard("investmentCost", 5).unwrap().len(), 1);
}

#[test]
fn crash_after_any_action_reproduces_the_view() {
    let dir = tempfile::tempdir().unwrap();
    let open = || SessionService::open(model(), Arc::new(FileStore::open(dir.path()).unwrap())).unwrap();
    let mut service = open();
    let id = service.create_session(CreateSession::default()).unwrap().session_id;
    let mut view = service.get_state(id).unwrap();
    for step in 0..30 {
        view = post(&service, id, steer(&view.state, step)).0.session;
        // Dropping the service without any shutdown is the same as a kill:
        // nothing beyond the already-synced files survives.
        drop(service);
        service = open();
        assert_eq!(service.get_state(id).unwrap(), view, "after action {step}");
    }
}

/// Store that refuses appends, to check a failed write leaves no trace.
struct BrokenStore(MemoryStore);

impl EventStore for BrokenStore {
    fn create(&self, header: &SessionHeader) -> Result<(), StoreError> {
        self.0.create(header)
    }
    fn append(&self, _: Uuid, _: &transition_core::engine::ActionRecord) -> Result<(), StoreError> {
        Err(StoreError::Io {
            path: "broken".into(),
            source: std::io::Error::other("disk full"),
        })
    }
    fn add_leaderboard_entry(&self, entry: &LeaderboardEntry) -> Result<(), StoreError> {
        self.0.add_leaderboard_entry(entry)
    }
    fn load_sessions(&self) -> Result<Vec<StoredSession>, StoreError> {
        self.0.load_sessions()
    }
    fn load_leaderboard(&self) -> Result<Vec<LeaderboardEntry>, StoreError> {
        self.0.load_leaderboard()
    }
}

#[test]
fn failed_persist_rolls_the_action_back() {
    let service = SessionService::open(model(), Arc::new(BrokenStore(MemoryStore::new()))).unwrap();
    let id = service.create_session(CreateSession::default()).unwrap().session_id;
    let before = service.get_state(id).unwrap();
    assert!(matches!(
        service.post_action(id, PostAction { seq: None, action: Action::EndTurn }),
        Err(ServiceError::Storage(_))
    ));
    assert_eq!(service.get_state(id).unwrap(), before);
}

#[test]
fn concurrent_sessions_do_not_interfere() {
    let service = Arc::new(memory_service());
    let ids: Vec<Uuid> = (0..50)
        .map(|_| service.create_session(CreateSession::default()).unwrap().session_id)
        .collect();
    let handles: Vec<_> = ids
        .iter()
        .map(|&id| {
            let service = service.clone();
            std::thread::spawn(move || {
                let mut worst = Duration::ZERO;
                let mut view = service.get_state(id).unwrap();
                for step in 0..30 {
                    let start = Instant::now();
                    view = post(&service, id, steer(&view.state, step)).0.session;
                    worst = worst.max(start.elapsed());
                }
                (view, worst)
            })
        })
        .collect();
    for (id, h) in ids.iter().zip(handles) {
        let (view, _) = h.join().unwrap();
        // Each session equals its own sequential replay.
        let export = service
            .export(&ExportFilter::default())
            .into_iter()
            .find(|r| r.session_id == *id)
            .unwrap();
        let game = Game::replay(model(), export.seed, export.objective_frame, &export.actions).unwrap();
        assert_eq!(game.view(), view.state);
        assert_eq!(export.actions.len(), 30);
    }
}
