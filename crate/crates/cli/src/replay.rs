//! Re-runs sessions from a research export and checks their score cards.

use std::io::BufRead;
use std::sync::Arc;

use thiserror::Error;
use transition_core::engine::{Game, ReplayError};
use transition_core::metrics::ScoreCard;
use transition_core::Model;
use transition_service::ExportRecord;
use uuid::Uuid;

#[derive(Debug, Error)]
pub enum ExportReadError {
    #[error("export line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("cannot read export: {0}")]
    Io(#[from] std::io::Error),
}

pub fn read_export(reader: impl BufRead) -> Result<Vec<ExportRecord>, ExportReadError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| ExportReadError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

#[derive(Debug)]
pub struct ReplayCheck {
    pub session_id: Uuid,
    pub recorded: ScoreCard,
    pub result: Result<ScoreCard, ReplayError>,
}

impl ReplayCheck {
    pub fn matches(&self) -> bool {
        matches!(&self.result, Ok(card) if *card == self.recorded)
    }
}

pub fn replay_record(model: Arc<Model>, record: &ExportRecord) -> ReplayCheck {
    let result = Game::replay(model, record.seed, record.objective_frame, &record.actions).map(|g| g.score());
    ReplayCheck {
        session_id: record.session_id,
        recorded: record.score_card.clone(),
        result,
    }
}
