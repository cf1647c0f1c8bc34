use std::sync::Arc;

use chrono::{DateTime, Utc};
use thiserror::Error;

use super::action::{Action, ActionError, ActionOutcome, ActionRecord, IndicatorDeltas};
use super::state::GameState;
use super::view::StateView;
use super::{Model, SupplyCheck};
use crate::metrics::{ObjectiveFrame, ScoreCard};

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("record {index} has sequence number {found}, expected {index}")]
    Sequence { index: usize, found: u64 },
    #[error("replay diverged at action {seq}: logged {logged}, replay produced {replayed}")]
    Diverged { seq: u64, logged: String, replayed: String },
}

/// A game in progress: the current state plus the log that produced it.
#[derive(Debug, Clone)]
pub struct Game {
    model: Arc<Model>,
    state: GameState,
    log: Vec<ActionRecord>,
}

impl Game {
    pub fn new(model: Arc<Model>, seed: u64, objective_frame: ObjectiveFrame) -> Game {
        let state = model.new_game(seed, objective_frame);
        Game {
            model,
            state,
            log: Vec::new(),
        }
    }

    /// Rebuilds a game from its log, checking that every action has the
    /// logged outcome.
    pub fn replay(
        model: Arc<Model>,
        seed: u64,
        objective_frame: ObjectiveFrame,
        records: &[ActionRecord],
    ) -> Result<Game, ReplayError> {
        let mut game = Game::new(model, seed, objective_frame);
        for (index, record) in records.iter().enumerate() {
            if record.seq != index as u64 {
                return Err(ReplayError::Sequence {
                    index,
                    found: record.seq,
                });
            }
            let replayed = game.act(record.action.clone(), record.timestamp);
            if replayed.outcome != record.outcome {
                return Err(ReplayError::Diverged {
                    seq: record.seq,
                    logged: format!("{:?}", record.outcome),
                    replayed: format!("{:?}", replayed.outcome),
                });
            }
        }
        Ok(game)
    }

    /// Applies an action and logs it, whether accepted or not.
    pub fn act(&mut self, action: Action, at: DateTime<Utc>) -> &ActionRecord {
        let _ = self.apply_logged(action, at);
        self.log.last().expect("just pushed")
    }

    /// Like [`Game::act`] but surfaces a rejection as an error. The rejected
    /// action is still logged.
    pub fn try_act(&mut self, action: Action, at: DateTime<Utc>) -> Result<&ActionRecord, ActionError> {
        self.apply_logged(action, at)?;
        Ok(self.log.last().expect("just pushed"))
    }

    fn apply_logged(&mut self, action: Action, at: DateTime<Utc>) -> Result<(), ActionError> {
        let before = Indicators::of(&self.model, &self.state);
        let (turn, model_year) = (self.state.turn, self.state.model_year);
        let (outcome, result) = match self.model.apply_action(&self.state, &action) {
            Ok((next, detail)) => {
                self.state = next;
                let after = Indicators::of(&self.model, &self.state);
                let deltas = after.minus(&before);
                (ActionOutcome::Accepted { detail, deltas }, Ok(()))
            }
            Err(err) => (ActionOutcome::rejected(&err), Err(err)),
        };
        self.log.push(ActionRecord {
            seq: self.log.len() as u64,
            turn,
            model_year,
            action,
            outcome,
            timestamp: at,
        });
        result
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn log(&self) -> &[ActionRecord] {
        &self.log
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn score(&self) -> ScoreCard {
        self.model.score(&self.state)
    }

    pub fn check_supply(&self) -> SupplyCheck {
        self.model.check_supply(&self.state)
    }

    pub fn view(&self) -> StateView {
        StateView::new(&self.model, &self.state)
    }
}

struct Indicators {
    budget: f64,
    loan: f64,
    support: f64,
    supply: SupplyCheck,
}

impl Indicators {
    fn of(model: &Model, state: &GameState) -> Indicators {
        Indicators {
            budget: state.treasury.budget_mchf,
            loan: state.treasury.loan_outstanding_mchf,
            support: state.support,
            supply: if state.is_over() { SupplyCheck::default() } else { model.check_supply(state) },
        }
    }

    fn minus(&self, before: &Indicators) -> IndicatorDeltas {
        IndicatorDeltas {
            budget_mchf: self.budget - before.budget,
            loan_mchf: self.loan - before.loan,
            support: self.support - before.support,
            summer_surplus_tj: self.supply.summer_surplus() - before.supply.summer_surplus(),
            winter_surplus_tj: self.supply.winter_surplus() - before.supply.winter_surplus(),
        }
    }
}
