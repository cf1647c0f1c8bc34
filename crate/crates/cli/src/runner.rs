//! Executes a strategy script through the engine, the same way the session
//! service applies posted actions.

use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use transition_core::engine::{Action, ActionError, Game, GameStatus, ShockChoice};
use transition_core::metrics::{self, ScoreCard};
use transition_core::Model;

use crate::script::StrategyScript;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Overrides the script's seed.
    pub seed: Option<u64>,
    /// Log rejected actions and carry on, as the service does, instead of
    /// stopping at the first one.
    pub keep_going: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    Abandoned,
    /// Ended with turns left, which only happens with `keep_going`.
    Unfinished,
    SupplyFailure {
        turn: u8,
        years: (i32, i32),
        summer_surplus_tj: f64,
        winter_surplus_tj: f64,
    },
    Rejected {
        turn: u8,
        action: Action,
        error: ActionError,
    },
}

impl RunOutcome {
    /// 0 on a finished game, 2 on a simulation failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunOutcome::Completed | RunOutcome::Abandoned | RunOutcome::Unfinished => 0,
            RunOutcome::SupplyFailure { .. } | RunOutcome::Rejected { .. } => 2,
        }
    }
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunOutcome::Completed => f.write_str("completed"),
            RunOutcome::Abandoned => f.write_str("abandoned"),
            RunOutcome::Unfinished => f.write_str("script ended before the final turn"),
            RunOutcome::SupplyFailure {
                turn,
                years,
                summer_surplus_tj,
                winter_surplus_tj,
            } => write!(
                f,
                "insufficient supply in turn {turn} ({}-{}): summer surplus {summer_surplus_tj:.1} TJ, winter surplus {winter_surplus_tj:.1} TJ",
                years.0, years.1
            ),
            RunOutcome::Rejected { turn, action, error } => {
                write!(f, "turn {turn}: `{}` rejected: {error}", action.name())
            }
        }
    }
}

pub struct RunReport {
    pub seed: u64,
    pub game: Game,
    pub outcome: RunOutcome,
}

impl RunReport {
    pub fn score(&self) -> ScoreCard {
        self.game.score()
    }

    /// One row per simulated year and a final score-card row.
    pub fn csv(&self) -> String {
        metrics::to_csv(&self.game.state().metrics_history, &self.score())
    }
}

/// Batch runs have no wall clock; every record gets the same timestamp so
/// that logs are reproducible byte for byte.
pub fn batch_timestamp() -> DateTime<Utc> {
    DateTime::UNIX_EPOCH
}

pub fn run_script(model: Arc<Model>, script: &StrategyScript, opts: RunOptions) -> RunReport {
    let seed = opts.seed.or(script.seed).unwrap_or(0);
    let turn_count = model.params().turns.count();
    let mut game = Game::new(model, seed, script.objective_frame);
    let at = batch_timestamp();

    let outcome = 'run: {
        for turn in 1..=turn_count {
            if game.state().status != GameStatus::Playing {
                break;
            }
            let current = game.state().turn;
            let response = game
                .state()
                .active_shock
                .as_ref()
                .filter(|s| s.choice.is_none())
                .and_then(|s| script.shock_responses.get(&s.kind).copied());
            let mut planned: Vec<Action> = response
                .map(|choice: ShockChoice| Action::RespondShock { choice })
                .into_iter()
                .collect();
            planned.extend_from_slice(script.actions_for(turn));
            for action in planned {
                if let Err(error) = game.try_act(action.clone(), at) {
                    if !opts.keep_going {
                        break 'run RunOutcome::Rejected {
                            turn: current,
                            action,
                            error,
                        };
                    }
                }
                if game.state().status != GameStatus::Playing {
                    break;
                }
            }
            if game.state().status != GameStatus::Playing {
                break;
            }
            let years = game.view().turn_years;
            match game.try_act(Action::EndTurn, at) {
                Ok(_) => {}
                Err(_) if opts.keep_going => {}
                Err(ActionError::InsufficientSupply {
                    summer_surplus_tj,
                    winter_surplus_tj,
                }) => {
                    break 'run RunOutcome::SupplyFailure {
                        turn: current,
                        years,
                        summer_surplus_tj,
                        winter_surplus_tj,
                    }
                }
                Err(error) => {
                    break 'run RunOutcome::Rejected {
                        turn: current,
                        action: Action::EndTurn,
                        error,
                    }
                }
            }
        }
        match game.state().status {
            GameStatus::Completed => RunOutcome::Completed,
            GameStatus::Abandoned => RunOutcome::Abandoned,
            GameStatus::Playing => RunOutcome::Unfinished,
        }
    };
    RunReport { seed, game, outcome }
}
