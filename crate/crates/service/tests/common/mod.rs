#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use transition_core::balance::TechnologyKind;
use transition_core::engine::{Action, GameStatus, PolicyStatus, ShockChoice, StateView};
use transition_core::params::SiteClass;
use transition_core::Model;

pub fn model() -> Arc<Model> {
    static MODEL: OnceLock<Arc<Model>> = OnceLock::new();
    MODEL.get_or_init(|| Arc::new(Model::bundled())).clone()
}

/// A reactive player that keeps the lights on: answers demand shocks with
/// gas peakers, maxes out imports, and mixes in a few builds and votes.
/// `step` varies the choices so logs contain every kind of record,
/// including rejections.
pub fn steer(view: &StateView, step: usize) -> Action {
    if view.status != GameStatus::Playing {
        return Action::EndTurn;
    }
    if let Some(shock) = &view.active_shock {
        if shock.choice.is_none() && shock.choices.contains(&ShockChoice::GasPeakers) {
            return Action::RespondShock {
                choice: ShockChoice::GasPeakers,
            };
        }
    }
    if view.import_level_tj < view.import_cap_tj {
        return Action::SetImport {
            tj_per_season: view.import_cap_tj,
        };
    }
    match step % 6 {
        1 if view.turn <= 3 => Action::Build {
            technology: TechnologyKind::Solar,
            site: SiteClass::Land,
        },
        3 if !view.policy_proposed_this_turn => {
            match view.policies.iter().find(|p| p.status != PolicyStatus::Enacted) {
                Some(p) => Action::ProposePolicy { policy: p.id },
                None => Action::EndTurn,
            }
        }
        // Always rejected: exercises the rejection path.
        4 if view.turn == 2 => Action::Decommission { plant_id: 9999 },
        _ => Action::EndTurn,
    }
}
