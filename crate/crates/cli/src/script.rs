//! Strategy scripts: a scripted player in TOML.
//!
//! ```toml
//! seed = 7
//! objective_frame = "transition-focus"
//!
//! [shock_responses]
//! coldSpell = "gas_peakers"
//! nuclearReintroduction = "phase_out"
//!
//! [[turns]]
//! actions = [
//!     { type = "set_import", tjPerSeason = 25000.0 },
//!     { type = "build", technology = "solar", site = "land" },
//! ]
//!
//! [[turns]]
//! repeat = 9
//! actions = []
//! ```
//!
//! Each `[[turns]]` entry covers `repeat` consecutive turns (default one).
//! Turns past the end of the list have no actions. Ending the turn is
//! implicit; an active shock is answered from `shock_responses` before the
//! turn's actions run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use transition_core::engine::{Action, ShockChoice, ShockKind};
use transition_core::ObjectiveFrame;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("script does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid script: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnPlan {
    #[serde(default = "one")]
    pub repeat: u8,
    #[serde(default)]
    pub actions: Vec<Action>,
}

fn one() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyScript {
    /// Seed used when the command line does not give one.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_frame")]
    pub objective_frame: ObjectiveFrame,
    #[serde(default)]
    pub shock_responses: BTreeMap<ShockKind, ShockChoice>,
    #[serde(default)]
    pub turns: Vec<TurnPlan>,
}

fn default_frame() -> ObjectiveFrame {
    ObjectiveFrame::TransitionFocus
}

impl StrategyScript {
    pub fn parse(text: &str) -> Result<StrategyScript, ScriptError> {
        let script: StrategyScript = toml::from_str(text)?;
        Ok(script)
    }

    pub fn from_path(path: &Path) -> Result<StrategyScript, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        StrategyScript::parse(&text)
    }

    /// Checks the script against a game of `turn_count` turns.
    pub fn validate(&self, turn_count: u8) -> Result<(), ScriptError> {
        for (kind, choice) in &self.shock_responses {
            if !kind.choices().contains(choice) {
                return Err(ScriptError::Invalid(format!(
                    "`{choice:?}` is not a response to {kind}; options: {:?}",
                    kind.choices()
                )));
            }
        }
        let mut covered: u32 = 0;
        for (i, plan) in self.turns.iter().enumerate() {
            if plan.repeat == 0 {
                return Err(ScriptError::Invalid(format!("turn entry {}: repeat must be at least 1", i + 1)));
            }
            if let Some(pos) = plan.actions.iter().position(|a| matches!(a, Action::EndTurn)) {
                return Err(ScriptError::Invalid(format!(
                    "turn entry {}, action {}: end_turn is implicit and may not be listed",
                    i + 1,
                    pos + 1
                )));
            }
            covered += u32::from(plan.repeat);
        }
        if covered > u32::from(turn_count) {
            return Err(ScriptError::Invalid(format!(
                "script plans {covered} turns but the game has {turn_count}"
            )));
        }
        Ok(())
    }

    /// Actions of turn `turn` (1-based).
    pub fn actions_for(&self, turn: u8) -> &[Action] {
        let mut start = 1u32;
        for plan in &self.turns {
            let end = start + u32::from(plan.repeat);
            if (start..end).contains(&u32::from(turn)) {
                return &plan.actions;
            }
            start = end;
        }
        &[]
    }
}

/// The four scripts shipped with the runner.
pub const BUNDLED: [(&str, &str); 4] = [
    ("do-nothing", include_str!("../scripts/do-nothing.toml")),
    ("balanced-renewables", include_str!("../scripts/balanced-renewables.toml")),
    ("all-gas", include_str!("../scripts/all-gas.toml")),
    ("all-solar", include_str!("../scripts/all-solar.toml")),
];

pub fn bundled(name: &str) -> Option<StrategyScript> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| StrategyScript::parse(text).expect("bundled script parses"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use transition_core::balance::TechnologyKind;

    #[test]
    fn repeat_expands_turns() {
        let s = StrategyScript::parse(
            r#"
            seed = 3
            [[turns]]
            actions = [{ type = "borrow", mchf = 10.0 }]
            [[turns]]
            repeat = 3
            actions = [{ type = "upgrade", plantId = 1 }]
            "#,
        )
        .unwrap();
        s.validate(10).unwrap();
        assert_eq!(s.actions_for(1), &[Action::Borrow { mchf: 10.0 }]);
        for t in 2..=4 {
            assert_eq!(s.actions_for(t), &[Action::Upgrade { plant_id: 1 }]);
        }
        assert!(s.actions_for(5).is_empty());
        assert_eq!(s.objective_frame, ObjectiveFrame::TransitionFocus);
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let err = StrategyScript::parse("seed = 1\n\n[[turns]]\nactions = [{ type = \"warp\" }]\n").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn validation_catches_bad_scripts() {
        let bad_choice = StrategyScript::parse("[shock_responses]\ncoldSpell = \"phase_out\"\n").unwrap();
        assert!(bad_choice.validate(10).is_err());
        let explicit_end = StrategyScript::parse("[[turns]]\nactions = [{ type = \"end_turn\" }]\n").unwrap();
        assert!(explicit_end.validate(10).is_err());
        let too_long = StrategyScript::parse("[[turns]]\nrepeat = 11\n").unwrap();
        assert!(too_long.validate(10).is_err());
        let zero = StrategyScript::parse("[[turns]]\nrepeat = 0\n").unwrap();
        assert!(zero.validate(10).is_err());
    }

    #[test]
    fn bundled_scripts_parse_and_validate() {
        for (name, _) in BUNDLED {
            bundled(name).unwrap().validate(10).unwrap();
        }
        let gas = bundled("all-gas").unwrap();
        assert!(gas
            .turns
            .iter()
            .flat_map(|t| &t.actions)
            .all(|a| !matches!(a, Action::Build { technology, .. } if *technology != TechnologyKind::Gas)));
    }
}
