use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::state::{ShockChoice, ShockKind};
use crate::balance::TechnologyKind;
use crate::params::{PolicyId, SiteClass};

/// A player decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", rename_all_fields = "camelCase")]
pub enum Action {
    Build { technology: TechnologyKind, site: SiteClass },
    Upgrade { plant_id: u32 },
    Decommission { plant_id: u32 },
    SetImport { tj_per_season: f64 },
    Borrow { mchf: f64 },
    ProposePolicy { policy: PolicyId },
    Campaign { policy: PolicyId },
    SetSequester { t_per_year: f64 },
    RespondShock { choice: ShockChoice },
    EndTurn,
    Abandon,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Build { .. } => "build",
            Action::Upgrade { .. } => "upgrade",
            Action::Decommission { .. } => "decommission",
            Action::SetImport { .. } => "set_import",
            Action::Borrow { .. } => "borrow",
            Action::ProposePolicy { .. } => "propose_policy",
            Action::Campaign { .. } => "campaign",
            Action::SetSequester { .. } => "set_sequester",
            Action::RespondShock { .. } => "respond_shock",
            Action::EndTurn => "end_turn",
            Action::Abandon => "abandon",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("insufficient budget: {needed:.1} MCHF needed, {available:.1} MCHF available")]
    InsufficientBudget { needed: f64, available: f64 },
    #[error("maximum upgrades reached for plant {plant_id} ({cap})")]
    UpgradeCapReached { plant_id: u32, cap: u32 },
    #[error("a policy has already been proposed this turn")]
    PolicyAlreadyProposed,
    #[error("policy {0} is already enacted")]
    AlreadyEnacted(PolicyId),
    #[error("no free {0} site")]
    NoFreeSite(SiteClass),
    #[error("{technology} cannot be built on a {site} site")]
    SiteNotAllowed { technology: TechnologyKind, site: SiteClass },
    #[error("new nuclear reactors cannot be built")]
    NuclearBuildForbidden,
    #[error("{0} plants cannot be built")]
    NotBuildable(TechnologyKind),
    #[error("unknown plant {0}")]
    UnknownPlant(u32),
    #[error("plant {0} is still under construction")]
    PlantNotActive(u32),
    #[error("loan of {requested:.1} MCHF exceeds remaining cap {available:.1} MCHF")]
    LoanCapExceeded { requested: f64, available: f64 },
    #[error("invalid amount: {0}")]
    InvalidAmount(String),
    #[error("no shock awaiting a response")]
    NoShockToRespond,
    #[error("`{choice:?}` is not a response to {shock}")]
    InvalidShockChoice { shock: ShockKind, choice: ShockChoice },
    #[error("insufficient supply: summer surplus {summer_surplus_tj:.1} TJ, winter surplus {winter_surplus_tj:.1} TJ")]
    InsufficientSupply { summer_surplus_tj: f64, winter_surplus_tj: f64 },
    #[error("insufficient funds to settle the turn: short by {shortfall_mchf:.1} MCHF")]
    InsufficientFunds { shortfall_mchf: f64 },
    #[error("the game is complete")]
    GameComplete,
    #[error("the game was abandoned")]
    GameAbandoned,
}

impl ActionError {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            ActionError::InsufficientBudget { .. } => "insufficient_budget",
            ActionError::UpgradeCapReached { .. } => "upgrade_cap_reached",
            ActionError::PolicyAlreadyProposed => "policy_already_proposed",
            ActionError::AlreadyEnacted(_) => "already_enacted",
            ActionError::NoFreeSite(_) => "no_free_site",
            ActionError::SiteNotAllowed { .. } => "site_not_allowed",
            ActionError::NuclearBuildForbidden => "nuclear_build_forbidden",
            ActionError::NotBuildable(_) => "not_buildable",
            ActionError::UnknownPlant(_) => "unknown_plant",
            ActionError::PlantNotActive(_) => "plant_not_active",
            ActionError::LoanCapExceeded { .. } => "loan_cap_exceeded",
            ActionError::InvalidAmount(_) => "invalid_amount",
            ActionError::NoShockToRespond => "no_shock_to_respond",
            ActionError::InvalidShockChoice { .. } => "invalid_shock_choice",
            ActionError::InsufficientSupply { .. } => "insufficient_supply",
            ActionError::InsufficientFunds { .. } => "insufficient_funds",
            ActionError::GameComplete => "game_complete",
            ActionError::GameAbandoned => "game_abandoned",
        }
    }
}

/// What an accepted action did beyond the indicator changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum ActionDetail {
    None,
    Built { plant_id: u32, capacity_tj: f64, cost_mchf: f64, active_from_turn: u8 },
    Upgraded { plant_id: u32, capacity_tj: f64, cost_mchf: f64 },
    PolicyVote { policy: PolicyId, probability: f64, roll: f64, enacted: bool },
    ShockAnswered { shock: ShockKind, choice: ShockChoice },
    TurnEnded {
        turn: u8,
        first_year: i32,
        last_year: i32,
        settled_mchf: f64,
        withstood: Option<bool>,
        next_shock: Option<ShockKind>,
        completed: bool,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndicatorDeltas {
    pub budget_mchf: f64,
    pub loan_mchf: f64,
    pub support: f64,
    pub summer_surplus_tj: f64,
    pub winter_surplus_tj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum ActionOutcome {
    Accepted {
        detail: ActionDetail,
        deltas: IndicatorDeltas,
    },
    Rejected {
        code: String,
        message: String,
        /// Present for supply rejections so they can be shown to the player.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        surpluses: Option<(f64, f64)>,
    },
}

impl ActionOutcome {
    pub fn rejected(err: &ActionError) -> Self {
        let surpluses = match *err {
            ActionError::InsufficientSupply {
                summer_surplus_tj,
                winter_surplus_tj,
            } => Some((summer_surplus_tj, winter_surplus_tj)),
            _ => None,
        };
        ActionOutcome::Rejected {
            code: err.code().to_string(),
            message: err.to_string(),
            surpluses,
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, ActionOutcome::Accepted { .. })
    }
}

/// One logged decision, accepted or rejected. The log of a game is dense
/// in `seq`, starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionRecord {
    pub seq: u64,
    pub turn: u8,
    pub model_year: i32,
    pub action: Action,
    pub outcome: ActionOutcome,
    pub timestamp: DateTime<Utc>,
}
