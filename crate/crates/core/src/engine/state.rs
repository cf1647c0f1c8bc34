use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::balance::TechnologyKind;
use crate::metrics::{MetricRecord, ObjectiveFrame};
use crate::params::{PolicyId, SiteClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Plant {
    pub id: u32,
    pub kind: TechnologyKind,
    /// Annual output when first commissioned, TJ.
    pub base_capacity: f64,
    /// Capacity added by each upgrade, TJ.
    pub upgrade_step: f64,
    pub upgrades_applied: u32,
    pub max_upgrades: u32,
    /// Turns left before the plant produces; zero once active.
    pub turns_until_active: u32,
    /// Pool site occupied, if built during the game.
    pub site: Option<SiteClass>,
}

impl Plant {
    pub fn is_active(&self) -> bool {
        self.turns_until_active == 0
    }

    pub fn capacity(&self) -> f64 {
        self.base_capacity + self.upgrade_step * self.upgrades_applied as f64
    }

    /// Output contributed to supply: zero while under construction.
    pub fn active_capacity(&self) -> f64 {
        if self.is_active() {
            self.capacity()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Treasury {
    pub budget_mchf: f64,
    pub loan_outstanding_mchf: f64,
    pub loan_cap_per_turn_mchf: f64,
    pub interest_rate: f64,
}

impl Treasury {
    pub fn loan_headroom(&self) -> f64 {
        (self.loan_cap_per_turn_mchf - self.loan_outstanding_mchf).max(0.0)
    }

    pub fn repayment_due(&self) -> f64 {
        self.loan_outstanding_mchf * (1.0 + self.interest_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PolicyStatus {
    Available,
    Enacted,
    RejectedThisTurn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyState {
    pub policy_id: PolicyId,
    pub base_acceptance: f64,
    /// Accumulated campaign bonus, probability points.
    pub campaign_bonus: f64,
    pub status: PolicyStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ShockKind {
    ColdSpell,
    HeatWave,
    MassImmigration,
    RenewableSupport,
    GlaciersMelting,
    NuclearReintroduction,
}

impl ShockKind {
    pub const ALL: [ShockKind; 6] = [
        ShockKind::ColdSpell,
        ShockKind::HeatWave,
        ShockKind::MassImmigration,
        ShockKind::RenewableSupport,
        ShockKind::GlaciersMelting,
        ShockKind::NuclearReintroduction,
    ];

    /// Weather shocks may recur; the others happen at most once a game.
    pub fn recurs(self) -> bool {
        matches!(self, ShockKind::ColdSpell | ShockKind::HeatWave)
    }

    pub fn raises_demand(self) -> bool {
        matches!(
            self,
            ShockKind::ColdSpell | ShockKind::HeatWave | ShockKind::MassImmigration
        )
    }

    /// Choices offered to the player.
    pub fn choices(self) -> &'static [ShockChoice] {
        match self {
            ShockKind::ColdSpell | ShockKind::HeatWave => &[
                ShockChoice::EmergencyImports,
                ShockChoice::GasPeakers,
                ShockChoice::Conservation,
            ],
            ShockKind::NuclearReintroduction => &[ShockChoice::Reintroduce, ShockChoice::PhaseOut],
            _ => &[],
        }
    }
}

impl fmt::Display for ShockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShockKind::ColdSpell => "coldSpell",
            ShockKind::HeatWave => "heatWave",
            ShockKind::MassImmigration => "massImmigration",
            ShockKind::RenewableSupport => "renewableSupport",
            ShockKind::GlaciersMelting => "glaciersMelting",
            ShockKind::NuclearReintroduction => "nuclearReintroduction",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockChoice {
    /// Pay for emergency imports covering the extra demand.
    EmergencyImports,
    /// Run gas peakers covering the extra demand, adding emissions.
    GasPeakers,
    /// Ask for conservation: demand stays flat, support drops.
    Conservation,
    Reintroduce,
    PhaseOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum ShockEffect {
    WinterDemand { factor: f64 },
    SummerDemand { factor: f64 },
    Demand { factor: f64 },
    Support { points: f64 },
    Information,
    Preference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShockEvent {
    pub kind: ShockKind,
    pub turn: u8,
    pub effect: ShockEffect,
    pub choice: Option<ShockChoice>,
    /// For demand shocks: whether the fleet covered it unaided. Set when the
    /// turn ends.
    pub withstood: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GameStatus {
    Playing,
    Completed,
    Abandoned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub seed: u64,
    pub objective_frame: ObjectiveFrame,
    pub turn: u8,
    pub model_year: i32,
    pub status: GameStatus,
    pub fleet: Vec<Plant>,
    pub next_plant_id: u32,
    pub treasury: Treasury,
    /// Political support, 0..=100.
    pub support: f64,
    pub policies: BTreeMap<PolicyId, PolicyState>,
    pub policy_proposed_this_turn: bool,
    /// Contracted electricity imports per season, TJ.
    pub import_level_tj: f64,
    /// Captured CO₂ per year, t.
    pub sequester_t: f64,
    pub free_sites: BTreeMap<SiteClass, u32>,
    /// Persistent demand multiplier from population shocks.
    pub demand_factor: f64,
    pub active_shock: Option<ShockEvent>,
    pub shock_log: Vec<ShockEvent>,
    pub metrics_history: Vec<MetricRecord>,
    pub turn_investment_mchf: f64,
    pub turn_extra_emissions_t: f64,
    pub rng: ChaCha8Rng,
}

impl GameState {
    pub fn plant(&self, id: u32) -> Option<&Plant> {
        self.fleet.iter().find(|p| p.id == id)
    }

    pub fn pending_builds(&self) -> impl Iterator<Item = &Plant> {
        self.fleet.iter().filter(|p| !p.is_active())
    }

    pub fn is_over(&self) -> bool {
        self.status != GameStatus::Playing
    }

    pub fn active_capacity(&self, kind: TechnologyKind) -> f64 {
        self.fleet
            .iter()
            .filter(|p| p.kind == kind)
            .map(Plant::active_capacity)
            .sum()
    }
}
