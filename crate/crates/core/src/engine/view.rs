use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::state::{GameState, GameStatus, PolicyStatus, ShockChoice, ShockEffect, ShockEvent, ShockKind};
use super::{Model, SupplyCheck};
use crate::balance::TechnologyKind;
use crate::metrics::{MetricRecord, ObjectiveFrame, ScoreCard};
use crate::params::{PolicyId, SiteClass};

/// Everything a client needs to draw the game screen. Values are computed
/// here; clients display them as they are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateView {
    pub turn: u8,
    pub turn_count: u8,
    pub model_year: i32,
    pub turn_years: (i32, i32),
    pub status: GameStatus,
    pub objective_frame: ObjectiveFrame,

    /// Seasonal electricity position of the current turn.
    pub supply: SupplyCheck,
    pub summer_surplus_tj: f64,
    pub winter_surplus_tj: f64,
    pub import_level_tj: f64,
    pub import_cap_tj: f64,

    /// Land use and emissions of the current year at the present fleet.
    pub projection: Option<MetricRecord>,

    pub support: f64,

    pub budget_mchf: f64,
    pub loan_outstanding_mchf: f64,
    pub loan_headroom_mchf: f64,
    pub repayment_due_mchf: f64,

    pub policies: Vec<PolicyView>,
    pub policy_proposed_this_turn: bool,

    pub plants: Vec<PlantView>,
    pub pending_builds: Vec<PlantView>,
    pub build_options: Vec<BuildOption>,
    pub free_sites: BTreeMap<SiteClass, u32>,

    pub sequester_t: f64,
    pub sequester_cap_t: f64,

    pub active_shock: Option<ShockView>,
    pub shock_log: Vec<ShockEvent>,
    pub metrics_history: Vec<MetricRecord>,
    /// Present once the game is over.
    pub score_card: Option<ScoreCard>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyView {
    pub id: PolicyId,
    pub name: String,
    pub status: PolicyStatus,
    pub base_acceptance: f64,
    pub campaign_bonus: f64,
    /// Acceptance probability if proposed now; absent once enacted.
    pub probability: Option<f64>,
    pub campaign_cost_mchf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlantView {
    pub id: u32,
    pub kind: TechnologyKind,
    pub capacity_tj: f64,
    pub base_capacity_tj: f64,
    pub upgrades_applied: u32,
    pub max_upgrades: u32,
    pub upgrade_step_tj: f64,
    pub upgrade_cost_mchf: f64,
    pub active: bool,
    pub turns_until_active: u32,
    pub site: Option<SiteClass>,
    pub land_use_km2: f64,
    pub emissions_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BuildOption {
    pub kind: TechnologyKind,
    pub buildable: bool,
    pub capacity_tj: f64,
    pub cost_mchf: f64,
    pub delay_turns: u32,
    pub sites: Vec<SiteClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShockView {
    pub kind: ShockKind,
    pub effect: ShockEffect,
    pub choices: Vec<ShockChoice>,
    pub choice: Option<ShockChoice>,
}

impl StateView {
    pub fn new(model: &Model, state: &GameState) -> StateView {
        let params = model.params();
        let over = state.is_over();
        let supply = if over { SupplyCheck::default() } else { model.check_supply(state) };
        let years = params.turns.years(state.turn.min(params.turns.count()));

        let policies = state
            .policies
            .values()
            .map(|p| {
                let rules = params.policy(p.policy_id);
                PolicyView {
                    id: p.policy_id,
                    name: rules.name.clone(),
                    status: p.status,
                    base_acceptance: p.base_acceptance,
                    campaign_bonus: p.campaign_bonus,
                    probability: model.resolve_policy_probability(state, p.policy_id).ok(),
                    campaign_cost_mchf: rules.campaign_cost_mchf,
                }
            })
            .collect();

        let plant_view = |p: &super::Plant| {
            let tech = &model.technologies()[&p.kind];
            PlantView {
                id: p.id,
                kind: p.kind,
                capacity_tj: p.capacity(),
                base_capacity_tj: p.base_capacity,
                upgrades_applied: p.upgrades_applied,
                max_upgrades: p.max_upgrades,
                upgrade_step_tj: p.upgrade_step,
                upgrade_cost_mchf: model.upgrade_cost(p),
                active: p.is_active(),
                turns_until_active: p.turns_until_active,
                site: p.site,
                land_use_km2: p.capacity() * tech.land_use_factor,
                emissions_t: p.capacity() * tech.emission_factor / 1000.0,
            }
        };

        let build_options = TechnologyKind::ALL
            .iter()
            .map(|&kind| BuildOption {
                kind,
                buildable: kind != TechnologyKind::Nuclear && params.tech(kind).buildable,
                capacity_tj: model.build_capacity(kind),
                cost_mchf: model.build_cost(kind),
                delay_turns: model.build_delay(state, kind),
                sites: model.allowed_sites(state, kind),
            })
            .collect();

        StateView {
            turn: state.turn,
            turn_count: params.turns.count(),
            model_year: state.model_year,
            turn_years: (*years.start(), *years.end()),
            status: state.status,
            objective_frame: state.objective_frame,
            supply,
            summer_surplus_tj: supply.summer_surplus(),
            winter_surplus_tj: supply.winter_surplus(),
            import_level_tj: state.import_level_tj,
            import_cap_tj: params.imports.cap_tj_per_season,
            projection: if over { None } else { model.projected_record(state) },
            support: state.support,
            budget_mchf: state.treasury.budget_mchf,
            loan_outstanding_mchf: state.treasury.loan_outstanding_mchf,
            loan_headroom_mchf: state.treasury.loan_headroom(),
            repayment_due_mchf: state.treasury.repayment_due(),
            policies,
            policy_proposed_this_turn: state.policy_proposed_this_turn,
            plants: state.fleet.iter().filter(|p| p.is_active()).map(plant_view).collect(),
            pending_builds: state.pending_builds().map(plant_view).collect(),
            build_options,
            free_sites: state.free_sites.clone(),
            sequester_t: state.sequester_t,
            sequester_cap_t: params.sequestration.cap_t_per_year,
            active_shock: state.active_shock.as_ref().map(|s| ShockView {
                kind: s.kind,
                effect: s.effect,
                choices: s.kind.choices().to_vec(),
                choice: s.choice,
            }),
            shock_log: state.shock_log.clone(),
            metrics_history: state.metrics_history.clone(),
            score_card: (state.status != GameStatus::Playing).then(|| model.score(state)),
        }
    }
}
