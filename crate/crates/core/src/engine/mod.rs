//! Turn-based game engine.
//!
//! [`Model`] bundles the immutable inputs of a game (scenario, calibration,
//! parameters) and implements every rule as a function from one
//! [`GameState`] to the next. Rejected actions leave the state untouched,
//! including the random generator, so a game is fully determined by its
//! seed and the ordered list of actions.

mod action;
mod game;
mod state;
mod view;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use action::{Action, ActionDetail, ActionError, ActionOutcome, ActionRecord, IndicatorDeltas};
pub use game::{Game, ReplayError};
pub use state::{
    GameState, GameStatus, Plant, PolicyState, PolicyStatus, ShockChoice, ShockEffect, ShockEvent,
    ShockKind, Treasury,
};
pub use view::{BuildOption, PlantView, PolicyView, ShockView, StateView};

use crate::balance::{
    build_annual_balance, seasonal_decompose, AnnualBalance, BalanceError, CarrierKind, SeasonalSplits,
    Sector, TechParams, TechnologyKind, YearInputs,
};
use crate::calibration::{CalibrationError, CalibrationSet};
use crate::metrics::{accumulate, annual_metrics, MetricRecord, ObjectiveFrame, ScoreCard, YearExtras};
use crate::params::{Parameters, ParamsError, PolicyEffect, PolicyId, SiteClass};
use crate::scenario::{Scenario, ScenarioData, ScenarioError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error("start-year balance does not close for: {0}")]
    Unbalanced(String),
    #[error("turn years {first}..={last} fall outside the modelled horizon")]
    Horizon { first: i32, last: i32 },
}

/// Electricity position of one season, TJ.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeasonPosition {
    pub supply_tj: f64,
    pub demand_tj: f64,
}

impl SeasonPosition {
    pub fn surplus(&self) -> f64 {
        self.supply_tj - self.demand_tj
    }
}

/// Result of a supply check over the years of the current turn. Each season
/// reports the year with the smallest surplus.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SupplyCheck {
    pub summer: SeasonPosition,
    pub winter: SeasonPosition,
}

impl SupplyCheck {
    pub fn summer_surplus(&self) -> f64 {
        self.summer.surplus()
    }

    pub fn winter_surplus(&self) -> f64 {
        self.winter.surplus()
    }

    pub fn is_sufficient(&self) -> bool {
        self.summer_surplus() >= 0.0 && self.winter_surplus() >= 0.0
    }
}

/// Immutable inputs shared by every game.
#[derive(Debug, Clone)]
pub struct Model {
    scenario: Scenario,
    calibration: CalibrationSet,
    params: Parameters,
    splits: SeasonalSplits,
    technologies: BTreeMap<TechnologyKind, TechParams>,
    carrier_factors: BTreeMap<CarrierKind, f64>,
    /// Forecast inputs for every modelled year, before player modifiers.
    base_inputs: BTreeMap<i32, YearInputs>,
}

impl Model {
    pub fn new(scenario: Scenario, calibration: CalibrationSet, params: Parameters) -> Result<Model, ModelError> {
        let splits = calibration.splits();
        let mut technologies = scenario.technologies.clone();
        for (kind, tech) in technologies.iter_mut() {
            tech.summer_share = splits.supply_share(*kind)?;
            tech.validate()?;
        }

        let first = params.turns.start_years[0];
        let last = params.turns.final_year;
        if first < crate::balance::FIRST_YEAR || last > crate::balance::LAST_YEAR {
            return Err(ModelError::Horizon { first, last });
        }
        let mut base_inputs = BTreeMap::new();
        for year in first..=last {
            base_inputs.insert(year, calibration.year_inputs(year)?);
        }

        let carrier_factors = CarrierKind::ALL
            .iter()
            .map(|&c| (c, calibration.emission_factor(c)))
            .collect();

        let model = Model {
            scenario,
            calibration,
            params,
            splits,
            technologies,
            carrier_factors,
            base_inputs,
        };

        let probe = model.new_game(0, ObjectiveFrame::SupplyOnly);
        let balance = model.balance_for(&probe, first)?;
        let open = balance.unclosed_carriers();
        if !open.is_empty() {
            let names: Vec<String> = open.iter().map(|c| c.to_string()).collect();
            return Err(ModelError::Unbalanced(names.join(", ")));
        }
        for sector in model.electricity_sectors() {
            model.splits.demand_share(sector)?;
        }
        Ok(model)
    }

    /// Model over the bundled Swiss 2022 scenario and default parameters.
    pub fn bundled() -> Model {
        Model::from_data(&ScenarioData::bundled(), Parameters::default()).expect("bundled model is consistent")
    }

    /// Calibrates a model from scenario data.
    pub fn from_data(data: &ScenarioData, params: Parameters) -> Result<Model, ModelError> {
        let scenario = Scenario::from_data(data)?;
        let calibration = CalibrationSet::fit(data)?;
        Model::new(scenario, calibration, params)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn calibration(&self) -> &CalibrationSet {
        &self.calibration
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn technologies(&self) -> &BTreeMap<TechnologyKind, TechParams> {
        &self.technologies
    }

    pub fn splits(&self) -> &SeasonalSplits {
        &self.splits
    }

    fn electricity_sectors(&self) -> Vec<Sector> {
        let Some(inputs) = self.base_inputs.values().next() else { return Vec::new() };
        inputs
            .consumption
            .keys()
            .filter(|(c, _)| *c == CarrierKind::Electricity)
            .map(|&(_, s)| s)
            .collect()
    }

    pub fn new_game(&self, seed: u64, objective_frame: ObjectiveFrame) -> GameState {
        let mut fleet = Vec::new();
        let mut next_plant_id = 1;
        for (&kind, rules) in &self.params.technologies {
            let total = self.scenario.capacities.get(&kind).copied().unwrap_or(0.0);
            if rules.initial_plants == 0 || total <= 0.0 {
                continue;
            }
            // Each plant gets an equal share; the last takes the remainder so
            // the fleet sums to the scenario capacity exactly.
            let share = total / rules.initial_plants as f64;
            let mut assigned = 0.0;
            for i in 0..rules.initial_plants {
                let base = if i + 1 == rules.initial_plants { total - assigned } else { share };
                assigned += base;
                fleet.push(Plant {
                    id: next_plant_id,
                    kind,
                    base_capacity: base,
                    upgrade_step: base * rules.upgrade_pct / 100.0,
                    upgrades_applied: 0,
                    max_upgrades: rules.max_upgrades,
                    turns_until_active: 0,
                    site: None,
                });
                next_plant_id += 1;
            }
        }

        let policies = self
            .params
            .policies
            .iter()
            .map(|(&id, rules)| {
                (
                    id,
                    PolicyState {
                        policy_id: id,
                        base_acceptance: rules.acceptance,
                        campaign_bonus: 0.0,
                        status: PolicyStatus::Available,
                    },
                )
            })
            .collect();

        let t = &self.params.treasury;
        GameState {
            seed,
            objective_frame,
            turn: 1,
            model_year: self.params.turns.start_years[0],
            status: GameStatus::Playing,
            fleet,
            next_plant_id,
            treasury: Treasury {
                budget_mchf: t.initial_budget_mchf,
                loan_outstanding_mchf: 0.0,
                loan_cap_per_turn_mchf: t.loan_cap_mchf,
                interest_rate: t.interest_rate,
            },
            support: self.params.support.initial,
            policies,
            policy_proposed_this_turn: false,
            import_level_tj: self.params.imports.initial_tj_per_season,
            sequester_t: 0.0,
            free_sites: self.params.sites.clone(),
            demand_factor: 1.0,
            active_shock: None,
            shock_log: Vec::new(),
            metrics_history: Vec::new(),
            turn_investment_mchf: 0.0,
            turn_extra_emissions_t: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    // ---- derived quantities -------------------------------------------------

    fn enacted_effects<'a>(&'a self, state: &'a GameState) -> impl Iterator<Item = &'a PolicyEffect> + 'a {
        state
            .policies
            .values()
            .filter(|p| p.status == PolicyStatus::Enacted)
            .flat_map(move |p| self.params.policy(p.policy_id).effects.iter())
    }

    /// Demand multiplier of enacted policies for one sector.
    pub fn sector_factor(&self, state: &GameState, sector: Sector) -> f64 {
        self.enacted_effects(state)
            .filter_map(|e| match e {
                PolicyEffect::Demand { sector: s, factor } if *s == sector => Some(*factor),
                _ => None,
            })
            .product()
    }

    /// Upgrade cap for plants of a technology, policy extras included.
    pub fn upgrade_cap(&self, state: &GameState, kind: TechnologyKind) -> u32 {
        let extra: u32 = self
            .enacted_effects(state)
            .filter_map(|e| match e {
                PolicyEffect::UpgradeCap { technology, extra } if *technology == kind => Some(*extra),
                _ => None,
            })
            .sum();
        self.params.tech(kind).max_upgrades + extra
    }

    pub fn build_delay(&self, state: &GameState, kind: TechnologyKind) -> u32 {
        let reduction: u32 = self
            .enacted_effects(state)
            .filter_map(|e| match e {
                PolicyEffect::BuildDelay { technology, reduction } if *technology == kind => Some(*reduction),
                _ => None,
            })
            .sum();
        self.params.tech(kind).build_delay_turns.saturating_sub(reduction)
    }

    pub fn allowed_sites(&self, state: &GameState, kind: TechnologyKind) -> Vec<SiteClass> {
        let mut sites = self.params.tech(kind).sites.clone();
        for effect in self.enacted_effects(state) {
            if let PolicyEffect::SiteAccess { technology, site } = effect {
                if *technology == kind && !sites.contains(site) {
                    sites.push(*site);
                }
            }
        }
        sites.sort();
        sites
    }

    /// Capacity of a newly built plant, TJ/yr.
    pub fn build_capacity(&self, kind: TechnologyKind) -> f64 {
        let start = self.scenario.capacities.get(&kind).copied().unwrap_or(0.0);
        start * self.params.tech(kind).build_pct / 100.0
    }

    pub fn build_cost(&self, kind: TechnologyKind) -> f64 {
        self.build_capacity(kind) * self.params.tech(kind).cost_mchf_per_tj
    }

    pub fn upgrade_cost(&self, plant: &Plant) -> f64 {
        plant.upgrade_step * self.params.tech(plant.kind).cost_mchf_per_tj
    }

    /// Turn's forecast inputs with player modifiers applied.
    pub fn year_inputs(&self, state: &GameState, year: i32) -> Result<YearInputs, BalanceError> {
        let base = self
            .base_inputs
            .get(&year)
            .ok_or(BalanceError::YearOutOfRange(year))?;
        let mut inputs = base.clone();
        for ((_, sector), value) in inputs.consumption.iter_mut() {
            *value *= self.sector_factor(state, *sector) * state.demand_factor;
        }
        inputs
            .contracted_imports
            .insert(CarrierKind::Electricity, 2.0 * state.import_level_tj);
        Ok(inputs)
    }

    fn active_fleet(&self, state: &GameState) -> Vec<(TechParams, f64)> {
        TechnologyKind::ALL
            .iter()
            .filter_map(|kind| {
                let capacity = state.active_capacity(*kind);
                (capacity > 0.0).then(|| (self.technologies[kind], capacity))
            })
            .collect()
    }

    /// Energy balance of one year under the current state.
    pub fn balance_for(&self, state: &GameState, year: i32) -> Result<AnnualBalance, BalanceError> {
        let inputs = self.year_inputs(state, year)?;
        build_annual_balance(&inputs, &self.active_fleet(state), &self.scenario.loss_rates)
    }

    fn turn_years(&self, turn: u8) -> std::ops::RangeInclusive<i32> {
        self.params.turns.years(turn)
    }

    /// Extra seasonal demand caused by the active shock, as (summer, winter)
    /// multipliers. Conservation cancels the increase.
    fn shock_multipliers(state: &GameState) -> (f64, f64) {
        let Some(shock) = &state.active_shock else { return (1.0, 1.0) };
        if shock.choice == Some(ShockChoice::Conservation) {
            return (1.0, 1.0);
        }
        match shock.effect {
            ShockEffect::WinterDemand { factor } => (1.0, factor),
            ShockEffect::SummerDemand { factor } => (factor, 1.0),
            _ => (1.0, 1.0),
        }
    }

    fn supply_position(&self, state: &GameState, mitigated: bool) -> SupplyCheck {
        let (summer_mult, winter_mult) = Self::shock_multipliers(state);
        let covered = mitigated
            && matches!(
                state.active_shock.as_ref().and_then(|s| s.choice),
                Some(ShockChoice::EmergencyImports | ShockChoice::GasPeakers)
            );
        let mut worst: Option<SupplyCheck> = None;
        for year in self.turn_years(state.turn) {
            let balance = match self.balance_for(state, year) {
                Ok(b) => b,
                Err(_) => continue,
            };
            let Ok(seasonal) = seasonal_decompose(&balance, &self.splits) else { continue };
            let summer_demand = seasonal.summer_demand * summer_mult;
            let winter_demand = seasonal.winter_demand * winter_mult;
            let mut summer_supply = seasonal.summer_supply + state.import_level_tj;
            let mut winter_supply = seasonal.winter_supply + state.import_level_tj;
            if covered {
                summer_supply += summer_demand - seasonal.summer_demand;
                winter_supply += winter_demand - seasonal.winter_demand;
            }
            let here = SupplyCheck {
                summer: SeasonPosition {
                    supply_tj: summer_supply,
                    demand_tj: summer_demand,
                },
                winter: SeasonPosition {
                    supply_tj: winter_supply,
                    demand_tj: winter_demand,
                },
            };
            worst = Some(match worst {
                None => here,
                Some(w) => SupplyCheck {
                    summer: if here.summer.surplus() < w.summer.surplus() { here.summer } else { w.summer },
                    winter: if here.winter.surplus() < w.winter.surplus() { here.winter } else { w.winter },
                },
            });
        }
        worst.unwrap_or_default()
    }

    /// Seasonal electricity surpluses for the current turn, shock response
    /// included.
    pub fn check_supply(&self, state: &GameState) -> SupplyCheck {
        self.supply_position(state, true)
    }

    pub fn resolve_policy_probability(&self, state: &GameState, id: PolicyId) -> Result<f64, ActionError> {
        let policy = &state.policies[&id];
        if policy.status == PolicyStatus::Enacted {
            return Err(ActionError::AlreadyEnacted(id));
        }
        let support = &self.params.support;
        let p = policy.base_acceptance + policy.campaign_bonus + (state.support - support.neutral) / support.divisor;
        Ok(p.clamp(0.0, 1.0))
    }

    /// Metric record of one year under the current state.
    fn year_record(&self, state: &GameState, year: i32, first_of_turn: bool) -> Result<MetricRecord, BalanceError> {
        let balance = self.balance_for(state, year)?;
        let extras = YearExtras {
            investment_mchf: if first_of_turn { state.turn_investment_mchf } else { 0.0 },
            sequestered_t: state.sequester_t,
            additional_emissions_t: if first_of_turn { state.turn_extra_emissions_t } else { 0.0 },
        };
        Ok(annual_metrics(&balance, &self.technologies, &self.carrier_factors, extras))
    }

    /// Metrics of the current model year if the turn ended now.
    pub fn projected_record(&self, state: &GameState) -> Option<MetricRecord> {
        let first = *self.turn_years(state.turn.min(self.params.turns.count())).start();
        self.year_record(state, state.model_year, state.model_year == first).ok()
    }

    /// Score card of the game so far. Unfinished games include the current
    /// model year and are flagged partial.
    pub fn score(&self, state: &GameState) -> ScoreCard {
        let mut records = state.metrics_history.clone();
        let partial = state.status != GameStatus::Completed;
        if partial {
            if let Some(r) = self.projected_record(state) {
                if records.last().is_none_or(|last| last.year < r.year) {
                    records.push(r);
                }
            }
        }
        let mut card = accumulate(&records).unwrap_or_else(|_| ScoreCard {
            nuclear_fuel_tj: 0.0,
            fossil_fuel_tj: 0.0,
            electricity_imports_tj: 0.0,
            emissions_mt: 0.0,
            investment_mchf: 0.0,
            land_use_km2: 0.0,
            summer_share_pct: 0.0,
            generation_tj: 0.0,
            first_year: state.model_year,
            last_year: state.model_year,
            objective_frame: None,
            partial: true,
        });
        card.objective_frame = Some(state.objective_frame);
        card.partial = partial;
        card
    }

    // ---- actions ------------------------------------------------------------

    /// Applies one action. On success returns the next state; on failure the
    /// caller's state is untouched.
    pub fn apply_action(&self, state: &GameState, action: &Action) -> Result<(GameState, ActionDetail), ActionError> {
        match state.status {
            GameStatus::Completed => return Err(ActionError::GameComplete),
            GameStatus::Abandoned => return Err(ActionError::GameAbandoned),
            GameStatus::Playing => {}
        }
        let mut next = state.clone();
        let detail = match *action {
            Action::Build { technology, site } => self.build(&mut next, technology, site)?,
            Action::Upgrade { plant_id } => self.upgrade(&mut next, plant_id)?,
            Action::Decommission { plant_id } => {
                let idx = next
                    .fleet
                    .iter()
                    .position(|p| p.id == plant_id)
                    .ok_or(ActionError::UnknownPlant(plant_id))?;
                let plant = next.fleet.remove(idx);
                if let Some(site) = plant.site {
                    *next.free_sites.entry(site).or_default() += 1;
                }
                ActionDetail::None
            }
            Action::SetImport { tj_per_season } => {
                let cap = self.params.imports.cap_tj_per_season;
                if !(0.0..=cap).contains(&tj_per_season) {
                    return Err(ActionError::InvalidAmount(format!(
                        "import level {tj_per_season} TJ/season outside 0..={cap}"
                    )));
                }
                next.import_level_tj = tj_per_season;
                ActionDetail::None
            }
            Action::Borrow { mchf } => {
                if !(mchf > 0.0 && mchf.is_finite()) {
                    return Err(ActionError::InvalidAmount(format!("loan amount {mchf}")));
                }
                let available = next.treasury.loan_headroom();
                if mchf > available {
                    return Err(ActionError::LoanCapExceeded {
                        requested: mchf,
                        available,
                    });
                }
                next.treasury.loan_outstanding_mchf += mchf;
                next.treasury.budget_mchf += mchf;
                ActionDetail::None
            }
            Action::ProposePolicy { policy } => self.propose(&mut next, policy)?,
            Action::Campaign { policy } => {
                let rules = self.params.policy(policy);
                if next.policies[&policy].status == PolicyStatus::Enacted {
                    return Err(ActionError::AlreadyEnacted(policy));
                }
                spend(&mut next, rules.campaign_cost_mchf)?;
                next.policies.get_mut(&policy).expect("policy").campaign_bonus += rules.campaign_bonus;
                ActionDetail::None
            }
            Action::SetSequester { t_per_year } => {
                let cap = self.params.sequestration.cap_t_per_year;
                if !(0.0..=cap).contains(&t_per_year) {
                    return Err(ActionError::InvalidAmount(format!(
                        "sequestration {t_per_year} t/yr outside 0..={cap}"
                    )));
                }
                next.sequester_t = t_per_year;
                ActionDetail::None
            }
            Action::RespondShock { choice } => self.respond(&mut next, choice)?,
            Action::EndTurn => self.end_turn(&mut next)?,
            Action::Abandon => {
                next.status = GameStatus::Abandoned;
                ActionDetail::None
            }
        };
        Ok((next, detail))
    }

    fn build(&self, state: &mut GameState, kind: TechnologyKind, site: SiteClass) -> Result<ActionDetail, ActionError> {
        if kind == TechnologyKind::Nuclear {
            return Err(ActionError::NuclearBuildForbidden);
        }
        let rules = self.params.tech(kind);
        if !rules.buildable {
            return Err(ActionError::NotBuildable(kind));
        }
        if !self.allowed_sites(state, kind).contains(&site) {
            return Err(ActionError::SiteNotAllowed { technology: kind, site });
        }
        if state.free_sites.get(&site).copied().unwrap_or(0) == 0 {
            return Err(ActionError::NoFreeSite(site));
        }
        let capacity = self.build_capacity(kind);
        let cost = capacity * rules.cost_mchf_per_tj;
        spend(state, cost)?;
        state.turn_investment_mchf += cost;
        *state.free_sites.get_mut(&site).expect("site class") -= 1;
        let delay = self.build_delay(state, kind);
        let id = state.next_plant_id;
        state.next_plant_id += 1;
        state.fleet.push(Plant {
            id,
            kind,
            base_capacity: capacity,
            upgrade_step: capacity * rules.upgrade_pct / 100.0,
            upgrades_applied: 0,
            max_upgrades: self.upgrade_cap(state, kind),
            turns_until_active: delay,
            site: Some(site),
        });
        Ok(ActionDetail::Built {
            plant_id: id,
            capacity_tj: capacity,
            cost_mchf: cost,
            active_from_turn: state.turn + delay as u8,
        })
    }

    fn upgrade(&self, state: &mut GameState, plant_id: u32) -> Result<ActionDetail, ActionError> {
        let plant = state.plant(plant_id).ok_or(ActionError::UnknownPlant(plant_id))?;
        if !plant.is_active() {
            return Err(ActionError::PlantNotActive(plant_id));
        }
        if plant.upgrades_applied >= plant.max_upgrades {
            return Err(ActionError::UpgradeCapReached {
                plant_id,
                cap: plant.max_upgrades,
            });
        }
        let cost = self.upgrade_cost(plant);
        spend(state, cost)?;
        state.turn_investment_mchf += cost;
        let plant = state.fleet.iter_mut().find(|p| p.id == plant_id).expect("plant exists");
        plant.upgrades_applied += 1;
        Ok(ActionDetail::Upgraded {
            plant_id,
            capacity_tj: plant.capacity(),
            cost_mchf: cost,
        })
    }

    fn propose(&self, state: &mut GameState, id: PolicyId) -> Result<ActionDetail, ActionError> {
        let probability = self.resolve_policy_probability(state, id)?;
        if state.policy_proposed_this_turn {
            return Err(ActionError::PolicyAlreadyProposed);
        }
        state.policy_proposed_this_turn = true;
        let roll: f64 = state.rng.random();
        let enacted = roll < probability;
        state.policies.get_mut(&id).expect("policy").status = if enacted {
            PolicyStatus::Enacted
        } else {
            PolicyStatus::RejectedThisTurn
        };
        if enacted {
            for effect in &self.params.policy(id).effects {
                if let PolicyEffect::UpgradeCap { technology, extra } = effect {
                    for plant in state.fleet.iter_mut().filter(|p| p.kind == *technology) {
                        plant.max_upgrades += extra;
                    }
                }
            }
        }
        Ok(ActionDetail::PolicyVote {
            policy: id,
            probability,
            roll,
            enacted,
        })
    }

    fn respond(&self, state: &mut GameState, choice: ShockChoice) -> Result<ActionDetail, ActionError> {
        let shock = state.active_shock.as_ref().ok_or(ActionError::NoShockToRespond)?;
        if shock.choice.is_some() || shock.kind.choices().is_empty() {
            return Err(ActionError::NoShockToRespond);
        }
        if !shock.kind.choices().contains(&choice) {
            return Err(ActionError::InvalidShockChoice {
                shock: shock.kind,
                choice,
            });
        }
        let kind = shock.kind;
        let responses = &self.params.shocks.responses;
        match choice {
            ShockChoice::EmergencyImports => {
                spend(state, responses.emergency_imports.cost_mchf)?;
                adjust_support(state, responses.emergency_imports.support);
            }
            ShockChoice::GasPeakers => {
                state.turn_extra_emissions_t += responses.gas_peakers.emissions_t;
                adjust_support(state, responses.gas_peakers.support);
            }
            ShockChoice::Conservation => adjust_support(state, responses.conservation.support),
            ShockChoice::Reintroduce | ShockChoice::PhaseOut => {}
        }
        state.active_shock.as_mut().expect("shock").choice = Some(choice);
        Ok(ActionDetail::ShockAnswered { shock: kind, choice })
    }

    fn end_turn(&self, state: &mut GameState) -> Result<ActionDetail, ActionError> {
        let check = self.check_supply(state);
        if !check.is_sufficient() {
            return Err(ActionError::InsufficientSupply {
                summer_surplus_tj: check.summer_surplus(),
                winter_surplus_tj: check.winter_surplus(),
            });
        }

        let years = self.turn_years(state.turn);
        let (first_year, last_year) = (*years.start(), *years.end());
        for year in years.clone() {
            let record = self
                .year_record(state, year, year == first_year)
                .expect("turn years lie inside the modelled horizon");
            state.metrics_history.push(record);
        }

        let n_years = (last_year - first_year + 1) as f64;
        let production: f64 = state
            .fleet
            .iter()
            .map(|p| p.active_capacity() * self.technologies[&p.kind].generation_cost)
            .sum::<f64>()
            / 1e6;
        let imports = 2.0 * state.import_level_tj * self.params.imports.price_chf_per_tj / 1e6;
        let sequestration = state.sequester_t * self.params.sequestration.price_chf_per_t / 1e6;
        let running = n_years * (production + imports + sequestration);
        let repayment = state.treasury.repayment_due();

        let shocks = &self.params.shocks;
        let mut withstood = None;
        let mut credit = self.params.treasury.budget_per_turn_mchf;
        if let Some(shock) = &state.active_shock {
            if shock.kind.raises_demand() {
                let ok = self.supply_position(&without_response(state), false).is_sufficient();
                withstood = Some(ok);
                if ok {
                    credit *= 1.0 + shocks.withstand_budget_bonus;
                }
            }
        }

        let settled = running + repayment;
        let budget = state.treasury.budget_mchf - settled + credit;
        if budget < 0.0 {
            return Err(ActionError::InsufficientFunds { shortfall_mchf: -budget });
        }
        state.treasury.budget_mchf = budget;
        state.treasury.loan_outstanding_mchf = 0.0;
        if withstood == Some(true) {
            adjust_support(state, shocks.withstand_support_points);
        }

        if let Some(mut shock) = state.active_shock.take() {
            shock.withstood = withstood;
            state.shock_log.push(shock);
        }
        for plant in state.fleet.iter_mut() {
            plant.turns_until_active = plant.turns_until_active.saturating_sub(1);
        }
        for policy in state.policies.values_mut() {
            if policy.status == PolicyStatus::RejectedThisTurn {
                policy.status = PolicyStatus::Available;
            }
        }
        state.policy_proposed_this_turn = false;
        state.turn_investment_mchf = 0.0;
        state.turn_extra_emissions_t = 0.0;

        let ended = state.turn;
        let completed = ended >= self.params.turns.count();
        let mut next_shock = None;
        if completed {
            state.status = GameStatus::Completed;
            state.model_year = self.params.turns.final_year;
        } else {
            state.turn += 1;
            state.model_year = *self.turn_years(state.turn).start();
            if let Some(event) = self.draw_shock(state) {
                next_shock = Some(event.kind);
                state.active_shock = Some(event);
            }
        }
        Ok(ActionDetail::TurnEnded {
            turn: ended,
            first_year,
            last_year,
            settled_mchf: settled,
            withstood,
            next_shock,
            completed,
        })
    }

    /// Draws the shock for the turn `state` has just entered and applies its
    /// immediate effects.
    pub fn draw_shock(&self, state: &mut GameState) -> Option<ShockEvent> {
        let shocks = &self.params.shocks;
        let kind = if state.turn == shocks.nuclear_turn {
            ShockKind::NuclearReintroduction
        } else {
            let roll: f64 = state.rng.random();
            if roll >= shocks.occurrence_probability {
                return None;
            }
            let seen = |k: ShockKind| {
                state.shock_log.iter().any(|s| s.kind == k) || state.active_shock.as_ref().is_some_and(|s| s.kind == k)
            };
            let eligible: Vec<ShockKind> = ShockKind::ALL
                .into_iter()
                .filter(|&k| k != ShockKind::NuclearReintroduction && (k.recurs() || !seen(k)))
                .collect();
            eligible[state.rng.random_range(0..eligible.len())]
        };
        let factor = 1.0 + shocks.demand_increase;
        let effect = match kind {
            ShockKind::ColdSpell => ShockEffect::WinterDemand { factor },
            ShockKind::HeatWave => ShockEffect::SummerDemand { factor },
            ShockKind::MassImmigration => {
                state.demand_factor *= factor;
                ShockEffect::Demand { factor }
            }
            ShockKind::RenewableSupport => {
                adjust_support(state, shocks.renewable_support_points);
                ShockEffect::Support {
                    points: shocks.renewable_support_points,
                }
            }
            ShockKind::GlaciersMelting => ShockEffect::Information,
            ShockKind::NuclearReintroduction => ShockEffect::Preference,
        };
        Some(ShockEvent {
            kind,
            turn: state.turn,
            effect,
            choice: None,
            withstood: None,
        })
    }
}

fn spend(state: &mut GameState, cost: f64) -> Result<(), ActionError> {
    if cost > state.treasury.budget_mchf {
        return Err(ActionError::InsufficientBudget {
            needed: cost,
            available: state.treasury.budget_mchf,
        });
    }
    state.treasury.budget_mchf -= cost;
    Ok(())
}

fn adjust_support(state: &mut GameState, points: f64) {
    state.support = (state.support + points).clamp(0.0, 100.0);
}

/// Copy of the state as if the active shock had not been answered.
fn without_response(state: &GameState) -> GameState {
    let mut bare = state.clone();
    if let Some(shock) = bare.active_shock.as_mut() {
        shock.choice = None;
    }
    bare
}
