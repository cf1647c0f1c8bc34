//! Game parameter file (TOML).
//!
//! The bundled `params-default.toml` carries the build/upgrade table, the
//! policy acceptance probabilities and the shock effects, plus the monetary
//! and political defaults. Any value may be overridden by supplying a
//! complete file of the same shape.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{Sector, TechnologyKind};

pub const BUNDLED_PARAMETERS: &str = include_str!("../data/params-default.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("parameter file: {0}")]
    Parse(String),
    #[error("parameter file incomplete: {0}")]
    Incomplete(String),
    #[error("parameter `{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteClass {
    Water,
    Land,
    Alpine,
}

impl SiteClass {
    pub const ALL: [SiteClass; 3] = [SiteClass::Water, SiteClass::Land, SiteClass::Alpine];
}

impl fmt::Display for SiteClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SiteClass::Water => "water",
            SiteClass::Land => "land",
            SiteClass::Alpine => "alpine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyId {
    EnableAlpinePv,
    FastTrackWind,
    WindParkRegulation,
    BuildingInsulation,
    IndustrySubsidy,
}

impl PolicyId {
    pub const ALL: [PolicyId; 5] = [
        PolicyId::EnableAlpinePv,
        PolicyId::FastTrackWind,
        PolicyId::WindParkRegulation,
        PolicyId::BuildingInsulation,
        PolicyId::IndustrySubsidy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyId::EnableAlpinePv => "enable_alpine_pv",
            PolicyId::FastTrackWind => "fast_track_wind",
            PolicyId::WindParkRegulation => "wind_park_regulation",
            PolicyId::BuildingInsulation => "building_insulation",
            PolicyId::IndustrySubsidy => "industry_subsidy",
        }
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnParams {
    pub start_years: Vec<i32>,
    pub final_year: i32,
}

impl TurnParams {
    pub fn count(&self) -> u8 {
        self.start_years.len() as u8
    }

    /// Model years covered by `turn` (1-based).
    pub fn years(&self, turn: u8) -> std::ops::RangeInclusive<i32> {
        let i = turn as usize - 1;
        let start = self.start_years[i];
        let end = self
            .start_years
            .get(i + 1)
            .map(|next| next - 1)
            .unwrap_or(self.final_year);
        start..=end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreasuryParams {
    pub initial_budget_mchf: f64,
    pub budget_per_turn_mchf: f64,
    pub loan_cap_mchf: f64,
    pub interest_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportParams {
    pub initial: f64,
    pub neutral: f64,
    pub divisor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportParams {
    pub initial_tj_per_season: f64,
    pub cap_tj_per_season: f64,
    pub price_chf_per_tj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequestrationParams {
    pub price_chf_per_t: f64,
    pub cap_t_per_year: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechRules {
    /// New plant capacity, % of the technology's start-year capacity.
    pub build_pct: f64,
    /// Capacity added per upgrade, % of the plant's base capacity.
    pub upgrade_pct: f64,
    pub max_upgrades: u32,
    pub build_delay_turns: u32,
    pub cost_mchf_per_tj: f64,
    pub sites: Vec<SiteClass>,
    pub initial_plants: u32,
    #[serde(default = "yes")]
    pub buildable: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyEffect {
    UpgradeCap { technology: TechnologyKind, extra: u32 },
    SiteAccess { technology: TechnologyKind, site: SiteClass },
    BuildDelay { technology: TechnologyKind, reduction: u32 },
    Demand { sector: Sector, factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRules {
    pub name: String,
    pub acceptance: f64,
    pub campaign_bonus: f64,
    pub campaign_cost_mchf: f64,
    pub effects: Vec<PolicyEffect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmergencyImports {
    pub cost_mchf: f64,
    pub support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasPeakers {
    pub emissions_t: f64,
    pub support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conservation {
    pub support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockResponses {
    pub emergency_imports: EmergencyImports,
    pub gas_peakers: GasPeakers,
    pub conservation: Conservation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockParams {
    pub occurrence_probability: f64,
    pub nuclear_turn: u8,
    pub demand_increase: f64,
    pub renewable_support_points: f64,
    pub withstand_support_points: f64,
    pub withstand_budget_bonus: f64,
    pub responses: ShockResponses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub turns: TurnParams,
    pub treasury: TreasuryParams,
    pub support: SupportParams,
    pub imports: ImportParams,
    pub sequestration: SequestrationParams,
    pub sites: BTreeMap<SiteClass, u32>,
    pub technologies: BTreeMap<TechnologyKind, TechRules>,
    pub policies: BTreeMap<PolicyId, PolicyRules>,
    pub shocks: ShockParams,
}

impl Default for Parameters {
    fn default() -> Self {
        Parameters::parse(BUNDLED_PARAMETERS).expect("bundled parameters are valid")
    }
}

impl Parameters {
    pub fn parse(text: &str) -> Result<Parameters, ParamsError> {
        let params: Parameters = toml::from_str(text).map_err(|e| ParamsError::Parse(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Parameters, ParamsError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ParamsError::Parse(format!("{}: {e}", path.as_ref().display())))?;
        Parameters::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("parameters serialize")
    }

    pub fn tech(&self, kind: TechnologyKind) -> &TechRules {
        &self.technologies[&kind]
    }

    pub fn policy(&self, id: PolicyId) -> &PolicyRules {
        &self.policies[&id]
    }

    fn validate(&self) -> Result<(), ParamsError> {
        let invalid = |key: &str, message: &str| ParamsError::Invalid {
            key: key.into(),
            message: message.into(),
        };
        for &kind in TechnologyKind::ALL {
            if !self.technologies.contains_key(&kind) {
                return Err(ParamsError::Incomplete(format!("technologies.{kind}")));
            }
        }
        for id in PolicyId::ALL {
            if !self.policies.contains_key(&id) {
                return Err(ParamsError::Incomplete(format!("policies.{id}")));
            }
        }
        for class in SiteClass::ALL {
            if !self.sites.contains_key(&class) {
                return Err(ParamsError::Incomplete(format!("sites.{class}")));
            }
        }
        let years = &self.turns.start_years;
        if years.is_empty() || years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("turns.start_years", "must be non-empty and increasing"));
        }
        if self.turns.final_year < *years.last().unwrap() {
            return Err(invalid("turns.final_year", "before the last turn start"));
        }
        if !(0.0..=1.0).contains(&self.shocks.occurrence_probability) {
            return Err(invalid("shocks.occurrence_probability", "not a probability"));
        }
        if self.shocks.nuclear_turn < 2 || self.shocks.nuclear_turn > self.turns.count() {
            return Err(invalid("shocks.nuclear_turn", "must fall on turn 2 or later"));
        }
        for (id, p) in &self.policies {
            if !(0.0..=1.0).contains(&p.acceptance) {
                return Err(invalid(&format!("policies.{id}.acceptance"), "not a probability"));
            }
        }
        if self.support.divisor <= 0.0 {
            return Err(invalid("support.divisor", "must be positive"));
        }
        if self.treasury.loan_cap_mchf < 0.0 || self.treasury.interest_rate < 0.0 {
            return Err(invalid("treasury", "negative loan cap or interest"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_build_table() {
        let p = Parameters::default();
        let expect = [
            (TechnologyKind::River, 50.0, 1.0, 10),
            (TechnologyKind::Reservoir, 50.0, 1.0, 10),
            (TechnologyKind::Solar, 25.0, 5.0, 7),
            (TechnologyKind::Wind, 100.0, 50.0, 7),
            (TechnologyKind::Gas, 100.0, 50.0, 0),
            (TechnologyKind::Biomass, 100.0, 50.0, 0),
            (TechnologyKind::Biogas, 100.0, 50.0, 0),
            (TechnologyKind::Waste, 25.0, 6.25, 0),
        ];
        for (kind, build, upgrade, cap) in expect {
            let t = p.tech(kind);
            assert_eq!((t.build_pct, t.upgrade_pct, t.max_upgrades), (build, upgrade, cap), "{kind}");
        }
        assert!(!p.tech(TechnologyKind::Nuclear).buildable);
        assert_eq!(p.tech(TechnologyKind::Wind).build_delay_turns, 2);
        assert_eq!(p.tech(TechnologyKind::River).build_delay_turns, 3);
        assert_eq!(p.tech(TechnologyKind::Reservoir).build_delay_turns, 6);
    }

    #[test]
    fn bundled_policy_table() {
        let p = Parameters::default();
        let probs: Vec<f64> = [
            PolicyId::EnableAlpinePv,
            PolicyId::FastTrackWind,
            PolicyId::WindParkRegulation,
            PolicyId::BuildingInsulation,
            PolicyId::IndustrySubsidy,
        ]
        .iter()
        .map(|&id| p.policy(id).acceptance)
        .collect();
        assert_eq!(probs, [0.8, 0.6, 0.5, 0.7, 0.6]);
    }

    #[test]
    fn turn_years() {
        let p = Parameters::default();
        assert_eq!(p.turns.count(), 10);
        assert_eq!(p.turns.years(1), 2022..=2024);
        assert_eq!(p.turns.years(10), 2049..=2050);
        let total: usize = (1..=10).map(|t| p.turns.years(t).count()).sum();
        assert_eq!(total, 29);
    }

    #[test]
    fn serialized_defaults_parse_back() {
        let p = Parameters::default();
        assert_eq!(Parameters::parse(&p.to_toml()).unwrap(), p);
    }

    #[test]
    fn missing_section_is_incomplete() {
        let text = BUNDLED_PARAMETERS.replace("[policies.industry_subsidy]", "[policies.industry_subsidy_x]");
        assert!(Parameters::parse(&text).is_err());
        let cut: String = BUNDLED_PARAMETERS
            .split("[technologies.waste]")
            .next()
            .unwrap()
            .to_string()
            + &BUNDLED_PARAMETERS[BUNDLED_PARAMETERS.find("# Policies").unwrap()..];
        assert_eq!(
            Parameters::parse(&cut),
            Err(ParamsError::Incomplete("technologies.waste".into()))
        );
    }
}
