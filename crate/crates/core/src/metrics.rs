//! Per-year and per-game scoring metrics.
//!
//! | metric                  | unit            |
//! |-------------------------|-----------------|
//! | nuclear fuel            | TJ              |
//! | fossil fuel             | TJ              |
//! | electricity imports     | TJ              |
//! | emissions (CO₂-eq)      | million t       |
//! | investment cost         | million CHF     |
//! | land use                | km²             |
//! | seasonality             | % summer/total  |
//!
//! Annual records are summed over the game; seasonality is averaged,
//! weighted by each year's electricity generation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{AnnualBalance, CarrierKind, TechParams, TechnologyKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("incomplete simulation: expected year {expected}, found {found}")]
    IncompleteSimulation { expected: i32, found: i32 },
    #[error("no metric records")]
    Empty,
    #[error("invalid parameter: unknown metric `{0}`")]
    UnknownMetric(String),
}

/// Which framing of the game objective the player was shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveFrame {
    SupplyOnly,
    TransitionFocus,
}

impl fmt::Display for ObjectiveFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveFrame::SupplyOnly => "supply-only",
            ObjectiveFrame::TransitionFocus => "transition-focus",
        })
    }
}

impl FromStr for ObjectiveFrame {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "supply-only" => Ok(ObjectiveFrame::SupplyOnly),
            "transition-focus" => Ok(ObjectiveFrame::TransitionFocus),
            other => Err(format!("unknown objective frame `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricRecord {
    pub year: i32,
    pub nuclear_fuel_tj: f64,
    pub fossil_fuel_tj: f64,
    pub electricity_imports_tj: f64,
    pub emissions_mt: f64,
    pub investment_mchf: f64,
    pub land_use_km2: f64,
    pub summer_share_pct: f64,
    /// Domestic electricity generation; weight of `summer_share_pct`.
    pub generation_tj: f64,
}

/// Contributions that do not come out of the balance itself.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct YearExtras {
    /// Build and upgrade spending, million CHF.
    pub investment_mchf: f64,
    /// Captured and stored, t CO₂-eq.
    pub sequestered_t: f64,
    /// Emissions from emergency measures, t CO₂-eq.
    pub additional_emissions_t: f64,
}

pub fn annual_metrics(
    balance: &AnnualBalance,
    technologies: &BTreeMap<TechnologyKind, TechParams>,
    carrier_factors: &BTreeMap<CarrierKind, f64>,
    extras: YearExtras,
) -> MetricRecord {
    let mut emissions_kg = 0.0;
    let mut land_use = 0.0;
    let mut summer = 0.0;
    let mut generation = 0.0;
    for (kind, &output) in &balance.generation {
        let Some(params) = technologies.get(kind) else { continue };
        emissions_kg += output * params.emission_factor;
        land_use += output * params.land_use_factor;
        summer += output * params.summer_share;
        generation += output;
    }
    for (carrier, flows) in &balance.flows {
        if carrier.is_combustible() {
            emissions_kg += flows.total_consumption() * carrier_factors.get(carrier).copied().unwrap_or(0.0);
        }
    }
    let emissions_t =
        (emissions_kg / 1000.0 + extras.additional_emissions_t - extras.sequestered_t).max(0.0);

    let fossil: f64 = balance
        .flows
        .iter()
        .filter(|(c, _)| c.is_fossil())
        .map(|(_, f)| f.total_consumption() + f.delivery_loss + f.transformation_input)
        .sum();

    MetricRecord {
        year: balance.year,
        nuclear_fuel_tj: balance.flow(CarrierKind::NuclearFuel).transformation_input,
        fossil_fuel_tj: fossil,
        electricity_imports_tj: balance.flow(CarrierKind::Electricity).imports,
        emissions_mt: emissions_t / 1e6,
        investment_mchf: extras.investment_mchf.max(0.0),
        land_use_km2: land_use,
        summer_share_pct: if generation > 0.0 { 100.0 * summer / generation } else { 0.0 },
        generation_tj: generation,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreCard {
    pub nuclear_fuel_tj: f64,
    pub fossil_fuel_tj: f64,
    pub electricity_imports_tj: f64,
    pub emissions_mt: f64,
    pub investment_mchf: f64,
    pub land_use_km2: f64,
    pub summer_share_pct: f64,
    pub generation_tj: f64,
    pub first_year: i32,
    pub last_year: i32,
    pub objective_frame: Option<ObjectiveFrame>,
    /// Set when the game did not reach its final year.
    pub partial: bool,
}

impl ScoreCard {
    pub fn metric(&self, key: MetricKey) -> f64 {
        match key {
            MetricKey::NuclearFuel => self.nuclear_fuel_tj,
            MetricKey::FossilFuel => self.fossil_fuel_tj,
            MetricKey::ElectricityImports => self.electricity_imports_tj,
            MetricKey::Emissions => self.emissions_mt,
            MetricKey::InvestmentCost => self.investment_mchf,
            MetricKey::LandUse => self.land_use_km2,
            MetricKey::Seasonality => self.summer_share_pct,
        }
    }

    /// Card of two consecutive runs of years.
    pub fn combine(&self, later: &ScoreCard) -> ScoreCard {
        let generation = self.generation_tj + later.generation_tj;
        ScoreCard {
            nuclear_fuel_tj: self.nuclear_fuel_tj + later.nuclear_fuel_tj,
            fossil_fuel_tj: self.fossil_fuel_tj + later.fossil_fuel_tj,
            electricity_imports_tj: self.electricity_imports_tj + later.electricity_imports_tj,
            emissions_mt: self.emissions_mt + later.emissions_mt,
            investment_mchf: self.investment_mchf + later.investment_mchf,
            land_use_km2: self.land_use_km2 + later.land_use_km2,
            summer_share_pct: if generation > 0.0 {
                (self.summer_share_pct * self.generation_tj + later.summer_share_pct * later.generation_tj)
                    / generation
            } else {
                0.0
            },
            generation_tj: generation,
            first_year: self.first_year.min(later.first_year),
            last_year: self.last_year.max(later.last_year),
            objective_frame: self.objective_frame.or(later.objective_frame),
            partial: self.partial || later.partial,
        }
    }
}

/// Sums records over consecutive years.
pub fn accumulate(records: &[MetricRecord]) -> Result<ScoreCard, MetricsError> {
    let first = records.first().ok_or(MetricsError::Empty)?;
    for (i, r) in records.iter().enumerate() {
        let expected = first.year + i as i32;
        if r.year != expected {
            return Err(MetricsError::IncompleteSimulation {
                expected,
                found: r.year,
            });
        }
    }
    let sum = |f: fn(&MetricRecord) -> f64| records.iter().map(f).sum::<f64>();
    let generation = sum(|r| r.generation_tj);
    let summer_share = if generation > 0.0 {
        sum(|r| r.summer_share_pct * r.generation_tj) / generation
    } else {
        0.0
    };
    Ok(ScoreCard {
        nuclear_fuel_tj: sum(|r| r.nuclear_fuel_tj),
        fossil_fuel_tj: sum(|r| r.fossil_fuel_tj),
        electricity_imports_tj: sum(|r| r.electricity_imports_tj),
        emissions_mt: sum(|r| r.emissions_mt),
        investment_mchf: sum(|r| r.investment_mchf),
        land_use_km2: sum(|r| r.land_use_km2),
        summer_share_pct: summer_share,
        generation_tj: generation,
        first_year: first.year,
        last_year: records[records.len() - 1].year,
        objective_frame: None,
        partial: false,
    })
}

/// Leaderboard ordering key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MetricKey {
    NuclearFuel,
    FossilFuel,
    ElectricityImports,
    Emissions,
    InvestmentCost,
    LandUse,
    Seasonality,
}

impl MetricKey {
    pub const ALL: [MetricKey; 7] = [
        MetricKey::NuclearFuel,
        MetricKey::FossilFuel,
        MetricKey::ElectricityImports,
        MetricKey::Emissions,
        MetricKey::InvestmentCost,
        MetricKey::LandUse,
        MetricKey::Seasonality,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKey::NuclearFuel => "nuclearFuel",
            MetricKey::FossilFuel => "fossilFuel",
            MetricKey::ElectricityImports => "electricityImports",
            MetricKey::Emissions => "emissions",
            MetricKey::InvestmentCost => "investmentCost",
            MetricKey::LandUse => "landUse",
            MetricKey::Seasonality => "seasonality",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            MetricKey::NuclearFuel | MetricKey::FossilFuel | MetricKey::ElectricityImports => "TJ",
            MetricKey::Emissions => "t (mln)",
            MetricKey::InvestmentCost => "CHF (mln)",
            MetricKey::LandUse => "km²",
            MetricKey::Seasonality => "%",
        }
    }
}

impl FromStr for MetricKey {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| MetricsError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankedCard {
    pub label: String,
    pub card: ScoreCard,
    pub completed_at: DateTime<Utc>,
}

/// Orders cards ascending by `key` (lower is better for every metric);
/// ties go to the earlier completion.
pub fn rank(mut cards: Vec<RankedCard>, key: &str) -> Result<Vec<RankedCard>, MetricsError> {
    let key: MetricKey = key.parse()?;
    cards.sort_by(|a, b| {
        a.card
            .metric(key)
            .total_cmp(&b.card.metric(key))
            .then(a.completed_at.cmp(&b.completed_at))
    });
    Ok(cards)
}

pub const CSV_HEADER: &str = "year,nuclear_fuel_tj,fossil_fuel_tj,electricity_imports_tj,emissions_mt,investment_mchf,land_use_km2,summer_share_pct";

/// One row per record followed by a `total` row for the card.
pub fn to_csv(records: &[MetricRecord], card: &ScoreCard) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.year,
            r.nuclear_fuel_tj,
            r.fossil_fuel_tj,
            r.electricity_imports_tj,
            r.emissions_mt,
            r.investment_mchf,
            r.land_use_km2,
            r.summer_share_pct
        ));
    }
    out.push_str(&format!(
        "total,{},{},{},{},{},{},{}\n",
        card.nuclear_fuel_tj,
        card.fossil_fuel_tj,
        card.electricity_imports_tj,
        card.emissions_mt,
        card.investment_mchf,
        card.land_use_km2,
        card.summer_share_pct
    ));
    out
}
