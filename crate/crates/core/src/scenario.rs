//! Scenario data files.
//!
//! A scenario is a CSV file with header `series,year,value,unit`. Series
//! identifiers are dotted paths:
//!
//! | series                              | unit   | meaning                                  |
//! |-------------------------------------|--------|------------------------------------------|
//! | `consumption.<carrier>.<sector>`    | TJ     | final consumption, one row per year      |
//! | `production.<carrier>`              | TJ     | domestic production of a traded carrier  |
//! | `stock.<carrier>`                   | TJ     | draw from stock (positive = withdrawal)  |
//! | `loss.<carrier>`                    | ratio  | delivery loss rate                       |
//! | `capacity.<technology>`             | TJ     | annual output of the installed fleet     |
//! | `tech.<technology>.efficiency`      | ratio  | output / primary input                   |
//! | `tech.<technology>.land_use`        | km2/TJ | land use per TJ of output                |
//! | `tech.<technology>.emission_factor` | kg/TJ  | CO₂-eq per TJ of output                  |
//! | `tech.<technology>.generation_cost` | CHF/TJ | production cost per TJ of output         |
//! | `quarterly.supply.<technology>.qN`  | TJ     | quarterly output history                 |
//! | `quarterly.demand.<sector>.qN`      | TJ     | quarterly electricity demand history     |
//! | `emissions.<carrier>`               | t      | combustion emissions history (CO₂-eq)    |
//!
//! Carrier, sector and technology names are the camelCase identifiers of
//! [`CarrierKind`], [`Sector`] and [`TechnologyKind`]. Parameter rows
//! (`loss`, `capacity`, `tech`) use the scenario's start year and carry one
//! value; history rows may span any number of years. Row order is
//! irrelevant.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{CarrierKind, LossRates, Sector, TechParams, TechnologyKind};

pub const HEADER: [&str; 4] = ["series", "year", "value", "unit"];

/// The bundled starting scenario: the Swiss energy system in 2022 with
/// eight years of history. Figures are approximate national aggregates.
pub const BUNDLED_SCENARIO: &str = include_str!("../data/scenario-ch-2022.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("calibration incomplete: missing series `{0}`")]
    Missing(String),
    #[error("series `{series}`: {message}")]
    Invalid { series: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Which quarter of a year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quarter {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl Quarter {
    pub const ALL: [Quarter; 4] = [Quarter::Q1, Quarter::Q2, Quarter::Q3, Quarter::Q4];

    fn parse(s: &str) -> Option<Quarter> {
        match s {
            "q1" => Some(Quarter::Q1),
            "q2" => Some(Quarter::Q2),
            "q3" => Some(Quarter::Q3),
            "q4" => Some(Quarter::Q4),
            _ => None,
        }
    }
}

/// Subject of a seasonal (quarterly) series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SeasonalSubject {
    Supply(TechnologyKind),
    Demand(Sector),
}

impl fmt::Display for SeasonalSubject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeasonalSubject::Supply(t) => write!(f, "quarterly.supply.{t}"),
            SeasonalSubject::Demand(s) => write!(f, "quarterly.demand.{s}"),
        }
    }
}

/// Parsed form of a series identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SeriesKey {
    Consumption(CarrierKind, Sector),
    Production(CarrierKind),
    Stock(CarrierKind),
    Loss(CarrierKind),
    Capacity(TechnologyKind),
    Efficiency(TechnologyKind),
    LandUse(TechnologyKind),
    EmissionFactor(TechnologyKind),
    GenerationCost(TechnologyKind),
    Quarterly(SeasonalSubject, Quarter),
    Emissions(CarrierKind),
}

impl SeriesKey {
    pub fn parse(id: &str) -> Result<SeriesKey, String> {
        let parts: Vec<&str> = id.split('.').collect();
        let carrier = |s: &str| s.parse::<CarrierKind>();
        let tech = |s: &str| s.parse::<TechnologyKind>();
        let key = match parts.as_slice() {
            ["consumption", c, s] => SeriesKey::Consumption(carrier(c)?, s.parse()?),
            ["production", c] => SeriesKey::Production(carrier(c)?),
            ["stock", c] => SeriesKey::Stock(carrier(c)?),
            ["loss", c] => SeriesKey::Loss(carrier(c)?),
            ["capacity", t] => SeriesKey::Capacity(tech(t)?),
            ["tech", t, "efficiency"] => SeriesKey::Efficiency(tech(t)?),
            ["tech", t, "land_use"] => SeriesKey::LandUse(tech(t)?),
            ["tech", t, "emission_factor"] => SeriesKey::EmissionFactor(tech(t)?),
            ["tech", t, "generation_cost"] => SeriesKey::GenerationCost(tech(t)?),
            ["quarterly", "supply", t, q] => SeriesKey::Quarterly(
                SeasonalSubject::Supply(tech(t)?),
                Quarter::parse(q).ok_or_else(|| format!("bad quarter `{q}`"))?,
            ),
            ["quarterly", "demand", s, q] => SeriesKey::Quarterly(
                SeasonalSubject::Demand(s.parse()?),
                Quarter::parse(q).ok_or_else(|| format!("bad quarter `{q}`"))?,
            ),
            ["emissions", c] => SeriesKey::Emissions(carrier(c)?),
            _ => return Err(format!("unrecognised series `{id}`")),
        };
        Ok(key)
    }

    /// Whether the series is a forecastable time series.
    pub fn is_forecast(&self) -> bool {
        matches!(
            self,
            SeriesKey::Consumption(..) | SeriesKey::Production(_) | SeriesKey::Stock(_)
        )
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesKey::Consumption(c, s) => write!(f, "consumption.{c}.{s}"),
            SeriesKey::Production(c) => write!(f, "production.{c}"),
            SeriesKey::Stock(c) => write!(f, "stock.{c}"),
            SeriesKey::Loss(c) => write!(f, "loss.{c}"),
            SeriesKey::Capacity(t) => write!(f, "capacity.{t}"),
            SeriesKey::Efficiency(t) => write!(f, "tech.{t}.efficiency"),
            SeriesKey::LandUse(t) => write!(f, "tech.{t}.land_use"),
            SeriesKey::EmissionFactor(t) => write!(f, "tech.{t}.emission_factor"),
            SeriesKey::GenerationCost(t) => write!(f, "tech.{t}.generation_cost"),
            SeriesKey::Quarterly(subject, q) => {
                write!(f, "{subject}.{}", format!("{q:?}").to_lowercase())
            }
            SeriesKey::Emissions(c) => write!(f, "emissions.{c}"),
        }
    }
}

/// One series of the data file, points sorted by year.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub unit: String,
    pub points: Vec<(i32, f64)>,
}

impl RawSeries {
    pub fn latest(&self) -> Option<f64> {
        self.points.last().map(|&(_, v)| v)
    }
}

/// All rows of a scenario file, grouped by series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioData {
    pub series: BTreeMap<SeriesKey, RawSeries>,
}

impl ScenarioData {
    pub fn bundled() -> ScenarioData {
        ScenarioData::parse(BUNDLED_SCENARIO.as_bytes()).expect("bundled scenario parses")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<ScenarioData, ScenarioError> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.as_ref().display())))?;
        ScenarioData::parse(file)
    }

    pub fn parse<R: Read>(reader: R) -> Result<ScenarioData, ScenarioError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut data = ScenarioData::default();
        let mut seen_header = false;
        for (idx, record) in rdr.records().enumerate() {
            let line = idx as u64 + 1;
            let record = record.map_err(|e| ScenarioError::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(line),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(line);
            let err = |message: String| ScenarioError::Parse { line, message };
            if !seen_header {
                if record.iter().collect::<Vec<_>>() != HEADER {
                    return Err(err(format!("expected header `{}`", HEADER.join(","))));
                }
                seen_header = true;
                continue;
            }
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            if record.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", record.len())));
            }
            let key = SeriesKey::parse(&record[0]).map_err(err)?;
            let year: i32 = record[1]
                .parse()
                .map_err(|_| err(format!("bad year `{}`", &record[1])))?;
            let value: f64 = record[2]
                .parse()
                .map_err(|_| err(format!("bad value `{}`", &record[2])))?;
            if !value.is_finite() {
                return Err(err(format!("non-finite value `{}`", &record[2])));
            }
            let unit = record[3].to_string();
            let entry = data.series.entry(key).or_insert_with(|| RawSeries {
                unit: unit.clone(),
                points: Vec::new(),
            });
            if entry.unit != unit {
                return Err(err(format!("unit `{unit}` differs from `{}`", entry.unit)));
            }
            match entry.points.binary_search_by_key(&year, |&(y, _)| y) {
                Ok(_) => return Err(err(format!("duplicate row for `{key}` in {year}"))),
                Err(pos) => entry.points.insert(pos, (year, value)),
            }
        }
        if !seen_header {
            return Err(ScenarioError::Parse {
                line: 1,
                message: "empty file".into(),
            });
        }
        Ok(data)
    }

    pub fn get(&self, key: SeriesKey) -> Result<&RawSeries, ScenarioError> {
        self.series
            .get(&key)
            .ok_or_else(|| ScenarioError::Missing(key.to_string()))
    }

    fn scalar(&self, key: SeriesKey) -> Result<f64, ScenarioError> {
        self.get(key)?
            .latest()
            .ok_or_else(|| ScenarioError::Missing(key.to_string()))
    }

    pub fn keys(&self) -> impl Iterator<Item = SeriesKey> + '_ {
        self.series.keys().copied()
    }

    /// Carriers with declared final consumption.
    pub fn consumed_carriers(&self) -> Vec<CarrierKind> {
        let mut v: Vec<_> = self
            .keys()
            .filter_map(|k| match k {
                SeriesKey::Consumption(c, _) => Some(c),
                _ => None,
            })
            .collect();
        v.dedup();
        v
    }

    /// Sectors with declared electricity consumption.
    pub fn electricity_sectors(&self) -> Vec<Sector> {
        self.keys()
            .filter_map(|k| match k {
                SeriesKey::Consumption(CarrierKind::Electricity, s) => Some(s),
                _ => None,
            })
            .collect()
    }
}

/// Structural parameters of a scenario: what is not forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub start_year: i32,
    pub loss_rates: LossRates,
    /// Installed annual output per technology at the start year, TJ.
    pub capacities: BTreeMap<TechnologyKind, f64>,
    /// Technology parameters; `summer_share` is filled in from calibration.
    pub technologies: BTreeMap<TechnologyKind, TechParams>,
}

impl Scenario {
    pub fn from_data(data: &ScenarioData) -> Result<Scenario, ScenarioError> {
        let mut loss_rates = LossRates::new();
        for carrier in data.consumed_carriers() {
            let rate = data.scalar(SeriesKey::Loss(carrier))?;
            if !(0.0..1.0).contains(&rate) {
                return Err(ScenarioError::Invalid {
                    series: SeriesKey::Loss(carrier).to_string(),
                    message: format!("loss rate {rate} not in [0, 1)"),
                });
            }
            loss_rates.insert(carrier, rate);
        }
        for key in data.keys() {
            if let SeriesKey::Loss(c) = key {
                if !loss_rates.contains_key(&c) {
                    loss_rates.insert(c, data.scalar(key)?);
                }
            }
        }

        let mut capacities = BTreeMap::new();
        let mut technologies = BTreeMap::new();
        let mut start_year = i32::MAX;
        for &kind in TechnologyKind::ALL {
            let cap = data.get(SeriesKey::Capacity(kind))?;
            start_year = start_year.min(cap.points.last().map(|p| p.0).unwrap_or(i32::MAX));
            let capacity = cap.latest().unwrap_or(0.0);
            if capacity < 0.0 {
                return Err(ScenarioError::Invalid {
                    series: SeriesKey::Capacity(kind).to_string(),
                    message: "negative capacity".into(),
                });
            }
            capacities.insert(kind, capacity);
            let params = TechParams {
                kind,
                input_carrier: Some(kind.input_carrier()),
                conversion_efficiency: data.scalar(SeriesKey::Efficiency(kind))?,
                summer_share: 0.5,
                land_use_factor: data.scalar(SeriesKey::LandUse(kind))?,
                emission_factor: data.scalar(SeriesKey::EmissionFactor(kind))?,
                generation_cost: data.scalar(SeriesKey::GenerationCost(kind))?,
            };
            params.validate().map_err(|e| ScenarioError::Invalid {
                series: format!("tech.{kind}"),
                message: e.to_string(),
            })?;
            technologies.insert(kind, params);
        }
        Ok(Scenario {
            start_year,
            loss_rates,
            capacities,
            technologies,
        })
    }
}
