//! Forecast and seasonality calibration from historic series.
//!
//! Every demand and production series is fitted with an ordinary
//! least-squares line over its most recent eight years. The fitted value at
//! the last historic year is the starting level and the slope is the trend;
//! forecasts extrapolate the line and never go below zero. Seasonality is a
//! single summer share per series, computed from quarterly history with
//! summer = Q2 + Q3.
//!
//! Transformation capacities are not calibrated: they stay at their
//! start-year level unless the player changes them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{CarrierKind, SeasonalSplits, YearInputs};
use crate::scenario::{Quarter, ScenarioData, ScenarioError, SeasonalSubject, SeriesKey};

/// Years of history used for a linear fit.
pub const DEFAULT_WINDOW: usize = 8;

pub const SUMMER_QUARTERS: [Quarter; 2] = [Quarter::Q2, Quarter::Q3];

pub const CALIBRATION_HEADER: &str = "seriesId,intercept,slope,baseYear,window,summerShare";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("insufficient data for `{series}`: {detail}")]
    InsufficientData { series: String, detail: String },
    #[error("degenerate series `{0}`: all values are zero")]
    Degenerate(String),
    #[error("calibration incomplete: missing series `{0}`")]
    Incomplete(String),
    #[error("invalid series `{series}`: {detail}")]
    Invalid { series: String, detail: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub series_id: String,
    pub points: Vec<(i32, f64)>,
}

impl TimeSeries {
    pub fn new(series_id: impl Into<String>, points: Vec<(i32, f64)>) -> Result<Self, CalibrationError> {
        let series_id = series_id.into();
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(CalibrationError::Invalid {
                series: series_id,
                detail: "years must be strictly increasing".into(),
            });
        }
        Ok(TimeSeries { series_id, points })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub series_id: String,
    /// Fitted value at `base_year`.
    pub intercept: f64,
    /// Change per year.
    pub slope: f64,
    pub base_year: i32,
    /// Number of points the fit used.
    pub window: usize,
}

impl ForecastModel {
    pub fn forecast(&self, year: i32) -> f64 {
        forecast(self, year)
    }
}

/// OLS line over the last `window` points of `series`. Fewer points than
/// `window` are all used.
pub fn fit_linear(series: &TimeSeries, window: usize) -> Result<ForecastModel, CalibrationError> {
    if window < 2 {
        return Err(CalibrationError::InsufficientData {
            series: series.series_id.clone(),
            detail: format!("window {window} < 2"),
        });
    }
    if series.points.len() < 2 {
        return Err(CalibrationError::InsufficientData {
            series: series.series_id.clone(),
            detail: format!("{} point(s), need at least 2", series.points.len()),
        });
    }
    let used = &series.points[series.points.len().saturating_sub(window)..];
    let n = used.len() as f64;
    let base_year = used[used.len() - 1].0;
    let mean_x = used.iter().map(|&(y, _)| (y - base_year) as f64).sum::<f64>() / n;
    let mean_y = used.iter().map(|&(_, v)| v).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(y, v) in used {
        let dx = (y - base_year) as f64 - mean_x;
        sxy += dx * (v - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    Ok(ForecastModel {
        series_id: series.series_id.clone(),
        intercept: mean_y - slope * mean_x,
        slope,
        base_year,
        window: used.len(),
    })
}

/// Extrapolated value, clamped at zero.
pub fn forecast(model: &ForecastModel, year: i32) -> f64 {
    (model.intercept + model.slope * (year - model.base_year) as f64).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalSplit {
    pub summer_share: f64,
}

impl SeasonalSplit {
    pub fn winter_share(&self) -> f64 {
        1.0 - self.summer_share
    }
}

/// Summer share of the whole quarterly history.
pub fn fit_seasonal(
    series_id: &str,
    quarterly: &[(i32, Quarter, f64)],
) -> Result<SeasonalSplit, CalibrationError> {
    let mut per_year: BTreeMap<i32, Vec<Quarter>> = BTreeMap::new();
    for &(year, q, v) in quarterly {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CalibrationError::Invalid {
                series: series_id.into(),
                detail: format!("value {v} in {year} {q:?}"),
            });
        }
        per_year.entry(year).or_default().push(q);
    }
    let full_year = per_year.values().any(|qs| Quarter::ALL.iter().all(|q| qs.contains(q)));
    if quarterly.len() < 4 || !full_year {
        return Err(CalibrationError::InsufficientData {
            series: series_id.into(),
            detail: "need at least one complete year of quarters".into(),
        });
    }
    let total: f64 = quarterly.iter().map(|&(_, _, v)| v).sum();
    if total == 0.0 {
        return Err(CalibrationError::Degenerate(series_id.into()));
    }
    let summer: f64 = quarterly
        .iter()
        .filter(|(_, q, _)| SUMMER_QUARTERS.contains(q))
        .map(|&(_, _, v)| v)
        .sum();
    Ok(SeasonalSplit {
        summer_share: summer / total,
    })
}

/// Zero-intercept least-squares factor of emissions (t) on activity (TJ),
/// in kg per TJ.
pub fn calibrate_emission_factor(
    emissions: &TimeSeries,
    activity: &TimeSeries,
) -> Result<f64, CalibrationError> {
    let activity_by_year: BTreeMap<i32, f64> = activity.points.iter().copied().collect();
    let pairs: Vec<(f64, f64)> = emissions
        .points
        .iter()
        .filter_map(|&(y, e)| activity_by_year.get(&y).map(|&a| (a, e)))
        .collect();
    if pairs.len() < 2 {
        return Err(CalibrationError::InsufficientData {
            series: emissions.series_id.clone(),
            detail: format!("{} overlapping year(s) with activity, need 2", pairs.len()),
        });
    }
    let saa: f64 = pairs.iter().map(|&(a, _)| a * a).sum();
    if saa == 0.0 {
        return Ok(0.0);
    }
    let sae: f64 = pairs.iter().map(|&(a, e)| a * e).sum();
    Ok((sae / saa * 1000.0).max(0.0))
}

/// Emission factor together with the provenance needed to export it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionCalibration {
    /// kg CO₂-eq per TJ of final consumption.
    pub factor: f64,
    pub base_year: i32,
    pub window: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub forecasts: BTreeMap<String, ForecastModel>,
    /// Keyed by the quarterly series prefix, e.g. `quarterly.supply.solar`.
    pub seasonal: BTreeMap<String, SeasonalSplit>,
    pub emission_factors: BTreeMap<CarrierKind, EmissionCalibration>,
}

impl CalibrationSet {
    /// Fits every declared series of a scenario file.
    pub fn fit(data: &ScenarioData) -> Result<CalibrationSet, CalibrationError> {
        let mut set = CalibrationSet::default();

        for (key, raw) in &data.series {
            if key.is_forecast() {
                let id = key.to_string();
                let series = TimeSeries::new(id.clone(), raw.points.clone())?;
                set.forecasts.insert(id, fit_linear(&series, DEFAULT_WINDOW)?);
            }
        }

        let mut quarterly: BTreeMap<SeasonalSubject, Vec<(i32, Quarter, f64)>> = BTreeMap::new();
        for (key, raw) in &data.series {
            if let SeriesKey::Quarterly(subject, q) = *key {
                quarterly
                    .entry(subject)
                    .or_default()
                    .extend(raw.points.iter().map(|&(y, v)| (y, q, v)));
            }
        }
        for (subject, points) in &quarterly {
            let id = subject.to_string();
            let split = fit_seasonal(&id, points)?;
            set.seasonal.insert(id, split);
        }
        for &tech in crate::balance::TechnologyKind::ALL {
            let id = SeasonalSubject::Supply(tech).to_string();
            if !set.seasonal.contains_key(&id) {
                return Err(CalibrationError::Incomplete(format!("{id}.q1")));
            }
        }
        for sector in data.electricity_sectors() {
            let id = SeasonalSubject::Demand(sector).to_string();
            if !set.seasonal.contains_key(&id) {
                return Err(CalibrationError::Incomplete(format!("{id}.q1")));
            }
        }

        for carrier in data.consumed_carriers() {
            let key = SeriesKey::Emissions(carrier);
            let Some(raw) = data.series.get(&key) else {
                if carrier.is_combustible() {
                    return Err(CalibrationError::Incomplete(key.to_string()));
                }
                continue;
            };
            let activity = carrier_activity(data, carrier);
            let emissions = TimeSeries::new(key.to_string(), raw.points.clone())?;
            let activity = TimeSeries::new(format!("consumption.{carrier}"), activity)?;
            let factor = calibrate_emission_factor(&emissions, &activity)?;
            let overlap: Vec<i32> = emissions
                .points
                .iter()
                .map(|p| p.0)
                .filter(|y| activity.points.iter().any(|p| p.0 == *y))
                .collect();
            set.emission_factors.insert(
                carrier,
                EmissionCalibration {
                    factor,
                    base_year: *overlap.last().expect("at least two overlapping years"),
                    window: overlap.len(),
                },
            );
        }
        Ok(set)
    }

    pub fn forecast_value(&self, key: SeriesKey, year: i32) -> Result<f64, CalibrationError> {
        let id = key.to_string();
        self.forecasts
            .get(&id)
            .map(|m| m.forecast(year))
            .ok_or(CalibrationError::Incomplete(id))
    }

    /// Evaluates every forecast series for `year`.
    pub fn year_inputs(&self, year: i32) -> Result<YearInputs, CalibrationError> {
        let mut inputs = YearInputs {
            year,
            ..Default::default()
        };
        for (id, model) in &self.forecasts {
            let key = SeriesKey::parse(id).map_err(|detail| CalibrationError::Invalid {
                series: id.clone(),
                detail,
            })?;
            let value = model.forecast(year);
            match key {
                SeriesKey::Consumption(c, s) => {
                    inputs.consumption.insert((c, s), value);
                }
                SeriesKey::Production(c) => {
                    inputs.production.insert(c, value);
                }
                SeriesKey::Stock(c) => {
                    inputs.stock_change.insert(c, value);
                }
                _ => {}
            }
        }
        Ok(inputs)
    }

    pub fn splits(&self) -> SeasonalSplits {
        let mut splits = SeasonalSplits::default();
        for &tech in crate::balance::TechnologyKind::ALL {
            if let Some(s) = self.seasonal.get(&SeasonalSubject::Supply(tech).to_string()) {
                splits.supply.insert(tech, s.summer_share);
            }
        }
        for &sector in crate::balance::Sector::ALL {
            if let Some(s) = self.seasonal.get(&SeasonalSubject::Demand(sector).to_string()) {
                splits.demand.insert(sector, s.summer_share);
            }
        }
        splits
    }

    pub fn emission_factor(&self, carrier: CarrierKind) -> f64 {
        self.emission_factors.get(&carrier).map_or(0.0, |e| e.factor)
    }

    /// Calibration parameter file, one row per series, sorted by id.
    /// Emission factors are zero-intercept fits: the slope column holds the
    /// factor in kg/TJ.
    pub fn to_csv(&self) -> String {
        let mut rows: BTreeMap<String, String> = BTreeMap::new();
        for (id, m) in &self.forecasts {
            rows.insert(
                id.clone(),
                format!("{id},{},{},{},{},", m.intercept, m.slope, m.base_year, m.window),
            );
        }
        for (id, s) in &self.seasonal {
            rows.insert(id.clone(), format!("{id},,,,,{}", s.summer_share));
        }
        for (c, e) in &self.emission_factors {
            let id = SeriesKey::Emissions(*c).to_string();
            rows.insert(id.clone(), format!("{id},0,{},{},{},", e.factor, e.base_year, e.window));
        }
        let mut out = String::new();
        writeln!(out, "{CALIBRATION_HEADER}").unwrap();
        for row in rows.values() {
            writeln!(out, "{row}").unwrap();
        }
        out
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<CalibrationSet, CalibrationError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let parse_err = |line: u64, detail: String| {
            CalibrationError::Scenario(ScenarioError::Parse { line, message: detail })
        };
        let headers = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if headers != CALIBRATION_HEADER {
            return Err(parse_err(1, format!("expected header `{CALIBRATION_HEADER}`")));
        }
        let mut set = CalibrationSet::default();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                parse_err(e.position().map_or(0, |p| p.line()), e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| -> Result<Option<f64>, CalibrationError> {
                let s = record.get(i).unwrap_or("");
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| parse_err(line, format!("bad number `{s}`")))
                }
            };
            let id = record.get(0).unwrap_or("").to_string();
            if let Some(share) = field(5)? {
                set.seasonal.insert(id, SeasonalSplit { summer_share: share });
                continue;
            }
            let (Some(intercept), Some(slope), Some(base), Some(window)) =
                (field(1)?, field(2)?, field(3)?, field(4)?)
            else {
                return Err(parse_err(line, format!("incomplete row for `{id}`")));
            };
            match SeriesKey::parse(&id).map_err(|e| parse_err(line, e))? {
                SeriesKey::Emissions(c) => {
                    set.emission_factors.insert(
                        c,
                        EmissionCalibration {
                            factor: slope,
                            base_year: base as i32,
                            window: window as usize,
                        },
                    );
                }
                _ => {
                    set.forecasts.insert(
                        id.clone(),
                        ForecastModel {
                            series_id: id,
                            intercept,
                            slope,
                            base_year: base as i32,
                            window: window as usize,
                        },
                    );
                }
            }
        }
        Ok(set)
    }
}

/// Total final consumption of a carrier per year across sectors.
fn carrier_activity(data: &ScenarioData, carrier: CarrierKind) -> Vec<(i32, f64)> {
    let mut by_year: BTreeMap<i32, f64> = BTreeMap::new();
    for (key, raw) in &data.series {
        if matches!(key, SeriesKey::Consumption(c, _) if *c == carrier) {
            for &(y, v) in &raw.points {
                *by_year.entry(y).or_default() += v;
            }
        }
    }
    by_year.into_iter().collect()
}

/// Reads a scenario/history file and calibrates it.
pub fn load_history(path: impl AsRef<Path>) -> Result<CalibrationSet, CalibrationError> {
    let data = ScenarioData::from_path(path)?;
    CalibrationSet::fit(&data)
}
