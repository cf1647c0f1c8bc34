//! Synthetic annual energy balances.
//!
//! A balance tracks, per energy carrier, the flows from primary supply
//! through transformation and delivery losses to final consumption in the
//! five end-use sectors. A balance is built in four steps:
//!
//! 1. sum the forecast final consumption per carrier,
//! 2. gross it up by the carrier's delivery loss rate,
//! 3. deduct what the power-plant fleet produces (adding the fuel it burns
//!    to the requirement of the fuel carrier),
//! 4. close whatever remains with imports, or exports for an excess.
//!
//! Every balance produced here satisfies per-carrier closure.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Earliest simulated year.
pub const FIRST_YEAR: i32 = 2022;
/// Last simulated year.
pub const LAST_YEAR: i32 = 2050;

/// Relative closure tolerance for a carrier row.
pub const CLOSURE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BalanceError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("calibration incomplete: missing series `{0}`")]
    CalibrationIncomplete(String),
    #[error("year {0} outside the simulated range {FIRST_YEAR}..={LAST_YEAR}")]
    YearOutOfRange(i32),
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{}`", stringify!($name), other)),
                }
            }
        }
    };
}

named_enum!(
    /// Energy carrier: one column of the balance table.
    CarrierKind {
        Electricity => "electricity",
        HeatingOil => "heatingOil",
        MotorFuel => "motorFuel",
        Gas => "gas",
        NuclearFuel => "nuclearFuel",
        Coal => "coal",
        Wood => "wood",
        Biofuel => "biofuel",
        Biogas => "biogas",
        Waste => "waste",
        DistrictHeat => "districtHeat",
        AmbientRenewable => "ambientRenewable",
    }
);

impl CarrierKind {
    /// Carriers whose supply is harvested or produced locally on demand and
    /// never traded: domestic production closes their row.
    pub fn is_endogenous(self) -> bool {
        matches!(self, CarrierKind::AmbientRenewable | CarrierKind::DistrictHeat)
    }

    pub fn is_fossil(self) -> bool {
        matches!(
            self,
            CarrierKind::HeatingOil | CarrierKind::MotorFuel | CarrierKind::Gas | CarrierKind::Coal
        )
    }

    /// Carriers burned by final consumers.
    pub fn is_combustible(self) -> bool {
        self.is_fossil()
            || matches!(
                self,
                CarrierKind::Wood | CarrierKind::Biofuel | CarrierKind::Biogas | CarrierKind::Waste
            )
    }
}

named_enum!(
    /// End-use economic sector.
    Sector {
        Households => "households",
        Industry => "industry",
        Services => "services",
        Transport => "transport",
        Agriculture => "agriculture",
    }
);

named_enum!(
    /// Electricity generating technology.
    TechnologyKind {
        Nuclear => "nuclear",
        River => "river",
        Reservoir => "reservoir",
        Solar => "solar",
        Wind => "wind",
        Gas => "gas",
        Biomass => "biomass",
        Biogas => "biogas",
        Waste => "waste",
    }
);

impl TechnologyKind {
    /// Primary carrier consumed by the technology. Hydro, solar and wind
    /// draw on the environment. Pumped storage is folded into reservoir.
    pub fn input_carrier(self) -> CarrierKind {
        match self {
            TechnologyKind::Nuclear => CarrierKind::NuclearFuel,
            TechnologyKind::Gas => CarrierKind::Gas,
            TechnologyKind::Biomass => CarrierKind::Wood,
            TechnologyKind::Biogas => CarrierKind::Biogas,
            TechnologyKind::Waste => CarrierKind::Waste,
            TechnologyKind::River
            | TechnologyKind::Reservoir
            | TechnologyKind::Solar
            | TechnologyKind::Wind => CarrierKind::AmbientRenewable,
        }
    }

    /// Order in which surplus generation would be curtailed, fossil first.
    pub const CURTAILMENT_ORDER: [TechnologyKind; 9] = [
        TechnologyKind::Gas,
        TechnologyKind::Waste,
        TechnologyKind::Biogas,
        TechnologyKind::Biomass,
        TechnologyKind::Wind,
        TechnologyKind::Solar,
        TechnologyKind::River,
        TechnologyKind::Reservoir,
        TechnologyKind::Nuclear,
    ];
}

/// Physical and economic parameters of one technology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechParams {
    pub kind: TechnologyKind,
    pub input_carrier: Option<CarrierKind>,
    /// Output per unit of primary input, in (0, 1].
    pub conversion_efficiency: f64,
    pub summer_share: f64,
    /// km² per TJ of annual output.
    pub land_use_factor: f64,
    /// kg CO₂-eq per TJ of output.
    pub emission_factor: f64,
    /// CHF per TJ of output.
    pub generation_cost: f64,
}

impl TechParams {
    pub fn validate(&self) -> Result<(), BalanceError> {
        let e = self.conversion_efficiency;
        if !(e > 0.0 && e <= 1.0) {
            return Err(BalanceError::InvalidParameter(format!(
                "{}: conversion efficiency {e} not in (0, 1]",
                self.kind
            )));
        }
        if !(0.0..=1.0).contains(&self.summer_share) {
            return Err(BalanceError::InvalidParameter(format!(
                "{}: summer share {} not in [0, 1]",
                self.kind, self.summer_share
            )));
        }
        for (name, v) in [
            ("land use factor", self.land_use_factor),
            ("emission factor", self.emission_factor),
            ("generation cost", self.generation_cost),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(BalanceError::InvalidParameter(format!(
                    "{}: {name} {v} must be a non-negative number",
                    self.kind
                )));
            }
        }
        Ok(())
    }
}

/// One row of the balance table, TJ/year.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CarrierFlows {
    pub imports: f64,
    pub exports: f64,
    pub domestic_production: f64,
    /// Positive when drawing from stock.
    pub stock_change: f64,
    pub transformation_input: f64,
    pub transformation_output: f64,
    pub delivery_loss: f64,
    pub final_consumption: BTreeMap<Sector, f64>,
}

impl CarrierFlows {
    pub fn total_consumption(&self) -> f64 {
        self.final_consumption.values().sum()
    }

    pub fn sources(&self) -> f64 {
        self.imports - self.exports
            + self.domestic_production
            + self.stock_change
            + self.transformation_output
    }

    pub fn uses(&self) -> f64 {
        self.transformation_input + self.delivery_loss + self.total_consumption()
    }

    pub fn closure_residual(&self) -> f64 {
        self.sources() - self.uses()
    }

    /// Largest absolute flow in the row; scale for the closure tolerance.
    pub fn gross_flow(&self) -> f64 {
        [
            self.imports,
            self.exports,
            self.domestic_production,
            self.stock_change.abs(),
            self.transformation_input,
            self.transformation_output,
            self.delivery_loss,
            self.total_consumption(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn is_closed(&self) -> bool {
        self.closure_residual().abs() <= CLOSURE_TOLERANCE * self.gross_flow().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualBalance {
    pub year: i32,
    pub flows: BTreeMap<CarrierKind, CarrierFlows>,
    /// Electricity output per technology, TJ.
    pub generation: BTreeMap<TechnologyKind, f64>,
}

impl AnnualBalance {
    pub fn empty(year: i32) -> Self {
        AnnualBalance {
            year,
            flows: CarrierKind::ALL
                .iter()
                .map(|&c| (c, CarrierFlows::default()))
                .collect(),
            generation: BTreeMap::new(),
        }
    }

    pub fn flow(&self, carrier: CarrierKind) -> &CarrierFlows {
        static EMPTY: std::sync::OnceLock<CarrierFlows> = std::sync::OnceLock::new();
        self.flows
            .get(&carrier)
            .unwrap_or_else(|| EMPTY.get_or_init(CarrierFlows::default))
    }

    /// Carriers whose row fails to close.
    pub fn unclosed_carriers(&self) -> Vec<CarrierKind> {
        self.flows
            .iter()
            .filter(|(_, f)| !f.is_closed())
            .map(|(&c, _)| c)
            .collect()
    }

    pub fn is_closed(&self) -> bool {
        self.unclosed_carriers().is_empty()
    }

    pub fn total_generation(&self) -> f64 {
        self.generation.values().sum()
    }
}

/// Summer shares per electricity supply and demand series. Winter is the
/// complement.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeasonalSplits {
    pub supply: BTreeMap<TechnologyKind, f64>,
    pub demand: BTreeMap<Sector, f64>,
}

impl SeasonalSplits {
    pub fn uniform(share: f64) -> Self {
        SeasonalSplits {
            supply: TechnologyKind::ALL.iter().map(|&t| (t, share)).collect(),
            demand: Sector::ALL.iter().map(|&s| (s, share)).collect(),
        }
    }

    pub fn supply_share(&self, tech: TechnologyKind) -> Result<f64, BalanceError> {
        self.supply
            .get(&tech)
            .copied()
            .ok_or_else(|| BalanceError::CalibrationIncomplete(format!("quarterly.supply.{tech}")))
    }

    pub fn demand_share(&self, sector: Sector) -> Result<f64, BalanceError> {
        self.demand
            .get(&sector)
            .copied()
            .ok_or_else(|| BalanceError::CalibrationIncomplete(format!("quarterly.demand.{sector}")))
    }
}

/// Summer/winter electricity supply and demand, TJ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SeasonalBalance {
    pub summer_supply: f64,
    pub winter_supply: f64,
    pub summer_demand: f64,
    pub winter_demand: f64,
}

impl SeasonalBalance {
    pub fn summer_surplus(&self) -> f64 {
        self.summer_supply - self.summer_demand
    }

    pub fn winter_surplus(&self) -> f64 {
        self.winter_supply - self.winter_demand
    }
}

/// Splits `total` into (summer, winter) so that the parts add back to
/// `total`.
pub fn split_season(total: f64, summer: f64) -> (f64, f64) {
    (summer, total - summer)
}

pub type LossRates = BTreeMap<CarrierKind, f64>;

/// Gross final consumption up by delivery losses: the quantity each carrier
/// must supply after transformation.
pub fn compute_delivery_requirement(
    consumption: &BTreeMap<(CarrierKind, Sector), f64>,
    loss_rates: &LossRates,
) -> Result<BTreeMap<CarrierKind, f64>, BalanceError> {
    let mut totals: BTreeMap<CarrierKind, f64> = BTreeMap::new();
    for (&(carrier, sector), &value) in consumption {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(BalanceError::InvalidParameter(format!(
                "consumption of {carrier} by {sector} is {value}"
            )));
        }
        *totals.entry(carrier).or_default() += value;
    }
    totals
        .into_iter()
        .map(|(carrier, total)| {
            let rate = loss_rates.get(&carrier).copied().unwrap_or(0.0);
            if !(0.0..1.0).contains(&rate) {
                return Err(BalanceError::InvalidParameter(format!(
                    "loss rate {rate} for {carrier} not in [0, 1)"
                )));
            }
            Ok((carrier, total / (1.0 - rate)))
        })
        .collect()
}

/// Result of running the fleet against the delivery requirement.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transformation {
    /// Requirement left after deducting fleet output; negative means surplus.
    pub residual: BTreeMap<CarrierKind, f64>,
    /// Primary input burned or harvested by the fleet.
    pub primary_demand: BTreeMap<CarrierKind, f64>,
    /// Output per technology.
    pub generation: BTreeMap<TechnologyKind, f64>,
}

/// Deducts fleet output from the requirement. Every plant runs at capacity;
/// over-supply shows up as a negative residual.
pub fn apply_transformation(
    requirements: &BTreeMap<CarrierKind, f64>,
    fleet: &[(TechParams, f64)],
) -> Transformation {
    let mut out = Transformation {
        residual: requirements.clone(),
        ..Default::default()
    };
    for (params, capacity) in fleet {
        let output = capacity.max(0.0);
        if output == 0.0 {
            continue;
        }
        *out.residual.entry(CarrierKind::Electricity).or_default() -= output;
        *out.generation.entry(params.kind).or_default() += output;
        if let Some(input) = params.input_carrier {
            *out.primary_demand.entry(input).or_default() += output / params.conversion_efficiency;
        }
    }
    out
}

/// Imports for a shortfall, exports for a surplus.
pub fn close_balance(residuals: &BTreeMap<CarrierKind, f64>) -> BTreeMap<CarrierKind, (f64, f64)> {
    residuals
        .iter()
        .map(|(&c, &r)| {
            let trade = if r > 0.0 {
                (r, 0.0)
            } else if r < 0.0 {
                (0.0, -r)
            } else {
                (0.0, 0.0)
            };
            (c, trade)
        })
        .collect()
}

/// Everything needed to build one year's balance, already evaluated from
/// forecasts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct YearInputs {
    pub year: i32,
    pub consumption: BTreeMap<(CarrierKind, Sector), f64>,
    pub production: BTreeMap<CarrierKind, f64>,
    pub stock_change: BTreeMap<CarrierKind, f64>,
    /// Imports fixed in advance (e.g. contracted electricity), TJ.
    pub contracted_imports: BTreeMap<CarrierKind, f64>,
}

pub fn build_annual_balance(
    inputs: &YearInputs,
    fleet: &[(TechParams, f64)],
    loss_rates: &LossRates,
) -> Result<AnnualBalance, BalanceError> {
    if !(FIRST_YEAR..=LAST_YEAR).contains(&inputs.year) {
        return Err(BalanceError::YearOutOfRange(inputs.year));
    }
    for (&(carrier, _), &v) in &inputs.consumption {
        if v > 0.0 && !loss_rates.contains_key(&carrier) {
            return Err(BalanceError::CalibrationIncomplete(format!("loss.{carrier}")));
        }
    }
    for (params, capacity) in fleet {
        params.validate()?;
        if !(*capacity >= 0.0 && capacity.is_finite()) {
            return Err(BalanceError::InvalidParameter(format!(
                "{} capacity {capacity}",
                params.kind
            )));
        }
    }

    let requirement = compute_delivery_requirement(&inputs.consumption, loss_rates)?;
    let transformation = apply_transformation(&requirement, fleet);

    let mut balance = AnnualBalance::empty(inputs.year);
    balance.generation = transformation.generation.clone();

    for (&(carrier, sector), &v) in &inputs.consumption {
        *balance
            .flows
            .get_mut(&carrier)
            .expect("all carriers present")
            .final_consumption
            .entry(sector)
            .or_default() += v;
    }

    let mut residuals = BTreeMap::new();
    for &carrier in CarrierKind::ALL {
        let flows = balance.flows.get_mut(&carrier).expect("all carriers present");
        let required = requirement.get(&carrier).copied().unwrap_or(0.0);
        flows.delivery_loss = required - flows.total_consumption();
        flows.transformation_input = transformation
            .primary_demand
            .get(&carrier)
            .copied()
            .unwrap_or(0.0);
        if carrier == CarrierKind::Electricity {
            flows.transformation_output = transformation.generation.values().sum();
        }
        flows.stock_change = inputs.stock_change.get(&carrier).copied().unwrap_or(0.0);
        let contracted = inputs
            .contracted_imports
            .get(&carrier)
            .copied()
            .unwrap_or(0.0)
            .max(0.0);
        flows.imports = contracted;

        let need = required + flows.transformation_input
            - flows.transformation_output
            - flows.stock_change
            - contracted;
        if carrier.is_endogenous() {
            flows.domestic_production = need.max(0.0);
            if need < 0.0 {
                residuals.insert(carrier, need);
            }
        } else {
            flows.domestic_production = inputs.production.get(&carrier).copied().unwrap_or(0.0);
            residuals.insert(carrier, need - flows.domestic_production);
        }
    }

    for (carrier, (imports, exports)) in close_balance(&residuals) {
        let flows = balance.flows.get_mut(&carrier).expect("all carriers present");
        flows.imports += imports;
        flows.exports = exports;
    }
    Ok(balance)
}

/// Splits electricity supply and demand of a balance into summer and winter.
/// Demand is the delivery requirement: sector consumption plus its
/// pro-rata share of delivery losses.
pub fn seasonal_decompose(
    balance: &AnnualBalance,
    splits: &SeasonalSplits,
) -> Result<SeasonalBalance, BalanceError> {
    let mut summer_supply = 0.0;
    let mut total_supply = 0.0;
    for (&tech, &output) in &balance.generation {
        let share = splits.supply_share(tech)?;
        summer_supply += output * share;
        total_supply += output;
    }

    let elec = balance.flow(CarrierKind::Electricity);
    let consumption = elec.total_consumption();
    let gross_up = if consumption > 0.0 {
        (consumption + elec.delivery_loss) / consumption
    } else {
        1.0
    };
    let mut summer_demand = 0.0;
    let mut total_demand = 0.0;
    for (&sector, &v) in &elec.final_consumption {
        let share = splits.demand_share(sector)?;
        let gross = v * gross_up;
        summer_demand += gross * share;
        total_demand += gross;
    }

    let (summer_supply, winter_supply) = split_season(total_supply, summer_supply);
    let (summer_demand, winter_demand) = split_season(total_demand, summer_demand);
    Ok(SeasonalBalance {
        summer_supply,
        winter_supply,
        summer_demand,
        winter_demand,
    })
}
