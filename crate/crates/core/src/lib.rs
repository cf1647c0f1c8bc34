//! Energy-balance model and turn-based engine for a national
//! energy-transition game.
//!
//! The crate is layered bottom-up:
//!
//! - [`balance`] builds closed annual energy balances,
//! - [`calibration`] fits the linear forecasts and seasonal shares that feed it,
//! - [`metrics`] turns balances into per-year records and score cards,
//! - [`params`] holds every game tunable,
//! - [`engine`] runs the game itself.

pub mod balance;
pub mod calibration;
pub mod engine;
pub mod metrics;
pub mod params;
pub mod scenario;
pub mod units;

pub use balance::{AnnualBalance, CarrierKind, Sector, TechParams, TechnologyKind};
pub use calibration::{CalibrationSet, ForecastModel, TimeSeries};
pub use engine::{Action, ActionRecord, Game, GameState, Model, StateView};
pub use metrics::{MetricRecord, ObjectiveFrame, ScoreCard};
pub use params::Parameters;
pub use scenario::{Scenario, ScenarioData};
