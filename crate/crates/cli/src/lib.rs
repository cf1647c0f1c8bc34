//! Headless entry points: scripted runs, calibration, export replay and the
//! server.

pub mod replay;
pub mod runner;
pub mod script;

use std::path::Path;

use anyhow::Context;
use transition_core::params::Parameters;
use transition_core::scenario::ScenarioData;
use transition_core::Model;

pub use runner::{run_script, RunOptions, RunOutcome, RunReport};
pub use script::{ScriptError, StrategyScript};

/// Builds the model from optional scenario and parameter files, falling back
/// to the bundled ones.
pub fn load_model(scenario: Option<&Path>, params: Option<&Path>) -> anyhow::Result<Model> {
    let data = match scenario {
        Some(p) => ScenarioData::from_path(p).with_context(|| format!("scenario {}", p.display()))?,
        None => ScenarioData::bundled(),
    };
    let params = match params {
        Some(p) => Parameters::from_path(p).with_context(|| format!("parameters {}", p.display()))?,
        None => Parameters::default(),
    };
    Model::from_data(&data, params).context("building the model")
}
