use std::fs;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use transition_cli::replay::{read_export, replay_record};
use transition_cli::{load_model, run_script, RunOptions, StrategyScript};
use transition_core::calibration::CalibrationSet;
use transition_core::scenario::ScenarioData;
use transition_service::{ServerConfig, Storage};

/// Exit status for bad usage, unreadable or invalid input.
const EXIT_USAGE: u8 = 1;
/// Exit status when the simulation itself fails.
const EXIT_SIMULATION: u8 = 2;

#[derive(Parser)]
#[command(name = "transition", version, about = "Swiss energy-transition game: headless runs, calibration and server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play a strategy script and write the metrics CSV.
    Run {
        /// Strategy script (TOML) or the name of a bundled one.
        #[arg(long)]
        script: String,
        /// Scenario CSV; the bundled Swiss 2022 scenario when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Parameter TOML; the bundled defaults when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Seed overriding the script's.
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the score card as JSON.
        #[arg(long)]
        card: Option<PathBuf>,
        /// Also write the action log as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Log rejected actions and continue instead of stopping.
        #[arg(long)]
        keep_going: bool,
    },
    /// Fit forecasts, seasonal splits and emission factors to a history file.
    Calibrate {
        /// History file in the scenario CSV format.
        #[arg(long)]
        history: PathBuf,
        /// Calibration CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay sessions of a research export and compare their score cards.
    Replay {
        /// NDJSON research export.
        export: PathBuf,
        /// Scenario CSV the sessions were played on.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Parameter TOML the sessions were played with.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run the session service.
    Serve {
        /// Listen address; TRANSITION_LISTEN when omitted.
        #[arg(long)]
        listen: Option<SocketAddr>,
        /// Storage directory or `memory`; TRANSITION_STORAGE when omitted.
        #[arg(long)]
        storage: Option<String>,
        /// Scenario CSV for new and restored sessions.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Parameter TOML for new and restored sessions.
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run {
            script,
            scenario,
            params,
            seed,
            out,
            card,
            log,
            keep_going,
        } => run(&script, scenario, params, RunOptions { seed, keep_going }, out, card, log),
        Command::Calibrate { history, out } => calibrate(&history, out),
        Command::Replay { export, scenario, params } => replay(&export, scenario, params),
        Command::Serve {
            listen,
            storage,
            scenario,
            params,
        } => serve(listen, storage, scenario, params),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| anyhow::anyhow!("writing {}: {e}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_script(arg: &str) -> anyhow::Result<StrategyScript> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(script) = transition_cli::script::bundled(arg) {
            return Ok(script);
        }
    }
    Ok(StrategyScript::from_path(path)?)
}

fn run(
    script: &str,
    scenario: Option<PathBuf>,
    params: Option<PathBuf>,
    opts: RunOptions,
    out: Option<PathBuf>,
    card: Option<PathBuf>,
    log: Option<PathBuf>,
) -> anyhow::Result<u8> {
    let model = Arc::new(load_model(scenario.as_deref(), params.as_deref())?);
    let script = load_script(script)?;
    script.validate(model.params().turns.count())?;
    let report = run_script(model, &script, opts);

    write_output(out.as_deref(), &report.csv())?;
    if let Some(path) = card {
        write_output(Some(&path), &(serde_json::to_string_pretty(&report.score())? + "\n"))?;
    }
    if let Some(path) = log {
        let mut text = String::new();
        for r in report.game.log() {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        write_output(Some(&path), &text)?;
    }
    let score = report.score();
    eprintln!("seed {}: {}", report.seed, report.outcome);
    eprintln!(
        "{}-{}{}: emissions {:.3} Mt, investment {:.0} MCHF, land use {:.1} km2, imports {:.0} TJ",
        score.first_year,
        score.last_year,
        if score.partial { " (partial)" } else { "" },
        score.emissions_mt,
        score.investment_mchf,
        score.land_use_km2,
        score.electricity_imports_tj
    );
    Ok(report.outcome.exit_code())
}

fn calibrate(history: &Path, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let data = ScenarioData::from_path(history)?;
    let set = CalibrationSet::fit(&data)?;
    write_output(out.as_deref(), &set.to_csv())?;
    for (id, m) in &set.forecasts {
        eprintln!(
            "{id}: {} points to {}, {:.3} + {:.3}/yr",
            m.window, m.base_year, m.intercept, m.slope
        );
    }
    for (id, s) in &set.seasonal {
        eprintln!("{id}: summer share {:.4}", s.summer_share);
    }
    for (carrier, e) in &set.emission_factors {
        eprintln!("emissions.{carrier}: {:.1} kg/TJ over {} years", e.factor, e.window);
    }
    Ok(0)
}

fn replay(export: &Path, scenario: Option<PathBuf>, params: Option<PathBuf>) -> anyhow::Result<u8> {
    let model = Arc::new(load_model(scenario.as_deref(), params.as_deref())?);
    let file = fs::File::open(export).map_err(|e| anyhow::anyhow!("{}: {e}", export.display()))?;
    let records = read_export(BufReader::new(file))?;
    let mut failures = 0;
    let mut stdout = io::stdout().lock();
    for record in &records {
        let check = replay_record(model.clone(), record);
        let verdict = match &check.result {
            Ok(_) if check.matches() => "match".to_string(),
            Ok(card) => format!("MISMATCH: replayed {}", serde_json::to_string(card)?),
            Err(e) => format!("FAILED: {e}"),
        };
        if !check.matches() {
            failures += 1;
        }
        writeln!(stdout, "{} {verdict}", check.session_id)?;
    }
    eprintln!("{} sessions, {failures} not reproduced", records.len());
    Ok(if failures == 0 { 0 } else { EXIT_SIMULATION })
}

fn serve(
    listen: Option<SocketAddr>,
    storage: Option<String>,
    scenario: Option<PathBuf>,
    params: Option<PathBuf>,
) -> anyhow::Result<u8> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    let mut config = ServerConfig::from_env()?;
    if let Some(listen) = listen {
        config.listen = listen;
    }
    if let Some(storage) = storage {
        config.storage = Storage::parse(&storage)?;
    }
    let model = Arc::new(load_model(scenario.as_deref(), params.as_deref())?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(transition_service::serve(model, config))?;
    Ok(0)
}
