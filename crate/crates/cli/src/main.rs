//! `pwr-advisor` command-line interface.
//!
//! ```text
//! pwr-advisor [--out PATH] [--seed N] [--budget S] run <scenario>
//! pwr-advisor [--out PATH] compare <a.csv> <b.csv> [--burnup BOC|EOC80]
//! pwr-advisor serve [--port 8080] [--scenario <scenario>]
//! pwr-advisor list-scenarios
//! ```
//!
//! `<scenario>` is a scenario file path or the name of a bundled scenario.
//! On failure the process exits nonzero after printing one JSON line to
//! stderr: `{"error": kind, "message": text, "field"?: name, "line"?: n}`.

use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use pwr_advisor::plant::{Burnup, PlantParams};
use pwr_advisor::scenario::{
    bundled_scenario, compare, export_csv, load_csv, load_scenario, run_closed_loop, targets_from_series,
    ScenarioConfig, BUNDLED_SCENARIOS,
};
use pwr_advisor::ScenarioError;
use pwr_advisor_service::AppState;

#[derive(Debug, Parser)]
#[command(name = "pwr-advisor", version, about = "PWR load-following advisor: scenario runner and session server")]
struct Cli {
    /// Output file (CSV series for `run`, report for `compare`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the per-solve wall-clock budget, s.
    #[arg(long, global = true, allow_negative_numbers = true)]
    budget: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario closed loop and export its series as CSV.
    Run {
        /// Scenario file or bundled scenario name.
        scenario: String,
    },
    /// Compare two exported runs (b relative to a).
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Preset used to compute the equilibrium convergence targets.
        #[arg(long, default_value = "BOC")]
        burnup: String,
    },
    /// Start the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Scenario used when a session is created without a body.
        #[arg(long, default_value = "load_follow")]
        scenario: String,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

/// One-line, machine-parsable failure.
#[derive(Debug)]
struct Failure(Value);

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let kind = match &e {
            ScenarioError::Parse { .. } => "parse",
            ScenarioError::Validation { .. } => "validation",
            ScenarioError::Io(_) => "io",
            ScenarioError::TimelineMismatch(_) => "timeline_mismatch",
            ScenarioError::Run { .. } => "run",
            ScenarioError::Csv { .. } => "csv",
            ScenarioError::Param(_) => "param",
            ScenarioError::Strategy(_) => "strategy",
        };
        let mut v = json!({"error": kind, "message": e.to_string()});
        match &e {
            ScenarioError::Validation { field, .. } => v["field"] = json!(field),
            ScenarioError::Parse { line, .. } | ScenarioError::Csv { line, .. } => v["line"] = json!(line),
            ScenarioError::Run { t, .. } => v["t"] = json!(t),
            _ => {}
        }
        Failure(v)
    }
}

impl Failure {
    fn new(kind: &str, message: impl std::fmt::Display) -> Self {
        Failure(json!({"error": kind, "message": message.to_string()}))
    }
}

/// Load a scenario from a path, falling back to the bundled name.
fn resolve_scenario(arg: &str) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(arg);
    if !path.exists() && BUNDLED_SCENARIOS.iter().any(|(n, _)| *n == arg) {
        return Ok(bundled_scenario(arg)?);
    }
    load_scenario(path).map_err(|e| match e {
        ScenarioError::Io(io) => Failure::new("io", format!("{arg}: {io}")),
        other => other.into(),
    })
}

fn load_series(path: &Path) -> Result<Vec<pwr_advisor::scenario::Sample>, Failure> {
    load_csv(path).map_err(|e| {
        let mut f = Failure::from(e);
        f.0["path"] = json!(path.display().to_string());
        f
    })
}

fn run(cli: &Cli, scenario: &str) -> Result<(), Failure> {
    let mut cfg = resolve_scenario(scenario)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(budget) = cli.budget {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Failure::from(ScenarioError::Validation {
                field: "budget".into(),
                reason: format!("must be positive, got {budget}"),
            }));
        }
        cfg.budget = budget;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.name)));
    let result = run_closed_loop(&cfg)?;
    export_csv(&result.samples, &out)?;
    let summary = json!({
        "scenario": result.name,
        "seed": result.seed,
        "samples": result.samples.len(),
        "output": out.display().to_string(),
        "metrics": result.metrics,
        "solver_wall_time": result.wall_time,
    });
    println!("{summary}");
    Ok(())
}

fn compare_files(cli: &Cli, a: &Path, b: &Path, burnup: &str) -> Result<(), Failure> {
    let burnup: Burnup = burnup.parse().map_err(|e| Failure::new("validation", e))?;
    let params = PlantParams::preset(burnup);
    let sa = load_series(a)?;
    let sb = load_series(b)?;
    let report = compare(&sa, targets_from_series(&sa, &params), &sb, targets_from_series(&sb, &params))?;
    let text = report.to_text();
    match &cli.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| Failure::from(ScenarioError::Io(e)))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn serve(port: u16, scenario: &str) -> Result<(), Failure> {
    let cfg = resolve_scenario(scenario)?;
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new("io", e))?;
    let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, port));
    runtime
        .block_on(pwr_advisor_service::serve(AppState::new(cfg), addr))
        .map_err(|e| Failure::new("io", e))
}

fn list_scenarios() -> Result<(), Failure> {
    for (name, _) in BUNDLED_SCENARIOS {
        let cfg = bundled_scenario(name)?;
        println!(
            "{name}\t{}\t{}\t{}",
            cfg.burnup,
            cfg.strategy.kind,
            cfg.description.unwrap_or_default()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", json!({"error": "usage", "message": first}));
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Run { scenario } => run(&cli, scenario),
        Command::Compare { a, b, burnup } => compare_files(&cli, a, b, burnup),
        Command::Serve { port, scenario } => serve(*port, scenario),
        Command::ListScenarios => list_scenarios(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(v)) => {
            eprintln!("{v}");
            ExitCode::FAILURE
        }
    }
}
