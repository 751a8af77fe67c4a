//! `infospread` command-line front end.
//!
//! Exit codes: 0 success, 2 config or input error, 3 numerical failure,
//! 4 I/O error.

mod commands;
mod config;
mod error;
mod io;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use config::*;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "infospread", version, about = "Information spreading on heterogeneous networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config file, inline JSON object, or a `.run.json` sidecar.
    #[arg(long)]
    config: Option<String>,
    /// Master seed; recorded in the sidecar (drawn at random if absent).
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout if absent); a sidecar goes to `<out>.run.json`.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Input file overriding the config's `input`; `-` reads stdin.
    #[arg(long)]
    input: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Moments, thresholds, Λ_m and ANND of a degree kernel (JSON).
    Ensemble(Common),
    /// Prevalence and efficiency over an α or θ grid (CSV).
    Sweep(Common),
    /// Monte Carlo trace (CSV) or multi-run prevalence (JSON) on an edge list.
    Simulate(Common),
    /// Barabási–Albert or configuration-model edge list.
    GenGraph(Common),
    /// Mean-field trajectory (CSV) or report (JSON).
    Solve(Common),
    /// Closed-form activity rate on the observation grid (CSV).
    TvSeries(Common),
    /// Levenberg–Marquardt fit of the six rate-law parameters (JSON).
    Fit(Common),
    /// K-SC clustering of a corpus (JSON).
    Cluster(Common),
    /// Rate law against AR(6) and AR(39) on a held-out tail (JSON).
    Predict(Common),
    /// Gaussian smoothing of a series (CSV).
    Smooth(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Ensemble(c) => ("ensemble", c),
            Command::Sweep(c) => ("sweep", c),
            Command::Simulate(c) => ("simulate", c),
            Command::GenGraph(c) => ("gen-graph", c),
            Command::Solve(c) => ("solve", c),
            Command::TvSeries(c) => ("tv-series", c),
            Command::Fit(c) => ("fit", c),
            Command::Cluster(c) => ("cluster", c),
            Command::Predict(c) => ("predict", c),
            Command::Smooth(c) => ("smooth", c),
        }
    }
}

/// Raw config value plus any seed carried by a sidecar.
fn load_config(name: &str, common: &Common) -> CliResult<(Value, Option<u64>)> {
    let text = match common.config.as_deref() {
        None => "{}".to_owned(),
        Some(s) if s.trim_start().starts_with('{') => s.to_owned(),
        Some(path) => io::read_text(path)?,
    };
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("config is not valid JSON: {e}")))?;
    if let Some(side) = Sidecar::detect(&value) {
        if side.command != name {
            return Err(CliError::config(format!(
                "sidecar is for `{}`, not `{name}`",
                side.command
            )));
        }
        return Ok((side.config, side.seed));
    }
    Ok((value, None))
}

fn parse<T: DeserializeOwned>(mut value: Value, common: &Common) -> CliResult<T> {
    if let Some(input) = &common.input {
        match value.as_object_mut() {
            Some(obj) => {
                obj.insert("input".into(), Value::String(input.clone()));
            }
            None => return Err(CliError::config("config must be a JSON object")),
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))
}

struct Run {
    output: Vec<u8>,
    seed: Option<u64>,
    config: Value,
}

fn resolved<T: Serialize>(cfg: &T) -> CliResult<Value> {
    serde_json::to_value(cfg).map_err(|e| CliError::config(e.to_string()))
}

fn execute(name: &str, common: &Common) -> CliResult<Run> {
    let (value, sidecar_seed) = load_config(name, common)?;
    let seed = common
        .seed
        .or(sidecar_seed)
        .unwrap_or_else(rand::random::<u64>);
    let (output, seed, config) = match name {
        "ensemble" => {
            let cfg: EnsembleConfig = parse(value, common)?;
            (commands::ensemble(&cfg)?, None, resolved(&cfg)?)
        }
        "sweep" => {
            let mut cfg: SweepConfig = parse(value, common)?;
            cfg.options.seed = seed;
            (commands::sweep(&cfg)?, Some(seed), resolved(&cfg)?)
        }
        "simulate" => {
            let cfg: SimulateConfig = parse(value, common)?;
            (commands::simulate_cmd(&cfg, seed)?, Some(seed), resolved(&cfg)?)
        }
        "gen-graph" => {
            let mut cfg: GenGraphConfig = parse(value, common)?;
            cfg.resolve();
            (commands::gen_graph(&cfg, seed)?, Some(seed), resolved(&cfg)?)
        }
        "solve" => {
            let cfg: SolveConfig = parse(value, common)?;
            (commands::solve_cmd(&cfg)?, None, resolved(&cfg)?)
        }
        "tv-series" => {
            let cfg: TvSeriesConfig = parse(value, common)?;
            (commands::tv_series(&cfg)?, None, resolved(&cfg)?)
        }
        "fit" => {
            let mut cfg: FitConfig = parse(value, common)?;
            cfg.options.seed = seed;
            (commands::fit(&cfg)?, Some(seed), resolved(&cfg)?)
        }
        "cluster" => {
            let cfg: ClusterConfig = parse(value, common)?;
            (commands::cluster(&cfg, seed)?, Some(seed), resolved(&cfg)?)
        }
        "predict" => {
            let mut cfg: PredictConfig = parse(value, common)?;
            cfg.options.seed = seed;
            (commands::predict(&cfg)?, Some(seed), resolved(&cfg)?)
        }
        "smooth" => {
            let cfg: SmoothConfig = parse(value, common)?;
            (commands::smooth(&cfg)?, None, resolved(&cfg)?)
        }
        other => unreachable!("unknown command {other}"),
    };
    Ok(Run {
        output,
        seed,
        config,
    })
}

fn run(cli: &Cli) -> CliResult<()> {
    let (name, common) = cli.command.parts();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::config(format!("cannot start worker pool: {e}")))?;
    let result = pool.install(|| execute(name, common))?;
    io::write_output(common.out.as_deref(), &result.output)?;
    if let Some(out) = common.out.as_deref().filter(|o| *o != "-") {
        let side = Sidecar {
            command: name.to_owned(),
            seed: result.seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config: result.config,
        };
        let mut bytes = serde_json::to_vec_pretty(&side)
            .map_err(|e| CliError::config(e.to_string()))?;
        bytes.push(b'\n');
        let path = format!("{out}.run.json");
        std::fs::write(&path, bytes).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
