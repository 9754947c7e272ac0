use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use airq_cli::commands;
use airq_cli::config::{fixture_config_file, RunConfig};
use airq_core::fixtures::{generate_fixture, FixtureSpec, PlantedTarget};
use airq_core::{CivilDate, Error, Result};

/// Next-day air pollutant forecasting from satellite, weather and terrain data.
#[derive(Debug, Parser)]
#[command(name = "airq", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More log output; repeat for debug.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Print errors as a JSON object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check input files and report coverage and rule violations.
    Validate,
    /// Write per-day missingness fractions to missingness.csv.
    Report,
    /// Fit one model per (pollutant, model, w) on all data.
    Train,
    /// Leave-one-year-out cross-validation; writes results.csv and a table.
    Evaluate,
    /// Next-day predictions for every station.
    Predict,
    /// Next-day predictions on a regular grid of cells.
    PredictGrid,
    /// Generate a synthetic dataset and a matching config.json in --out.
    Fixture {
        #[arg(long, default_value_t = 3)]
        stations: usize,
        #[arg(long, default_value_t = 120)]
        days: usize,
        #[arg(long, default_value = "2019-10-15")]
        start: CivilDate,
        /// Plant an affine target instead of the threshold interaction.
        #[arg(long)]
        linear: bool,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        #[arg(long, default_value_t = 0.05)]
        pollution_missing: f64,
        #[arg(long, default_value_t = 0.05)]
        satellite_missing: f64,
        #[arg(long, default_value_t = 20)]
        raster_days: usize,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        if cfg.model_dir == cfg.output_dir.join("models") {
            cfg.model_dir = out.join("models");
        }
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Command::Fixture {
        stations,
        days,
        start,
        linear,
        noise,
        pollution_missing,
        satellite_missing,
        raster_days,
    } = &cli.command
    {
        let dir = cli
            .out
            .clone()
            .ok_or_else(|| Error::Config("fixture needs --out <dir>".into()))?;
        let spec = FixtureSpec {
            n_stations: *stations,
            n_days: *days,
            start: *start,
            seed: cli.seed.unwrap_or(FixtureSpec::default().seed),
            target: if *linear {
                PlantedTarget::Linear
            } else {
                PlantedTarget::Threshold
            },
            noise: *noise,
            pollution_missing: *pollution_missing,
            satellite_missing: *satellite_missing,
            raster_days: *raster_days,
            ..FixtureSpec::default()
        };
        let out = generate_fixture(&spec, &dir)?;
        let cfg_path = dir.join("config.json");
        let text = serde_json::to_string_pretty(&fixture_config_file())
            .map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&cfg_path, text + "\n").map_err(|e| Error::Io {
            path: cfg_path.clone(),
            source: e,
        })?;
        println!(
            "fixture {}..{} with {} stations written to {}",
            out.start,
            out.end,
            out.stations.len(),
            dir.display()
        );
        return Ok(ExitCode::SUCCESS);
    }

    let cfg = load_config(cli)?;
    match cli.command {
        Command::Validate => {
            let report = commands::cmd_validate(&cfg)?;
            print!("{report}");
            if !report.is_clean() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report => println!("{}", commands::cmd_report(&cfg)?.display()),
        Command::Train => {
            for p in commands::cmd_train(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Evaluate => print!("{}", commands::cmd_evaluate(&cfg)?.table.render_text()),
        Command::Predict => println!("{}", commands::cmd_predict(&cfg)?.display()),
        Command::PredictGrid => println!("{}", commands::cmd_predict_grid(&cfg)?.display()),
        Command::Fixture { .. } => unreachable!("handled above"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            if cli.json_errors {
                let obj = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
                eprintln!("{obj}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
