//! Command-line harness: run scenarios, replay calibration logs, check
//! the model math, and generate the deterministic assets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use affect_mesh::affect::MoodLookup;
use affect_mesh::catalog::{Catalog, CatalogParams};
use affect_mesh::cfc::{CfcConfig, CfcModel, CfcState};
use affect_mesh::cmb::scan_wire_privacy;
use affect_mesh::paf::{self, PafConfig};
use affect_mesh::sim::scenario::{
    scenario_colisten, scenario_echo, scenario_solo, ScenarioScript,
};
use affect_mesh::train::{finite_difference_check, train, TrainConfig};

/// Script validation failures exit with this code.
const EXIT_BAD_SCRIPT: u8 = 2;
/// Malformed calibration input exits with this code.
const EXIT_BAD_LOG: u8 = 3;

#[derive(Parser)]
#[command(name = "affect-mesh", version, about = "mood-mesh simulator and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario script and write its logs.
    Simulate {
        /// Canned name (echo-off, echo-on, colisten, solo) or a JSON path.
        #[arg(long)]
        scenario: String,
        /// Directory for events.csv, svaf.csv, requeues.csv, rho.csv,
        /// wire.jsonl, and metrics.txt; stdout gets the metrics either way.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a behavioral log into arousal-calibration buckets and
    /// compare against a reference profile.
    PafReplay {
        /// Behavioral log CSV; bundled fixture when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Reference profile CSV; bundled fixture when omitted.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Verify the continuous-time cell arithmetic on closed forms.
    CfcCheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Train the toy model on the synthetic task and report losses.
    TrainToy {
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        /// Directory for checkpoints, best weights, and metrics.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic catalog CSV.
    CatalogGen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the 20x20 mood-anchor lookup file.
    LookupGen {
        #[arg(long, default_value_t = 9)]
        seed: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Privacy-scan wire traffic: one JSON block per line.
    Scan {
        /// File of serialized blocks, or a canned scenario name to run
        /// and scan its traffic.
        #[arg(long)]
        input: String,
    },
}

fn canned(name: &str) -> Option<ScenarioScript> {
    match name {
        "echo-off" => Some(scenario_echo(false)),
        "echo-on" => Some(scenario_echo(true)),
        "colisten" => Some(scenario_colisten()),
        "solo" => Some(scenario_solo()),
        _ => None,
    }
}

fn load_scenario(spec: &str) -> Result<ScenarioScript> {
    if let Some(script) = canned(spec) {
        return Ok(script);
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading scenario {spec}"))?;
    Ok(ScenarioScript::from_json(&text)?)
}

fn cmd_simulate(spec: &str, out: Option<&Path>) -> Result<()> {
    let script = load_scenario(spec)?;
    let result = affect_mesh::sim::run(&script)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("events.csv"), result.events_csv())?;
        fs::write(dir.join("svaf.csv"), result.svaf_csv())?;
        fs::write(dir.join("requeues.csv"), result.requeue_csv())?;
        fs::write(dir.join("rho.csv"), result.rho_csv())?;
        fs::write(dir.join("wire.jsonl"), result.logs.wire.join("\n") + "\n")?;
        fs::write(dir.join("metrics.txt"), result.metrics_text())?;
    }
    print!("{}", result.metrics_text());
    Ok(())
}

fn cmd_paf_replay(log: Option<&Path>, reference: Option<&Path>) -> Result<()> {
    let log_text = match log {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => paf::BUNDLED_LOG.to_string(),
    };
    let ref_text = match reference {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => paf::BUNDLED_REFERENCE.to_string(),
    };
    let rows = paf::parse_log(&log_text)?;
    let reference = paf::parse_reference(&ref_text)?;
    let paf = paf::replay(&rows, PafConfig::default());
    let report = paf::compare(&paf, &reference);
    print!("{}", report.render());
    Ok(())
}

fn cmd_cfc_check(seed: u64) -> Result<()> {
    let config = CfcConfig::toy();
    let model = CfcModel::new(&config, seed);
    let x = vec![0.3; config.input_dim];

    // dt = 0 must be a fixed point of the state update.
    let mut state = CfcState::fresh(&config, 0.0);
    let before = state.h.clone();
    model.forward(&mut state, &x, 0.0)?;
    let dt0_exact = state.h == before;
    println!(
        "dt=0 identity: {}",
        if dt0_exact { "exact" } else { "BROKEN" }
    );

    // One long step against two half steps with constant input: the
    // mismatch is bounded because the target the state decays toward is
    // recomputed midway.
    let mut one = CfcState::fresh(&config, 0.0);
    model.forward(&mut one, &x, 2.0)?;
    let mut two = CfcState::fresh(&config, 0.0);
    model.forward(&mut two, &x, 1.0)?;
    model.forward(&mut two, &x, 1.0)?;
    let max_gap = one
        .h
        .iter()
        .flatten()
        .zip(two.h.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("split-step consistency: max gap {max_gap:.2e}");

    let report = finite_difference_check(seed);
    println!(
        "gradient check: {} params, max relative error {:.2e} (param {})",
        report.params_checked, report.max_rel_error, report.worst_index
    );
    if !dt0_exact || report.max_rel_error > 1e-4 {
        bail!("model arithmetic check failed");
    }
    Ok(())
}

fn cmd_train_toy(seed: u64, epochs: usize, out: Option<&Path>) -> Result<()> {
    let config = CfcConfig::toy();
    let train_config = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let (_, report) = train(&config, &train_config, seed, out)?;
    println!(
        "epochs run: {}{}",
        report.epochs_run,
        if report.stopped_early {
            " (stopped early)"
        } else {
            ""
        }
    );
    println!(
        "validation loss: {:.4} -> {:.4} (best at epoch {})",
        report.initial_val.total, report.best_val.total, report.best_epoch
    );
    if report.best_val.total >= report.initial_val.total {
        bail!("training failed to improve the validation loss");
    }
    Ok(())
}

fn cmd_catalog_gen(seed: u64, count: usize, out: Option<&Path>) -> Result<()> {
    let catalog = Catalog::generate_with(&CatalogParams {
        seed,
        count,
        ..CatalogParams::default()
    });
    match out {
        Some(p) => catalog.save(p)?,
        None => print!("{}", catalog.to_csv()),
    }
    Ok(())
}

fn cmd_lookup_gen(seed: u64, out: Option<&Path>) -> Result<()> {
    let lookup = MoodLookup::generate(seed);
    match out {
        Some(p) => lookup.save(p)?,
        None => print!("{}", lookup.to_file_string()),
    }
    Ok(())
}

fn cmd_scan(input: &str) -> Result<()> {
    let wires: Vec<String> = if let Some(script) = canned(input) {
        let result = affect_mesh::sim::run(&script)?;
        result.logs.wire
    } else {
        fs::read_to_string(input)
            .with_context(|| format!("reading {input}"))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect()
    };
    for (i, wire) in wires.iter().enumerate() {
        scan_wire_privacy(wire)
            .map_err(|e| anyhow::anyhow!("block {}: {e}", i + 1))?;
    }
    println!("scanned {} blocks: clean", wires.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { scenario, out } => cmd_simulate(scenario, out.as_deref()),
        Command::PafReplay { log, reference } => cmd_paf_replay(log.as_deref(), reference.as_deref()),
        Command::CfcCheck { seed } => cmd_cfc_check(*seed),
        Command::TrainToy { seed, epochs, out } => cmd_train_toy(*seed, *epochs, out.as_deref()),
        Command::CatalogGen { seed, count, out } => cmd_catalog_gen(*seed, *count, out.as_deref()),
        Command::LookupGen { seed, out } => cmd_lookup_gen(*seed, out.as_deref()),
        Command::Scan { input } => cmd_scan(input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<affect_mesh::sim::scenario::ScenarioError>().is_some() {
                ExitCode::from(EXIT_BAD_SCRIPT)
            } else if e.downcast_ref::<affect_mesh::paf::PafError>().is_some() {
                ExitCode::from(EXIT_BAD_LOG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
