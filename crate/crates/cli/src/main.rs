use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ris_thp::channel::ScenarioConfig;
use ris_thp::sim::{self, Method, RunConfig, Sweep};

#[derive(Parser)]
#[command(name = "ris-thp", version, about = "Monte Carlo precoding experiments for RIS-aided broadcast channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write one CSV row per (sweep value, trial, method).
    Run {
        /// Run configuration (TOML). Without it, the default scenario with every method is used.
        config: Option<PathBuf>,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Sweep the angular spread over comma-separated values in radians.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["sweep_nr", "sweep_tx"])]
        sweep_asd: Option<Vec<f64>>,
        /// Sweep the number of RIS elements.
        #[arg(long, value_delimiter = ',', conflicts_with = "sweep_tx")]
        sweep_nr: Option<Vec<usize>>,
        /// Sweep the transmit power in dBm.
        #[arg(long, value_delimiter = ',')]
        sweep_tx: Option<Vec<f64>>,
        /// Write 0 for wall time so repeated runs produce identical files.
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        threads: Option<usize>,
        /// Evaluate only the best M candidates per greedy step under the two-norm relaxation.
        #[arg(long, value_name = "M")]
        relaxation_prune: Option<usize>,
    },
    /// Run the built-in invariant checks and, optionally, validate a config file.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print a complete run configuration for a scenario preset.
    Preset {
        /// One of ris_weak, orthogonality, stronger_impact, very_strong_impact.
        name: String,
    },
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
    sweep_asd: Option<Vec<f64>>,
    sweep_nr: Option<Vec<usize>>,
    sweep_tx: Option<Vec<f64>>,
    no_timing: bool,
    threads: Option<usize>,
    relaxation_prune: Option<usize>,
) -> Result<()> {
    let mut cfg = match &config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::new(ScenarioConfig::default(), 100, Method::ALL.to_vec()),
    };
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    if let Some(v) = sweep_asd {
        cfg.sweep = Sweep::Asd(v);
    }
    if let Some(v) = sweep_nr {
        cfg.sweep = Sweep::NRis(v);
    }
    if let Some(v) = sweep_tx {
        cfg.sweep = Sweep::TxDbm(v);
    }
    if no_timing {
        cfg.options.timing = false;
    }
    if threads.is_some() {
        cfg.options.threads = threads;
    }
    if relaxation_prune.is_some() {
        cfg.options.relaxation_prune = relaxation_prune;
    }
    cfg.validate()?;

    let records = sim::run(&cfg)?;
    match &out {
        Some(p) => sim::emit_csv(&records, p)?,
        None => {
            let stdout = std::io::stdout();
            sim::write_csv(&records, stdout.lock()).context("writing CSV to stdout")?;
        }
    }
    let mut err = std::io::stderr().lock();
    for (value, method, mean, n) in sim::summarize(&records) {
        writeln!(err, "{} = {value}: {method:<20} mean {mean:8.3} bits over {n} trials", cfg.sweep.name())?;
    }
    Ok(())
}

fn validate(config: Option<PathBuf>) -> Result<bool> {
    let mut ok = true;
    if let Some(p) = config {
        match RunConfig::load(&p) {
            Ok(_) => println!("ok    config {}", p.display()),
            Err(e) => {
                println!("FAIL  config: {e}");
                ok = false;
            }
        }
    }
    for c in sim::self_check() {
        println!("{}  {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

fn preset(name: &str) -> Result<()> {
    let Some(scenario) = ScenarioConfig::preset(name) else {
        bail!("unknown preset `{name}`; expected one of {:?}", ScenarioConfig::PRESETS);
    };
    let cfg = RunConfig::new(scenario, 100, Method::ALL.to_vec());
    print!("{}", cfg.to_toml_string()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            trials,
            seed,
            sweep_asd,
            sweep_nr,
            sweep_tx,
            no_timing,
            threads,
            relaxation_prune,
        } => run(config, out, trials, seed, sweep_asd, sweep_nr, sweep_tx, no_timing, threads, relaxation_prune).map(|_| true),
        Command::Validate { config } => validate(config),
        Command::Preset { name } => preset(&name).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
