use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use secure_platoon::harness::{
    analyze, emit_plots, export_events, export_metrics, export_trace, load_metrics, run_monte_carlo, simulate, Mode,
    RunConfig,
};
use secure_platoon::Result;

#[derive(Parser)]
#[command(name = "platoon", version, about = "Attack-resilient platoon simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo batch and write metrics, the first run's trace and plots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run the batch on a single thread.
        #[arg(long)]
        serial: bool,
    },
    /// Print the estimation and control condition verdicts as JSON.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render plots from a metrics file.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            mode,
            seed,
            runs,
            out,
            serial,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            cfg.validate()?;
            let metrics = run_monte_carlo(&cfg, !serial)?;
            let trace = simulate(&cfg, 0)?;
            export_metrics(&metrics, out.join("metrics.json"))?;
            export_trace(&trace, out.join("trace.csv"))?;
            export_events(&trace.events, out.join("events.csv"))?;
            emit_plots(&metrics, &out)?;
            let detected = metrics.detection_time.iter().filter(|d| d.is_some()).count();
            println!("runs: {}  horizon: {}  mode: {:?}", metrics.runs, metrics.horizon, metrics.mode);
            println!("average crash count: {}", metrics.crash_count);
            println!("runs with the attacker isolated: {detected}");
            for (i, e) in metrics.terminal_spacing_error(&cfg.spacing, 200) {
                println!("vehicle {i}: terminal spacing error {e:.4e} m");
            }
            println!("outputs written to {}", out.display());
        }
        Command::Analyze { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = analyze(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Plot { metrics, out } => {
            let m = load_metrics(&metrics)?;
            for p in emit_plots(&m, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
