use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sparse_ips::scenario::{
    builtin_scenario, run_graphstats, run_hydro, run_localeq, run_meanfield, run_randomlimit,
    run_scenario, run_simulate, with_threads, GraphStatsConfig, HydroSpec, LocaleqConfig,
    MeanfieldConfig, RandomLimitSpec, ScenarioSpec, SimulateConfig,
};

/// Simulation and approximation toolkit for interacting particle systems
/// on sparse graphs.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to SPARSE_IPS_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for CSV/SVG artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Direct event-driven simulation from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Mean-field master equation or nonlinear particle system.
    Meanfield {
        #[arg(long)]
        config: PathBuf,
    },
    /// Markovianized local equation (ODE or Monte Carlo fixed point).
    Localeq {
        #[arg(long)]
        config: PathBuf,
    },
    /// Hydrodynamic-limit convergence report (G(n, c/n) vs UGW trees).
    Hydro {
        /// Optional TOML config; defaults mirror the built-in check.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Summary statistics of a graph generator.
    Graphstats {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a built-in scenario (fig2, fig4, randomlimit) or a TOML file.
    Scenario {
        /// Scenario name or path to a scenario TOML.
        target: String,
    },
}

fn load<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<(), String> {
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("SPARSE_IPS_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        });
    let out_dir = cli.out_dir.clone();
    let seed = cli.seed;
    let files = with_threads(threads, move || -> Result<Vec<PathBuf>, String> {
        match &cli.command {
            Command::Simulate { config } => {
                let cfg: SimulateConfig = load(config)?;
                run_simulate(&cfg, &out_dir, seed).map_err(|e| e.to_string())
            }
            Command::Meanfield { config } => {
                let cfg: MeanfieldConfig = load(config)?;
                run_meanfield(&cfg, &out_dir, seed).map_err(|e| e.to_string())
            }
            Command::Localeq { config } => {
                let cfg: LocaleqConfig = load(config)?;
                run_localeq(&cfg, &out_dir, seed).map_err(|e| e.to_string())
            }
            Command::Hydro { config } => {
                let cfg: HydroSpec = match config {
                    Some(p) => load(p)?,
                    None => HydroSpec::default(),
                };
                let report = run_hydro(&cfg, &out_dir, seed).map_err(|e| e.to_string())?;
                for (n, d) in report.ns.iter().zip(&report.distances) {
                    println!("n={n}: W1 = {d:.5}");
                }
                println!("inversions: {}", report.inversions);
                Ok(report.files)
            }
            Command::Graphstats { config } => {
                let cfg: GraphStatsConfig = load(config)?;
                run_graphstats(&cfg, &out_dir, seed).map_err(|e| e.to_string())
            }
            Command::Scenario { target } => {
                if target == "randomlimit" {
                    let spec = RandomLimitSpec::default();
                    let report =
                        run_randomlimit(&spec, &out_dir, seed).map_err(|e| e.to_string())?;
                    for (n, d) in report.ns.iter().zip(&report.dispersion) {
                        println!("n={n}: dispersion = {d:.4}");
                    }
                    return Ok(report.files);
                }
                let spec: ScenarioSpec = match builtin_scenario(target) {
                    Some(s) => s,
                    None => {
                        let path = PathBuf::from(target);
                        let text = std::fs::read_to_string(&path)
                            .map_err(|e| format!("{target}: not a built-in scenario and {e}"))?;
                        ScenarioSpec::from_toml(&text).map_err(|e| e.to_string())?
                    }
                };
                let out = run_scenario(&spec, &out_dir, seed).map_err(|e| e.to_string())?;
                Ok(out.files)
            }
        }
    })
    .map_err(|e| e.to_string())??;
    for f in files {
        println!("wrote {}", f.display());
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
