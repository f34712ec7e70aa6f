use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vsnash::{Error, Result};
use vsnash_cli::config::{parse_instance_section, ExperimentConfig};
use vsnash_cli::{experiment, plot, predict};

#[derive(Parser)]
#[command(name = "vsnash", version, about = "Variance-reduced Nash equilibrium experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a configured experiment and write trace.csv, summary.json and
    /// instance.json to the output directory.
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the closed-form iteration/oracle/communication bounds for the
    /// configured scheme at the given accuracy levels.
    Predict {
        config: PathBuf,
        /// Comma-separated accuracy levels, e.g. --eps 1e-2,1e-3,1e-4
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
    },
    /// Render one SVG panel of log error curves from one or more trace files.
    Plot {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
        /// Which trace column to draw: mse, rel_err or consensus_err.
        #[arg(long, default_value = "mse")]
        column: String,
        /// Horizontal axis: k (iterations) or samples (cumulative, log scale).
        #[arg(long, default_value = "k")]
        x_axis: String,
    },
    /// Generate a benchmark instance from the [instance] section of a config
    /// and write it as JSON.
    GenInstance {
        spec: PathBuf,
        #[arg(long, default_value = "instance.json")]
        out: PathBuf,
    },
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Run { config, out } => {
            let cfg = read_config(&config)?;
            let (summary, dir) = experiment::run_experiment(&cfg, out.as_deref())?;
            let brief = serde_json::json!({
                "out_dir": dir,
                "scheme": summary.scheme,
                "replications": summary.replications,
                "iterations": summary.rows.len().saturating_sub(1),
                "final_mse": summary.final_mse,
                "final_rel_err": summary.final_rel_err,
                "rate_fit": summary.rate_fit,
                "wall_clock_secs": summary.wall_clock_secs,
            });
            println!("{brief}");
            Ok(())
        }
        Cmd::Predict { config, eps } => {
            let cfg = read_config(&config)?;
            let report = predict::prediction_report(&cfg, &eps)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Config(format!("serialize report: {e}")))?;
            println!("{text}");
            Ok(())
        }
        Cmd::Plot { traces, out, column, x_axis } => {
            match plot::plot_files(&traces, &column, &x_axis, &out)? {
                Some(path) => println!("{}", serde_json::json!({ "out": path })),
                None => println!("{}", serde_json::json!({ "out": null })),
            }
            Ok(())
        }
        Cmd::GenInstance { spec, out } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| Error::Config(format!("{}: {e}", spec.display())))?;
            let (inst_cfg, mu) = parse_instance_section(&text)?;
            let (game, inst) = inst_cfg.build(mu)?;
            let mut json = serde_json::to_string_pretty(&inst)
                .map_err(|e| Error::Config(format!("serialize instance: {e}")))?;
            json.push('\n');
            std::fs::write(&out, json)
                .map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
            println!(
                "{}",
                serde_json::json!({
                    "out": out,
                    "family": inst_cfg.family,
                    "n": game.n_players(),
                    "l": inst_cfg.l,
                })
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match &e {
                Error::Config(_) | Error::Domain(_) => "config",
                Error::Precondition(_) | Error::OracleFailure(_) => "precondition",
                Error::Divergence(_) => "divergence",
            };
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": kind,
                    "message": e.to_string(),
                    "exit_code": e.exit_code(),
                })
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
