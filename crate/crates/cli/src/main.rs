//! `gloa` — quench experiments from TOML configs or built-in presets.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gloa_cli::config::ExperimentConfig;
use gloa_cli::presets;
use gloa_cli::runner::{run_experiment, write_output};
use gloa_cli::CliError;

#[derive(Parser)]
#[command(name = "gloa", version, about = "Mixed-state quench dynamics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config file.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Output directory (overrides the config's `output.directory`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in preset experiment.
    Preset {
        /// Preset name (see `list-presets`).
        name: String,
        /// Output directory (overrides the preset's default).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the preset's refinement level count (1 disables).
        #[arg(long)]
        refine: Option<u32>,
    },
    /// List the built-in presets.
    ListPresets,
    /// Validate a config file without running it.
    Validate {
        /// Path to the experiment config.
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(ExperimentConfig::from_toml_str(&text)?)
}

fn execute(config: ExperimentConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let dir = out.unwrap_or_else(|| PathBuf::from(&config.output.directory));
    let run = run_experiment(&config)?;
    let written = write_output(&run, &dir)?;
    println!(
        "{}: {} modes x {} steps (dt = {:.3e}), analyses [{}]",
        run.manifest.name,
        run.manifest.half_count,
        run.manifest.steps,
        run.manifest.dt,
        run.manifest.analyses.join(", ")
    );
    if !run.manifest.cusp_candidates.is_empty() {
        println!(
            "  rate non-analyticity candidates at t = {}",
            run.manifest
                .cusp_candidates
                .iter()
                .map(|(t, _)| format!("{t:.6}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    if let Some(r) = &run.manifest.refinement {
        println!(
            "  refinement: {} levels, {} confirmed cusp(s), {} confirmed derivative kink(s), converged = {}",
            r.levels.len(),
            r.confirmed_rate_times.len(),
            r.confirmed_derivative_times.len(),
            r.converged
        );
        for t in &r.confirmed_rate_times {
            println!("  confirmed rate non-analyticity at t = {t:.6}");
        }
        for t in &r.confirmed_derivative_times {
            println!("  confirmed dg/dt non-analyticity at t = {t:.6}");
        }
    }
    if let Some(w) = &run.manifest.winding {
        println!(
            "  winding: nu {} -> {} ({} change(s))",
            w.initial_nu,
            w.final_nu,
            w.changes.len()
        );
    }
    if let Some(d) = &run.manifest.dtop {
        println!(
            "  dtop: nu_D {:.0} -> {:.0} ({} jump(s))",
            d.initial_nu_d,
            d.final_nu_d,
            d.jumps.len()
        );
    }
    for path in &written {
        println!("  wrote {}", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => execute(load_config(&config)?, out),
        Command::Preset { name, out, refine } => {
            let preset = presets::preset(&name).ok_or_else(|| {
                CliError::Io(format!(
                    "unknown preset '{name}'; run `gloa list-presets` for the catalogue"
                ))
            })?;
            let mut config = preset.config;
            if let Some(levels) = refine {
                config.output.refinement_levels = levels;
                config.validate()?;
            }
            execute(config, out)
        }
        Command::ListPresets => {
            for p in presets::catalogue() {
                println!("{:<10} {}", p.name, p.description);
            }
            Ok(())
        }
        Command::Validate { config } => {
            let config = load_config(&config)?;
            println!("{}: valid (hash {})", config.name, config.hash());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
