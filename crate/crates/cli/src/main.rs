mod plot;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cdqc::agp::{self, AgpExpansion};
use cdqc::experiment::{self, ExperimentConfig};
use cdqc::problems::ProblemInstance;
use clap::{Parser, Subcommand};
use log::info;

use crate::plot::PlotKind;

/// Counterdiabatic driving simulations and coherence sweeps.
#[derive(Parser, Debug)]
#[command(name = "cdqc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Runs an experiment config and writes the result CSV.
    ///
    /// Exits with 2 when any row is flagged.
    Run {
        /// TOML experiment config.
        config: PathBuf,
        /// Result CSV; overrides `output.csv`. Stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-(order, TΔ) ensemble means; overrides `output.summary`.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Per-sample coherence CSV; overrides `output.series`.
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Renders an SVG figure from a result or series CSV.
    Plot {
        /// Result CSV, or a series CSV for `coherence-time`.
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes an instance in the canonical text format.
    DumpInstance {
        /// Config describing the ensemble.
        #[arg(long, conflicts_with = "load", required_unless_present = "load")]
        config: Option<PathBuf>,
        /// Ensemble index within the config.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Reads an instance file and re-emits it canonically.
        #[arg(long)]
        load: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulates Γ, α and the normal-equation residual along λ.
    GammaDiagnostics {
        #[arg(long, conflicts_with = "instance", required_unless_present = "instance")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Instance file instead of a config.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, short = 'l', default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run {
            config,
            out,
            summary,
            series,
        } => run(&config, out, summary, series),
        Command::Plot { csv, kind, out } => {
            plot::render(&csv, kind, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpInstance {
            config,
            index,
            load,
            out,
        } => {
            let inst = match load {
                Some(path) => load_instance(&path)?,
                None => load_config(config.as_deref().unwrap())?.build_instance(index)?,
            };
            with_output(out.as_deref(), |w| Ok(w.write_all(inst.to_text().as_bytes())?))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::GammaDiagnostics {
            config,
            index,
            instance,
            order,
            points,
            out,
        } => {
            if order == 0 {
                bail!("gamma diagnostics need order >= 1");
            }
            let inst = match instance {
                Some(path) => load_instance(&path)?,
                None => load_config(config.as_deref().unwrap())?.build_instance(index)?,
            };
            let expansion = AgpExpansion::new(&inst, order)?;
            let rows = agp::gamma_table(&expansion, points)?;
            with_output(out.as_deref(), |w| Ok(agp::write_gamma_csv(&rows, order, w)?))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("config {}", path.display()))
}

fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ProblemInstance::from_text(&text).with_context(|| format!("instance {}", path.display()))
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn run(config: &Path, out: Option<PathBuf>, summary: Option<PathBuf>, series: Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg = load_config(config)?;
    if out.is_some() {
        cfg.output.csv = out;
    }
    if summary.is_some() {
        cfg.output.summary = summary;
    }
    if series.is_some() {
        cfg.output.series = series;
    }
    let result = experiment::run_experiment(&cfg)?;
    with_output(cfg.output.csv.as_deref(), |w| Ok(experiment::write_rows_csv(&result.rows, w)?))?;
    if let Some(p) = &cfg.output.summary {
        with_output(Some(p), |w| Ok(experiment::write_summary_csv(&result.summary(), w)?))?;
    }
    if let Some(p) = &cfg.output.series {
        with_output(Some(p), |w| Ok(experiment::write_series_csv(&result.series, w)?))?;
    }
    let flagged = result.flagged();
    info!("{} rows, {} flagged", result.rows.len(), flagged);
    if flagged > 0 {
        eprintln!("{flagged} of {} rows flagged", result.rows.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
