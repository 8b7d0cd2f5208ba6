//! Command-line front end. Exit codes: 0 success, 2 usage or config error,
//! 1 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::envs::max_action_variation;
use crate::error::{Error, Result};
use crate::planning::backward_induction;

use super::config::{AlphaSpec, ExperimentConfig, OutputFormat};
use super::output::{format_g17, summarize, write_csv, write_model_json, write_summary_csv};
use super::runner::{environment_for, run_experiment, RunRecord};

#[derive(Debug, Parser)]
#[command(
    name = "bht",
    version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("CARGO_PKG_NAME"), ")"),
    about = "Hypothesis-testing posterior sampling experiments on tabular environments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its CSV outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the environment's size, action variation and optimal value.
    InspectEnv {
        #[arg(long)]
        config: PathBuf,
        /// Also write the model as JSON to this path.
        #[arg(long)]
        dump_model: Option<PathBuf>,
    },
    /// Run one experiment per parameter value, each in its own subdirectory.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepParam {
    /// Environment interpolation between bandit and MDP transitions.
    Lambda,
    /// Scalar Dirichlet concentration applied to every agent.
    Alpha,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Alpha => "alpha",
        }
    }
}

/// Entry point; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let records = run_and_write(&cfg, &dir)?;
            print_final_means(&records);
            Ok(())
        }
        Command::InspectEnv { config, dump_model } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            inspect(&cfg, dump_model.as_deref())
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let base = ExperimentConfig::from_path(&config)?;
            let root = out.unwrap_or_else(|| base.output.directory.clone());
            for raw in &values {
                let raw = raw.trim();
                let value: f64 = raw.parse().map_err(|_| {
                    Error::config("--values", format!("`{raw}` is not a number"))
                })?;
                let mut cfg = base.clone();
                match param {
                    SweepParam::Lambda => cfg.env.set_lambda(value)?,
                    SweepParam::Alpha => cfg
                        .agents
                        .iter_mut()
                        .for_each(|a| a.alpha = AlphaSpec::Scalar(value)),
                }
                cfg.validate()?;
                let dir = root.join(format!("{}_{raw}", param.name()));
                println!("{}={raw} -> {}", param.name(), dir.display());
                run_and_write(&cfg, &dir)?;
            }
            Ok(())
        }
    }
}

/// Runs `cfg` and writes the configured outputs (plus the resolved config)
/// into `dir`.
pub fn run_and_write(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<RunRecord>> {
    let records = run_experiment(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, cfg.to_json()).map_err(|e| Error::io(&config_path, e))?;
    for format in &cfg.output.formats {
        match format {
            OutputFormat::RecordsCsv => write_csv(&records, &dir.join("records.csv"))?,
            OutputFormat::SummaryCsv => write_summary_csv(&summarize(&records), &dir.join("summary.csv"))?,
            OutputFormat::ModelJson => {
                let env = environment_for(cfg, 0)?;
                write_model_json(&env.model, env.layout.as_ref(), &dir.join("model.json"))?
            }
        }
    }
    Ok(records)
}

fn print_final_means(records: &[RunRecord]) {
    let rows = summarize(records);
    let mut stdout = std::io::stdout().lock();
    for (i, row) in rows.iter().enumerate() {
        let last = rows.get(i + 1).is_none_or(|next| next.agent != row.agent);
        if last {
            let _ = writeln!(
                stdout,
                "{}: episodes={} mean_cumulative_regret={} se={}",
                row.agent,
                row.episode + 1,
                format_g17(row.mean_cumulative_regret),
                format_g17(row.se_cumulative_regret)
            );
        }
    }
}

fn inspect(cfg: &ExperimentConfig, dump: Option<&Path>) -> Result<()> {
    let env = environment_for(cfg, 0)?;
    let model = &env.model;
    let (_, v_star) = backward_induction(model);
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "num_states: {}", model.num_states());
    let _ = writeln!(stdout, "num_actions: {}", model.num_actions());
    let _ = writeln!(stdout, "horizon: {}", model.horizon());
    let _ = writeln!(stdout, "max_action_variation: {}", format_g17(max_action_variation(model)));
    let _ = writeln!(
        stdout,
        "optimal_start_value: {}",
        format_g17(v_star.start_value(model.start_dist()))
    );
    if let Some(path) = dump {
        write_model_json(model, env.layout.as_ref(), path)?;
        let _ = writeln!(stdout, "model written to {}", path.display());
    }
    Ok(())
}
