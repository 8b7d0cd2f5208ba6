//! Experiment configuration, execution, CSV/JSON output and the CLI.

pub mod cli;
pub mod config;
pub mod output;
pub mod runner;

pub use config::{
    build_agent, AgentConfig, AgentKind, AlphaSpec, EnvConfig, EnvInstance, ExperimentConfig,
    OutputConfig, OutputFormat, RewardPrior,
};
pub use output::{
    format_g17, parse_records, read_csv, records_to_csv, summarize, write_csv, write_summary_csv,
    SummaryRow,
};
pub use runner::{environment_for, run_agent, run_experiment, EpisodeOutcome, RunRecord};

