//! `records.csv`, `summary.csv` and `model.json` writers.
//!
//! Floats are printed with 17 significant digits in the shortest of fixed or
//! exponent notation (the `%.17g` convention, exponent written as `e-7`/`e21`),
//! which parses back to the identical `f64`. Missing values are empty fields.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::agents::Branch;
use crate::envs::max_action_variation;
use crate::error::{Error, Result};
use crate::model::{FactoredLayout, MdpModel};

use super::runner::RunRecord;

pub const RECORDS_HEADER: &str = "rep,episode,agent,episode_regret,cumulative_regret,p_h0,branch";
pub const SUMMARY_HEADER: &str =
    "agent,episode,reps,mean_cumulative_regret,se_cumulative_regret,mean_p_h0,se_p_h0";

/// `%.17g`-style formatting.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        strip_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", strip_zeros(mantissa.to_string()))
    }
}

fn strip_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_g17).unwrap_or_default()
}

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.rep,
            r.episode,
            r.agent,
            format_g17(r.episode_regret),
            format_g17(r.cumulative_regret),
            opt_float(r.p_h0),
            r.branch.map(|b| b.to_string()).unwrap_or_default(),
        );
    }
    out
}

/// Writes `records.csv`. Records are written in the order given; the runner
/// already orders them by (agent, rep, episode).
pub fn write_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    write_file(path, &records_to_csv(records))
}

fn parse_field<T: std::str::FromStr>(value: &str, name: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::contract(format!("line {line}: cannot parse {name} from `{value}`")))
}

fn parse_optional_float(value: &str, name: &str, line: usize) -> Result<Option<f64>> {
    if value.is_empty() {
        Ok(None)
    } else {
        parse_field(value, name, line).map(Some)
    }
}

/// Parses a `records.csv` document.
pub fn parse_records(text: &str) -> Result<Vec<RunRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(RECORDS_HEADER) => {}
        other => {
            return Err(Error::contract(format!(
                "unexpected records header {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let n = i + 2;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::contract(format!("line {n}: expected 7 fields")));
            }
            let branch = match fields[6] {
                "" => None,
                "CB" => Some(Branch::Cb),
                "MDP" => Some(Branch::Mdp),
                other => return Err(Error::contract(format!("line {n}: unknown branch `{other}`"))),
            };
            Ok(RunRecord {
                rep: parse_field(fields[0], "rep", n)?,
                episode: parse_field(fields[1], "episode", n)?,
                agent: fields[2].to_string(),
                episode_regret: parse_field(fields[3], "episode_regret", n)?,
                cumulative_regret: parse_field(fields[4], "cumulative_regret", n)?,
                p_h0: parse_optional_float(fields[5], "p_h0", n)?,
                branch,
            })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text)
}

/// Mean and standard error over repetitions for one (agent, episode).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub agent: String,
    pub episode: usize,
    pub reps: usize,
    pub mean_cumulative_regret: f64,
    pub se_cumulative_regret: f64,
    pub mean_p_h0: Option<f64>,
    pub se_p_h0: Option<f64>,
}

/// `(mean, sample stddev / √n)`, with the error defined as 0 for n = 1.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates records per (agent, episode). Agents keep their first-seen
/// order; episodes are ascending.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut agents: Vec<&str> = Vec::new();
    for r in records {
        if !agents.contains(&r.agent.as_str()) {
            agents.push(&r.agent);
        }
    }
    let mut rows = Vec::new();
    for agent in agents {
        let mut by_episode: std::collections::BTreeMap<usize, (Vec<f64>, Vec<f64>)> =
            Default::default();
        for r in records.iter().filter(|r| r.agent == agent) {
            let slot = by_episode.entry(r.episode).or_default();
            slot.0.push(r.cumulative_regret);
            if let Some(p) = r.p_h0 {
                slot.1.push(p);
            }
        }
        for (episode, (regrets, ps)) in by_episode {
            let (mean, se) = mean_and_se(&regrets);
            let (mean_p, se_p) = if ps.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_and_se(&ps);
                (Some(m), Some(s))
            };
            rows.push(SummaryRow {
                agent: agent.to_string(),
                episode,
                reps: regrets.len(),
                mean_cumulative_regret: mean,
                se_cumulative_regret: se,
                mean_p_h0: mean_p,
                se_p_h0: se_p,
            });
        }
    }
    rows
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.agent,
            r.episode,
            r.reps,
            format_g17(r.mean_cumulative_regret),
            format_g17(r.se_cumulative_regret),
            opt_float(r.mean_p_h0),
            opt_float(r.se_p_h0),
        );
    }
    out
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_file(path, &summary_to_csv(rows))
}

#[derive(Serialize)]
struct ModelDump<'a> {
    #[serde(flatten)]
    model: &'a MdpModel,
    max_action_variation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    layout: Option<&'a FactoredLayout>,
}

/// JSON dump of a model: flat row-major tensors plus the action variation.
pub fn model_to_json(model: &MdpModel, layout: Option<&FactoredLayout>) -> String {
    serde_json::to_string_pretty(&ModelDump {
        model,
        max_action_variation: max_action_variation(model),
        layout,
    })
    .expect("model serializes")
}

pub fn write_model_json(model: &MdpModel, layout: Option<&FactoredLayout>, path: &Path) -> Result<()> {
    write_file(path, &model_to_json(model, layout))
}
