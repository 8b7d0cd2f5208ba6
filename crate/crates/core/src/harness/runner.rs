//! Experiment execution.
//!
//! Randomness: repetition `r` builds its environment from
//! `derive_stream(master_seed, ENV_STREAM_BASE + r)` and agent slot `i` (0-based,
//! in config order) runs on `derive_stream(master_seed, r · (n + 1) + i + 1)`
//! with `n` agents. That one stream drives both the agent's posterior draws and
//! the simulated environment. Every agent in a repetition faces the same
//! environment instance.

use rayon::prelude::*;

use crate::agents::{Agent, Branch};
use crate::error::{Error, Result};
use crate::mathstats::{derive_stream, Rng};
use crate::model::{simulate_episode, MdpModel};
use crate::planning::{backward_induction, per_episode_regret, ValueTable};

use super::config::{build_agent, EnvInstance, ExperimentConfig};

/// Environment streams live in the upper half of the index space so that
/// adding agents never changes environment draws.
pub const ENV_STREAM_BASE: u64 = 1 << 63;

/// Environment variable capping the worker count (0 or unset: all cores).
pub const THREADS_ENV: &str = "BHT_THREADS";

/// One row of `records.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rep: usize,
    pub episode: usize,
    pub agent: String,
    pub episode_regret: f64,
    pub cumulative_regret: f64,
    pub p_h0: Option<f64>,
    pub branch: Option<Branch>,
}

/// Outcome of one episode for one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    pub regret: f64,
    pub p_h0: Option<f64>,
    pub branch: Option<Branch>,
}

/// Runs `episodes` rounds of plan → simulate → regret → observe.
pub fn run_agent(
    model: &MdpModel,
    v_star: &ValueTable,
    agent: &mut dyn Agent,
    episodes: usize,
    rng: &mut Rng,
) -> Result<Vec<EpisodeOutcome>> {
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let plan = agent.plan_episode(rng)?;
        let episode = simulate_episode(model, &plan.policy, rng)?;
        let regret = per_episode_regret(model, v_star, &plan.policy)?;
        agent.observe(&episode)?;
        out.push(EpisodeOutcome {
            regret,
            p_h0: plan.diagnostics.map(|d| d.p_h0),
            branch: plan.diagnostics.map(|d| d.branch),
        });
    }
    Ok(out)
}

/// Environment used by repetition `rep`.
pub fn environment_for(config: &ExperimentConfig, rep: usize) -> Result<EnvInstance> {
    let mut rng = derive_stream(config.master_seed, ENV_STREAM_BASE + rep as u64);
    config.env.build(config.horizon, &mut rng)
}

/// Stream index of agent slot `slot` in repetition `rep`.
pub fn agent_stream_index(rep: usize, num_agents: usize, slot: usize) -> u64 {
    (rep as u64) * (num_agents as u64 + 1) + slot as u64 + 1
}

fn run_repetition(config: &ExperimentConfig, rep: usize) -> Result<Vec<Vec<RunRecord>>> {
    let env = environment_for(config, rep)?;
    let (optimal, v_star) = backward_induction(&env.model);
    let n = config.agents.len();
    let mut per_agent = Vec::with_capacity(n);
    for (slot, agent_cfg) in config.agents.iter().enumerate() {
        let mut agent = build_agent(agent_cfg, slot, &env, config.horizon, &optimal)?;
        let mut rng = derive_stream(config.master_seed, agent_stream_index(rep, n, slot));
        let outcomes = run_agent(&env.model, &v_star, agent.as_mut(), config.episodes, &mut rng)?;
        let mut cumulative = 0.0;
        let records = outcomes
            .into_iter()
            .enumerate()
            .map(|(episode, o)| {
                cumulative += o.regret;
                RunRecord {
                    rep,
                    episode,
                    agent: agent_cfg.label().to_string(),
                    episode_regret: o.regret,
                    cumulative_regret: cumulative,
                    p_h0: o.p_h0,
                    branch: o.branch,
                }
            })
            .collect();
        per_agent.push(records);
    }
    Ok(per_agent)
}

fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Runs every repetition and returns records ordered by (agent in config
/// order, repetition, episode), independent of scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::contract(format!("cannot start worker pool: {e}")))?;
    let per_rep: Vec<Vec<Vec<RunRecord>>> = pool.install(|| {
        (0..config.repetitions)
            .into_par_iter()
            .map(|rep| run_repetition(config, rep))
            .collect::<Result<_>>()
    })?;
    let mut records = Vec::with_capacity(config.repetitions * config.agents.len() * config.episodes);
    for slot in 0..config.agents.len() {
        for rep_records in &per_rep {
            records.extend(rep_records[slot].iter().cloned());
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::RiverSwimConfig;
    use crate::harness::config::{AgentConfig, AgentKind, EnvConfig, OutputConfig};

    fn config(agents: Vec<AgentConfig>) -> ExperimentConfig {
        ExperimentConfig {
            env: EnvConfig::Riverswim {
                lambda: None,
                params: RiverSwimConfig::default(),
            },
            horizon: 6,
            episodes: 8,
            repetitions: 3,
            master_seed: 77,
            agents,
            output: OutputConfig::default(),
        }
    }

    #[test]
    fn optimal_agent_has_zero_regret() {
        let records = run_experiment(&config(vec![AgentConfig::new(AgentKind::Optimal)])).unwrap();
        assert_eq!(records.len(), 24);
        assert!(records.iter().all(|r| r.episode_regret == 0.0 && r.cumulative_regret == 0.0));
    }

    #[test]
    fn ordering_and_diagnostics() {
        let records = run_experiment(&config(vec![
            AgentConfig::new(AgentKind::BhtRl),
            AgentConfig::new(AgentKind::CbPs),
        ]))
        .unwrap();
        let keys: Vec<(usize, usize)> = records.iter().map(|r| (r.rep, r.episode)).collect();
        assert_eq!(&keys[..9], &[(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (1, 0)]);
        assert!(records[..24].iter().all(|r| r.agent == "bht_rl" && r.p_h0.is_some() && r.branch.is_some()));
        assert!(records[24..].iter().all(|r| r.agent == "cb_ps" && r.p_h0.is_none() && r.branch.is_none()));
        // first episode: no data, so the prior
        assert_eq!(records[0].p_h0, Some(0.5));
    }

    #[test]
    fn stream_indices_do_not_collide() {
        let mut seen = std::collections::HashSet::new();
        for rep in 0..50 {
            for slot in 0..4 {
                assert!(seen.insert(agent_stream_index(rep, 4, slot)));
            }
            assert!(!seen.contains(&(ENV_STREAM_BASE + rep as u64)));
        }
    }
}
