//! Learning agents: contextual-bandit posterior sampling, MDP posterior
//! sampling, and the hypothesis-testing meta-agent that picks between them
//! each episode.
//!
//! Every agent follows the same protocol: [`Agent::plan_episode`] reads the
//! current posterior and returns a policy without changing any state, and
//! [`Agent::observe`] is the only mutator.

mod hypothesis;
mod posterior;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathstats::{sample_bernoulli, Rng};
use crate::model::{update_counts, EpisodeRecord, Policy, TransitionCounts};

pub use hypothesis::{
    endogenous_counts, exogenous_counts, factored_posterior_null_probability, log_bayes_factor,
    oracle_null_probability, posterior_null_probability, HypothesisPosteriorInput,
};
pub use posterior::{
    cb_ps_plan, mdp_ps_plan, mdp_ps_plan_with, ExogenousDynamics, NormalRewardPosterior,
    TransitionPrior,
};

/// Which base agent the meta-agent delegated to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "CB")]
    Cb,
    #[serde(rename = "MDP")]
    Mdp,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Cb => "CB",
            Branch::Mdp => "MDP",
        })
    }
}

/// Per-episode diagnostics of the meta-agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BhtDiagnostics {
    pub branch: Branch,
    /// Posterior probability of the null used to draw the branch.
    pub p_h0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub policy: Policy,
    pub diagnostics: Option<BhtDiagnostics>,
}

impl Plan {
    fn plain(policy: Policy) -> Self {
        Plan {
            policy,
            diagnostics: None,
        }
    }
}

pub trait Agent: Send {
    /// Policy for the next episode. Must not change the agent's state.
    fn plan_episode(&self, rng: &mut Rng) -> Result<Plan>;

    /// Ingests a completed episode.
    fn observe(&mut self, episode: &EpisodeRecord) -> Result<()>;
}

/// Reward posterior plus transition counts, shared by all learning agents.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub rewards: NormalRewardPosterior,
    pub counts: TransitionCounts,
}

impl LearnerState {
    pub fn new(rewards: NormalRewardPosterior) -> Self {
        let counts = TransitionCounts::new(rewards.num_states(), rewards.num_actions());
        LearnerState { rewards, counts }
    }

    pub fn observe(&mut self, episode: &EpisodeRecord) -> Result<()> {
        update_counts(&mut self.counts, self.rewards.stats_mut(), episode)
    }
}

/// Contextual-bandit posterior sampling: greedy in sampled rewards.
#[derive(Debug, Clone)]
pub struct CbPsAgent {
    state: LearnerState,
    horizon: usize,
}

impl CbPsAgent {
    pub fn new(rewards: NormalRewardPosterior, horizon: usize) -> Self {
        CbPsAgent {
            state: LearnerState::new(rewards),
            horizon,
        }
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }
}

impl Agent for CbPsAgent {
    fn plan_episode(&self, rng: &mut Rng) -> Result<Plan> {
        Ok(Plan::plain(cb_ps_plan(&self.state.rewards, self.horizon, rng)))
    }

    fn observe(&mut self, episode: &EpisodeRecord) -> Result<()> {
        self.state.observe(episode)
    }
}

/// MDP posterior sampling (PSRL).
#[derive(Debug, Clone)]
pub struct MdpPsAgent {
    state: LearnerState,
    prior: TransitionPrior,
    horizon: usize,
}

impl MdpPsAgent {
    pub fn new(rewards: NormalRewardPosterior, prior: TransitionPrior, horizon: usize) -> Result<Self> {
        prior.validate(rewards.num_states())?;
        Ok(MdpPsAgent {
            state: LearnerState::new(rewards),
            prior,
            horizon,
        })
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }
}

impl Agent for MdpPsAgent {
    fn plan_episode(&self, rng: &mut Rng) -> Result<Plan> {
        mdp_ps_plan_with(&self.state.rewards, &self.state.counts, &self.prior, self.horizon, rng)
            .map(Plan::plain)
    }

    fn observe(&mut self, episode: &EpisodeRecord) -> Result<()> {
        self.state.observe(episode)
    }
}

/// Posterior probability of the null for the scope implied by `prior`: the
/// full next state for a flat prior, the endogenous sub-state for a factored
/// one.
pub fn null_probability_for(
    counts: &TransitionCounts,
    prior: &TransitionPrior,
    prior_h0: f64,
) -> Result<f64> {
    match prior {
        TransitionPrior::Flat { alpha } => posterior_null_probability(HypothesisPosteriorInput {
            counts,
            alpha,
            prior_h0,
        }),
        TransitionPrior::Factored { layout, alpha, .. } => {
            let endo = endogenous_counts(counts, layout)?;
            factored_posterior_null_probability(&endo, alpha, prior_h0)
        }
    }
}

/// One meta-agent decision: compute `p = P(H0 | data)`, draw `B ~ Bernoulli(p)`
/// and plan with the bandit sampler when `B = 1`, otherwise with the MDP
/// sampler. `p ∈ {0, 1}` consumes no randomness for the Bernoulli draw.
pub fn bht_plan(
    state: &LearnerState,
    prior: &TransitionPrior,
    prior_h0: f64,
    horizon: usize,
    rng: &mut Rng,
) -> Result<(Policy, Branch, f64)> {
    let p = null_probability_for(&state.counts, prior, prior_h0)?;
    if sample_bernoulli(p, rng) {
        Ok((cb_ps_plan(&state.rewards, horizon, rng), Branch::Cb, p))
    } else {
        let policy = mdp_ps_plan_with(&state.rewards, &state.counts, prior, horizon, rng)?;
        Ok((policy, Branch::Mdp, p))
    }
}

/// The hypothesis-testing meta-agent. A factored transition prior makes it
/// test only the endogenous sub-state.
#[derive(Debug, Clone)]
pub struct BhtAgent {
    state: LearnerState,
    prior: TransitionPrior,
    prior_h0: f64,
    horizon: usize,
}

impl BhtAgent {
    pub fn new(
        rewards: NormalRewardPosterior,
        prior: TransitionPrior,
        prior_h0: f64,
        horizon: usize,
    ) -> Result<Self> {
        prior.validate(rewards.num_states())?;
        if !(0.0..=1.0).contains(&prior_h0) {
            return Err(Error::domain(format!("prior_h0 must lie in [0, 1], got {prior_h0}")));
        }
        Ok(BhtAgent {
            state: LearnerState::new(rewards),
            prior,
            prior_h0,
            horizon,
        })
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    /// Current posterior probability of the null.
    pub fn null_probability(&self) -> Result<f64> {
        null_probability_for(&self.state.counts, &self.prior, self.prior_h0)
    }
}

impl Agent for BhtAgent {
    fn plan_episode(&self, rng: &mut Rng) -> Result<Plan> {
        let (policy, branch, p_h0) =
            bht_plan(&self.state, &self.prior, self.prior_h0, self.horizon, rng)?;
        Ok(Plan {
            policy,
            diagnostics: Some(BhtDiagnostics { branch, p_h0 }),
        })
    }

    fn observe(&mut self, episode: &EpisodeRecord) -> Result<()> {
        self.state.observe(episode)
    }
}

/// Plays a fixed policy and ignores data; with the optimal policy it is the
/// zero-regret reference.
#[derive(Debug, Clone)]
pub struct FixedPolicyAgent {
    policy: Policy,
}

impl FixedPolicyAgent {
    pub fn new(policy: Policy) -> Self {
        FixedPolicyAgent { policy }
    }
}

impl Agent for FixedPolicyAgent {
    fn plan_episode(&self, _rng: &mut Rng) -> Result<Plan> {
        Ok(Plan::plain(self.policy.clone()))
    }

    fn observe(&mut self, _episode: &EpisodeRecord) -> Result<()> {
        Ok(())
    }
}
