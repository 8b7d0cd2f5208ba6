//! Conjugate posteriors and the two posterior-sampling planners.

use crate::error::{Error, Result};
use crate::mathstats::{check_positive, sample_dirichlet_into, sample_normal, Rng};
use crate::model::{FactoredLayout, MdpModel, Policy, RewardStats, TransitionCounts};
use crate::planning::backward_induction;

use super::hypothesis::{endogenous_counts, exogenous_counts};

/// Independent Normal posteriors on the mean reward of every (s, a), with a
/// known observation variance.
#[derive(Debug, Clone)]
pub struct NormalRewardPosterior {
    prior_mean: f64,
    prior_var: f64,
    obs_var: f64,
    stats: RewardStats,
}

impl NormalRewardPosterior {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        prior_mean: f64,
        prior_var: f64,
        obs_var: f64,
    ) -> Result<Self> {
        if !(prior_var > 0.0) || !prior_var.is_finite() {
            return Err(Error::domain(format!("reward prior variance must be positive, got {prior_var}")));
        }
        if !(obs_var > 0.0) || !obs_var.is_finite() {
            return Err(Error::domain(format!(
                "reward observation variance must be positive, got {obs_var}"
            )));
        }
        if !prior_mean.is_finite() {
            return Err(Error::domain("reward prior mean must be finite"));
        }
        Ok(NormalRewardPosterior {
            prior_mean,
            prior_var,
            obs_var,
            stats: RewardStats::new(num_states, num_actions),
        })
    }

    pub fn num_states(&self) -> usize {
        self.stats.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.stats.num_actions()
    }

    pub fn stats(&self) -> &RewardStats {
        &self.stats
    }

    pub(crate) fn stats_mut(&mut self) -> &mut RewardStats {
        &mut self.stats
    }

    /// Posterior `(mean, variance)` of the mean reward at `(s, a)`.
    pub fn posterior(&self, state: usize, action: usize) -> (f64, f64) {
        let n = self.stats.count(state, action) as f64;
        let precision = 1.0 / self.prior_var + n / self.obs_var;
        let mean =
            (self.prior_mean / self.prior_var + self.stats.sum(state, action) / self.obs_var) / precision;
        (mean, 1.0 / precision)
    }

    /// One draw of every mean reward, state-major.
    pub fn sample_means(&self, rng: &mut Rng) -> Vec<f64> {
        let (s_count, a_count) = (self.num_states(), self.num_actions());
        let mut out = Vec::with_capacity(s_count * a_count);
        for s in 0..s_count {
            for a in 0..a_count {
                let (mean, var) = self.posterior(s, a);
                out.push(sample_normal(mean, var, rng).expect("posterior variance is positive"));
            }
        }
        out
    }
}

/// Greedy policy under one posterior draw of the rewards.
///
/// With action-independent transitions the continuation value is the same for
/// every action, so the per-state argmax of the sampled mean reward is optimal
/// for the sampled environment at every step.
pub fn cb_ps_plan(rewards: &NormalRewardPosterior, horizon: usize, rng: &mut Rng) -> Policy {
    let sampled = rewards.sample_means(rng);
    let a_count = rewards.num_actions();
    let greedy: Vec<usize> = sampled
        .chunks_exact(a_count)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (a, &r)| if r > best.1 { (a, r) } else { best })
                .0
        })
        .collect();
    Policy::stationary(&greedy, horizon)
}

/// Dynamics of the exogenous sub-state for factored sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum ExogenousDynamics {
    /// Known `|X| × |X|` row-major transition matrix.
    Known(Vec<f64>),
    /// Learned with a Dirichlet prior tied across actions and endogenous values.
    Learned { alpha: Vec<f64> },
}

/// Prior over transitions for the MDP sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionPrior {
    /// One Dirichlet(α) per (s, a) over the full next state.
    Flat { alpha: Vec<f64> },
    /// One Dirichlet(α) per (z, a) over the next endogenous value, combined with
    /// exogenous dynamics as `P(s'|s,a) = P(x'|x) θ_{z,a}(z')`.
    Factored {
        layout: FactoredLayout,
        alpha: Vec<f64>,
        exogenous: ExogenousDynamics,
    },
}

impl TransitionPrior {
    pub fn validate(&self, num_states: usize) -> Result<()> {
        match self {
            TransitionPrior::Flat { alpha } => {
                check_positive(alpha)?;
                if alpha.len() != num_states {
                    return Err(Error::contract(format!(
                        "alpha has {} entries for {num_states} states",
                        alpha.len()
                    )));
                }
            }
            TransitionPrior::Factored {
                layout,
                alpha,
                exogenous,
            } => {
                if layout.num_states() != num_states {
                    return Err(Error::contract("factored layout does not match state count"));
                }
                check_positive(alpha)?;
                if alpha.len() != layout.endo_size() {
                    return Err(Error::contract(format!(
                        "endogenous alpha has {} entries for {} endogenous values",
                        alpha.len(),
                        layout.endo_size()
                    )));
                }
                let x_count = layout.exo_size();
                match exogenous {
                    ExogenousDynamics::Known(m) => {
                        if m.len() != x_count * x_count {
                            return Err(Error::contract("exogenous matrix has the wrong size"));
                        }
                    }
                    ExogenousDynamics::Learned { alpha } => {
                        check_positive(alpha)?;
                        if alpha.len() != x_count {
                            return Err(Error::contract("exogenous alpha has the wrong length"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The concentration vector used by the hypothesis test.
    pub fn test_alpha(&self) -> &[f64] {
        match self {
            TransitionPrior::Flat { alpha } | TransitionPrior::Factored { alpha, .. } => alpha,
        }
    }

    /// Draws a transition tensor `[s][a][s']` from the posterior.
    pub fn sample_transitions(&self, counts: &TransitionCounts, rng: &mut Rng) -> Result<Vec<f64>> {
        let (s_count, a_count) = (counts.num_states(), counts.num_actions());
        match self {
            TransitionPrior::Flat { alpha } => {
                let mut out = Vec::with_capacity(s_count * a_count * s_count);
                let mut row = Vec::with_capacity(s_count);
                for s in 0..s_count {
                    for a in 0..a_count {
                        let shifted = alpha.iter().zip(counts.row(s, a)).map(|(al, &n)| al + n as f64);
                        sample_dirichlet_into(shifted, rng, &mut row);
                        out.extend_from_slice(&row);
                    }
                }
                Ok(out)
            }
            TransitionPrior::Factored {
                layout,
                alpha,
                exogenous,
            } => {
                let z_count = layout.endo_size();
                let x_count = layout.exo_size();
                let endo = endogenous_counts(counts, layout)?;
                let mut theta = Vec::with_capacity(z_count * a_count * z_count);
                let mut row = Vec::with_capacity(z_count.max(x_count));
                for z in 0..z_count {
                    for a in 0..a_count {
                        let shifted = alpha.iter().zip(endo.row(z, a)).map(|(al, &n)| al + n as f64);
                        sample_dirichlet_into(shifted, rng, &mut row);
                        theta.extend_from_slice(&row);
                    }
                }
                let exo = match exogenous {
                    ExogenousDynamics::Known(m) => m.clone(),
                    ExogenousDynamics::Learned { alpha } => {
                        let n = exogenous_counts(counts, layout);
                        let mut m = Vec::with_capacity(x_count * x_count);
                        for x in 0..x_count {
                            let shifted = alpha
                                .iter()
                                .zip(&n[x * x_count..(x + 1) * x_count])
                                .map(|(al, &c)| al + c as f64);
                            sample_dirichlet_into(shifted, rng, &mut row);
                            m.extend_from_slice(&row);
                        }
                        m
                    }
                };
                let mut out = vec![0.0; s_count * a_count * s_count];
                for s in 0..s_count {
                    let (x, z) = layout.split(s);
                    for a in 0..a_count {
                        let endo_row = &theta[(z * a_count + a) * z_count..][..z_count];
                        let dst = &mut out[(s * a_count + a) * s_count..][..s_count];
                        for (s2, p) in dst.iter_mut().enumerate() {
                            let (x2, z2) = layout.split(s2);
                            *p = exo[x * x_count + x2] * endo_row[z2];
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Optimal policy for one posterior draw of the full environment.
///
/// Draw order: all mean rewards (state-major), then transition rows.
pub fn mdp_ps_plan_with(
    rewards: &NormalRewardPosterior,
    counts: &TransitionCounts,
    prior: &TransitionPrior,
    horizon: usize,
    rng: &mut Rng,
) -> Result<Policy> {
    let (s_count, a_count) = (counts.num_states(), counts.num_actions());
    if rewards.num_states() != s_count || rewards.num_actions() != a_count {
        return Err(Error::contract("reward posterior and counts disagree on shape"));
    }
    let sampled_rewards = rewards.sample_means(rng);
    let sampled_transitions = prior.sample_transitions(counts, rng)?;
    let sampled = MdpModel::from_parts_unchecked(
        s_count,
        a_count,
        horizon,
        sampled_transitions,
        sampled_rewards,
    );
    Ok(backward_induction(&sampled).0)
}

/// Posterior sampling with untied Dirichlet(α + N_{s,a}) transition rows.
pub fn mdp_ps_plan(
    rewards: &NormalRewardPosterior,
    counts: &TransitionCounts,
    alpha: &[f64],
    horizon: usize,
    rng: &mut Rng,
) -> Result<Policy> {
    let prior = TransitionPrior::Flat {
        alpha: alpha.to_vec(),
    };
    prior.validate(counts.num_states())?;
    mdp_ps_plan_with(rewards, counts, &prior, horizon, rng)
}
