//! Tabular finite-horizon MDP data model, policies, episodes and the
//! sufficient statistics agents learn from.
//!
//! States and actions are dense 0-based indices. Within-episode steps are
//! 0-based in storage (`h = 0..H`) even though the usual notation counts
//! `1..=H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathstats::{sample_categorical, sample_normal, Rng};

const ROW_TOLERANCE: f64 = 1e-9;

/// A complete tabular environment.
///
/// `transitions` is row-major `[s][a][s']` and `reward_mean` is `[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpModel {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    transitions: Vec<f64>,
    reward_mean: Vec<f64>,
    reward_noise_var: f64,
    start_dist: Vec<f64>,
}

impl MdpModel {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        transitions: Vec<f64>,
        reward_mean: Vec<f64>,
        reward_noise_var: f64,
        start_dist: Vec<f64>,
    ) -> Result<Self> {
        let model = MdpModel {
            num_states,
            num_actions,
            horizon,
            transitions,
            reward_mean,
            reward_noise_var,
            start_dist,
        };
        model.validate()?;
        Ok(model)
    }

    /// Assembles a model whose rows are already known to be distributions
    /// (posterior samples). Only the shapes are checked, in debug builds.
    pub(crate) fn from_parts_unchecked(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        transitions: Vec<f64>,
        reward_mean: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(transitions.len(), num_states * num_actions * num_states);
        debug_assert_eq!(reward_mean.len(), num_states * num_actions);
        MdpModel {
            num_states,
            num_actions,
            horizon,
            transitions,
            reward_mean,
            reward_noise_var: 0.0,
            start_dist: vec![1.0 / num_states as f64; num_states],
        }
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let (s, a) = (self.num_states, self.num_actions);
        if s == 0 || a == 0 {
            return Err(Error::contract("model needs at least one state and one action"));
        }
        if self.horizon == 0 {
            return Err(Error::contract("horizon must be at least 1"));
        }
        if self.transitions.len() != s * a * s {
            return Err(Error::contract(format!(
                "transition tensor has {} entries, expected {}",
                self.transitions.len(),
                s * a * s
            )));
        }
        if self.reward_mean.len() != s * a {
            return Err(Error::contract(format!(
                "reward table has {} entries, expected {}",
                self.reward_mean.len(),
                s * a
            )));
        }
        if self.start_dist.len() != s {
            return Err(Error::contract("start distribution length differs from state count"));
        }
        if !(self.reward_noise_var >= 0.0) || !self.reward_noise_var.is_finite() {
            return Err(Error::domain("reward noise variance must be finite and non-negative"));
        }
        if self.reward_mean.iter().any(|r| !r.is_finite()) {
            return Err(Error::domain("reward means must be finite"));
        }
        for state in 0..s {
            for action in 0..a {
                check_distribution(self.row(state, action))
                    .map_err(|m| Error::contract(format!("row P[{state}][{action}]: {m}")))?;
            }
        }
        check_distribution(&self.start_dist)
            .map_err(|m| Error::contract(format!("start distribution: {m}")))?;
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn reward_noise_var(&self) -> f64 {
        self.reward_noise_var
    }

    pub fn start_dist(&self) -> &[f64] {
        &self.start_dist
    }

    /// Next-state distribution `P[s][a][·]`.
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let base = (state * self.num_actions + action) * self.num_states;
        &self.transitions[base..base + self.num_states]
    }

    pub fn transition(&self, state: usize, action: usize, next: usize) -> f64 {
        self.row(state, action)[next]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward_mean[state * self.num_actions + action]
    }

    /// Full `[s][a][s']` tensor, row-major.
    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn reward_means(&self) -> &[f64] {
        &self.reward_mean
    }

    /// Copy of this model with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        let mut m = self.clone();
        m.horizon = horizon;
        m.validate()?;
        Ok(m)
    }

    /// Copy of this model with a different start distribution.
    pub fn with_start_dist(&self, start_dist: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.start_dist = start_dist;
        m.validate()?;
        Ok(m)
    }

    /// Copy of this model with a replacement transition tensor.
    pub fn with_transitions(&self, transitions: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.transitions = transitions;
        m.validate()?;
        Ok(m)
    }
}

fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if let Some(bad) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(format!("entry {bad} is not a probability"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > ROW_TOLERANCE {
        return Err(format!("sums to {total}"));
    }
    Ok(())
}

/// Mixed-radix layout of a factored state `S = X × Z`.
///
/// The flat index puts the exogenous factors in the most-significant digits,
/// in the listed order, and the endogenous coordinate in the least-significant
/// digit: `flat = ((x_0 · n_1 + x_1) · … ) · |Z| + z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoredLayout {
    exo_factor_sizes: Vec<usize>,
    endo_size: usize,
}

impl FactoredLayout {
    pub fn new(exo_factor_sizes: Vec<usize>, endo_size: usize) -> Result<Self> {
        if endo_size == 0 || exo_factor_sizes.iter().any(|&n| n == 0) {
            return Err(Error::contract("factor sizes must be positive"));
        }
        Ok(FactoredLayout {
            exo_factor_sizes,
            endo_size,
        })
    }

    pub fn exo_factor_sizes(&self) -> &[usize] {
        &self.exo_factor_sizes
    }

    pub fn endo_size(&self) -> usize {
        self.endo_size
    }

    /// Number of joint exogenous values `|X|`.
    pub fn exo_size(&self) -> usize {
        self.exo_factor_sizes.iter().product()
    }

    pub fn num_states(&self) -> usize {
        self.exo_size() * self.endo_size
    }

    /// Joint exogenous index from per-factor coordinates.
    pub fn encode_exo(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.exo_factor_sizes.len());
        coords
            .iter()
            .zip(&self.exo_factor_sizes)
            .fold(0, |acc, (&c, &n)| {
                debug_assert!(c < n);
                acc * n + c
            })
    }

    pub fn decode_exo(&self, mut exo: usize) -> Vec<usize> {
        let mut coords = vec![0; self.exo_factor_sizes.len()];
        for (slot, &n) in coords.iter_mut().zip(&self.exo_factor_sizes).rev() {
            *slot = exo % n;
            exo /= n;
        }
        coords
    }

    pub fn encode(&self, exo: usize, endo: usize) -> usize {
        exo * self.endo_size + endo
    }

    /// Splits a flat state into `(joint exogenous index, endogenous index)`.
    pub fn split(&self, state: usize) -> (usize, usize) {
        (state / self.endo_size, state % self.endo_size)
    }
}

/// Deterministic non-stationary policy `π[s][h]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    num_states: usize,
    horizon: usize,
    // [h][s]
    actions: Vec<usize>,
}

impl Policy {
    pub fn from_fn(
        num_states: usize,
        horizon: usize,
        mut f: impl FnMut(usize, usize) -> usize,
    ) -> Self {
        let mut actions = Vec::with_capacity(num_states * horizon);
        for h in 0..horizon {
            for s in 0..num_states {
                actions.push(f(s, h));
            }
        }
        Policy {
            num_states,
            horizon,
            actions,
        }
    }

    /// Same action at every step of the episode.
    pub fn stationary(per_state: &[usize], horizon: usize) -> Self {
        Policy::from_fn(per_state.len(), horizon, |s, _| per_state[s])
    }

    pub fn constant(num_states: usize, horizon: usize, action: usize) -> Self {
        Policy::from_fn(num_states, horizon, |_, _| action)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Action at state `s` and 0-based step `h`.
    pub fn action(&self, state: usize, h: usize) -> usize {
        self.actions[h * self.num_states + state]
    }

    pub(crate) fn set(&mut self, state: usize, h: usize, action: usize) {
        self.actions[h * self.num_states + state] = action;
    }

    pub(crate) fn zeros(num_states: usize, horizon: usize) -> Self {
        Policy {
            num_states,
            horizon,
            actions: vec![0; num_states * horizon],
        }
    }

    pub fn check_against(&self, model: &MdpModel) -> Result<()> {
        if self.num_states != model.num_states() || self.horizon != model.horizon() {
            return Err(Error::contract(format!(
                "policy shape {}x{} does not match model {}x{}",
                self.num_states,
                self.horizon,
                model.num_states(),
                model.horizon()
            )));
        }
        if let Some(a) = self.actions.iter().find(|&&a| a >= model.num_actions()) {
            return Err(Error::contract(format!(
                "policy uses action {a} but the model has {}",
                model.num_actions()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// One episode of exactly `H` steps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub steps: Vec<Step>,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// True when consecutive steps chain (`next_state` feeds the next `state`).
    pub fn is_chained(&self) -> bool {
        self.steps
            .windows(2)
            .all(|w| w[0].next_state == w[1].state)
    }
}

/// Runs one episode from a start state drawn from `ρ`.
///
/// Per step the draw order is: reward noise, then next state.
pub fn simulate_episode(model: &MdpModel, policy: &Policy, rng: &mut Rng) -> Result<EpisodeRecord> {
    policy.check_against(model)?;
    let mut state = sample_categorical(model.start_dist(), rng);
    let mut steps = Vec::with_capacity(model.horizon());
    for h in 0..model.horizon() {
        let action = policy.action(state, h);
        let reward = sample_normal(model.reward(state, action), model.reward_noise_var(), rng)?;
        let next_state = sample_categorical(model.row(state, action), rng);
        steps.push(Step {
            state,
            action,
            reward,
            next_state,
        });
        state = next_state;
    }
    Ok(EpisodeRecord { steps })
}

/// Next-state counts `N[s][a][s']`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    num_states: usize,
    num_actions: usize,
    counts: Vec<u64>,
}

impl TransitionCounts {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        TransitionCounts {
            num_states,
            num_actions,
            counts: vec![0; num_states * num_actions * num_states],
        }
    }

    /// Builds a tensor from a row-major `[s][a][s']` slice.
    pub fn from_counts(num_states: usize, num_actions: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != num_states * num_actions * num_states {
            return Err(Error::contract("count tensor has the wrong length"));
        }
        Ok(TransitionCounts {
            num_states,
            num_actions,
            counts,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `N_{s,a}`.
    pub fn row(&self, state: usize, action: usize) -> &[u64] {
        let base = (state * self.num_actions + action) * self.num_states;
        &self.counts[base..base + self.num_states]
    }

    pub fn get(&self, state: usize, action: usize, next: usize) -> u64 {
        self.row(state, action)[next]
    }

    pub fn increment(&mut self, state: usize, action: usize, next: usize) -> Result<()> {
        if state >= self.num_states || action >= self.num_actions || next >= self.num_states {
            return Err(Error::contract(format!(
                "transition ({state}, {action}, {next}) out of range for {}x{} counts",
                self.num_states, self.num_actions
            )));
        }
        let base = (state * self.num_actions + action) * self.num_states;
        self.counts[base + next] += 1;
        Ok(())
    }

    /// Tied counts `N_s[s'] = Σ_a N[s][a][s']`, computed on demand.
    pub fn tied(&self, state: usize, next: usize) -> u64 {
        (0..self.num_actions).map(|a| self.get(state, a, next)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }
}

/// Per-(s, a) count and sum of observed rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardStats {
    num_actions: usize,
    count: Vec<u64>,
    sum: Vec<f64>,
}

impl RewardStats {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        RewardStats {
            num_actions,
            count: vec![0; num_states * num_actions],
            sum: vec![0.0; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.count.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn count(&self, state: usize, action: usize) -> u64 {
        self.count[state * self.num_actions + action]
    }

    pub fn sum(&self, state: usize, action: usize) -> f64 {
        self.sum[state * self.num_actions + action]
    }

    pub fn record(&mut self, state: usize, action: usize, reward: f64) -> Result<()> {
        if state >= self.num_states() || action >= self.num_actions {
            return Err(Error::contract(format!(
                "reward cell ({state}, {action}) out of range"
            )));
        }
        let i = state * self.num_actions + action;
        self.count[i] += 1;
        self.sum[i] += reward;
        Ok(())
    }
}

/// Adds one episode's transitions and rewards to the statistics.
///
/// The final step's `next_state` is counted; nothing links one episode to the
/// next. The episode is validated in full before anything is written.
pub fn update_counts(
    counts: &mut TransitionCounts,
    stats: &mut RewardStats,
    episode: &EpisodeRecord,
) -> Result<()> {
    let (s, a) = (counts.num_states(), counts.num_actions());
    if stats.num_states() != s || stats.num_actions() != a {
        return Err(Error::contract("count and reward tables disagree on shape"));
    }
    if let Some(bad) = episode
        .steps
        .iter()
        .find(|st| st.state >= s || st.next_state >= s || st.action >= a)
    {
        return Err(Error::contract(format!(
            "episode step {bad:?} out of range for {s} states and {a} actions"
        )));
    }
    for step in &episode.steps {
        counts.increment(step.state, step.action, step.next_state)?;
        stats.record(step.state, step.action, step.reward)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deterministic_chain() -> MdpModel {
        // 3 states, action 0 stays, action 1 moves right (saturating).
        let mut p = vec![0.0; 3 * 2 * 3];
        for s in 0..3 {
            p[(s * 2) * 3 + s] = 1.0;
            p[(s * 2 + 1) * 3 + (s + 1).min(2)] = 1.0;
        }
        let r = vec![0.0, 1.0, 0.0, 2.0, 5.0, 3.0];
        MdpModel::new(3, 2, 4, p, r, 0.0, vec![1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        let err = MdpModel::new(2, 1, 1, vec![0.5, 0.4, 1.0, 0.0], vec![0.0, 0.0], 0.0, vec![1.0, 0.0]);
        assert!(matches!(err, Err(Error::Contract(_))));
        let err = MdpModel::new(1, 1, 0, vec![1.0], vec![0.0], 0.0, vec![1.0]);
        assert!(err.is_err());
        let err = MdpModel::new(2, 1, 1, vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 0.0], 0.0, vec![0.7, 0.7]);
        assert!(err.is_err());
    }

    #[test]
    fn deterministic_trajectory() {
        let m = deterministic_chain();
        let pi = Policy::constant(3, 4, 1);
        let ep = simulate_episode(&m, &pi, &mut Rng::from_seed(0)).unwrap();
        let states: Vec<usize> = ep.steps.iter().map(|s| s.state).collect();
        let rewards: Vec<f64> = ep.steps.iter().map(|s| s.reward).collect();
        assert_eq!(states, vec![0, 1, 2, 2]);
        assert_eq!(rewards, vec![1.0, 2.0, 3.0, 3.0]);
        assert_eq!(ep.steps.last().unwrap().next_state, 2);
        assert!(ep.is_chained());
    }

    #[test]
    fn unit_horizon() {
        let m = deterministic_chain().with_horizon(1).unwrap();
        let ep = simulate_episode(&m, &Policy::constant(3, 1, 0), &mut Rng::from_seed(0)).unwrap();
        assert_eq!(ep.len(), 1);
    }

    #[test]
    fn policy_shape_mismatch() {
        let m = deterministic_chain();
        assert!(simulate_episode(&m, &Policy::constant(3, 3, 0), &mut Rng::from_seed(0)).is_err());
        assert!(simulate_episode(&m, &Policy::constant(3, 4, 2), &mut Rng::from_seed(0)).is_err());
    }

    #[test]
    fn counts_additivity() {
        let m = deterministic_chain();
        let pi = Policy::constant(3, 4, 1);
        let ep = simulate_episode(&m, &pi, &mut Rng::from_seed(0)).unwrap();
        let mut c = TransitionCounts::new(3, 2);
        let mut r = RewardStats::new(3, 2);
        update_counts(&mut c, &mut r, &EpisodeRecord::default()).unwrap();
        assert_eq!(c.total(), 0);
        update_counts(&mut c, &mut r, &ep).unwrap();
        assert_eq!(c.total(), 4);
        let once = c.clone();
        update_counts(&mut c, &mut r, &ep).unwrap();
        assert!(c.as_slice().iter().zip(once.as_slice()).all(|(a, b)| *a == 2 * b));
        assert_eq!(r.count(2, 1), 4);
        assert_eq!(r.sum(2, 1), 12.0);
        assert_eq!(c.tied(2, 2), 4);
    }

    #[test]
    fn out_of_range_episode_leaves_counts_untouched() {
        let mut c = TransitionCounts::new(2, 2);
        let mut r = RewardStats::new(2, 2);
        let ep = EpisodeRecord {
            steps: vec![
                Step { state: 0, action: 0, reward: 1.0, next_state: 1 },
                Step { state: 1, action: 2, reward: 1.0, next_state: 0 },
            ],
        };
        assert!(matches!(update_counts(&mut c, &mut r, &ep), Err(Error::Contract(_))));
        assert_eq!(c.total(), 0);
        assert_eq!(r.count(0, 0), 0);
    }

    #[test]
    fn layout_round_trip() {
        let layout = FactoredLayout::new(vec![3, 2], 4).unwrap();
        assert_eq!(layout.num_states(), 24);
        for s in 0..24 {
            let (x, z) = layout.split(s);
            assert_eq!(layout.encode(x, z), s);
            assert_eq!(layout.encode_exo(&layout.decode_exo(x)), x);
        }
        // time = afternoon (1), weather = poor (1), z = 3
        assert_eq!(layout.encode(layout.encode_exo(&[1, 1]), 3), 15);
    }
}
