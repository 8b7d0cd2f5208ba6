//! Benchmark environments: RiverSwim, the mobile-health activity-suggestion
//! model, random sparse MDPs, plus the CB/MDP interpolation and the maximum
//! action variation diagnostic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathstats::Rng;
use crate::model::{FactoredLayout, MdpModel};

/// RiverSwim action that moves towards the left bank.
pub const LEFT: usize = 0;
/// RiverSwim action that swims against the current.
pub const RIGHT: usize = 1;

/// RiverSwim parameters. Defaults are the common 6-state parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiverSwimConfig {
    pub num_states: usize,
    /// Probability that LEFT moves one state left (otherwise stays).
    pub left_move: f64,
    /// RIGHT from an interior state.
    pub right_advance: f64,
    pub right_stay: f64,
    pub right_retreat: f64,
    /// RIGHT from the leftmost state.
    pub right_first_advance: f64,
    pub right_first_stay: f64,
    /// RIGHT from the rightmost state.
    pub right_last_stay: f64,
    pub right_last_retreat: f64,
    /// Mean reward of LEFT at the leftmost state.
    pub reward_left_nest: f64,
    /// Mean reward of RIGHT at the rightmost state.
    pub reward_right_nest: f64,
    pub reward_noise_var: f64,
    /// Every episode starts here.
    pub start_state: usize,
}

impl Default for RiverSwimConfig {
    fn default() -> Self {
        RiverSwimConfig {
            num_states: 6,
            left_move: 1.0,
            right_advance: 0.3,
            right_stay: 0.6,
            right_retreat: 0.1,
            right_first_advance: 0.3,
            right_first_stay: 0.7,
            right_last_stay: 0.9,
            right_last_retreat: 0.1,
            reward_left_nest: 0.005,
            reward_right_nest: 1.0,
            reward_noise_var: 0.01,
            start_state: 0,
        }
    }
}

impl RiverSwimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_states < 2 {
            return Err(Error::config("num_states", "RiverSwim needs at least 2 states"));
        }
        if self.start_state >= self.num_states {
            return Err(Error::config("start_state", "start state outside the chain"));
        }
        let probs = [
            ("left_move", self.left_move),
            ("right_advance", self.right_advance),
            ("right_stay", self.right_stay),
            ("right_retreat", self.right_retreat),
            ("right_first_advance", self.right_first_advance),
            ("right_first_stay", self.right_first_stay),
            ("right_last_stay", self.right_last_stay),
            ("right_last_retreat", self.right_last_retreat),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(name, format!("probability {p} outside [0, 1]")));
            }
        }
        let rows = [
            ("right_advance", self.right_advance + self.right_stay + self.right_retreat),
            ("right_first_advance", self.right_first_advance + self.right_first_stay),
            ("right_last_stay", self.right_last_stay + self.right_last_retreat),
        ];
        for (name, total) in rows {
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::config(name, format!("row sums to {total}, expected 1")));
            }
        }
        if !(self.reward_noise_var >= 0.0) {
            return Err(Error::config("reward_noise_var", "must be non-negative"));
        }
        Ok(())
    }

    fn rewards(&self) -> Vec<f64> {
        let n = self.num_states;
        let mut r = vec![0.0; n * 2];
        r[LEFT] = self.reward_left_nest;
        r[(n - 1) * 2 + RIGHT] = self.reward_right_nest;
        r
    }

    fn start_dist(&self) -> Vec<f64> {
        let mut rho = vec![0.0; self.num_states];
        rho[self.start_state] = 1.0;
        rho
    }
}

/// The RiverSwim chain.
pub fn build_riverswim(config: &RiverSwimConfig, horizon: usize) -> Result<MdpModel> {
    config.validate()?;
    let n = config.num_states;
    let mut p = vec![0.0; n * 2 * n];
    let idx = |s: usize, a: usize, t: usize| (s * 2 + a) * n + t;
    for s in 0..n {
        let left = s.saturating_sub(1);
        p[idx(s, LEFT, left)] += config.left_move;
        p[idx(s, LEFT, s)] += 1.0 - config.left_move;
        if s == 0 {
            p[idx(s, RIGHT, 1)] += config.right_first_advance;
            p[idx(s, RIGHT, 0)] += config.right_first_stay;
        } else if s == n - 1 {
            p[idx(s, RIGHT, s)] += config.right_last_stay;
            p[idx(s, RIGHT, s - 1)] += config.right_last_retreat;
        } else {
            p[idx(s, RIGHT, s + 1)] += config.right_advance;
            p[idx(s, RIGHT, s)] += config.right_stay;
            p[idx(s, RIGHT, s - 1)] += config.right_retreat;
        }
    }
    MdpModel::new(
        n,
        2,
        horizon,
        p,
        config.rewards(),
        config.reward_noise_var,
        config.start_dist(),
    )
}

/// RiverSwim rewards with uniform, action-independent transitions.
pub fn build_riverswim_cb(config: &RiverSwimConfig, horizon: usize) -> Result<MdpModel> {
    config.validate()?;
    let n = config.num_states;
    MdpModel::new(
        n,
        2,
        horizon,
        vec![1.0 / n as f64; n * 2 * n],
        config.rewards(),
        config.reward_noise_var,
        config.start_dist(),
    )
}

/// Time-of-day transitions: Morning → Afternoon → Evening → Morning.
pub const MH_TIME: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];

/// Weather transitions over (Fair, Poor).
pub const MH_WEATHER: [[f64; 2]; 2] = [[0.6, 0.4], [0.3, 0.7]];

/// Endogenous transitions over z = 2·engagement + goal, i.e. the order
/// (Disengaged, Missed), (Disengaged, Met), (Engaged, Missed), (Engaged, Met).
/// Indexed `[action][z][z']`.
pub const MH_ENDO: [[[f64; 4]; 4]; 2] = [
    // no message
    [
        [0.45, 0.35, 0.1, 0.1],
        [0.5, 0.3, 0.15, 0.05],
        [0.05, 0.3, 0.3, 0.35],
        [0.05, 0.05, 0.35, 0.55],
    ],
    // message sent
    [
        [0.35, 0.35, 0.15, 0.15],
        [0.4, 0.25, 0.2, 0.15],
        [0.2, 0.25, 0.3, 0.25],
        [0.15, 0.15, 0.3, 0.4],
    ],
];

/// Additive reward coefficients, `[action][value]`.
pub const MH_THETA_TIME: [[f64; 3]; 2] = [[0.001, 0.01, 0.005], [0.001, 0.02, 0.01]];
pub const MH_THETA_WEATHER: [[f64; 2]; 2] = [[0.01, 0.015], [0.01, 0.025]];
/// `[action][engagement][goal]`.
pub const MH_THETA_ENDO: [[[f64; 2]; 2]; 2] =
    [[[0.005, 0.4], [0.35, 2.25]], [[0.01, 0.405], [1.75, 2.5]]];

pub const MH_NOISE_VAR: f64 = 0.01;

/// Layout of the 24 mobile-health states: (time, weather) exogenous, then the
/// endogenous (engagement, goal) pair.
pub fn mobile_health_layout() -> FactoredLayout {
    FactoredLayout::new(vec![3, 2], 4).expect("static layout")
}

/// Joint exogenous transition matrix `P(x'|x)` over x = 2·time + weather,
/// row-major `|X| × |X|`.
pub fn mobile_health_exo_transitions() -> Vec<f64> {
    let mut out = vec![0.0; 36];
    for t in 0..3 {
        for w in 0..2 {
            for t2 in 0..3 {
                for w2 in 0..2 {
                    out[(t * 2 + w) * 6 + t2 * 2 + w2] = MH_TIME[t][t2] * MH_WEATHER[w][w2];
                }
            }
        }
    }
    out
}

/// Endogenous transition matrices `[action][z][z']` interpolated between the
/// bandit variant (action 1 copies action 0) and the MDP variant.
pub fn mobile_health_endo(lambda: f64) -> Result<[[[f64; 4]; 4]; 2]> {
    check_lambda(lambda)?;
    let mut endo = MH_ENDO;
    for z in 0..4 {
        for z2 in 0..4 {
            endo[1][z][z2] = (1.0 - lambda) * MH_ENDO[0][z][z2] + lambda * MH_ENDO[1][z][z2];
        }
    }
    Ok(endo)
}

fn mobile_health_from_endo(
    endo: &[[[f64; 4]; 4]; 2],
    horizon: usize,
) -> Result<(MdpModel, FactoredLayout)> {
    let layout = mobile_health_layout();
    let s_count = layout.num_states();
    let mut p = vec![0.0; s_count * 2 * s_count];
    let mut r = vec![0.0; s_count * 2];
    for s in 0..s_count {
        let (x, z) = layout.split(s);
        let xc = layout.decode_exo(x);
        let (time, weather) = (xc[0], xc[1]);
        let (engaged, goal) = (z / 2, z % 2);
        for a in 0..2 {
            r[s * 2 + a] = MH_THETA_TIME[a][time]
                + MH_THETA_WEATHER[a][weather]
                + MH_THETA_ENDO[a][engaged][goal];
            for s2 in 0..s_count {
                let (x2, z2) = layout.split(s2);
                let x2c = layout.decode_exo(x2);
                p[(s * 2 + a) * s_count + s2] =
                    MH_TIME[time][x2c[0]] * MH_WEATHER[weather][x2c[1]] * endo[a][z][z2];
            }
        }
    }
    let rho = vec![1.0 / s_count as f64; s_count];
    let model = MdpModel::new(s_count, 2, horizon, p, r, MH_NOISE_VAR, rho)?;
    Ok((model, layout))
}

/// The 24-state mobile-health model. The bandit variant replaces the
/// message-sent endogenous dynamics with the no-message ones.
pub fn build_mobile_health(bandit_variant: bool, horizon: usize) -> Result<(MdpModel, FactoredLayout)> {
    let lambda = if bandit_variant { 0.0 } else { 1.0 };
    mobile_health_from_endo(&mobile_health_endo(lambda)?, horizon)
}

/// Mobile-health model interpolated on the endogenous factor only, which keeps
/// the product structure exact.
pub fn build_mobile_health_interpolated(
    lambda: f64,
    horizon: usize,
) -> Result<(MdpModel, FactoredLayout)> {
    mobile_health_from_endo(&mobile_health_endo(lambda)?, horizon)
}

/// Random sparse MDP parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomMdpConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub nonzero_entries_per_row: usize,
    pub reward_noise_var: f64,
}

impl Default for RandomMdpConfig {
    fn default() -> Self {
        RandomMdpConfig {
            num_states: 10,
            num_actions: 2,
            nonzero_entries_per_row: 5,
            reward_noise_var: 0.01,
        }
    }
}

impl RandomMdpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 {
            return Err(Error::config("num_states", "must be positive"));
        }
        if self.num_actions == 0 {
            return Err(Error::config("num_actions", "must be positive"));
        }
        if self.nonzero_entries_per_row == 0 || self.nonzero_entries_per_row > self.num_states {
            return Err(Error::config(
                "nonzero_entries_per_row",
                format!("must lie in 1..={}", self.num_states),
            ));
        }
        if !(self.reward_noise_var >= 0.0) {
            return Err(Error::config("reward_noise_var", "must be non-negative"));
        }
        Ok(())
    }
}

/// Random sparse MDP.
///
/// Draw order: for each `(s, a)` row, a partial Fisher–Yates shuffle picks the
/// support and one Uniform(0,1) weight is drawn per support entry; then one
/// Uniform(0,1) mean reward per `(s, a)`. Start states are uniform.
pub fn build_random_mdp(config: &RandomMdpConfig, horizon: usize, rng: &mut Rng) -> Result<MdpModel> {
    config.validate()?;
    let (n, a_count, k) = (config.num_states, config.num_actions, config.nonzero_entries_per_row);
    let mut p = vec![0.0; n * a_count * n];
    let mut perm: Vec<usize> = (0..n).collect();
    for row in p.chunks_exact_mut(n) {
        perm.iter_mut().enumerate().for_each(|(i, v)| *v = i);
        for i in 0..k {
            let j = i + rng.below(n - i);
            perm.swap(i, j);
        }
        let mut total = 0.0;
        for &t in &perm[..k] {
            // Uniform on [0, 1) can return exactly 0; keep the support at k.
            let w = loop {
                let u = rng.uniform();
                if u > 0.0 {
                    break u;
                }
            };
            row[t] = w;
            total += w;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    let rewards: Vec<f64> = (0..n * a_count).map(|_| rng.uniform()).collect();
    MdpModel::new(
        n,
        a_count,
        horizon,
        p,
        rewards,
        config.reward_noise_var,
        vec![1.0 / n as f64; n],
    )
}

/// Copies action 0's transition rows onto every other action.
pub fn make_bandit_by_action_copy(model: &MdpModel) -> MdpModel {
    let (n, a_count) = (model.num_states(), model.num_actions());
    let mut p = model.transitions().to_vec();
    for s in 0..n {
        let base = s * a_count * n;
        for a in 1..a_count {
            p.copy_within(base..base + n, base + a * n);
        }
    }
    model.with_transitions(p).expect("rows copied from a valid model")
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// `(1 − λ) P_cb + λ P_mdp`, entry-wise. Rewards, start distribution, horizon
/// and noise must coincide.
pub fn interpolate(cb: &MdpModel, mdp: &MdpModel, lambda: f64) -> Result<MdpModel> {
    check_lambda(lambda)?;
    if cb.num_states() != mdp.num_states()
        || cb.num_actions() != mdp.num_actions()
        || cb.horizon() != mdp.horizon()
    {
        return Err(Error::contract("interpolated models differ in shape"));
    }
    if cb.reward_means() != mdp.reward_means() {
        return Err(Error::contract("interpolated models differ in rewards"));
    }
    if cb.start_dist() != mdp.start_dist() || cb.reward_noise_var() != mdp.reward_noise_var() {
        return Err(Error::contract(
            "interpolated models differ in start distribution or reward noise",
        ));
    }
    let p = cb
        .transitions()
        .iter()
        .zip(mdp.transitions())
        .map(|(c, m)| (1.0 - lambda) * c + lambda * m)
        .collect();
    mdp.with_transitions(p)
}

/// `max_{s, s', a, a'} |P(s'|s,a) − P(s'|s,a')|` by exhaustive scan.
pub fn max_action_variation(model: &MdpModel) -> f64 {
    let mut best: f64 = 0.0;
    for s in 0..model.num_states() {
        for a in 0..model.num_actions() {
            for b in a + 1..model.num_actions() {
                for (p, q) in model.row(s, a).iter().zip(model.row(s, b)) {
                    best = best.max((p - q).abs());
                }
            }
        }
    }
    best
}

/// Exogenous marginal `P(x'|x)` read off a factored model, row-major
/// `|X| × |X|`. Uses state `(x, z = 0)` and action 0; for a model whose
/// transitions factor as `P(x'|x) P(z'|z,a)` every choice gives the same rows.
pub fn exogenous_marginal(model: &MdpModel, layout: &FactoredLayout) -> Result<Vec<f64>> {
    if layout.num_states() != model.num_states() {
        return Err(Error::contract("layout does not match the model's state count"));
    }
    let x_count = layout.exo_size();
    let mut out = vec![0.0; x_count * x_count];
    for x in 0..x_count {
        let row = model.row(layout.encode(x, 0), 0);
        for (s2, p) in row.iter().enumerate() {
            let (x2, _) = layout.split(s2);
            out[x * x_count + x2] += p;
        }
    }
    Ok(out)
}
