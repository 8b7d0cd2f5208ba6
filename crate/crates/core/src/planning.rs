//! Exact finite-horizon dynamic programming and regret accounting.

use crate::error::Result;
use crate::model::{MdpModel, Policy};

/// Values `V[s][h]` for steps `h = 0..=H` (0-based), with the terminal layer
/// `V[·][H]` fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    num_states: usize,
    horizon: usize,
    // [h][s], (H + 1) layers
    values: Vec<f64>,
}

impl ValueTable {
    fn zeros(num_states: usize, horizon: usize) -> Self {
        ValueTable {
            num_states,
            horizon,
            values: vec![0.0; num_states * (horizon + 1)],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Value of state `s` with steps `h..H` still to play (0-based `h`).
    pub fn value(&self, state: usize, h: usize) -> f64 {
        self.values[h * self.num_states + state]
    }

    /// Layer `h` as a slice over states.
    pub fn layer(&self, h: usize) -> &[f64] {
        &self.values[h * self.num_states..(h + 1) * self.num_states]
    }

    fn split_layers(&mut self, h: usize) -> (&mut [f64], &[f64]) {
        let n = self.num_states;
        let (head, tail) = self.values.split_at_mut((h + 1) * n);
        (&mut head[h * n..], &tail[..n])
    }

    /// `Σ_s ρ(s) V[s][0]`.
    pub fn start_value(&self, start_dist: &[f64]) -> f64 {
        start_dist
            .iter()
            .zip(self.layer(0))
            .map(|(p, v)| p * v)
            .sum()
    }
}

fn q_value(model: &MdpModel, next_values: &[f64], state: usize, action: usize) -> f64 {
    let future: f64 = model
        .row(state, action)
        .iter()
        .zip(next_values)
        .map(|(p, v)| p * v)
        .sum();
    model.reward(state, action) + future
}

/// Optimal policy and values. Ties go to the lowest action index.
pub fn backward_induction(model: &MdpModel) -> (Policy, ValueTable) {
    let (s_count, a_count, horizon) = (model.num_states(), model.num_actions(), model.horizon());
    let mut values = ValueTable::zeros(s_count, horizon);
    let mut policy = Policy::zeros(s_count, horizon);
    for h in (0..horizon).rev() {
        let (current, next) = values.split_layers(h);
        for s in 0..s_count {
            let mut best_action = 0;
            let mut best = q_value(model, next, s, 0);
            for a in 1..a_count {
                let q = q_value(model, next, s, a);
                if q > best {
                    best = q;
                    best_action = a;
                }
            }
            current[s] = best;
            policy.set(s, h, best_action);
        }
    }
    (policy, values)
}

/// Exact values of a fixed policy.
pub fn evaluate_policy(model: &MdpModel, policy: &Policy) -> Result<ValueTable> {
    policy.check_against(model)?;
    let (s_count, horizon) = (model.num_states(), model.horizon());
    let mut values = ValueTable::zeros(s_count, horizon);
    for h in (0..horizon).rev() {
        let (current, next) = values.split_layers(h);
        for (s, v) in current.iter_mut().enumerate() {
            *v = q_value(model, next, s, policy.action(s, h));
        }
    }
    Ok(values)
}

/// `Σ_s ρ(s) (V*[s][0] − V_π[s][0])`, evaluated exactly against the true model.
pub fn per_episode_regret(model: &MdpModel, v_star: &ValueTable, policy: &Policy) -> Result<f64> {
    let v_pi = evaluate_policy(model, policy)?;
    Ok(model
        .start_dist()
        .iter()
        .zip(v_star.layer(0).iter().zip(v_pi.layer(0)))
        .map(|(rho, (opt, got))| rho * (opt - got))
        .sum())
}
