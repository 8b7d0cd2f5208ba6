//! Posterior probability that actions do not affect transitions.
//!
//! Under the null every state has one Dirichlet(α) next-state distribution
//! shared by all actions (tied); under the alternative every (state, action)
//! pair has its own (untied). Both marginal likelihoods are Dirichlet-
//! multinomial, so the posterior odds are a ratio of multivariate Beta
//! functions:
//!
//! ```text
//! W0 = P(H0) · B(α)^{S(A−1)} · Π_s B(α + N_s)
//! W1 = P(H1) · Π_{s,a} B(α + N_{s,a})
//! P(H0 | data) = W0 / (W0 + W1)
//! ```

use crate::error::{Error, Result};
use crate::mathstats::{check_positive, log_beta_with_counts, log_sum_exp};
use crate::model::{FactoredLayout, TransitionCounts};

/// Inputs of the hypothesis test. `counts` may be the full tensor or the
/// endogenous-only tensor; `alpha` has one entry per next-state value.
#[derive(Debug, Clone, Copy)]
pub struct HypothesisPosteriorInput<'a> {
    pub counts: &'a TransitionCounts,
    pub alpha: &'a [f64],
    pub prior_h0: f64,
}

impl HypothesisPosteriorInput<'_> {
    fn validate(&self) -> Result<()> {
        check_positive(self.alpha)?;
        if self.alpha.len() != self.counts.num_states() {
            return Err(Error::contract(format!(
                "alpha has {} entries but the tested component has {} values",
                self.alpha.len(),
                self.counts.num_states()
            )));
        }
        if !(0.0..=1.0).contains(&self.prior_h0) {
            return Err(Error::domain(format!(
                "prior probability of the null must lie in [0, 1], got {}",
                self.prior_h0
            )));
        }
        Ok(())
    }
}

/// `ln P(data | H1) − ln P(data | H0)`. States with no observations contribute
/// exactly zero, so an empty tensor yields exactly zero.
pub fn log_bayes_factor(counts: &TransitionCounts, alpha: &[f64]) -> f64 {
    let (s_count, a_count) = (counts.num_states(), counts.num_actions());
    let log_b_alpha = log_beta_with_counts(alpha, std::iter::repeat(0));
    let mut total = 0.0;
    for s in 0..s_count {
        let tied: Vec<u64> = (0..s_count).map(|t| counts.tied(s, t)).collect();
        if tied.iter().all(|&n| n == 0) {
            continue;
        }
        let mut untied = 0.0;
        for a in 0..a_count {
            let row = counts.row(s, a);
            if row.iter().any(|&n| n > 0) {
                untied += log_beta_with_counts(alpha, row.iter().copied()) - log_b_alpha;
            }
        }
        let pooled = log_beta_with_counts(alpha, tied.into_iter()) - log_b_alpha;
        total += untied - pooled;
    }
    total
}

/// Posterior probability of the null hypothesis, computed in log space.
pub fn posterior_null_probability(input: HypothesisPosteriorInput<'_>) -> Result<f64> {
    input.validate()?;
    let prior = input.prior_h0;
    if prior == 0.0 || prior == 1.0 {
        return Ok(prior);
    }
    let log_factor = log_bayes_factor(input.counts, input.alpha);
    if log_factor == 0.0 {
        return Ok(prior);
    }
    // Both weights share the factor Π B(α)^{-SA}, which is dropped.
    let log_w0 = prior.ln();
    let log_w1 = (1.0 - prior).ln() + log_factor;
    Ok((log_w0 - log_sum_exp(log_w0, log_w1)).exp().clamp(0.0, 1.0))
}

/// Independent check of [`posterior_null_probability`] for small data sets.
///
/// Replays the counts as an observation sequence and multiplies the
/// Dirichlet-multinomial predictive probabilities
/// `(α_{s'} + seen_{s'}) / (Σα + seen)`, pooling over actions for the null and
/// per action for the alternative. No Beta or Gamma functions are involved.
pub fn oracle_null_probability(input: HypothesisPosteriorInput<'_>) -> Result<f64> {
    input.validate()?;
    let counts = input.counts;
    let (s_count, a_count) = (counts.num_states(), counts.num_actions());
    let alpha_total: f64 = input.alpha.iter().sum();

    // Interleave actions so the two partitions see the data in different
    // orders; exchangeability makes the order irrelevant.
    let mut sequence = Vec::new();
    for s in 0..s_count {
        let mut remaining: Vec<Vec<u64>> = (0..a_count).map(|a| counts.row(s, a).to_vec()).collect();
        loop {
            let mut emitted = false;
            for (a, row) in remaining.iter_mut().enumerate() {
                if let Some(t) = row.iter().position(|&n| n > 0) {
                    row[t] -= 1;
                    sequence.push((s, a, t));
                    emitted = true;
                }
            }
            if !emitted {
                break;
            }
        }
    }

    let mut seen_tied = vec![0u64; s_count * s_count];
    let mut seen_untied = vec![0u64; s_count * a_count * s_count];
    let mut like_null = 1.0;
    let mut like_alt = 1.0;
    for &(s, a, t) in &sequence {
        let tied = &mut seen_tied[s * s_count..(s + 1) * s_count];
        let n: u64 = tied.iter().sum();
        like_null *= (input.alpha[t] + tied[t] as f64) / (alpha_total + n as f64);
        tied[t] += 1;

        let base = (s * a_count + a) * s_count;
        let untied = &mut seen_untied[base..base + s_count];
        let n: u64 = untied.iter().sum();
        like_alt *= (input.alpha[t] + untied[t] as f64) / (alpha_total + n as f64);
        untied[t] += 1;
    }
    let w0 = input.prior_h0 * like_null;
    let w1 = (1.0 - input.prior_h0) * like_alt;
    Ok(w0 / (w0 + w1))
}

/// Aggregates full-state counts onto the endogenous coordinate:
/// `N[z][a][z'] = Σ_{x, x'} N[(x, z)][a][(x', z')]`.
pub fn endogenous_counts(counts: &TransitionCounts, layout: &FactoredLayout) -> Result<TransitionCounts> {
    if counts.num_states() != layout.num_states() {
        return Err(Error::contract("layout does not match the count tensor"));
    }
    let (z_count, a_count) = (layout.endo_size(), counts.num_actions());
    let mut out = vec![0u64; z_count * a_count * z_count];
    for s in 0..counts.num_states() {
        let (_, z) = layout.split(s);
        for a in 0..a_count {
            for (s2, &n) in counts.row(s, a).iter().enumerate() {
                let (_, z2) = layout.split(s2);
                out[(z * a_count + a) * z_count + z2] += n;
            }
        }
    }
    TransitionCounts::from_counts(z_count, a_count, out)
}

/// Exogenous transition counts `N_x[x'] = Σ_{z, a, z'} N[(x, z)][a][(x', z')]`,
/// row-major `|X| × |X|`.
pub fn exogenous_counts(counts: &TransitionCounts, layout: &FactoredLayout) -> Vec<u64> {
    let x_count = layout.exo_size();
    let mut out = vec![0u64; x_count * x_count];
    for s in 0..counts.num_states() {
        let (x, _) = layout.split(s);
        for a in 0..counts.num_actions() {
            for (s2, &n) in counts.row(s, a).iter().enumerate() {
                let (x2, _) = layout.split(s2);
                out[x * x_count + x2] += n;
            }
        }
    }
    out
}

/// Hypothesis test restricted to the endogenous sub-state. `endo_counts` is
/// indexed `[z][a][z']` (see [`endogenous_counts`]); exogenous transitions
/// never enter.
pub fn factored_posterior_null_probability(
    endo_counts: &TransitionCounts,
    alpha: &[f64],
    prior_h0: f64,
) -> Result<f64> {
    posterior_null_probability(HypothesisPosteriorInput {
        counts: endo_counts,
        alpha,
        prior_h0,
    })
}
