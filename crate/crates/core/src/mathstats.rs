//! Special functions, log-space arithmetic and seeded sampling.
//!
//! The generator is ChaCha with 8 rounds (`rand_chacha::ChaCha8Rng`), seeded
//! from a 256-bit key expanded with SplitMix64. Streams for repetitions are
//! derived by [`derive_stream`], so every draw in an experiment is a function of
//! `(master_seed, stream_index)` only.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Seeded pseudorandom generator. Single-owner; never share across threads.
#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    /// Generator keyed by the SplitMix64 expansion of `seed`.
    pub fn from_seed(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN_GAMMA);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        Rng(ChaCha8Rng::from_seed(key))
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform integer on `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a bijective 64-bit avalanche mixer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(master_seed, stream_index)`.
///
/// The index is mixed on its own before being folded into the master seed, so
/// for a fixed master seed distinct indices always give distinct keys.
pub fn derive_stream(master_seed: u64, stream_index: u64) -> Rng {
    let idx = mix64(stream_index.wrapping_add(GOLDEN_GAMMA));
    Rng::from_seed(mix64(master_seed ^ idx))
}

// Stirling series coefficients B_{2k} / (2k (2k - 1)) for k = 1..8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

// Below this the argument is shifted up with Γ(x + 1) = x Γ(x).
const STIRLING_MIN: f64 = 7.0;

/// Natural log of the gamma function for `x > 0`.
///
/// Arguments below 7 are shifted up by the recurrence and the asymptotic
/// Stirling series (8 terms, truncation error below 1e-14 at x = 7) is
/// evaluated there.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    let mut shifted = x;
    let mut product = 1.0;
    while shifted < STIRLING_MIN {
        product *= shifted;
        shifted += 1.0;
    }
    let inv = 1.0 / shifted;
    let inv_sq = inv * inv;
    let mut series = 0.0;
    let mut power = inv;
    for c in STIRLING {
        series += c * power;
        power *= inv_sq;
    }
    let stirling = (shifted - 0.5) * shifted.ln() - shifted + HALF_LN_TWO_PI + series;
    if product == 1.0 {
        stirling
    } else {
        stirling - product.ln()
    }
}

/// `ln B(α) = Σ lnΓ(α_i) − lnΓ(Σ α_i)`.
pub fn log_multivariate_beta(alpha: &[f64]) -> Result<f64> {
    if alpha.len() < 2 {
        return Err(Error::domain(
            "multivariate beta needs at least two components",
        ));
    }
    check_positive(alpha)?;
    let total: f64 = alpha.iter().sum();
    Ok(alpha.iter().map(|&a| log_gamma_unchecked(a)).sum::<f64>() - log_gamma_unchecked(total))
}

/// `ln B(α + n)` without materializing the shifted vector. `alpha` must already
/// be validated as strictly positive.
pub(crate) fn log_beta_with_counts(alpha: &[f64], counts: impl Iterator<Item = u64>) -> f64 {
    let mut sum_terms = 0.0;
    let mut total = 0.0;
    for (&a, n) in alpha.iter().zip(counts) {
        let v = a + n as f64;
        sum_terms += log_gamma_unchecked(v);
        total += v;
    }
    sum_terms - log_gamma_unchecked(total)
}

pub(crate) fn check_positive(alpha: &[f64]) -> Result<()> {
    match alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        Some(bad) => Err(Error::domain(format!(
            "concentration parameters must be positive and finite, got {bad}"
        ))),
        None => Ok(()),
    }
}

/// `ln(e^a + e^b)`; `-∞` acts as probability zero.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Gamma(shape, 1) draw. Marsaglia–Tsang squeeze for shape ≥ 1, and the
/// `U^{1/shape}` boost for shape < 1 (both as implemented by `rand_distr`).
pub fn sample_gamma(shape: f64, rng: &mut Rng) -> Result<f64> {
    let dist = Gamma::new(shape, 1.0)
        .map_err(|_| Error::domain(format!("gamma shape must be positive, got {shape}")))?;
    Ok(dist.sample(rng))
}

/// Dirichlet draw by normalizing independent Gamma(α_i, 1) variates.
pub fn sample_dirichlet(alpha: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
    check_positive(alpha)?;
    let mut out = Vec::with_capacity(alpha.len());
    sample_dirichlet_into(alpha.iter().copied(), rng, &mut out);
    Ok(out)
}

/// Fills `out` with a Dirichlet draw. Concentrations must be positive.
pub(crate) fn sample_dirichlet_into(
    alpha: impl Iterator<Item = f64> + Clone,
    rng: &mut Rng,
    out: &mut Vec<f64>,
) {
    out.clear();
    let mut total = 0.0;
    for a in alpha.clone() {
        let g = Gamma::new(a, 1.0).expect("validated concentration").sample(rng);
        total += g;
        out.push(g);
    }
    if total > 0.0 && total.is_finite() {
        out.iter_mut().for_each(|g| *g /= total);
    } else {
        // Every gamma draw underflowed (only possible for tiny concentrations).
        // The Dirichlet then degenerates to a vertex chosen in proportion to α.
        let weights: Vec<f64> = alpha.collect();
        let norm: f64 = weights.iter().sum();
        let pick = categorical_scan(weights.iter().map(|w| w / norm), rng.uniform());
        out.iter_mut().enumerate().for_each(|(i, g)| *g = if i == pick { 1.0 } else { 0.0 });
    }
}

/// Gaussian draw with the given variance. Variance zero returns `mean` without
/// consuming randomness.
pub fn sample_normal(mean: f64, variance: f64, rng: &mut Rng) -> Result<f64> {
    if !(variance >= 0.0) {
        return Err(Error::domain(format!(
            "normal variance must be non-negative, got {variance}"
        )));
    }
    if variance == 0.0 {
        return Ok(mean);
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(mean + variance.sqrt() * z)
}

/// Bernoulli draw. `p ≤ 0` and `p ≥ 1` are decided without touching the stream.
pub fn sample_bernoulli(p: f64, rng: &mut Rng) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.uniform() < p
    }
}

/// Categorical draw over `probs` (assumed to sum to one) using one uniform.
pub fn sample_categorical(probs: &[f64], rng: &mut Rng) -> usize {
    categorical_scan(probs.iter().copied(), rng.uniform())
}

fn categorical_scan(probs: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    // Rounding left the cumulative sum just below one.
    last_positive
}
