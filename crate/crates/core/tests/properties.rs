//! Property and oracle tests across the library.

use bht_rl::agents::{
    cb_ps_plan, mdp_ps_plan, oracle_null_probability, posterior_null_probability, Agent, BhtAgent,
    CbPsAgent, HypothesisPosteriorInput, LearnerState, MdpPsAgent, NormalRewardPosterior,
    TransitionPrior,
};
use bht_rl::envs::{
    build_mobile_health, build_mobile_health_interpolated, build_random_mdp, build_riverswim,
    build_riverswim_cb, interpolate, make_bandit_by_action_copy, max_action_variation,
    mobile_health_layout, RandomMdpConfig, RiverSwimConfig, MH_ENDO, MH_TIME, MH_WEATHER,
};
use bht_rl::mathstats::{
    derive_stream, log_gamma, log_multivariate_beta, log_sum_exp, sample_dirichlet, sample_normal,
    Rng,
};
use bht_rl::model::{simulate_episode, update_counts, MdpModel, Policy, RewardStats, TransitionCounts};
use bht_rl::planning::{backward_induction, per_episode_regret};
use proptest::prelude::*;

fn random_model(rng: &mut Rng, s: usize, a: usize, h: usize) -> MdpModel {
    let mut p = Vec::with_capacity(s * a * s);
    for _ in 0..s * a {
        let w: Vec<f64> = (0..s).map(|_| rng.uniform() + 1e-3).collect();
        let total: f64 = w.iter().sum();
        p.extend(w.iter().map(|x| x / total));
    }
    let r = (0..s * a).map(|_| rng.uniform()).collect();
    MdpModel::new(s, a, h, p, r, 0.01, vec![1.0 / s as f64; s]).unwrap()
}

fn counts_from(s: usize, a: usize, cells: &[u64]) -> TransitionCounts {
    TransitionCounts::from_counts(s, a, cells.to_vec()).unwrap()
}

// mathstats

fn factorial(n: u64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[test]
fn log_gamma_matches_factorials() {
    for n in 1..=20u64 {
        let exact = factorial(n - 1).ln();
        let got = log_gamma(n as f64).unwrap();
        assert!((got - exact).abs() <= 1e-10_f64.max(4.0 * f64::EPSILON * exact.abs()), "n = {n}");
    }
    let half = log_gamma(0.5).unwrap();
    assert!((half - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn log_gamma_matches_reference(x in 1e-3f64..1e6) {
        let reference = statrs::function::gamma::ln_gamma(x);
        let got = log_gamma(x).unwrap();
        let tol = 1e-10_f64.max(8.0 * f64::EPSILON * reference.abs());
        prop_assert!((got - reference).abs() <= tol, "x = {}: {} vs {}", x, got, reference);
    }

    #[test]
    fn multivariate_beta_matches_gamma_ratio(alpha in prop::collection::vec(1u64..6, 2..5)) {
        prop_assume!(alpha.iter().sum::<u64>() <= 12);
        let total: u64 = alpha.iter().sum();
        let direct = alpha.iter().map(|&a| factorial(a - 1)).product::<f64>() / factorial(total - 1);
        let a: Vec<f64> = alpha.iter().map(|&v| v as f64).collect();
        let got = log_multivariate_beta(&a).unwrap().exp();
        prop_assert!(((got - direct) / direct).abs() <= 1e-9);
    }

    #[test]
    fn log_sum_exp_symmetric_and_shift_invariant(a in -700f64..700.0, b in -700f64..700.0, c in -50f64..50.0) {
        prop_assert_eq!(log_sum_exp(a, b), log_sum_exp(b, a));
        let shifted = log_sum_exp(a + c, b + c);
        prop_assert!((shifted - (c + log_sum_exp(a, b))).abs() <= 1e-12 * (1.0 + shifted.abs()));
    }

    #[test]
    fn dirichlet_on_simplex(alpha in prop::collection::vec(0.05f64..8.0, 2..7), seed in any::<u64>()) {
        let mut rng = Rng::from_seed(seed);
        let x = sample_dirichlet(&alpha, &mut rng).unwrap();
        prop_assert!(x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn dirichlet_two_one_mean() {
    let mut rng = derive_stream(5, 0);
    let n = 40_000;
    let mean = (0..n).map(|_| sample_dirichlet(&[2.0, 1.0], &mut rng).unwrap()[0]).sum::<f64>() / n as f64;
    // mean 2/3, sd of the estimate ≈ 0.0012
    assert!((mean - 2.0 / 3.0).abs() < 0.006, "{mean}");
}

#[test]
fn normal_moments() {
    let mut rng = derive_stream(6, 0);
    let n = 40_000;
    let xs: Vec<f64> = (0..n).map(|_| sample_normal(1.5, 4.0, &mut rng).unwrap()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - 1.5).abs() < 0.05, "{mean}");
    assert!((var - 4.0).abs() < 0.15, "{var}");
}

// model

#[test]
fn uniform_transitions_give_uniform_frequencies() {
    let model = build_riverswim_cb(&RiverSwimConfig::default(), 100).unwrap();
    let mut rng = derive_stream(7, 0);
    let policy = Policy::constant(6, 100, 1);
    let mut freq = [0usize; 6];
    for _ in 0..100 {
        for step in simulate_episode(&model, &policy, &mut rng).unwrap().steps {
            freq[step.next_state] += 1;
        }
    }
    for f in freq {
        assert!((f as f64 / 1e4 - 1.0 / 6.0).abs() <= 0.03, "{freq:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_total_is_h_times_episodes(seed in any::<u64>(), episodes in 1usize..12, h in 1usize..8) {
        let mut rng = Rng::from_seed(seed);
        let model = random_model(&mut rng, 3, 2, h);
        let mut counts = TransitionCounts::new(3, 2);
        let mut stats = RewardStats::new(3, 2);
        for _ in 0..episodes {
            let policy = Policy::from_fn(3, h, |_, _| rng.below(2));
            let ep = simulate_episode(&model, &policy, &mut rng).unwrap();
            prop_assert_eq!(ep.len(), h);
            prop_assert!(ep.is_chained());
            update_counts(&mut counts, &mut stats, &ep).unwrap();
        }
        prop_assert_eq!(counts.total(), (h * episodes) as u64);
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        let model = build_riverswim(&RiverSwimConfig::default(), 15).unwrap();
        let policy = Policy::constant(6, 15, 1);
        let a = simulate_episode(&model, &policy, &mut Rng::from_seed(seed)).unwrap();
        let b = simulate_episode(&model, &policy, &mut Rng::from_seed(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

// envs

#[test]
fn interpolation_scales_variation_linearly() {
    let rs = build_riverswim(&RiverSwimConfig::default(), 10).unwrap();
    let random = build_random_mdp(&RandomMdpConfig::default(), 5, &mut derive_stream(8, 0)).unwrap();
    let pairs = [
        (build_riverswim_cb(&RiverSwimConfig::default(), 10).unwrap(), rs),
        (make_bandit_by_action_copy(&random), random),
        (build_mobile_health(true, 10).unwrap().0, build_mobile_health(false, 10).unwrap().0),
    ];
    for (cb, mdp) in &pairs {
        assert_eq!(max_action_variation(cb), 0.0);
        for lambda in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let mixed = interpolate(cb, mdp, lambda).unwrap();
            let expected = lambda * max_action_variation(mdp);
            assert!((max_action_variation(&mixed) - expected).abs() <= 1e-12);
        }
    }
    for lambda in [0.0, 0.3, 1.0] {
        let (m, _) = build_mobile_health_interpolated(lambda, 10).unwrap();
        assert!((max_action_variation(&m) - lambda * 0.105).abs() <= 1e-12);
    }
}

#[test]
fn mobile_health_factors_reconstruct() {
    let (model, layout) = build_mobile_health(false, 10).unwrap();
    assert_eq!(model.num_states(), 24);
    assert_eq!(layout, mobile_health_layout());
    for s in 0..24 {
        let (x, z) = layout.split(s);
        let xc = layout.decode_exo(x);
        for a in 0..2 {
            assert!(model.reward(s, a) >= model.reward(s, 0));
            assert!(model.reward(s, 1) >= model.reward(s, 0));
            for s2 in 0..24 {
                let (x2, z2) = layout.split(s2);
                let x2c = layout.decode_exo(x2);
                let p = MH_TIME[xc[0]][x2c[0]] * MH_WEATHER[xc[1]][x2c[1]] * MH_ENDO[a][z][z2];
                assert!((model.transition(s, a, s2) - p).abs() <= 1e-15);
            }
        }
    }
}

#[test]
fn builders_emit_valid_models() {
    let rs = RiverSwimConfig::default();
    let models = vec![
        build_riverswim(&rs, 20).unwrap(),
        build_riverswim_cb(&rs, 20).unwrap(),
        build_mobile_health(true, 10).unwrap().0,
        build_mobile_health(false, 10).unwrap().0,
        build_random_mdp(&RandomMdpConfig::default(), 5, &mut derive_stream(9, 0)).unwrap(),
    ];
    for m in models {
        m.validate().unwrap();
    }
}

// planning

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reward_shift_raises_values_uniformly(seed in any::<u64>(), c in 0.01f64..5.0) {
        let mut rng = Rng::from_seed(seed);
        let (s, a, h) = (1 + rng.below(4), 1 + rng.below(3), 1 + rng.below(6));
        let model = random_model(&mut rng, s, a, h);
        let shifted_rewards: Vec<f64> = model.reward_means().iter().map(|r| r + c).collect();
        let shifted = MdpModel::new(
            s, a, h, model.transitions().to_vec(), shifted_rewards, 0.01, model.start_dist().to_vec(),
        ).unwrap();
        let (p0, v0) = backward_induction(&model);
        let (p1, v1) = backward_induction(&shifted);
        prop_assert_eq!(p0, p1);
        for step in 0..=h {
            for st in 0..s {
                let expected = v0.value(st, step) + c * (h - step) as f64;
                prop_assert!((v1.value(st, step) - expected).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn regret_is_nonnegative(seed in any::<u64>()) {
        let mut rng = Rng::from_seed(seed);
        let model = random_model(&mut rng, 3, 2, 4);
        let (_, v_star) = backward_induction(&model);
        let policy = Policy::from_fn(3, 4, |_, _| rng.below(2));
        prop_assert!(per_episode_regret(&model, &v_star, &policy).unwrap() >= -1e-12);
    }
}

// agents

fn random_counts(rng: &mut Rng, s: usize, a: usize, total: usize) -> Vec<u64> {
    let mut c = vec![0u64; s * a * s];
    for _ in 0..total {
        let i = rng.below(c.len());
        c[i] += 1;
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn null_probability_matches_oracle(
        seed in any::<u64>(),
        s in 1usize..4,
        a in 1usize..3,
        total in 0usize..21,
        alpha_index in 0usize..3,
        prior in 0.0f64..=1.0,
    ) {
        let mut rng = Rng::from_seed(seed);
        let counts = counts_from(s, a, &random_counts(&mut rng, s, a, total));
        let alpha = vec![[0.25, 1.0, 4.0][alpha_index]; s];
        let input = HypothesisPosteriorInput { counts: &counts, alpha: &alpha, prior_h0: prior };
        let fast = posterior_null_probability(input).unwrap();
        prop_assert!((0.0..=1.0).contains(&fast));
        prop_assert!((fast - oracle_null_probability(input).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn null_probability_invariant_to_action_labels(seed in any::<u64>(), total in 0usize..60) {
        let (s, a) = (3, 3);
        let mut rng = Rng::from_seed(seed);
        let cells = random_counts(&mut rng, s, a, total);
        let perm = [2usize, 0, 1];
        let mut permuted = vec![0u64; cells.len()];
        for st in 0..s {
            for act in 0..a {
                for t in 0..s {
                    permuted[(st * a + perm[act]) * s + t] = cells[(st * a + act) * s + t];
                }
            }
        }
        let alpha = [1.0; 3];
        let p = |c: &TransitionCounts| posterior_null_probability(HypothesisPosteriorInput {
            counts: c, alpha: &alpha, prior_h0: 0.5,
        }).unwrap();
        let x = p(&counts_from(s, a, &cells));
        let y = p(&counts_from(s, a, &permuted));
        prop_assert!((x - y).abs() <= 1e-12 * x.max(1e-300).max(y));
    }
}

#[test]
fn identical_evidence_moves_toward_null() {
    // two-action, two-state worked case; add the same vector to both actions
    let base = [0, 1, 0, 1, 0, 0, 0, 0];
    let p = |cells: &[u64]| {
        posterior_null_probability(HypothesisPosteriorInput {
            counts: &counts_from(2, 2, cells),
            alpha: &[1.0, 1.0],
            prior_h0: 0.5,
        })
        .unwrap()
    };
    let mut prev = p(&base);
    assert!((prev - 4.0 / 7.0).abs() < 1e-12);
    for add in 1..6u64 {
        let mut cells = base;
        cells[1] += add;
        cells[3] += add;
        let now = p(&cells);
        assert!(now >= prev - 1e-15, "{add}: {now} < {prev}");
        prev = now;
    }
    // identical but spread-out evidence can move toward H1: 1/30 vs 1/36
    let spread = p(&[1, 1, 1, 1, 0, 0, 0, 0]);
    assert!((spread - 6.0 / 11.0).abs() < 1e-12);
}

fn posterior(s: usize, a: usize, obs_var: f64) -> NormalRewardPosterior {
    NormalRewardPosterior::new(s, a, 1.0, 1.0, obs_var).unwrap()
}

#[test]
fn reward_posterior_prior_and_shrinkage() {
    let p = posterior(2, 2, 0.01);
    assert_eq!(p.posterior(1, 1), (1.0, 1.0));
    let model = build_riverswim(&RiverSwimConfig::default(), 5).unwrap();
    let mut state = LearnerState::new(posterior(6, 2, 0.01));
    let mut rng = derive_stream(10, 0);
    for _ in 0..20 {
        let ep = simulate_episode(&model, &Policy::constant(6, 5, 0), &mut rng).unwrap();
        state.observe(&ep).unwrap();
    }
    let (_, var) = state.rewards.posterior(0, 0);
    assert!(var > 0.0 && var <= 1.0);
    assert!(var < 0.01 / 50.0);
}

#[test]
fn planning_never_mutates_agents() {
    let model = build_riverswim(&RiverSwimConfig::default(), 8).unwrap();
    let flat = || TransitionPrior::Flat { alpha: vec![1.0; 6] };
    let mut agents: Vec<Box<dyn Agent>> = vec![
        Box::new(CbPsAgent::new(posterior(6, 2, 0.01), 8)),
        Box::new(MdpPsAgent::new(posterior(6, 2, 0.01), flat(), 8).unwrap()),
        Box::new(BhtAgent::new(posterior(6, 2, 0.01), flat(), 0.5, 8).unwrap()),
    ];
    let mut rng = derive_stream(11, 0);
    for agent in agents.iter_mut() {
        for _ in 0..5 {
            let plan = agent.plan_episode(&mut rng).unwrap();
            let ep = simulate_episode(&model, &plan.policy, &mut rng).unwrap();
            agent.observe(&ep).unwrap();
        }
        // identical streams must give identical plans when no observation happens in between
        let a = agent.plan_episode(&mut derive_stream(12, 0)).unwrap();
        let _ = agent.plan_episode(&mut derive_stream(13, 0)).unwrap();
        let b = agent.plan_episode(&mut derive_stream(12, 0)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn cb_and_mdp_plans_converge_on_bandit_truth() {
    let mut rng = derive_stream(14, 0);
    let cb = make_bandit_by_action_copy(&random_model(&mut rng, 3, 2, 4));
    let mut state = LearnerState::new(posterior(3, 2, 0.01));
    let explore = Policy::from_fn(3, 4, |s, h| (s + h) % 2);
    let explore_other = Policy::from_fn(3, 4, |s, h| (s + h + 1) % 2);
    let min_cell = |c: &TransitionCounts| {
        (0..3).flat_map(|s| (0..2).map(move |a| (s, a))).map(|(s, a)| c.row(s, a).iter().sum::<u64>()).min().unwrap()
    };
    let mut flip = false;
    while min_cell(&state.counts) < 100_000 {
        let policy = if flip { &explore } else { &explore_other };
        flip = !flip;
        let ep = simulate_episode(&cb, policy, &mut rng).unwrap();
        state.observe(&ep).unwrap();
    }
    let greedy = cb_ps_plan(&state.rewards, 4, &mut rng);
    let full = mdp_ps_plan(&state.rewards, &state.counts, &[1.0; 3], 4, &mut rng).unwrap();
    let (truth, _) = backward_induction(&cb);
    assert_eq!(greedy, full);
    assert_eq!(greedy, truth);
}
