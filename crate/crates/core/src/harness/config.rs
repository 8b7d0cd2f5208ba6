//! Experiment configuration (JSON). Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{
    BhtAgent, CbPsAgent, ExogenousDynamics, FixedPolicyAgent, MdpPsAgent, NormalRewardPosterior,
    TransitionPrior,
};
use crate::envs::{
    build_mobile_health, build_mobile_health_interpolated, build_random_mdp, build_riverswim,
    build_riverswim_cb, exogenous_marginal, interpolate, make_bandit_by_action_copy,
    RandomMdpConfig, RiverSwimConfig,
};
use crate::error::{Error, Result};
use crate::mathstats::Rng;
use crate::model::{FactoredLayout, MdpModel, Policy};

use crate::agents::Agent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub horizon: usize,
    pub episodes: usize,
    pub repetitions: usize,
    pub master_seed: u64,
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Environment family and its parameters.
///
/// `lambda`, when present, interpolates the transitions between the family's
/// bandit and MDP variants; it is only accepted on the MDP variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Riverswim {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default)]
        params: RiverSwimConfig,
    },
    RiverswimCb {
        #[serde(default)]
        params: RiverSwimConfig,
    },
    MobileHealth {
        #[serde(default)]
        bandit: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
    },
    RandomMdp {
        #[serde(default)]
        bandit: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default)]
        params: RandomMdpConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    CbPs,
    MdpPs,
    BhtRl,
    BhtRlFactored,
    /// Plays the true optimal policy; zero-regret reference.
    Optimal,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::CbPs => "cb_ps",
            AgentKind::MdpPs => "mdp_ps",
            AgentKind::BhtRl => "bht_rl",
            AgentKind::BhtRlFactored => "bht_rl_factored",
            AgentKind::Optimal => "optimal",
        }
    }
}

/// Dirichlet concentration: a scalar replicated across next-state values, or
/// an explicit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Default for AlphaSpec {
    fn default() -> Self {
        AlphaSpec::Scalar(1.0)
    }
}

impl AlphaSpec {
    fn expand(&self, len: usize, field: &str) -> Result<Vec<f64>> {
        let v = match self {
            AlphaSpec::Scalar(a) => vec![*a; len],
            AlphaSpec::Vector(v) => {
                if v.len() != len {
                    return Err(Error::config(
                        field,
                        format!("expected {len} entries, got {}", v.len()),
                    ));
                }
                v.clone()
            }
        };
        if let Some(bad) = v.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::config(field, format!("entries must be positive, got {bad}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardPrior {
    pub mean: f64,
    pub var: f64,
}

impl Default for RewardPrior {
    fn default() -> Self {
        RewardPrior { mean: 1.0, var: 1.0 }
    }
}

fn default_prior_h0() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

fn default_assumed_noise_var() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    /// Label in the output files; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub alpha: AlphaSpec,
    #[serde(default = "default_prior_h0")]
    pub prior_h0: f64,
    #[serde(default)]
    pub reward_prior: RewardPrior,
    /// Use the environment's reward noise variance in the reward posterior.
    #[serde(default = "default_true")]
    pub known_noise: bool,
    /// Observation variance assumed when `known_noise` is false.
    #[serde(default = "default_assumed_noise_var")]
    pub assumed_noise_var: f64,
    /// Factored agents only: learn exogenous dynamics instead of using the
    /// known ones.
    #[serde(default)]
    pub learn_exogenous: bool,
    /// Concentration of the exogenous prior when `learn_exogenous` is set.
    #[serde(default)]
    pub exogenous_alpha: AlphaSpec,
}

impl AgentConfig {
    pub fn new(kind: AgentKind) -> Self {
        AgentConfig {
            kind,
            name: None,
            alpha: AlphaSpec::default(),
            prior_h0: default_prior_h0(),
            reward_prior: RewardPrior::default(),
            known_noise: true,
            assumed_noise_var: default_assumed_noise_var(),
            learn_exogenous: false,
            exogenous_alpha: AlphaSpec::default(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    RecordsCsv,
    SummaryCsv,
    ModelJson,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::RecordsCsv, OutputFormat::SummaryCsv]
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

/// One concrete environment: the model plus its factored layout, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvInstance {
    pub model: MdpModel,
    pub layout: Option<FactoredLayout>,
}

impl EnvConfig {
    pub fn lambda(&self) -> Option<f64> {
        match self {
            EnvConfig::Riverswim { lambda, .. }
            | EnvConfig::MobileHealth { lambda, .. }
            | EnvConfig::RandomMdp { lambda, .. } => *lambda,
            EnvConfig::RiverswimCb { .. } => None,
        }
    }

    /// Sets `lambda`; fails for families that have no interpolation.
    pub fn set_lambda(&mut self, value: f64) -> Result<()> {
        match self {
            EnvConfig::Riverswim { lambda, .. }
            | EnvConfig::MobileHealth { lambda, .. }
            | EnvConfig::RandomMdp { lambda, .. } => {
                *lambda = Some(value);
                Ok(())
            }
            EnvConfig::RiverswimCb { .. } => Err(Error::config(
                "env.lambda",
                "riverswim_cb has no interpolation; use family riverswim with lambda",
            )),
        }
    }

    /// True when the environment must be redrawn for every repetition.
    pub fn is_random(&self) -> bool {
        matches!(self, EnvConfig::RandomMdp { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let lambda_field = "env.lambda";
        if let Some(l) = self.lambda() {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::config(lambda_field, format!("must lie in [0, 1], got {l}")));
            }
        }
        let wrap = |e: Error, prefix: &str| match e {
            Error::Config { field, message } => Error::config(format!("{prefix}.{field}"), message),
            other => other,
        };
        match self {
            EnvConfig::Riverswim { params, .. } | EnvConfig::RiverswimCb { params } => {
                params.validate().map_err(|e| wrap(e, "env.params"))?
            }
            EnvConfig::RandomMdp { params, .. } => params.validate().map_err(|e| wrap(e, "env.params"))?,
            EnvConfig::MobileHealth { .. } => {}
        }
        match self {
            EnvConfig::MobileHealth {
                bandit: true,
                lambda: Some(_),
            }
            | EnvConfig::RandomMdp {
                bandit: true,
                lambda: Some(_),
                ..
            } => Err(Error::config(
                lambda_field,
                "lambda interpolates from the bandit variant; set bandit = false",
            )),
            _ => Ok(()),
        }
    }

    /// Builds the environment. Only the random family reads `rng`.
    pub fn build(&self, horizon: usize, rng: &mut Rng) -> Result<EnvInstance> {
        let instance = match self {
            EnvConfig::Riverswim { lambda, params } => {
                let mdp = build_riverswim(params, horizon)?;
                let model = match lambda {
                    Some(l) => interpolate(&build_riverswim_cb(params, horizon)?, &mdp, *l)?,
                    None => mdp,
                };
                EnvInstance { model, layout: None }
            }
            EnvConfig::RiverswimCb { params } => EnvInstance {
                model: build_riverswim_cb(params, horizon)?,
                layout: None,
            },
            EnvConfig::MobileHealth { bandit, lambda } => {
                let (model, layout) = match lambda {
                    Some(l) => build_mobile_health_interpolated(*l, horizon)?,
                    None => build_mobile_health(*bandit, horizon)?,
                };
                EnvInstance {
                    model,
                    layout: Some(layout),
                }
            }
            EnvConfig::RandomMdp {
                bandit,
                lambda,
                params,
            } => {
                let mdp = build_random_mdp(params, horizon, rng)?;
                let model = match (bandit, lambda) {
                    (_, Some(l)) => interpolate(&make_bandit_by_action_copy(&mdp), &mdp, *l)?,
                    (true, None) => make_bandit_by_action_copy(&mdp),
                    (false, None) => mdp,
                };
                EnvInstance { model, layout: None }
            }
        };
        Ok(instance)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            Error::config(
                "<document>",
                format!("{e}"),
            )
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("<document>", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if self.agents.is_empty() {
            return Err(Error::config("agents", "at least one agent is required"));
        }
        self.env.validate()?;
        let factored_env = matches!(self.env, EnvConfig::MobileHealth { .. });
        let mut labels = std::collections::HashSet::new();
        for (i, agent) in self.agents.iter().enumerate() {
            let field = |name: &str| format!("agents[{i}].{name}");
            if !labels.insert(agent.label()) {
                return Err(Error::config(
                    field("name"),
                    format!("duplicate agent label `{}`", agent.label()),
                ));
            }
            if agent.label().contains([',', '"', '\n', '\r']) {
                return Err(Error::config(field("name"), "labels may not contain commas, quotes or newlines"));
            }
            if !(0.0..=1.0).contains(&agent.prior_h0) {
                return Err(Error::config(
                    field("prior_h0"),
                    format!("must lie in [0, 1], got {}", agent.prior_h0),
                ));
            }
            if !(agent.reward_prior.var > 0.0) {
                return Err(Error::config(field("reward_prior.var"), "must be positive"));
            }
            if !agent.known_noise && !(agent.assumed_noise_var > 0.0) {
                return Err(Error::config(field("assumed_noise_var"), "must be positive"));
            }
            if agent.kind == AgentKind::BhtRlFactored && !factored_env {
                return Err(Error::config(
                    field("kind"),
                    "bht_rl_factored needs a factored environment (mobile_health)",
                ));
            }
            if agent.learn_exogenous && agent.kind != AgentKind::BhtRlFactored {
                return Err(Error::config(
                    field("learn_exogenous"),
                    "only meaningful for bht_rl_factored",
                ));
            }
            if let AlphaSpec::Scalar(a) = agent.alpha {
                if !(a > 0.0) {
                    return Err(Error::config(field("alpha"), format!("must be positive, got {a}")));
                }
            }
        }
        Ok(())
    }
}

/// Instantiates the agent described by `config` for one environment.
pub fn build_agent(
    config: &AgentConfig,
    index: usize,
    env: &EnvInstance,
    horizon: usize,
    optimal: &Policy,
) -> Result<Box<dyn Agent>> {
    let model = &env.model;
    let (s_count, a_count) = (model.num_states(), model.num_actions());
    let field = |name: &str| format!("agents[{index}].{name}");
    let obs_var = if config.known_noise {
        model.reward_noise_var()
    } else {
        config.assumed_noise_var
    };
    if config.kind != AgentKind::Optimal && !(obs_var > 0.0) {
        return Err(Error::config(
            field("known_noise"),
            "environment is noise-free; set known_noise = false and assumed_noise_var",
        ));
    }
    let rewards = || {
        NormalRewardPosterior::new(
            s_count,
            a_count,
            config.reward_prior.mean,
            config.reward_prior.var,
            obs_var,
        )
    };
    let flat_prior = || -> Result<TransitionPrior> {
        Ok(TransitionPrior::Flat {
            alpha: config.alpha.expand(s_count, &field("alpha"))?,
        })
    };
    let agent: Box<dyn Agent> = match config.kind {
        AgentKind::CbPs => Box::new(CbPsAgent::new(rewards()?, horizon)),
        AgentKind::MdpPs => Box::new(MdpPsAgent::new(rewards()?, flat_prior()?, horizon)?),
        AgentKind::BhtRl => Box::new(BhtAgent::new(rewards()?, flat_prior()?, config.prior_h0, horizon)?),
        AgentKind::BhtRlFactored => {
            let layout = env.layout.clone().ok_or_else(|| {
                Error::config(field("kind"), "environment has no factored layout")
            })?;
            let exogenous = if config.learn_exogenous {
                ExogenousDynamics::Learned {
                    alpha: config
                        .exogenous_alpha
                        .expand(layout.exo_size(), &field("exogenous_alpha"))?,
                }
            } else {
                ExogenousDynamics::Known(exogenous_marginal(model, &layout)?)
            };
            let prior = TransitionPrior::Factored {
                alpha: config.alpha.expand(layout.endo_size(), &field("alpha"))?,
                layout,
                exogenous,
            };
            Box::new(BhtAgent::new(rewards()?, prior, config.prior_h0, horizon)?)
        }
        AgentKind::Optimal => Box::new(FixedPolicyAgent::new(optimal.clone())),
    };
    Ok(agent)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "env": {"family": "riverswim", "lambda": 0.6},
        "horizon": 5, "episodes": 3, "repetitions": 2, "master_seed": 9,
        "agents": [{"kind": "cb_ps"}, {"kind": "bht_rl", "alpha": 0.5, "prior_h0": 0.3}]
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.env.lambda(), Some(0.6));
        assert_eq!(c.agents[0].prior_h0, 0.5);
        assert_eq!(c.agents[0].reward_prior, RewardPrior { mean: 1.0, var: 1.0 });
        assert_eq!(c.agents[1].alpha, AlphaSpec::Scalar(0.5));
        assert_eq!(c.output.formats, default_formats());
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let top = MINIMAL.replace("\"horizon\"", "\"horizn\": 1, \"horizon\"");
        assert!(matches!(ExperimentConfig::from_json(&top), Err(Error::Config { .. })));
        let env = MINIMAL.replace("\"lambda\": 0.6", "\"lambda\": 0.6, \"lamda\": 1");
        assert!(ExperimentConfig::from_json(&env).is_err());
        let agent = MINIMAL.replace("\"prior_h0\": 0.3", "\"prior_h0\": 0.3, \"priorh0\": 1");
        assert!(ExperimentConfig::from_json(&agent).is_err());
        let params = MINIMAL.replace("\"lambda\": 0.6", "\"params\": {\"num_state\": 4}");
        assert!(ExperimentConfig::from_json(&params).is_err());
    }

    #[test]
    fn field_level_validation_messages() {
        let bad = MINIMAL.replace("0.6", "1.5");
        match ExperimentConfig::from_json(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "env.lambda"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = MINIMAL.replace("\"prior_h0\": 0.3", "\"prior_h0\": -0.3");
        match ExperimentConfig::from_json(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "agents[1].prior_h0"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = MINIMAL.replace("\"episodes\": 3", "\"episodes\": 0");
        match ExperimentConfig::from_json(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "episodes"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = MINIMAL.replace("{\"kind\": \"cb_ps\"}", "{\"kind\": \"bht_rl_factored\"}");
        match ExperimentConfig::from_json(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "agents[0].kind"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = MINIMAL.replace("{\"kind\": \"cb_ps\"}", "{\"kind\": \"bht_rl\"}");
        assert!(ExperimentConfig::from_json(&bad).is_err(), "duplicate labels");
    }

    #[test]
    fn alpha_vector_length_checked_at_build() {
        let cfg = AgentConfig {
            alpha: AlphaSpec::Vector(vec![1.0; 3]),
            ..AgentConfig::new(AgentKind::MdpPs)
        };
        let env = EnvConfig::RiverswimCb {
            params: RiverSwimConfig::default(),
        }
        .build(4, &mut Rng::from_seed(0))
        .unwrap();
        let pi = Policy::constant(6, 4, 0);
        match build_agent(&cfg, 0, &env, 4, &pi) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "agents[0].alpha"),
            Err(other) => panic!("unexpected {other:?}"),
            Ok(_) => panic!("accepted a short alpha vector"),
        }
    }

    #[test]
    fn mobile_health_interpolation_matches_flat_interpolation() {
        let mut rng = Rng::from_seed(0);
        let cb = EnvConfig::MobileHealth { bandit: true, lambda: None }.build(5, &mut rng).unwrap();
        let mdp = EnvConfig::MobileHealth { bandit: false, lambda: None }.build(5, &mut rng).unwrap();
        for l in [0.0, 0.3, 0.6, 1.0] {
            let factor = EnvConfig::MobileHealth { bandit: false, lambda: Some(l) }
                .build(5, &mut rng)
                .unwrap();
            let flat = interpolate(&cb.model, &mdp.model, l).unwrap();
            for (a, b) in factor.model.transitions().iter().zip(flat.transitions()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
