//! Bayesian hypothesis testing between contextual-bandit and MDP posterior
//! sampling for tabular episodic reinforcement learning.
//!
//! Each episode the meta-agent computes the posterior probability that actions
//! do not influence transitions (a Dirichlet-multinomial Bayes factor between
//! tied and untied transition models), flips a coin with that probability, and
//! plans either greedily from sampled rewards or with full posterior sampling
//! over the MDP.
//!
//! Modules, bottom-up: [`mathstats`] (special functions and seeded sampling),
//! [`model`] (tabular MDPs, policies, episodes, counts), [`envs`] (RiverSwim,
//! mobile health, random MDPs), [`planning`] (backward induction and regret),
//! [`agents`] and [`harness`] (configs, runner, CSV and CLI).

pub mod agents;
pub mod envs;
pub mod error;
pub mod harness;
pub mod mathstats;
pub mod model;
pub mod planning;

pub use error::{Error, Result};
