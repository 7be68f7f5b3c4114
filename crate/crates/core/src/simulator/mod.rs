//! Monte-Carlo harness: independent seeded trials, per-agent aggregates and
//! the analytic references each experiment is judged against.

mod bounds;
pub mod presets;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{
    run_greedy_omniscient_with, run_mechanism_with, run_round_robin_with, Advance, EngineError,
    TotalsRecorder, TrialTotals,
};
use crate::ideal::{ideal_policy, IdealError};
use crate::model::{ConfigError, MarketConfig, StrategySpec};
use crate::rng::Streams;
use crate::strategies::build_strategies;

pub use bounds::{
    greedy_allocated_fraction, greedy_fraction_for, guarantee_factor, guarantee_lower_bound,
    hardness_instance, impossibility_upper_bound, HardnessInstance, DEFAULT_SLACK_CONST,
};
pub use presets::{Preset, PresetParams};

/// Statistical margin, in standard errors, used by one-sided checks.
pub const SE_MARGIN: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ideal(#[from] IdealError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("reserve {0} is below 1; the guarantee needs r ≥ 1")]
    ReserveBelowOne(f64),
    #[error("k_max = {0}; the bound needs k_max ≥ 2")]
    KmaxTooSmall(usize),
    #[error("agent {0} paid nothing across all trials")]
    ZeroPaymentAggregate(usize),
    #[error("at least one trial is required")]
    NoTrials,
    #[error("could not build worker pool: {0}")]
    WorkerPool(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid preset parameters: {0}")]
    InvalidPreset(String),
}

/// Which allocator drives a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocator {
    Mechanism,
    RoundRobin,
    GreedyOmniscient,
}

/// Runs trial `trial` of `config` and keeps only its aggregates.
pub fn run_trial(
    config: &MarketConfig,
    allocator: Allocator,
    strategies: &[crate::strategies::Strategy],
    base_seed: u64,
    trial: u64,
) -> Result<TrialTotals, SimError> {
    let streams = Streams::new(base_seed, trial);
    let mut rec = TotalsRecorder::new(config.n_agents(), config.horizon);
    match allocator {
        Allocator::Mechanism => run_mechanism_with(
            config,
            strategies,
            &streams,
            Advance::default_for(config),
            &mut rec,
        )?,
        Allocator::RoundRobin => run_round_robin_with(config, &streams, &mut rec)?,
        Allocator::GreedyOmniscient => run_greedy_omniscient_with(config, &streams, &mut rec)?,
    }
    Ok(rec.finish())
}

/// Runs `trials` independent trials seeded `(base_seed, 0..trials)`.
///
/// `jobs` bounds the worker count (`None` uses rayon's global pool). Results
/// come back in trial order whatever the schedule.
pub fn monte_carlo(
    config: &MarketConfig,
    allocator: Allocator,
    trials: usize,
    base_seed: u64,
    jobs: Option<usize>,
) -> Result<Vec<TrialTotals>, SimError> {
    if trials == 0 {
        return Err(SimError::NoTrials);
    }
    let strategies = match allocator {
        Allocator::Mechanism => build_strategies(config)?,
        _ => Vec::new(),
    };
    let work = || {
        (0..trials as u64)
            .into_par_iter()
            .map(|trial| run_trial(config, allocator, &strategies, base_seed, trial))
            .collect::<Result<Vec<_>, _>>()
    };
    match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| SimError::WorkerPool(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Mean and standard error over independent trials.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

/// Running sums for [`MeanSe`]; merging is associative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(self, other: Moments) -> Moments {
        Moments {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn finish(&self) -> MeanSe {
        if self.n == 0 {
            return MeanSe::default();
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        let se = if self.n > 1 {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, se }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        iter.into_iter().for_each(|x| m.push(x));
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSummary {
    pub agent: usize,
    pub strategy: &'static str,
    pub fair_share: f64,
    pub total_utility: MeanSe,
    pub total_payment: MeanSe,
    pub utilization: MeanSe,
    pub blocked_rounds: MeanSe,
}

/// One pass/fail comparison between an empirical value and a bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            pass: value >= bound,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            pass: value <= bound,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: target,
            pass: (value - target).abs() <= tol,
        }
    }
}

/// Analytic values for the focus agent and the market.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct References {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Leading factor `min{1/r, 1 − c/r}` of the guarantee bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guarantee_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guarantee_lb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub impossibility_ub: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub welfare_ub: Option<f64>,
    /// Analytic allocated-round fraction under greedy allocation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction: Option<f64>,
    /// `v* / (β r)`, the utility-per-credit of a robust bidder.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bpb_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub allocator: Allocator,
    pub trials: usize,
    pub base_seed: u64,
    pub horizon: usize,
    pub units: usize,
    pub reserve: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focus_agent: Option<usize>,
    pub agents: Vec<AgentSummary>,
    pub empirical_fraction: MeanSe,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_bpb_ratio: Option<f64>,
    pub references: References,
    pub checks: Vec<Check>,
}

impl ExperimentSummary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn focus(&self) -> Option<&AgentSummary> {
        self.focus_agent.map(|i| &self.agents[i])
    }
}

/// Per-agent means and standard errors over trials.
pub fn summarize_agents(config: &MarketConfig, trials: &[TrialTotals]) -> Vec<AgentSummary> {
    (0..config.n_agents())
        .map(|i| {
            let col = |f: &dyn Fn(&TrialTotals) -> f64| -> MeanSe {
                trials.iter().map(f).collect::<Moments>().finish()
            };
            AgentSummary {
                agent: i,
                strategy: config.agents[i].strategy.name(),
                fair_share: config.agents[i].fair_share,
                total_utility: col(&|t| t.agents[i].total_utility),
                total_payment: col(&|t| t.agents[i].total_payment),
                utilization: col(&|t| t.utilization(i)),
                blocked_rounds: col(&|t| t.agents[i].blocked_rounds as f64),
            }
        })
        .collect()
}

/// Aggregate utility per credit, `mean Σ U / mean Σ P`, for `agent`.
pub fn bpb_ratio(trials: &[TrialTotals], agent: usize) -> Result<f64, SimError> {
    let utility: f64 = trials.iter().map(|t| t.agents[agent].total_utility).sum();
    let payment: f64 = trials.iter().map(|t| t.agents[agent].total_payment).sum();
    if payment <= 0.0 {
        return Err(SimError::ZeroPaymentAggregate(agent));
    }
    Ok(utility / payment)
}

/// Largest duration any agent can demand or reserve.
pub fn effective_k_max(config: &MarketConfig) -> usize {
    config
        .agents
        .iter()
        .map(|a| match a.strategy {
            StrategySpec::Blocker { k_max } => k_max.max(a.type_space.k_max()),
            _ => a.type_space.k_max(),
        })
        .max()
        .unwrap_or(1)
}

/// Ideal utility and utilization of `agent` under cap `min(α L, 1)`.
pub fn agent_ideal(config: &MarketConfig, agent: usize) -> Result<(f64, f64), SimError> {
    let policy = ideal_policy(&config.agents[agent].type_space, config.ideal_cap(agent))?;
    Ok((policy.stats.v_star, policy.stats.beta))
}

/// True when all agents share the same type space and fair share.
pub fn is_symmetric(config: &MarketConfig) -> bool {
    let first = &config.agents[0];
    config
        .agents
        .iter()
        .all(|a| a.type_space == first.type_space && a.fair_share == first.fair_share)
}
