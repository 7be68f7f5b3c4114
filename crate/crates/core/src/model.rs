//! Shared domain types for the pseudo-market: demand types, type spaces,
//! agents, market configuration, bids and the mutable market state.
//!
//! Everything here except [`MarketState`] is an immutable value object once
//! validated. Rounds are 1-indexed throughout (`1..=horizon`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `Σ p_θ = 1` for a type space.
pub const PROBABILITY_MASS_TOL: f64 = 1e-12;
/// Tolerance on `Σ α_i = 1` across a market.
pub const FAIR_SHARE_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("fair shares sum to {sum}, expected 1")]
    FairShareSumError { sum: f64 },
    #[error("agent {agent} has fair share {share}, expected a value in (0, 1]")]
    FairShareOutOfRange { agent: usize, share: f64 },
    #[error("type probabilities sum to {sum}, expected 1")]
    ProbabilityMassError { sum: f64 },
    #[error("horizon must be positive")]
    NonPositiveHorizon,
    #[error("unit count must be positive")]
    NonPositiveUnits,
    #[error("reserve price must be finite and nonnegative, got {0}")]
    InvalidReserve(f64),
    #[error("market has no agents")]
    NoAgents,
    #[error("type space is empty")]
    EmptyTypeSpace,
    #[error("invalid demand type: {0}")]
    InvalidDemandType(String),
    #[error("invalid strategy parameters for agent {agent}: {reason}")]
    InvalidStrategy { agent: usize, reason: String },
}

/// One demand type `(V, K)` with its probability mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandType {
    /// Per-round value `V`.
    pub value: f64,
    /// Number of consecutive rounds `K` needed, starting now.
    pub duration: usize,
    pub probability: f64,
}

impl DemandType {
    pub fn new(value: f64, duration: usize, probability: f64) -> Result<Self, ConfigError> {
        let ty = Self {
            value,
            duration,
            probability,
        };
        ty.check()?;
        Ok(ty)
    }

    /// Total value `V·K` realized if the full demand is served.
    pub fn total_value(&self) -> f64 {
        self.value * self.duration as f64
    }

    fn check(&self) -> Result<(), ConfigError> {
        if !(self.value.is_finite() && self.value >= 0.0) {
            return Err(ConfigError::InvalidDemandType(format!(
                "value {} is not a finite nonnegative number",
                self.value
            )));
        }
        if self.duration == 0 {
            return Err(ConfigError::InvalidDemandType(
                "duration must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(ConfigError::InvalidDemandType(format!(
                "probability {} outside [0, 1]",
                self.probability
            )));
        }
        Ok(())
    }
}

/// A finite distribution over demand types for one agent.
///
/// Only finite supports are representable; the ideal-utility LP needs one
/// variable per type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeSpace {
    types: Vec<DemandType>,
    k_max: usize,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl TypeSpace {
    pub fn new(types: Vec<DemandType>) -> Result<Self, ConfigError> {
        if types.is_empty() {
            return Err(ConfigError::EmptyTypeSpace);
        }
        for ty in &types {
            ty.check()?;
        }
        let sum: f64 = types.iter().map(|t| t.probability).sum();
        if (sum - 1.0).abs() > PROBABILITY_MASS_TOL {
            return Err(ConfigError::ProbabilityMassError { sum });
        }
        let k_max = types.iter().map(|t| t.duration).max().unwrap_or(1);
        let mut acc = 0.0;
        let cumulative = types
            .iter()
            .map(|t| {
                acc += t.probability;
                acc
            })
            .collect();
        Ok(Self {
            types,
            k_max,
            cumulative,
        })
    }

    /// Builds a type space from `(value, duration, probability)` triples.
    pub fn from_triples(triples: &[(f64, usize, f64)]) -> Result<Self, ConfigError> {
        Self::new(
            triples
                .iter()
                .map(|&(value, duration, probability)| DemandType {
                    value,
                    duration,
                    probability,
                })
                .collect(),
        )
    }

    /// Point mass on a single `(value, duration)` pair.
    pub fn point_mass(value: f64, duration: usize) -> Result<Self, ConfigError> {
        Self::from_triples(&[(value, duration, 1.0)])
    }

    pub fn types(&self) -> &[DemandType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn get(&self, index: usize) -> &DemandType {
        &self.types[index]
    }

    /// True when every type carries zero value.
    pub fn is_all_zero(&self) -> bool {
        self.types.iter().all(|t| t.value == 0.0)
    }

    /// Index of the type selected by a uniform draw `u ∈ [0, 1)`.
    pub(crate) fn index_for(&self, u: f64) -> usize {
        let last = self.types.len() - 1;
        let total = self.cumulative[last];
        let target = u * total;
        // skip zero-mass types so they can never be selected
        self.cumulative
            .iter()
            .enumerate()
            .find(|&(i, &c)| target < c && self.types[i].probability > 0.0)
            .map(|(i, _)| i)
            .unwrap_or_else(|| {
                (0..=last)
                    .rev()
                    .find(|&i| self.types[i].probability > 0.0)
                    .unwrap_or(last)
            })
    }
}

impl<'de> Deserialize<'de> for TypeSpace {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            types: Vec<DemandType>,
        }
        let raw = Raw::deserialize(deserializer)?;
        TypeSpace::new(raw.types).map_err(serde::de::Error::custom)
    }
}

/// How an agent bids. Identifiers match the experiment-file vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", content = "params", rename_all = "lowercase")]
pub enum StrategySpec {
    /// Robust bidding policy: bid the reserve for the sampled duration
    /// according to the agent's ideal request policy.
    Robust,
    /// Reserve `k_max` rounds at `max{1, r}` whenever the item is free.
    Blocker { k_max: usize },
    /// Single-round bid at `price` whenever the sampled value is positive.
    Sniper {
        #[serde(default)]
        price: Option<f64>,
    },
    /// Never bids.
    Silent,
    /// Bid `price` per round for the sampled duration whenever affordable.
    Constant { price: f64 },
}

impl StrategySpec {
    pub fn name(&self) -> &'static str {
        match self {
            StrategySpec::Robust => "robust",
            StrategySpec::Blocker { .. } => "blocker",
            StrategySpec::Sniper { .. } => "sniper",
            StrategySpec::Silent => "silent",
            StrategySpec::Constant { .. } => "constant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub id: usize,
    /// Fair share `α_i`.
    pub fair_share: f64,
    pub type_space: TypeSpace,
    pub strategy: StrategySpec,
}

/// How equal per-round bids are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    LowestIndex,
    SeededRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    /// Number of rounds `T`.
    pub horizon: usize,
    /// Number of identical units `L`.
    pub units: usize,
    /// Reserve price `r` for multi-round reservations.
    pub reserve: f64,
    pub agents: Vec<AgentSpec>,
    pub seed: u64,
    pub tie_break: TieBreak,
}

impl MarketConfig {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Initial budget `α_i · L · T`.
    pub fn initial_budget(&self, agent: usize) -> f64 {
        self.agents[agent].fair_share * self.units as f64 * self.horizon as f64
    }

    pub fn initial_budgets(&self) -> Vec<f64> {
        (0..self.agents.len())
            .map(|i| self.initial_budget(i))
            .collect()
    }

    /// Largest demand duration across all agents.
    pub fn k_max(&self) -> usize {
        self.agents
            .iter()
            .map(|a| a.type_space.k_max())
            .max()
            .unwrap_or(1)
    }

    /// Cap on the ideal utilization of `agent`: `min(α_i · L, 1)`.
    pub fn ideal_cap(&self, agent: usize) -> f64 {
        (self.agents[agent].fair_share * self.units as f64).min(1.0)
    }

    /// Checks every configuration invariant and returns the config unchanged.
    pub fn validate(self) -> Result<Self, ConfigError> {
        validate_config(self)
    }
}

/// Returns `config` iff every market invariant holds.
pub fn validate_config(config: MarketConfig) -> Result<MarketConfig, ConfigError> {
    if config.horizon == 0 {
        return Err(ConfigError::NonPositiveHorizon);
    }
    if config.units == 0 {
        return Err(ConfigError::NonPositiveUnits);
    }
    if !(config.reserve.is_finite() && config.reserve >= 0.0) {
        return Err(ConfigError::InvalidReserve(config.reserve));
    }
    if config.agents.is_empty() {
        return Err(ConfigError::NoAgents);
    }
    for (i, agent) in config.agents.iter().enumerate() {
        if !(agent.fair_share > 0.0 && agent.fair_share <= 1.0) {
            return Err(ConfigError::FairShareOutOfRange {
                agent: i,
                share: agent.fair_share,
            });
        }
        let sum: f64 = agent.type_space.types().iter().map(|t| t.probability).sum();
        if (sum - 1.0).abs() > PROBABILITY_MASS_TOL {
            return Err(ConfigError::ProbabilityMassError { sum });
        }
        check_strategy(i, &agent.strategy)?;
    }
    let sum: f64 = config.agents.iter().map(|a| a.fair_share).sum();
    if (sum - 1.0).abs() > FAIR_SHARE_SUM_TOL {
        return Err(ConfigError::FairShareSumError { sum });
    }
    Ok(config)
}

fn check_strategy(agent: usize, spec: &StrategySpec) -> Result<(), ConfigError> {
    let bad = |reason: &str| {
        Err(ConfigError::InvalidStrategy {
            agent,
            reason: reason.to_string(),
        })
    };
    match *spec {
        StrategySpec::Blocker { k_max: 0 } => bad("blocker k_max must be at least 1"),
        StrategySpec::Sniper { price: Some(p) } if !(p.is_finite() && p > 0.0) => {
            bad("sniper price must be positive")
        }
        StrategySpec::Constant { price } if !(price.is_finite() && price >= 0.0) => {
            bad("constant price must be nonnegative")
        }
        _ => Ok(()),
    }
}

/// A sealed bid for one round. An absent bid is represented by `None` at the
/// call sites rather than a flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bid {
    pub agent: usize,
    /// Per-round bid `b_i[t]`.
    pub per_round_bid: f64,
    /// Requested duration `d_i[t]`.
    pub duration: usize,
}

impl Bid {
    pub fn total(&self) -> f64 {
        self.per_round_bid * self.duration as f64
    }
}

/// An active reservation of one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reservation {
    pub holder: usize,
    /// Round the reservation was won.
    pub start: usize,
    /// First round the unit is free again.
    pub free_at: usize,
    pub per_round_bid: f64,
}

impl Reservation {
    pub fn covers(&self, round: usize) -> bool {
        self.start <= round && round < self.free_at
    }
}

/// Mutable state of one market run.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    /// Current round, in `1..=T+1`.
    pub round: usize,
    pub initial_budgets: Vec<f64>,
    /// Credits spent so far; the remaining budget is `initial - spent`.
    pub spent: Vec<f64>,
    /// Most recent reservation per unit (kept after it expires).
    pub units: Vec<Option<Reservation>>,
}

impl MarketState {
    pub fn new(config: &MarketConfig) -> Self {
        Self {
            round: 1,
            initial_budgets: config.initial_budgets(),
            spent: vec![0.0; config.n_agents()],
            units: vec![None; config.units],
        }
    }

    pub fn budget(&self, agent: usize) -> f64 {
        self.initial_budgets[agent] - self.spent[agent]
    }

    pub fn budgets(&self) -> Vec<f64> {
        (0..self.spent.len()).map(|i| self.budget(i)).collect()
    }

    /// First round each unit is available again.
    pub fn item_free_at(&self) -> Vec<usize> {
        self.units
            .iter()
            .map(|u| u.map_or(1, |r| r.free_at))
            .collect()
    }

    /// Current holder of each unit at the current round.
    pub fn holders(&self) -> Vec<Option<usize>> {
        self.units
            .iter()
            .map(|u| u.filter(|r| r.free_at > self.round).map(|r| r.holder))
            .collect()
    }

    pub fn is_holding(&self, agent: usize, round: usize) -> bool {
        self.units
            .iter()
            .flatten()
            .any(|r| r.holder == agent && r.covers(round))
    }

    pub fn free_units(&self, round: usize) -> usize {
        self.units
            .iter()
            .filter(|u| u.is_none_or(|r| r.free_at <= round))
            .count()
    }

    /// Whether `spent + amount` stays within the initial budget.
    pub fn can_afford(&self, agent: usize, amount: f64) -> bool {
        self.spent[agent] + amount <= self.initial_budgets[agent]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(id: usize, share: f64) -> AgentSpec {
        AgentSpec {
            id,
            fair_share: share,
            type_space: TypeSpace::point_mass(1.0, 1).unwrap(),
            strategy: StrategySpec::Silent,
        }
    }

    fn config(shares: &[f64], horizon: usize, units: usize) -> MarketConfig {
        MarketConfig {
            horizon,
            units,
            reserve: 1.0,
            agents: shares
                .iter()
                .enumerate()
                .map(|(i, &s)| agent(i, s))
                .collect(),
            seed: 0,
            tie_break: TieBreak::LowestIndex,
        }
    }

    #[test]
    fn budgets_follow_share_units_horizon() {
        let c = validate_config(config(&[0.5, 0.5], 10, 1)).unwrap();
        assert_eq!(c.initial_budgets(), vec![5.0, 5.0]);

        let third = 1.0 / 3.0;
        let c = validate_config(config(&[third, third, third], 9, 2)).unwrap();
        for b in c.initial_budgets() {
            assert!((b - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_fair_shares() {
        assert!(matches!(
            validate_config(config(&[0.6, 0.6], 10, 1)),
            Err(ConfigError::FairShareSumError { .. })
        ));
        assert!(matches!(
            validate_config(config(&[1.0, 0.0], 10, 1)),
            Err(ConfigError::FairShareOutOfRange { agent: 1, .. })
        ));
    }

    #[test]
    fn rejects_zero_horizon() {
        assert_eq!(
            validate_config(config(&[1.0], 0, 1)),
            Err(ConfigError::NonPositiveHorizon)
        );
    }

    #[test]
    fn type_space_checks_mass_and_k_max() {
        assert!(matches!(
            TypeSpace::from_triples(&[(1.0, 1, 0.5), (0.0, 1, 0.4)]),
            Err(ConfigError::ProbabilityMassError { .. })
        ));
        let ts = TypeSpace::from_triples(&[(1.0, 3, 0.5), (0.0, 1, 0.5)]).unwrap();
        assert_eq!(ts.k_max(), 3);
        assert!(TypeSpace::from_triples(&[(1.0, 0, 1.0)]).is_err());
        assert!(TypeSpace::from_triples(&[(-1.0, 1, 1.0)]).is_err());
        assert!(TypeSpace::point_mass(0.0, 1).unwrap().is_all_zero());
    }

    #[test]
    fn zero_mass_types_are_never_selected() {
        let ts = TypeSpace::from_triples(&[(1.0, 1, 0.0), (2.0, 1, 1.0), (3.0, 1, 0.0)]).unwrap();
        for u in [0.0, 0.3, 0.999_999_999] {
            assert_eq!(ts.index_for(u), 1);
        }
    }

    #[test]
    fn strategy_spec_uses_adjacent_tagging() {
        let spec: StrategySpec =
            serde_json::from_str(r#"{"strategy": "blocker", "params": {"k_max": 20}}"#).unwrap();
        assert_eq!(spec, StrategySpec::Blocker { k_max: 20 });
        let spec: StrategySpec = serde_json::from_str(r#"{"strategy": "robust"}"#).unwrap();
        assert_eq!(spec, StrategySpec::Robust);
    }
}
