//! First-price pseudo-auction with multi-round reserves, for `L ≥ 1`
//! identical units, plus the round-robin and omniscient-greedy baselines.
//!
//! Each round with a free unit, non-holding agents sample a type and may
//! bid `(b, d)`. A bid is valid when `b·d` fits the remaining budget and
//! either `d = 1` or `b ≥ r`. The top-`m` valid per-round bids win the `m`
//! free units, pay `b·d` at once and hold their unit for `[t, t + d − 1]`.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Bid, DemandType, MarketConfig, MarketState, Reservation, TieBreak};
use crate::rng::{sample_type_index, Streams};
use crate::strategies::{Strategy, StrategyContext};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("agent {agent} submitted more than one bid in round {round}")]
    DuplicateBid { agent: usize, round: usize },
    #[error("agent {agent} bid in round {round} while holding a unit")]
    BidFromHolder { agent: usize, round: usize },
    #[error("bid from unknown agent {agent}")]
    UnknownAgent { agent: usize },
    #[error("round {round} is past the horizon {horizon}")]
    HorizonExhausted { round: usize, horizon: usize },
    #[error("strategy list has {strategies} entries for {agents} agents")]
    StrategyCount { strategies: usize, agents: usize },
    #[error("{0} allocation requires a single-unit market")]
    SingleUnitOnly(&'static str),
}

/// How the round counter moves after an auction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    /// Always `t ← t + 1`; holders are tracked by per-unit counters.
    PerRound,
    /// Single unit only: `t ← t + d` after a win, `t ← t + 1` otherwise.
    Jump,
}

impl Advance {
    pub fn default_for(config: &MarketConfig) -> Self {
        if config.units == 1 {
            Advance::Jump
        } else {
            Advance::PerRound
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Winner {
    pub agent: usize,
    pub unit: usize,
    pub per_round_bid: f64,
    pub duration: usize,
    pub total_payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundOutcome {
    pub round: usize,
    pub winners: Vec<Winner>,
    pub no_allocation: bool,
    pub available_units: usize,
}

fn is_valid(bid: &Bid, state: &MarketState, reserve: f64) -> bool {
    bid.duration >= 1
        && bid.per_round_bid.is_finite()
        && bid.per_round_bid >= 0.0
        && state.can_afford(bid.agent, bid.total())
        && (bid.duration == 1 || bid.per_round_bid >= reserve)
}

/// Runs one auction round with the default advancement for `config`.
pub fn step(
    state: &mut MarketState,
    bids: &[Bid],
    config: &MarketConfig,
    streams: &Streams,
) -> Result<RoundOutcome, EngineError> {
    step_with(state, bids, config, streams, Advance::default_for(config))
}

/// Runs one auction round. `streams` supplies the tie-breaking draws when
/// the config asks for seeded tie-breaking.
pub fn step_with(
    state: &mut MarketState,
    bids: &[Bid],
    config: &MarketConfig,
    streams: &Streams,
    advance: Advance,
) -> Result<RoundOutcome, EngineError> {
    let t = state.round;
    if t > config.horizon {
        return Err(EngineError::HorizonExhausted {
            round: t,
            horizon: config.horizon,
        });
    }
    if advance == Advance::Jump && config.units != 1 {
        return Err(EngineError::SingleUnitOnly("jump-advance"));
    }
    let n = config.n_agents();
    let mut seen = vec![false; n];
    for bid in bids {
        if bid.agent >= n {
            return Err(EngineError::UnknownAgent { agent: bid.agent });
        }
        if std::mem::replace(&mut seen[bid.agent], true) {
            return Err(EngineError::DuplicateBid {
                agent: bid.agent,
                round: t,
            });
        }
        if state.is_holding(bid.agent, t) {
            return Err(EngineError::BidFromHolder {
                agent: bid.agent,
                round: t,
            });
        }
    }

    let free: Vec<usize> = (0..config.units)
        .filter(|&u| state.units[u].is_none_or(|r| r.free_at <= t))
        .collect();

    let mut valid: Vec<(&Bid, u64)> = bids
        .iter()
        .filter(|b| is_valid(b, state, config.reserve))
        .map(|b| (b, b.agent as u64))
        .collect();
    if config.tie_break == TieBreak::SeededRandom && valid.len() > 1 {
        let mut rng = streams.tie_break(t);
        let keys: Vec<u64> = (0..n).map(|_| rng.random()).collect();
        for (bid, key) in valid.iter_mut() {
            *key = keys[bid.agent];
        }
    }
    valid.sort_by(|(a, ka), (b, kb)| b.per_round_bid.total_cmp(&a.per_round_bid).then(ka.cmp(kb)));

    let winners: Vec<Winner> = valid
        .iter()
        .zip(&free)
        .map(|(&(bid, _), &unit)| Winner {
            agent: bid.agent,
            unit,
            per_round_bid: bid.per_round_bid,
            duration: bid.duration,
            total_payment: bid.total(),
        })
        .collect();

    for w in &winners {
        state.spent[w.agent] += w.total_payment;
        state.units[w.unit] = Some(Reservation {
            holder: w.agent,
            start: t,
            free_at: t + w.duration,
            per_round_bid: w.per_round_bid,
        });
    }

    state.round = match (advance, winners.first()) {
        (Advance::Jump, Some(w)) => t + w.duration,
        _ => t + 1,
    };

    Ok(RoundOutcome {
        round: t,
        no_allocation: winners.is_empty(),
        winners,
        available_units: free.len(),
    })
}

/// What happened to one agent in one round.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentRound {
    /// Type sampled this round; `None` when the agent was not asked to bid.
    pub sampled: Option<DemandType>,
    pub utility: f64,
    pub payment: f64,
    pub won: bool,
    pub blocked: bool,
    /// Holds a unit in this round (including the round it was won).
    pub holding: bool,
}

/// Sink for per-round results. Implemented by the full [`Trace`] and by the
/// aggregate-only [`TrialTotals`].
pub trait Recorder {
    fn record(&mut self, agent: usize, round: usize, entry: &AgentRound);
    fn outcome(&mut self, _outcome: &RoundOutcome) {}
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentTrace {
    pub sampled: Vec<Option<DemandType>>,
    pub utility: Vec<f64>,
    pub payment: Vec<f64>,
    pub blocked: Vec<bool>,
    pub won: Vec<bool>,
    pub holding: Vec<bool>,
}

impl AgentTrace {
    fn with_horizon(horizon: usize) -> Self {
        Self {
            sampled: vec![None; horizon],
            utility: vec![0.0; horizon],
            payment: vec![0.0; horizon],
            blocked: vec![false; horizon],
            won: vec![false; horizon],
            holding: vec![false; horizon],
        }
    }

    pub fn total_utility(&self) -> f64 {
        self.utility.iter().sum()
    }

    pub fn total_payment(&self) -> f64 {
        self.payment.iter().sum()
    }

    pub fn blocked_rounds(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    pub fn wins(&self) -> usize {
        self.won.iter().filter(|&&w| w).count()
    }

    pub fn utilization(&self) -> f64 {
        self.holding.iter().filter(|&&h| h).count() as f64 / self.holding.len() as f64
    }

    pub fn totals(&self) -> AgentTotals {
        AgentTotals {
            total_utility: self.total_utility(),
            total_payment: self.total_payment(),
            held_rounds: self.holding.iter().filter(|&&h| h).count(),
            blocked_rounds: self.blocked_rounds(),
            wins: self.wins(),
        }
    }
}

/// Full per-round record of one trial. Round `t` is stored at index `t − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub horizon: usize,
    pub agents: Vec<AgentTrace>,
    pub outcomes: Vec<RoundOutcome>,
}

impl Trace {
    pub fn new(n_agents: usize, horizon: usize) -> Self {
        Self {
            horizon,
            agents: (0..n_agents)
                .map(|_| AgentTrace::with_horizon(horizon))
                .collect(),
            outcomes: Vec::new(),
        }
    }

    pub fn totals(&self) -> TrialTotals {
        TrialTotals {
            horizon: self.horizon,
            agents: self.agents.iter().map(AgentTrace::totals).collect(),
            allocated_rounds: (0..self.horizon)
                .filter(|&t| self.agents.iter().any(|a| a.holding[t]))
                .count(),
        }
    }
}

impl Recorder for Trace {
    fn record(&mut self, agent: usize, round: usize, entry: &AgentRound) {
        let a = &mut self.agents[agent];
        let i = round - 1;
        a.sampled[i] = entry.sampled;
        a.utility[i] = entry.utility;
        a.payment[i] = entry.payment;
        a.blocked[i] = entry.blocked;
        a.won[i] = entry.won;
        a.holding[i] = entry.holding;
    }

    fn outcome(&mut self, outcome: &RoundOutcome) {
        self.outcomes.push(outcome.clone());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AgentTotals {
    pub total_utility: f64,
    pub total_payment: f64,
    pub held_rounds: usize,
    pub blocked_rounds: usize,
    pub wins: usize,
}

/// Aggregates of one trial; what the Monte-Carlo harness keeps.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrialTotals {
    pub horizon: usize,
    pub agents: Vec<AgentTotals>,
    /// Rounds in which at least one unit was held.
    pub allocated_rounds: usize,
}

impl TrialTotals {
    pub fn new(n_agents: usize, horizon: usize) -> Self {
        Self {
            horizon,
            agents: vec![AgentTotals::default(); n_agents],
            allocated_rounds: 0,
        }
    }

    pub fn utilization(&self, agent: usize) -> f64 {
        self.agents[agent].held_rounds as f64 / self.horizon as f64
    }

    pub fn allocated_fraction(&self) -> f64 {
        self.allocated_rounds as f64 / self.horizon as f64
    }
}

/// Recorder that keeps only the aggregates.
#[derive(Debug)]
pub struct TotalsRecorder {
    totals: TrialTotals,
    last_allocated: usize,
}

impl TotalsRecorder {
    pub fn new(n_agents: usize, horizon: usize) -> Self {
        Self {
            totals: TrialTotals::new(n_agents, horizon),
            last_allocated: 0,
        }
    }

    pub fn finish(self) -> TrialTotals {
        self.totals
    }
}

impl Recorder for TotalsRecorder {
    fn record(&mut self, agent: usize, round: usize, entry: &AgentRound) {
        let a = &mut self.totals.agents[agent];
        a.total_utility += entry.utility;
        a.total_payment += entry.payment;
        a.held_rounds += entry.holding as usize;
        a.blocked_rounds += entry.blocked as usize;
        a.wins += entry.won as usize;
        if entry.holding && self.last_allocated != round {
            self.last_allocated = round;
            self.totals.allocated_rounds += 1;
        }
    }
}

/// Utility of a win: `V·K` if the reservation covers the whole demand.
fn win_utility(sampled: Option<DemandType>, duration: usize) -> f64 {
    match sampled {
        Some(ty) if duration >= ty.duration => ty.total_value(),
        _ => 0.0,
    }
}

/// Blocked-round indicator for `agent` in `round`: it holds a unit reserved
/// in an earlier round, or every unit is held by other agents paying at
/// least the reserve.
fn is_blocked(state: &MarketState, agent: usize, round: usize, reserve: f64) -> bool {
    let covering = state.units.iter().map(|u| u.filter(|r| r.covers(round)));
    let mut all_others_at_reserve = true;
    for res in covering {
        match res {
            Some(r) if r.holder == agent => return r.start < round,
            Some(r) if r.per_round_bid >= reserve => {}
            _ => all_others_at_reserve = false,
        }
    }
    all_others_at_reserve
}

/// Runs the mechanism for the whole horizon and returns the full trace.
pub fn run_mechanism(
    config: &MarketConfig,
    strategies: &[Strategy],
    streams: &Streams,
) -> Result<Trace, EngineError> {
    let mut trace = Trace::new(config.n_agents(), config.horizon);
    run_mechanism_with(
        config,
        strategies,
        streams,
        Advance::default_for(config),
        &mut trace,
    )?;
    Ok(trace)
}

/// Runs the mechanism, streaming results into `recorder`.
#[allow(clippy::needless_range_loop)]
pub fn run_mechanism_with<Rec: Recorder>(
    config: &MarketConfig,
    strategies: &[Strategy],
    streams: &Streams,
    advance: Advance,
    recorder: &mut Rec,
) -> Result<(), EngineError> {
    let n = config.n_agents();
    if strategies.len() != n {
        return Err(EngineError::StrategyCount {
            strategies: strategies.len(),
            agents: n,
        });
    }
    let horizon = config.horizon;
    let mut state = MarketState::new(config);
    let mut sampled: Vec<Option<DemandType>> = vec![None; n];
    let mut bids = Vec::with_capacity(n);

    while state.round <= horizon {
        let t = state.round;
        sampled.iter_mut().for_each(|s| *s = None);
        bids.clear();

        let outcome = if state.free_units(t) == 0 {
            state.round += 1;
            None
        } else {
            for (i, (agent, strategy)) in config.agents.iter().zip(strategies).enumerate() {
                if state.is_holding(i, t) {
                    continue;
                }
                let mut rng = streams.agent_round(i, t);
                let type_index = sample_type_index(&agent.type_space, &mut rng);
                let ty = *agent.type_space.get(type_index);
                sampled[i] = Some(ty);
                let ctx = StrategyContext {
                    agent: i,
                    round: t,
                    own_budget: state.budget(i),
                    sampled_type: ty,
                    type_index,
                    item_available: true,
                    reserve: config.reserve,
                };
                if let Some(bid) = strategy.bid(&ctx, &mut rng) {
                    bids.push(bid);
                }
            }
            Some(step_with(&mut state, &bids, config, streams, advance)?)
        };

        let end = state.round.min(horizon + 1);
        for s in t..end {
            for i in 0..n {
                let mut entry = AgentRound {
                    blocked: is_blocked(&state, i, s, config.reserve),
                    holding: state.is_holding(i, s),
                    ..AgentRound::default()
                };
                if s == t {
                    entry.sampled = sampled[i];
                    if let Some(w) = outcome
                        .as_ref()
                        .and_then(|o| o.winners.iter().find(|w| w.agent == i))
                    {
                        entry.won = true;
                        entry.payment = w.total_payment;
                        entry.utility = win_utility(sampled[i], w.duration);
                    }
                }
                recorder.record(i, s, &entry);
            }
        }
        if let Some(outcome) = &outcome {
            recorder.outcome(outcome);
        }
    }
    Ok(())
}

/// Payment-free single-unit allocator driven by `pick`: whenever the item is
/// free at round `t`, `pick` samples types and returns the chosen agent with
/// its type, which then holds the item for its sampled duration.
#[allow(clippy::needless_range_loop)]
fn run_baseline<Rec, F>(
    config: &MarketConfig,
    recorder: &mut Rec,
    mut pick: F,
) -> Result<(), EngineError>
where
    Rec: Recorder,
    F: FnMut(usize, &mut Vec<Option<DemandType>>) -> Option<(usize, DemandType)>,
{
    if config.units != 1 {
        return Err(EngineError::SingleUnitOnly("baseline"));
    }
    let n = config.n_agents();
    let horizon = config.horizon;
    let mut sampled = vec![None; n];
    let mut t = 1;
    while t <= horizon {
        sampled.iter_mut().for_each(|s| *s = None);
        let chosen = pick(t, &mut sampled);
        let next = chosen.map_or(t + 1, |(_, ty)| t + ty.duration);
        for s in t..next.min(horizon + 1) {
            for i in 0..n {
                let mut entry = AgentRound::default();
                if let Some((holder, ty)) = chosen {
                    entry.holding = holder == i;
                    if s == t && holder == i {
                        entry.won = true;
                        entry.utility = ty.total_value();
                    }
                }
                if s == t {
                    entry.sampled = sampled[i];
                }
                recorder.record(i, s, &entry);
            }
        }
        recorder.outcome(&RoundOutcome {
            round: t,
            winners: chosen
                .map(|(agent, ty)| Winner {
                    agent,
                    unit: 0,
                    per_round_bid: 0.0,
                    duration: ty.duration,
                    total_payment: 0.0,
                })
                .into_iter()
                .collect(),
            no_allocation: chosen.is_none(),
            available_units: 1,
        });
        t = next;
    }
    Ok(())
}

/// Round-robin: whenever the item frees up at round `t`, agent `(t − 1) mod n`
/// gets it for its sampled duration, regardless of value.
pub fn run_round_robin_with<Rec: Recorder>(
    config: &MarketConfig,
    streams: &Streams,
    recorder: &mut Rec,
) -> Result<(), EngineError> {
    let n = config.n_agents();
    run_baseline(config, recorder, |t, sampled| {
        let agent = (t - 1) % n;
        let ts = &config.agents[agent].type_space;
        let ty = *ts.get(sample_type_index(ts, &mut streams.agent_round(agent, t)));
        sampled[agent] = Some(ty);
        Some((agent, ty))
    })
}

pub fn run_round_robin(config: &MarketConfig, streams: &Streams) -> Result<Trace, EngineError> {
    let mut trace = Trace::new(config.n_agents(), config.horizon);
    run_round_robin_with(config, streams, &mut trace)?;
    Ok(trace)
}

/// Omniscient greedy: whenever the item is free, give it to the lowest-index
/// agent with positive sampled value. Agents after the chosen one are not
/// sampled.
pub fn run_greedy_omniscient_with<Rec: Recorder>(
    config: &MarketConfig,
    streams: &Streams,
    recorder: &mut Rec,
) -> Result<(), EngineError> {
    run_baseline(config, recorder, |t, sampled| {
        for (i, agent) in config.agents.iter().enumerate() {
            let ts = &agent.type_space;
            let ty = *ts.get(sample_type_index(ts, &mut streams.agent_round(i, t)));
            sampled[i] = Some(ty);
            if ty.value > 0.0 {
                return Some((i, ty));
            }
        }
        None
    })
}

pub fn run_greedy_omniscient(
    config: &MarketConfig,
    streams: &Streams,
) -> Result<Trace, EngineError> {
    let mut trace = Trace::new(config.n_agents(), config.horizon);
    run_greedy_omniscient_with(config, streams, &mut trace)?;
    Ok(trace)
}
