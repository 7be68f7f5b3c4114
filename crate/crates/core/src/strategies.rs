//! Bidding strategies: the robust reserve-price policy plus the adversarial
//! and baseline bidders used to probe it.
//!
//! Strategies see only their own context: the round, own remaining budget,
//! own sampled type, whether a unit is free, and the reserve.

use std::sync::Arc;

use rand::Rng;

use crate::ideal::{ideal_policy, IdealError, RequestPolicy};
use crate::model::{Bid, DemandType, MarketConfig, StrategySpec};

/// Amount by which the sniper outbids `max{1, r}`. Any positive margin works.
pub const SNIPER_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyContext {
    pub agent: usize,
    pub round: usize,
    pub own_budget: f64,
    pub sampled_type: DemandType,
    /// Index of `sampled_type` in the agent's type space.
    pub type_index: usize,
    pub item_available: bool,
    pub reserve: f64,
}

/// Robust bidding: if the item is free, the budget covers `r·K` and a fresh
/// `Bernoulli(Pr[Req | θ])` draw succeeds, bid the reserve for `K` rounds.
pub fn robust_bid<R: Rng + ?Sized>(
    ctx: &StrategyContext,
    policy: &RequestPolicy,
    rng: &mut R,
) -> Option<Bid> {
    if !ctx.item_available {
        return None;
    }
    let duration = ctx.sampled_type.duration;
    let cost = ctx.reserve * duration as f64;
    if ctx.own_budget < cost {
        return None;
    }
    let p = policy.prob(ctx.type_index);
    // the draw is always consumed so the stream position does not depend on the budget
    let request = rng.random::<f64>() < p;
    request.then_some(Bid {
        agent: ctx.agent,
        per_round_bid: ctx.reserve,
        duration,
    })
}

/// Reserve `k_max` rounds at `max{1, r}` whenever possible; near the end of
/// the budget, reserve the largest affordable duration instead.
pub fn blocker_bid(ctx: &StrategyContext, k_max: usize) -> Option<Bid> {
    if !ctx.item_available {
        return None;
    }
    let price = ctx.reserve.max(1.0);
    let mut duration = k_max.min((ctx.own_budget / price).floor() as usize);
    while duration > 0 && price * duration as f64 > ctx.own_budget {
        duration -= 1;
    }
    (duration >= 1).then_some(Bid {
        agent: ctx.agent,
        per_round_bid: price,
        duration,
    })
}

/// Default sniper price `max{1, r} + margin`.
pub fn sniper_price(reserve: f64) -> f64 {
    reserve.max(1.0) + SNIPER_MARGIN
}

/// Single-round bid at `price` whenever the sampled value is positive.
pub fn sniper_bid(ctx: &StrategyContext, price: f64) -> Option<Bid> {
    (ctx.item_available && ctx.sampled_type.value > 0.0 && ctx.own_budget >= price).then_some(Bid {
        agent: ctx.agent,
        per_round_bid: price,
        duration: 1,
    })
}

pub fn silent_bid(_ctx: &StrategyContext) -> Option<Bid> {
    None
}

/// Bid `price` per round for the sampled duration whenever affordable.
pub fn constant_bid(ctx: &StrategyContext, price: f64) -> Option<Bid> {
    let duration = ctx.sampled_type.duration;
    (ctx.item_available && ctx.own_budget >= price * duration as f64).then_some(Bid {
        agent: ctx.agent,
        per_round_bid: price,
        duration,
    })
}

/// A strategy ready to play: parameters resolved, robust LP solved.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Robust(Arc<RequestPolicy>),
    Blocker { k_max: usize },
    Sniper { price: f64 },
    Silent,
    Constant { price: f64 },
}

impl Strategy {
    pub fn bid<R: Rng + ?Sized>(&self, ctx: &StrategyContext, rng: &mut R) -> Option<Bid> {
        match self {
            Strategy::Robust(policy) => robust_bid(ctx, policy, rng),
            Strategy::Blocker { k_max } => blocker_bid(ctx, *k_max),
            Strategy::Sniper { price } => sniper_bid(ctx, *price),
            Strategy::Silent => silent_bid(ctx),
            Strategy::Constant { price } => constant_bid(ctx, *price),
        }
    }

    pub fn policy(&self) -> Option<&RequestPolicy> {
        match self {
            Strategy::Robust(policy) => Some(policy),
            _ => None,
        }
    }
}

/// Resolves every agent's strategy. Robust agents solve their ideal LP with
/// cap `min(α_i L, 1)` once, here.
pub fn build_strategies(config: &MarketConfig) -> Result<Vec<Strategy>, IdealError> {
    config
        .agents
        .iter()
        .enumerate()
        .map(|(i, agent)| {
            Ok(match agent.strategy {
                StrategySpec::Robust => {
                    let policy = ideal_policy(&agent.type_space, config.ideal_cap(i))?;
                    Strategy::Robust(Arc::new(policy))
                }
                StrategySpec::Blocker { k_max } => Strategy::Blocker { k_max },
                StrategySpec::Sniper { price } => Strategy::Sniper {
                    price: price.unwrap_or_else(|| sniper_price(config.reserve)),
                },
                StrategySpec::Silent => Strategy::Silent,
                StrategySpec::Constant { price } => Strategy::Constant { price },
            })
        })
        .collect()
}
