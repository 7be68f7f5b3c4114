//! Shared generators, reference implementations and invariant checkers for
//! the integration and acceptance tests.
#![allow(dead_code, clippy::needless_range_loop)]

use proptest::prelude::*;
use pseudomarket_core::engine::{
    run_mechanism_with, Advance, AgentRound, Recorder, RoundOutcome, Trace, Winner,
};
use pseudomarket_core::ideal::{build_ideal_lp, ideal_policy, solve_lp, x_to_f, FEASIBILITY_TOL};
use pseudomarket_core::model::{
    AgentSpec, DemandType, MarketConfig, StrategySpec, TieBreak, TypeSpace,
};
use pseudomarket_core::rng::{sample_type_index, Streams};
use pseudomarket_core::strategies::{build_strategies, Strategy as BidStrategy, StrategyContext};

pub fn normalize(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut p: Vec<f64> = weights.iter().map(|w| w / total).collect();
    // push rounding error into the last entry
    let head: f64 = p[..p.len() - 1].iter().sum();
    let last = p.len() - 1;
    p[last] = (1.0 - head).max(0.0);
    p
}

pub fn arb_type_space(max_types: usize, max_k: usize) -> impl Strategy<Value = TypeSpace> {
    prop::collection::vec((0.0..3.0f64, 1..=max_k, 0.05..1.0f64), 1..=max_types).prop_map(|raw| {
        let probs = normalize(&raw.iter().map(|r| r.2).collect::<Vec<_>>());
        TypeSpace::new(
            raw.iter()
                .zip(probs)
                .map(|(&(value, duration, _), probability)| DemandType {
                    value: (value * 4.0).round() / 4.0,
                    duration,
                    probability,
                })
                .collect(),
        )
        .expect("normalized type space")
    })
}

fn arb_strategy(max_k: usize) -> impl Strategy<Value = StrategySpec> {
    prop_oneof![
        Just(StrategySpec::Robust),
        (1..=max_k).prop_map(|k_max| StrategySpec::Blocker { k_max }),
        Just(StrategySpec::Sniper { price: None }),
        Just(StrategySpec::Silent),
        prop_oneof![Just(0.5), Just(1.0), Just(2.0), Just(3.0)]
            .prop_map(|price| StrategySpec::Constant { price }),
    ]
}

/// Random valid market with up to `max_units` units.
pub fn arb_market(max_units: usize) -> impl Strategy<Value = MarketConfig> {
    let agents =
        prop::collection::vec((0.05..1.0f64, arb_type_space(3, 5), arb_strategy(6)), 1..=4);
    (
        agents,
        1..=max_units,
        1usize..=150,
        prop_oneof![
            Just(0.0),
            Just(0.5),
            Just(1.0),
            Just(1.5),
            Just(2.0),
            Just(3.0)
        ],
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(raw, units, horizon, reserve, seed, random_ties)| {
            let shares = normalize(&raw.iter().map(|a| a.0).collect::<Vec<_>>());
            MarketConfig {
                horizon,
                units,
                reserve,
                agents: raw
                    .into_iter()
                    .zip(shares)
                    .enumerate()
                    .map(|(id, ((_, type_space, strategy), fair_share))| AgentSpec {
                        id,
                        fair_share,
                        type_space,
                        strategy,
                    })
                    .collect(),
                seed,
                tie_break: if random_ties {
                    TieBreak::SeededRandom
                } else {
                    TieBreak::LowestIndex
                },
            }
            .validate()
            .expect("generated config is valid")
        })
}

/// Direct single-unit implementation: collect bids, pick the highest valid
/// one (lowest index on ties), charge it and jump the clock by its duration.
pub fn reference_auction(
    config: &MarketConfig,
    strategies: &[BidStrategy],
    streams: &Streams,
) -> Trace {
    assert_eq!(config.units, 1);
    assert_eq!(config.tie_break, TieBreak::LowestIndex);
    let n = config.n_agents();
    let horizon = config.horizon;
    let initial = config.initial_budgets();
    let mut spent = vec![0.0; n];
    let mut trace = Trace::new(n, horizon);
    let mut t = 1;
    while t <= horizon {
        let mut sampled = vec![None; n];
        let mut bids = Vec::new();
        for i in 0..n {
            let ts = &config.agents[i].type_space;
            let mut rng = streams.agent_round(i, t);
            let idx = sample_type_index(ts, &mut rng);
            let ty = *ts.get(idx);
            sampled[i] = Some(ty);
            let ctx = StrategyContext {
                agent: i,
                round: t,
                own_budget: initial[i] - spent[i],
                sampled_type: ty,
                type_index: idx,
                item_available: true,
                reserve: config.reserve,
            };
            if let Some(b) = strategies[i].bid(&ctx, &mut rng) {
                bids.push(b);
            }
        }
        let mut winner: Option<pseudomarket_core::Bid> = None;
        for b in &bids {
            let valid = b.duration >= 1
                && spent[b.agent] + b.total() <= initial[b.agent]
                && (b.duration == 1 || b.per_round_bid >= config.reserve);
            if valid && winner.is_none_or(|w| b.per_round_bid > w.per_round_bid) {
                winner = Some(*b);
            }
        }
        match winner {
            None => {
                for i in 0..n {
                    trace.record(
                        i,
                        t,
                        &AgentRound {
                            sampled: sampled[i],
                            ..AgentRound::default()
                        },
                    );
                }
                trace.outcome(&RoundOutcome {
                    round: t,
                    winners: vec![],
                    no_allocation: true,
                    available_units: 1,
                });
                t += 1;
            }
            Some(w) => {
                spent[w.agent] += w.total();
                for s in t..(t + w.duration).min(horizon + 1) {
                    for i in 0..n {
                        let mut entry = AgentRound {
                            holding: i == w.agent,
                            blocked: if i == w.agent {
                                s > t
                            } else {
                                w.per_round_bid >= config.reserve
                            },
                            ..AgentRound::default()
                        };
                        if s == t {
                            entry.sampled = sampled[i];
                            if i == w.agent {
                                entry.won = true;
                                entry.payment = w.total();
                                let ty = sampled[i].unwrap();
                                if w.duration >= ty.duration {
                                    entry.utility = ty.total_value();
                                }
                            }
                        }
                        trace.record(i, s, &entry);
                    }
                }
                trace.outcome(&RoundOutcome {
                    round: t,
                    winners: vec![Winner {
                        agent: w.agent,
                        unit: 0,
                        per_round_bid: w.per_round_bid,
                        duration: w.duration,
                        total_payment: w.total(),
                    }],
                    no_allocation: false,
                    available_units: 1,
                });
                t += w.duration;
            }
        }
    }
    trace
}

pub fn run_with(config: &MarketConfig, advance: Advance, streams: &Streams) -> Trace {
    let strategies = build_strategies(config).expect("strategies");
    let mut trace = Trace::new(config.n_agents(), config.horizon);
    run_mechanism_with(config, &strategies, streams, advance, &mut trace).expect("run");
    trace
}

/// Budget feasibility, charging identity, reserve enforcement, no double
/// allocation, utility only on wins, and the blocked-round bound.
pub fn check_structural(config: &MarketConfig, trace: &Trace) -> Result<(), String> {
    let n = config.n_agents();
    let horizon = config.horizon;
    for (i, a) in trace.agents.iter().enumerate() {
        let paid = a.total_payment();
        let budget = config.initial_budget(i);
        if paid > budget {
            return Err(format!("agent {i} paid {paid} > budget {budget}"));
        }
        for t in 0..horizon {
            if a.utility[t] > 0.0 && !a.won[t] {
                return Err(format!(
                    "agent {i} has utility without a win at round {}",
                    t + 1
                ));
            }
        }
    }
    for o in &trace.outcomes {
        if o.winners.len() > o.available_units {
            return Err(format!("round {}: more winners than free units", o.round));
        }
        for w in &o.winners {
            if w.total_payment != w.per_round_bid * w.duration as f64 {
                return Err(format!("round {}: payment is not bid × duration", o.round));
            }
            if w.duration > 1 && w.per_round_bid < config.reserve {
                return Err(format!(
                    "round {}: multi-round winner below reserve",
                    o.round
                ));
            }
            if trace.agents[w.agent].payment[o.round - 1] != w.total_payment {
                return Err(format!("round {}: trace payment mismatch", o.round));
            }
        }
    }
    // reconstruct unit occupancy from outcomes
    let mut occupancy = vec![vec![None::<usize>; config.units]; horizon + 1];
    for o in &trace.outcomes {
        for w in &o.winners {
            for s in o.round..(o.round + w.duration).min(horizon + 1) {
                if occupancy[s][w.unit].replace(w.agent).is_some() {
                    return Err(format!("unit {} double-allocated in round {s}", w.unit));
                }
            }
        }
    }
    for s in 1..=horizon {
        let mut holders: Vec<usize> = occupancy[s].iter().flatten().copied().collect();
        holders.sort_unstable();
        let len = holders.len();
        holders.dedup();
        if holders.len() != len {
            return Err(format!("an agent holds two units in round {s}"));
        }
        for i in 0..n {
            if trace.agents[i].holding[s - 1] != holders.contains(&i) {
                return Err(format!("holding flag mismatch for agent {i} round {s}"));
            }
        }
    }
    if config.reserve > 0.0 {
        let bound = config.units as f64 * horizon as f64 / config.reserve
            + (n * config.k_max().max(k_max_of_blockers(config))) as f64;
        for (i, a) in trace.agents.iter().enumerate() {
            let blocked = a.blocked_rounds() as f64;
            if blocked > bound {
                return Err(format!("agent {i} blocked {blocked} > {bound}"));
            }
        }
    }
    Ok(())
}

pub fn k_max_of_blockers(config: &MarketConfig) -> usize {
    config
        .agents
        .iter()
        .filter_map(|a| match a.strategy {
            StrategySpec::Blocker { k_max } => Some(k_max),
            _ => None,
        })
        .max()
        .unwrap_or(1)
}

/// Sampled types in a trace do not depend on the order agents are visited.
pub fn check_substream_order(
    config: &MarketConfig,
    trace: &Trace,
    streams: &Streams,
) -> Result<(), String> {
    for t in (1..=config.horizon).rev() {
        for i in (0..config.n_agents()).rev() {
            if let Some(ty) = trace.agents[i].sampled[t - 1] {
                let ts = &config.agents[i].type_space;
                let again = *ts.get(sample_type_index(ts, &mut streams.agent_round(i, t)));
                if again != ty {
                    return Err(format!("agent {i} round {t}: resampled type differs"));
                }
            }
        }
    }
    Ok(())
}

/// Ideal-utility invariants for one type space and cap.
pub fn check_ideal(ts: &TypeSpace, cap: f64) -> Result<(), String> {
    let lp = build_ideal_lp(ts, cap).map_err(|e| e.to_string())?;
    let sol = solve_lp(&lp).map_err(|e| e.to_string())?;
    let viol = lp.max_violation(&sol.f);
    if viol > FEASIBILITY_TOL {
        return Err(format!("violation {viol}"));
    }
    let policy = ideal_policy(ts, cap).map_err(|e| e.to_string())?;
    let s = policy.stats;
    if s.beta > cap + 1e-9 {
        return Err(format!("beta {} > cap {cap}", s.beta));
    }
    if s.q > s.beta + 1e-9 {
        return Err(format!("q {} > beta {}", s.q, s.beta));
    }
    if (s.v_star - sol.objective_value).abs() > 1e-9 {
        return Err(format!("v* {} vs LP {}", s.v_star, sol.objective_value));
    }
    let used: f64 = lp.share_row.iter().zip(&sol.f).map(|(k, f)| k * f).sum();
    if (s.beta - used).abs() > 1e-9 {
        return Err(format!("beta {} vs Σ k f {used}", s.beta));
    }
    if s.kappa_defined && s.beta < 1.0 - 1e-9 {
        let identity = (1.0 - s.q) * s.beta / (s.q * (1.0 - s.beta));
        if (s.kappa - identity).abs() > 1e-9 * s.kappa.max(1.0) {
            return Err(format!("kappa {} vs identity {identity}", s.kappa));
        }
    }
    for p in &policy.request_prob {
        if !(-1e-9..=1.0 + 1e-9).contains(p) {
            return Err(format!("request probability {p} out of range"));
        }
    }
    let back = x_to_f(&policy.x, ts);
    for (a, b) in back.iter().zip(&sol.f) {
        if (a - b).abs() > 1e-10 {
            return Err(format!("x→f round trip {a} vs {b}"));
        }
    }
    Ok(())
}
