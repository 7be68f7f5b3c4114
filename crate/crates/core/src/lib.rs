//! Credit-based ("pseudo-market") allocation of reusable resources.
//!
//! - [`ideal`]: ideal utility of an agent via a linear program over its
//!   finite type space, with a vertex-enumeration oracle and a renewal
//!   simulation to cross-check it.
//! - [`engine`]: the first-price pseudo-auction with multi-round reserves for
//!   one or more identical units, plus round-robin and omniscient-greedy
//!   baselines.
//! - [`strategies`]: the robust reserve-price bidder and the adversaries used
//!   to stress it.
//! - [`simulator`]: seeded Monte-Carlo trials, aggregate statistics and the
//!   closed-form bounds they are compared with.

pub mod engine;
pub mod ideal;
pub mod model;
pub mod rng;
pub mod simulator;
pub mod strategies;

pub use engine::{
    run_greedy_omniscient, run_mechanism, run_round_robin, step, Advance, EngineError,
    RoundOutcome, Trace, TrialTotals,
};
pub use ideal::{
    build_ideal_lp, epoch_stats, f_to_x, ideal_policy, simulate_no_competition, solve_lp,
    vertex_enumeration_oracle, welfare_upper_bound, x_to_f, EpochStats, IdealError, LpInstance,
    LpSolution, RequestPolicy,
};
pub use model::{
    validate_config, AgentSpec, Bid, ConfigError, DemandType, MarketConfig, MarketState,
    StrategySpec, TieBreak, TypeSpace,
};
pub use rng::{sample_type, Streams};
pub use simulator::{monte_carlo, Allocator, ExperimentSummary, Preset, PresetParams, SimError};
pub use strategies::{build_strategies, Strategy, StrategyContext};
