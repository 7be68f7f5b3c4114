//! Bundled experiments with frozen defaults, and the driver that turns a
//! finished Monte-Carlo run into a summary with analytic checks.
//!
//! Defaults (all overridable through [`PresetParams`]):
//!
//! | preset          | market                                                        | T      | trials |
//! |-----------------|---------------------------------------------------------------|--------|--------|
//! | `guarantee`     | blocker (α = 0.8, k_max = 5) vs robust I2 agent (α = 0.2), r = 2 | 10^4   | 200    |
//! | `impossibility` | blocker (α = 0.9, k_max = 20) vs sniper with (1,1) w.p. α = 0.1, r = 2 | 10^4 | 200 |
//! | `hardness`      | n = 50 symmetric agents, k_max = 20, greedy omniscient        | 10^5   | 50     |
//! | `multi`         | L = 4, four blockers (α = 0.2 each, k_max = 5) vs robust I2 agent (α = 0.2), r = 2 − α | 10^4 | 200 |
//! | `roundrobin`    | n = 10 agents, value 1 w.p. 1/n, round-robin                  | 10^4   | 100    |
//! | `bpb`           | blocker/sniper/silent (α = 0.5) vs robust I2 agent (α = 0.5), r = 2 | 10^4 | 200 |
//!
//! I2 is the type space `{(1, 2) w.p. 1/2, (0, 1) w.p. 1/2}`. The focus
//! agent always has the highest index so equal bids go to its opponents.

use std::str::FromStr;

use serde::Serialize;

use super::{
    agent_ideal, bpb_ratio, effective_k_max, greedy_fraction_for, guarantee_factor,
    guarantee_lower_bound, hardness_instance, impossibility_upper_bound, is_symmetric, monte_carlo,
    summarize_agents, Allocator, Check, ExperimentSummary, Moments, References, SimError,
    DEFAULT_SLACK_CONST, SE_MARGIN,
};
use crate::engine::TrialTotals;
use crate::ideal::welfare_upper_bound;
use crate::model::{AgentSpec, MarketConfig, StrategySpec, TieBreak, TypeSpace};

/// Relative tolerance for the utility-per-credit identity.
pub const BPB_REL_TOL: f64 = 0.02;
/// Absolute tolerance on the greedy allocated-round fraction.
pub const FRACTION_TOL: f64 = 0.01;
/// Relative tolerance on the round-robin utility rate.
pub const ROUND_ROBIN_REL_TOL: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Guarantee,
    Impossibility,
    Hardness,
    Multi,
    RoundRobin,
    Bpb,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Guarantee,
        Preset::Impossibility,
        Preset::Hardness,
        Preset::Multi,
        Preset::RoundRobin,
        Preset::Bpb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Guarantee => "guarantee",
            Preset::Impossibility => "impossibility",
            Preset::Hardness => "hardness",
            Preset::Multi => "multi",
            Preset::RoundRobin => "roundrobin",
            Preset::Bpb => "bpb",
        }
    }
}

impl FromStr for Preset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SimError::UnknownPreset(s.to_string()))
    }
}

/// How a finished run is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    /// Report aggregates only.
    Plain,
    /// Focus agent mean utility against the robustness lower bound.
    Guarantee { multi: bool },
    /// Focus agent mean utility against the blocker upper bound.
    Impossibility,
    /// Greedy allocated fraction against its closed form.
    Hardness,
    /// Round-robin utility rate against `E[V] / n`.
    RoundRobin,
    /// Focus agent utility per credit against `v* / (β r)`.
    Bpb,
}

/// A market plus how to run and judge it.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub config: MarketConfig,
    pub allocator: Allocator,
    pub kind: ExperimentKind,
    pub trials: usize,
    pub focus: Option<usize>,
}

/// Overrides for preset defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PresetParams {
    pub horizon: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub reserve: Option<f64>,
    pub alpha: Option<f64>,
    pub units: Option<usize>,
    pub n: Option<usize>,
    pub k_max: Option<usize>,
    /// Strategy of the focus agent where the preset allows a choice.
    pub focus_strategy: Option<StrategySpec>,
    /// Opponent strategy for the `bpb` preset.
    pub opponent: Option<StrategySpec>,
}

fn i2() -> TypeSpace {
    TypeSpace::from_triples(&[(1.0, 2, 0.5), (0.0, 1, 0.5)]).expect("valid type space")
}

fn agent(id: usize, fair_share: f64, type_space: TypeSpace, strategy: StrategySpec) -> AgentSpec {
    AgentSpec {
        id,
        fair_share,
        type_space,
        strategy,
    }
}

fn idle() -> TypeSpace {
    TypeSpace::point_mass(0.0, 1).expect("valid type space")
}

fn check_alpha(alpha: f64) -> Result<f64, SimError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(SimError::InvalidPreset(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Builds the experiment for `preset` with `params` applied.
pub fn build_preset(preset: Preset, params: &PresetParams) -> Result<Experiment, SimError> {
    let seed = params.seed.unwrap_or(1);
    let mut exp = match preset {
        Preset::Guarantee => {
            let alpha = check_alpha(params.alpha.unwrap_or(0.2))?;
            let k_max = params.k_max.unwrap_or(5);
            let config = MarketConfig {
                horizon: params.horizon.unwrap_or(10_000),
                units: 1,
                reserve: params.reserve.unwrap_or(2.0),
                agents: vec![
                    agent(0, 1.0 - alpha, idle(), StrategySpec::Blocker { k_max }),
                    agent(1, alpha, i2(), StrategySpec::Robust),
                ],
                seed,
                tie_break: TieBreak::LowestIndex,
            };
            Experiment {
                name: preset.name().into(),
                config,
                allocator: Allocator::Mechanism,
                kind: ExperimentKind::Guarantee { multi: false },
                trials: 200,
                focus: Some(1),
            }
        }
        Preset::Impossibility => {
            let alpha = check_alpha(params.alpha.unwrap_or(0.1))?;
            let k_max = params.k_max.unwrap_or(20);
            let focus = params
                .focus_strategy
                .clone()
                .unwrap_or(StrategySpec::Sniper { price: None });
            let types = TypeSpace::from_triples(&[(1.0, 1, alpha), (0.0, 1, 1.0 - alpha)])?;
            let config = MarketConfig {
                horizon: params.horizon.unwrap_or(10_000),
                units: 1,
                reserve: params.reserve.unwrap_or(2.0),
                agents: vec![
                    agent(0, 1.0 - alpha, idle(), StrategySpec::Blocker { k_max }),
                    agent(1, alpha, types, focus),
                ],
                seed,
                tie_break: TieBreak::LowestIndex,
            };
            Experiment {
                name: preset.name().into(),
                config,
                allocator: Allocator::Mechanism,
                kind: ExperimentKind::Impossibility,
                trials: 200,
                focus: Some(1),
            }
        }
        Preset::Hardness => {
            let inst = hardness_instance(
                params.n.unwrap_or(50),
                params.k_max.unwrap_or(20),
                params.horizon.unwrap_or(100_000),
            )?;
            let mut config = inst.config;
            config.seed = seed;
            Experiment {
                name: preset.name().into(),
                config,
                allocator: Allocator::GreedyOmniscient,
                kind: ExperimentKind::Hardness,
                trials: 50,
                focus: None,
            }
        }
        Preset::Multi => {
            let alpha = check_alpha(params.alpha.unwrap_or(0.2))?;
            let units = params.units.unwrap_or(4);
            let k_max = params.k_max.unwrap_or(5);
            // one blocker per unit so every free unit faces a reserve bid
            let blockers = units;
            let share = (1.0 - alpha) / blockers as f64;
            let mut agents: Vec<AgentSpec> = (0..blockers)
                .map(|i| agent(i, share, idle(), StrategySpec::Blocker { k_max }))
                .collect();
            agents.push(agent(blockers, alpha, i2(), StrategySpec::Robust));
            let config = MarketConfig {
                horizon: params.horizon.unwrap_or(10_000),
                units,
                reserve: params.reserve.unwrap_or(2.0 - alpha),
                agents,
                seed,
                tie_break: TieBreak::LowestIndex,
            };
            Experiment {
                name: preset.name().into(),
                config,
                allocator: Allocator::Mechanism,
                kind: ExperimentKind::Guarantee { multi: true },
                trials: 200,
                focus: Some(blockers),
            }
        }
        Preset::RoundRobin => {
            let n = params.n.unwrap_or(10);
            if n < 2 {
                return Err(SimError::InvalidPreset("roundrobin needs n ≥ 2".into()));
            }
            let p = 1.0 / n as f64;
            let types = TypeSpace::from_triples(&[(1.0, 1, p), (0.0, 1, 1.0 - p)])?;
            let config = MarketConfig {
                horizon: params.horizon.unwrap_or(10_000),
                units: 1,
                reserve: params.reserve.unwrap_or(1.0),
                agents: (0..n)
                    .map(|i| agent(i, p, types.clone(), StrategySpec::Silent))
                    .collect(),
                seed,
                tie_break: TieBreak::LowestIndex,
            };
            Experiment {
                name: preset.name().into(),
                config,
                allocator: Allocator::RoundRobin,
                kind: ExperimentKind::RoundRobin,
                trials: 100,
                focus: None,
            }
        }
        Preset::Bpb => {
            let alpha = check_alpha(params.alpha.unwrap_or(0.5))?;
            let opponent = params.opponent.clone().unwrap_or(StrategySpec::Blocker {
                k_max: params.k_max.unwrap_or(5),
            });
            let opp_types = TypeSpace::from_triples(&[(1.0, 1, 0.5), (0.0, 1, 0.5)])?;
            let config = MarketConfig {
                horizon: params.horizon.unwrap_or(10_000),
                units: 1,
                reserve: params.reserve.unwrap_or(2.0),
                agents: vec![
                    agent(0, 1.0 - alpha, opp_types, opponent),
                    agent(1, alpha, i2(), StrategySpec::Robust),
                ],
                seed,
                tie_break: TieBreak::LowestIndex,
            };
            Experiment {
                name: preset.name().into(),
                config,
                allocator: Allocator::Mechanism,
                kind: ExperimentKind::Bpb,
                trials: 200,
                focus: Some(1),
            }
        }
    };
    if let Some(units) = params.units {
        if preset != Preset::Multi && units != 1 {
            return Err(SimError::InvalidPreset(format!(
                "preset {} is single-unit",
                preset.name()
            )));
        }
    }
    if let Some(trials) = params.trials {
        exp.trials = trials;
    }
    exp.config = exp.config.validate()?;
    Ok(exp)
}

/// Runs `exp` and evaluates its checks.
pub fn run_experiment(
    exp: &Experiment,
    jobs: Option<usize>,
) -> Result<(ExperimentSummary, Vec<TrialTotals>), SimError> {
    let config = &exp.config;
    let trials = monte_carlo(config, exp.allocator, exp.trials, config.seed, jobs)?;
    let summary = summarize(exp, &trials)?;
    Ok((summary, trials))
}

/// Builds the summary of a finished run.
pub fn summarize(exp: &Experiment, trials: &[TrialTotals]) -> Result<ExperimentSummary, SimError> {
    let config = &exp.config;
    let horizon = config.horizon;
    let t = horizon as f64;
    let agents = summarize_agents(config, trials);
    let empirical_fraction = trials
        .iter()
        .map(TrialTotals::allocated_fraction)
        .collect::<Moments>()
        .finish();

    let mut refs = References::default();
    let mut checks = Vec::new();
    let mut empirical_bpb_ratio = None;

    if let Some(focus) = exp.focus {
        let (v_star, beta) = agent_ideal(config, focus)?;
        refs.v_star = Some(v_star);
        refs.beta = Some(beta);
        if beta > 0.0 && config.reserve > 0.0 {
            refs.bpb_ratio = Some(v_star / (beta * config.reserve));
        }
        empirical_bpb_ratio = bpb_ratio(trials, focus).ok();
    }
    if is_symmetric(config) {
        let (v_star, _) = agent_ideal(config, 0)?;
        refs.v_star.get_or_insert(v_star);
        refs.welfare_ub = Some(welfare_upper_bound(v_star, config.n_agents(), horizon));
    }

    let k_max = effective_k_max(config);
    let focus_summary = exp.focus.map(|i| &agents[i]);
    match exp.kind {
        ExperimentKind::Plain => {}
        ExperimentKind::Guarantee { multi } => {
            let (focus, summary) = require_focus(exp, focus_summary)?;
            let v_star = refs.v_star.unwrap_or(0.0);
            let lb = guarantee_lower_bound(
                v_star,
                horizon,
                config.reserve,
                config.agents[focus].fair_share,
                refs.beta.unwrap_or(0.0),
                k_max,
                multi,
                DEFAULT_SLACK_CONST,
            )?;
            refs.guarantee_factor = Some(guarantee_factor(
                config.reserve,
                config.agents[focus].fair_share,
                multi,
            ));
            refs.guarantee_lb = Some(lb);
            let mean = summary.total_utility.mean;
            checks.push(Check::at_least("mean_utility >= guarantee_lb", mean, lb));
            checks.push(Check::at_most("mean_utility <= v_star*T", mean, v_star * t));
        }
        ExperimentKind::Impossibility => {
            let (focus, summary) = require_focus(exp, focus_summary)?;
            let ub = impossibility_upper_bound(
                refs.v_star.unwrap_or(0.0),
                horizon,
                config.reserve,
                config.agents[focus].fair_share,
                k_max,
            )?;
            refs.impossibility_ub = Some(ub);
            let u = summary.total_utility;
            checks.push(Check::at_most(
                "mean_utility <= impossibility_ub + 3SE",
                u.mean,
                ub + SE_MARGIN * u.se,
            ));
        }
        ExperimentKind::Hardness => {
            let fraction = greedy_fraction_for(config);
            refs.fraction = Some(fraction);
            checks.push(Check::within(
                "|empirical_fraction - fraction| <= 0.01",
                empirical_fraction.mean,
                fraction,
                FRACTION_TOL,
            ));
            // each held round yields one unit of value, so welfare over the
            // symmetric ideal n·v*·T tracks the allocated fraction
            if let Some(welfare_ub) = refs.welfare_ub.filter(|&w| w > 0.0) {
                let welfare = trials
                    .iter()
                    .map(|tr| tr.agents.iter().map(|a| a.total_utility).sum::<f64>() / welfare_ub)
                    .collect::<Moments>()
                    .finish();
                checks.push(Check::within(
                    "|welfare/(n*v_star*T) - fraction| <= 0.01",
                    welfare.mean,
                    fraction,
                    FRACTION_TOL,
                ));
            }
        }
        ExperimentKind::RoundRobin => {
            if config.agents.iter().all(|a| a.type_space.k_max() == 1) {
                let n = config.n_agents() as f64;
                for a in &agents {
                    let ts = &config.agents[a.agent].type_space;
                    let mean_value: f64 = ts.types().iter().map(|t| t.value * t.probability).sum();
                    let expected = mean_value / n;
                    checks.push(Check::within(
                        format!("agent {} utility_rate within 10% of E[V]/n", a.agent),
                        a.total_utility.mean / t,
                        expected,
                        ROUND_ROBIN_REL_TOL * expected,
                    ));
                }
            }
        }
        ExperimentKind::Bpb => {
            let target = refs.bpb_ratio.ok_or_else(|| {
                SimError::InvalidPreset("focus agent has zero ideal utilization".into())
            })?;
            let (focus, _) = require_focus(exp, focus_summary)?;
            let ratio = bpb_ratio(trials, focus)?;
            checks.push(Check::within(
                "utility/payment within 2% of v*/(beta*r)",
                ratio,
                target,
                BPB_REL_TOL * target,
            ));
        }
    }

    Ok(ExperimentSummary {
        experiment: exp.name.clone(),
        allocator: exp.allocator,
        trials: trials.len(),
        base_seed: config.seed,
        horizon,
        units: config.units,
        reserve: config.reserve,
        focus_agent: exp.focus,
        agents,
        empirical_fraction,
        empirical_bpb_ratio,
        references: refs,
        checks,
    })
}

fn require_focus<'a>(
    exp: &Experiment,
    summary: Option<&'a super::AgentSummary>,
) -> Result<(usize, &'a super::AgentSummary), SimError> {
    match (exp.focus, summary) {
        (Some(i), Some(s)) => Ok((i, s)),
        _ => Err(SimError::InvalidPreset(format!(
            "experiment {} needs a focus agent",
            exp.name
        ))),
    }
}
