//! Experiment files: JSON documents describing a market, how many trials to
//! run and, optionally, which experiment the run should be judged as.

use std::path::Path;

use pseudomarket_core::simulator::presets::{Experiment, ExperimentKind};
use pseudomarket_core::simulator::Allocator;
use pseudomarket_core::{AgentSpec, MarketConfig, StrategySpec, TieBreak, TypeSpace};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_HORIZON: usize = 10_000;
pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakName {
    #[default]
    LowestIndex,
    SeededRandom,
}

/// Experiment the run is evaluated as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilePreset {
    Ideal,
    Guarantee,
    Impossibility,
    Hardness,
    Multi,
    Roundrobin,
    Bpb,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyParams {
    pub k_max: Option<usize>,
    pub price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub fair_share: f64,
    /// `[value, duration, probability]` triples.
    pub types: Vec<(f64, usize, f64)>,
    pub strategy: String,
    #[serde(default)]
    pub params: Option<StrategyParams>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_units")]
    pub units: usize,
    #[serde(default = "default_reserve")]
    pub reserve: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tie_break: TieBreakName,
    pub agents: Vec<AgentEntry>,
    #[serde(default)]
    pub preset: Option<FilePreset>,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_units() -> usize {
    1
}

fn default_reserve() -> f64 {
    1.0
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

/// Builds a strategy from its name and parameters, rejecting parameters
/// the strategy does not take.
pub fn strategy_from_parts(name: &str, params: &StrategyParams) -> Result<StrategySpec, String> {
    let StrategyParams { k_max, price } = *params;
    let spec = match name {
        "robust" => StrategySpec::Robust,
        "silent" => StrategySpec::Silent,
        "blocker" => StrategySpec::Blocker {
            k_max: k_max.ok_or("blocker requires params.k_max")?,
        },
        "sniper" => StrategySpec::Sniper { price },
        "constant" => StrategySpec::Constant {
            price: price.ok_or("constant requires params.price")?,
        },
        other => return Err(format!("unknown strategy {other:?}")),
    };
    let takes_k = matches!(spec, StrategySpec::Blocker { .. });
    let takes_price = matches!(
        spec,
        StrategySpec::Sniper { .. } | StrategySpec::Constant { .. }
    );
    if k_max.is_some() && !takes_k {
        return Err(format!("{name} does not take k_max"));
    }
    if price.is_some() && !takes_price {
        return Err(format!("{name} does not take price"));
    }
    Ok(spec)
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid experiment file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Validated market configuration, with `seed` overriding the file's.
    pub fn market(&self, seed: Option<u64>) -> Result<MarketConfig, CliError> {
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(id, a)| {
                let type_space = TypeSpace::from_triples(&a.types)?;
                let strategy =
                    strategy_from_parts(&a.strategy, &a.params.clone().unwrap_or_default())
                        .map_err(|e| CliError::Config(format!("agent {id}: {e}")))?;
                Ok(AgentSpec {
                    id,
                    fair_share: a.fair_share,
                    type_space,
                    strategy,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(MarketConfig {
            horizon: self.horizon,
            units: self.units,
            reserve: self.reserve,
            agents,
            seed: seed.unwrap_or(self.seed),
            tie_break: match self.tie_break {
                TieBreakName::LowestIndex => TieBreak::LowestIndex,
                TieBreakName::SeededRandom => TieBreak::SeededRandom,
            },
        }
        .validate()?)
    }

    /// The experiment this file describes.
    pub fn experiment(
        &self,
        name: &str,
        seed: Option<u64>,
        trials: Option<usize>,
    ) -> Result<Experiment, CliError> {
        let config = self.market(seed)?;
        let last = |pred: fn(&StrategySpec) -> bool, what: &str| {
            config
                .agents
                .iter()
                .rposition(|a| pred(&a.strategy))
                .ok_or_else(|| CliError::Config(format!("preset needs a {what} agent")))
        };
        let is_robust: fn(&StrategySpec) -> bool = |s| matches!(s, StrategySpec::Robust);
        let (allocator, kind, focus) = match self.preset {
            None | Some(FilePreset::Ideal) => (Allocator::Mechanism, ExperimentKind::Plain, None),
            Some(FilePreset::Guarantee) => (
                Allocator::Mechanism,
                ExperimentKind::Guarantee {
                    multi: config.units > 1,
                },
                Some(last(is_robust, "robust")?),
            ),
            Some(FilePreset::Multi) => (
                Allocator::Mechanism,
                ExperimentKind::Guarantee { multi: true },
                Some(last(is_robust, "robust")?),
            ),
            Some(FilePreset::Bpb) => (
                Allocator::Mechanism,
                ExperimentKind::Bpb,
                Some(last(is_robust, "robust")?),
            ),
            Some(FilePreset::Impossibility) => (
                Allocator::Mechanism,
                ExperimentKind::Impossibility,
                Some(last(
                    |s| !matches!(s, StrategySpec::Blocker { .. }),
                    "non-blocker",
                )?),
            ),
            Some(FilePreset::Hardness) => {
                (Allocator::GreedyOmniscient, ExperimentKind::Hardness, None)
            }
            Some(FilePreset::Roundrobin) => {
                (Allocator::RoundRobin, ExperimentKind::RoundRobin, None)
            }
        };
        let trials = trials.unwrap_or(self.trials);
        if trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        Ok(Experiment {
            name: name.to_string(),
            config,
            allocator,
            kind,
            trials,
            focus,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const I2: &str = r#"{
        "horizon": 100, "reserve": 2.0, "seed": 3,
        "agents": [
            {"fair_share": 0.5, "types": [[0, 1, 1]], "strategy": "blocker", "params": {"k_max": 5}},
            {"fair_share": 0.5, "types": [[1, 2, 0.5], [0, 1, 0.5]], "strategy": "robust"}
        ],
        "preset": "guarantee"
    }"#;

    #[test]
    fn parses_and_builds_market() {
        let file = ExperimentFile::parse(I2).unwrap();
        assert_eq!(file.units, 1);
        assert_eq!(file.trials, DEFAULT_TRIALS);
        let exp = file.experiment("run", Some(9), None).unwrap();
        assert_eq!(exp.config.seed, 9);
        assert_eq!(exp.focus, Some(1));
        assert_eq!(
            exp.config.agents[0].strategy,
            StrategySpec::Blocker { k_max: 5 }
        );
        assert_eq!(exp.kind, ExperimentKind::Guarantee { multi: false });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = I2.replace("\"seed\"", "\"sede\"");
        assert!(matches!(
            ExperimentFile::parse(&bad),
            Err(CliError::Config(_))
        ));
        let bad = I2.replace("\"k_max\": 5", "\"k_max\": 5, \"depth\": 1");
        assert!(matches!(
            ExperimentFile::parse(&bad),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn strategy_params_are_checked() {
        let p = |k_max, price| StrategyParams { k_max, price };
        assert!(strategy_from_parts("blocker", &p(None, None)).is_err());
        assert!(strategy_from_parts("robust", &p(None, Some(1.0))).is_err());
        assert!(strategy_from_parts("silent", &p(Some(2), None)).is_err());
        assert!(strategy_from_parts("auction", &p(None, None)).is_err());
        assert_eq!(
            strategy_from_parts("sniper", &p(None, None)).unwrap(),
            StrategySpec::Sniper { price: None }
        );
    }

    #[test]
    fn invalid_market_is_a_config_error() {
        let bad = I2.replace(
            "\"fair_share\": 0.5, \"types\": [[1",
            "\"fair_share\": 0.7, \"types\": [[1",
        );
        let file = ExperimentFile::parse(&bad).unwrap();
        assert!(matches!(file.market(None), Err(CliError::Config(_))));
    }
}
