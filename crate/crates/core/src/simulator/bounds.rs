//! Closed-form references the experiments are compared against.

use serde::Serialize;

use super::SimError;
use crate::model::{AgentSpec, MarketConfig, StrategySpec, TieBreak, TypeSpace};

/// Default constant in front of the `k_max / (β √T)` concentration term.
pub const DEFAULT_SLACK_CONST: f64 = 3.0;

/// Leading competitive factor `min{1/r, 1 − c/r}` with `c = 1` (single
/// resource) or `c = 1 − α` (refined multi-unit accounting).
pub fn guarantee_factor(r: f64, alpha: f64, multi: bool) -> f64 {
    let c = if multi { 1.0 - alpha } else { 1.0 };
    (1.0 / r).min(1.0 - c / r)
}

/// Lower bound on a robust bidder's expected total utility:
/// `v* T (min{1/r, 1 − c/r} − slack · k_max / (β √T))`.
#[allow(clippy::too_many_arguments)]
pub fn guarantee_lower_bound(
    v_star: f64,
    horizon: usize,
    r: f64,
    alpha: f64,
    beta: f64,
    k_max: usize,
    multi: bool,
    slack_const: f64,
) -> Result<f64, SimError> {
    if r < 1.0 {
        return Err(SimError::ReserveBelowOne(r));
    }
    let t = horizon as f64;
    let slack = if beta > 0.0 {
        slack_const * k_max as f64 / (beta * t.sqrt())
    } else {
        0.0
    };
    Ok(v_star * t * (guarantee_factor(r, alpha, multi) - slack))
}

/// Upper bound on what any strategy can earn against blockers:
/// `v* T (1 − (1 − α)/max{1, r} + 1/k_max) + v* (k_max − 1)`.
pub fn impossibility_upper_bound(
    v_star: f64,
    horizon: usize,
    r: f64,
    alpha: f64,
    k_max: usize,
) -> Result<f64, SimError> {
    if k_max < 2 {
        return Err(SimError::KmaxTooSmall(k_max));
    }
    let k = k_max as f64;
    Ok(v_star * horizon as f64 * (1.0 - (1.0 - alpha) / r.max(1.0) + 1.0 / k) + v_star * (k - 1.0))
}

/// Long-run fraction of rounds held under greedy allocation when an item
/// is claimed with probability `p_any` per free round and held for
/// `mean_duration` rounds on average.
pub fn greedy_allocated_fraction(p_any: f64, mean_duration: f64) -> f64 {
    if p_any <= 0.0 {
        return 0.0;
    }
    mean_duration / (mean_duration - 1.0 + 1.0 / p_any)
}

/// Analytic greedy-allocation fraction for an arbitrary single-unit market:
/// each free round the lowest-index agent with positive value claims the
/// item for its sampled duration.
pub fn greedy_fraction_for(config: &MarketConfig) -> f64 {
    let mut none_before = 1.0;
    let mut weighted_duration = 0.0;
    for agent in &config.agents {
        let positive: Vec<_> = agent
            .type_space
            .types()
            .iter()
            .filter(|t| t.value > 0.0)
            .collect();
        let p_pos: f64 = positive.iter().map(|t| t.probability).sum();
        let k_mass: f64 = positive
            .iter()
            .map(|t| t.probability * t.duration as f64)
            .sum();
        weighted_duration += none_before * k_mass;
        none_before *= 1.0 - p_pos;
    }
    let p_any = 1.0 - none_before;
    if p_any <= 0.0 {
        return 0.0;
    }
    greedy_allocated_fraction(p_any, weighted_duration / p_any)
}

/// The symmetric hard instance: `n` agents with share `1/n`, each demanding
/// `(1, k_max)` with probability `p = 1/(k_max (n − 1) + 1)` and `(0, 1)`
/// otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardnessInstance {
    #[serde(skip)]
    pub config: MarketConfig,
    pub p: f64,
    /// Probability that some agent has positive value in a free round.
    pub p_prime: f64,
    /// Analytic fraction of rounds the item is allocated under greedy allocation.
    pub fraction: f64,
}

pub fn hardness_instance(
    n: usize,
    k_max: usize,
    horizon: usize,
) -> Result<HardnessInstance, SimError> {
    if n < 2 {
        return Err(SimError::InvalidPreset(format!(
            "hardness instance needs at least 2 agents, got {n}"
        )));
    }
    if k_max < 1 {
        return Err(SimError::InvalidPreset("k_max must be at least 1".into()));
    }
    let p = 1.0 / (k_max as f64 * (n as f64 - 1.0) + 1.0);
    let type_space = TypeSpace::from_triples(&[(1.0, k_max, p), (0.0, 1, 1.0 - p)])?;
    let share = 1.0 / n as f64;
    let config = MarketConfig {
        horizon,
        units: 1,
        reserve: 1.0,
        agents: (0..n)
            .map(|id| AgentSpec {
                id,
                fair_share: share,
                type_space: type_space.clone(),
                strategy: StrategySpec::Silent,
            })
            .collect(),
        seed: 0,
        tie_break: TieBreak::LowestIndex,
    }
    .validate()?;
    let p_prime = 1.0 - (1.0 - p).powi(n as i32);
    Ok(HardnessInstance {
        config,
        p,
        p_prime,
        fraction: greedy_allocated_fraction(p_prime, k_max as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ideal::ideal_policy;

    #[test]
    fn reserve_two_gives_one_half() {
        assert_eq!(guarantee_factor(2.0, 0.3, false), 0.5);
        let lb = guarantee_lower_bound(1.0, 1_000_000_000, 2.0, 0.3, 0.3, 1, false, 0.0).unwrap();
        assert!((lb / 1e9 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn multi_optimum_at_two_minus_alpha() {
        for alpha in [0.05, 0.2, 0.5] {
            let r = 2.0 - alpha;
            let f = guarantee_factor(r, alpha, true);
            assert!((f - 1.0 / (2.0 - alpha)).abs() < 1e-12);
            // r = 2 − α maximizes the factor
            for dr in [-0.1, 0.1] {
                assert!(guarantee_factor(r + dr, alpha, true) <= f + 1e-12);
            }
        }
    }

    #[test]
    fn guarantee_tends_to_leading_term() {
        let v = 0.4;
        let t = 1_000_000_000_000;
        let lb = guarantee_lower_bound(v, t, 1.2, 0.2, 0.2, 5, false, 3.0).unwrap();
        let limit = v * t as f64 * (1.0_f64 / 1.2).min(1.0 - 1.0 / 1.2);
        assert!((lb - limit).abs() / limit < 1e-3);
        assert!((guarantee_factor(1.2, 0.2, false) - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn reserve_below_one_is_rejected() {
        assert!(matches!(
            guarantee_lower_bound(1.0, 10, 0.5, 0.5, 0.5, 1, false, 3.0),
            Err(SimError::ReserveBelowOne(_))
        ));
    }

    #[test]
    fn impossibility_arithmetic() {
        // 0.1·10^4·(1 − 0.45 + 0.05) + 0.1·19
        let ub = impossibility_upper_bound(0.1, 10_000, 2.0, 0.1, 20).unwrap();
        assert!((ub - 601.9).abs() < 1e-9, "{ub}");
        // reserves below 1 use max{1, r} = 1
        let a = impossibility_upper_bound(0.1, 100, 0.5, 0.1, 20).unwrap();
        let b = impossibility_upper_bound(0.1, 100, 1.0, 0.1, 20).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            impossibility_upper_bound(0.1, 100, 2.0, 0.1, 1),
            Err(SimError::KmaxTooSmall(1))
        ));
    }

    #[test]
    fn hardness_ideal_utility_is_one_over_n() {
        for (n, k) in [(2, 1), (5, 3), (50, 20)] {
            let inst = hardness_instance(n, k, 100).unwrap();
            let ts = &inst.config.agents[0].type_space;
            let policy = ideal_policy(ts, 1.0 / n as f64).unwrap();
            assert!((policy.stats.v_star - 1.0 / n as f64).abs() < 1e-12);
            assert!((policy.stats.beta - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn hardness_fraction_limits() {
        // large n: p' ≈ 1 − e^{−1/k} ≤ 1/k
        let k = 20;
        let inst = hardness_instance(100_000, k, 100).unwrap();
        let approx = 1.0 - (-1.0 / k as f64).exp();
        assert!((inst.p_prime - approx).abs() < 1e-5);
        assert!(inst.p_prime <= 1.0 / k as f64);
        // fraction tends to 1/2 from above as k grows
        let mut prev = 1.0;
        for k in [10, 20, 50, 200, 1000] {
            let f = hardness_instance(10 * k, k, 100).unwrap().fraction;
            assert!(
                f > 0.5 && f < prev && f - 0.5 <= 2.0 / k as f64,
                "k={k} f={f}"
            );
            prev = f;
        }
    }

    #[test]
    fn generic_greedy_fraction_matches_hardness_formula() {
        let inst = hardness_instance(50, 20, 100).unwrap();
        assert!((greedy_fraction_for(&inst.config) - inst.fraction).abs() < 1e-12);
    }
}
