//! Ideal utility: the best long-run average utility an agent can reach with
//! no competition while holding the resource at most a `cap` fraction of
//! rounds.
//!
//! Over a finite type space the constrained control problem reduces to a
//! linear program in `f_θ`, the fraction of rounds on which the item is
//! free, the agent has type `θ` and requests it:
//!
//! ```text
//! max  Σ v_θ k_θ f_θ
//! s.t. Σ k_θ f_θ ≤ cap
//!      0 ≤ f_θ ≤ p_θ (1 − Σ_θ' (k_θ' − 1) f_θ')
//! ```
//!
//! The request mass per type is then `x_θ = f_θ / (1 − Σ (k_θ' − 1) f_θ')`
//! and the request probability is `x_θ / p_θ`.

mod oracle;
mod simplex;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::TypeSpace;
use crate::rng::sample_type_index;

pub use oracle::{vertex_enumeration_oracle, MAX_ORACLE_TYPES};
pub use simplex::OPTIMALITY_TOL;

/// Row feasibility tolerance for returned solutions.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdealError {
    #[error("utilization cap {0} outside (0, 1]")]
    CapOutOfRange(f64),
    #[error("LP solver failed: {0}")]
    NumericalFailure(String),
    #[error("vertex enumeration supports at most {max} types, got {types}", max = MAX_ORACLE_TYPES)]
    TooManyTypes { types: usize },
    #[error("availability fraction 1 - Σ(k-1)f = {0} is not positive")]
    DegenerateDenominator(f64),
}

/// The ideal-utility LP for one type space and cap.
#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    /// `v_θ k_θ` per type.
    pub objective: Vec<f64>,
    /// `k_θ` per type.
    pub share_row: Vec<f64>,
    pub cap: f64,
    /// Row `θ` encodes `f_θ + p_θ Σ_θ' (k_θ' − 1) f_θ' ≤ p_θ`.
    pub box_rows: Vec<Vec<f64>>,
    pub box_rhs: Vec<f64>,
}

impl LpInstance {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// All structural `≤` rows (share row first) with their right-hand sides.
    pub fn inequality_rows(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rows = Vec::with_capacity(self.box_rows.len() + 1);
        rows.push(self.share_row.clone());
        rows.extend(self.box_rows.iter().cloned());
        let mut rhs = Vec::with_capacity(rows.len());
        rhs.push(self.cap);
        rhs.extend_from_slice(&self.box_rhs);
        (rows, rhs)
    }

    /// Largest violation of any row or nonnegativity bound at `f`.
    pub fn max_violation(&self, f: &[f64]) -> f64 {
        let (rows, rhs) = self.inequality_rows();
        let row_violation = rows
            .iter()
            .zip(&rhs)
            .map(|(row, &b)| row.iter().zip(f).map(|(a, x)| a * x).sum::<f64>() - b)
            .fold(0.0_f64, f64::max);
        let sign_violation = f.iter().map(|&x| -x).fold(0.0_f64, f64::max);
        row_violation.max(sign_violation)
    }

    pub fn objective_at(&self, f: &[f64]) -> f64 {
        self.objective.iter().zip(f).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    /// Optimal, but some basic variable is zero; other optimal vertices may exist.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub f: Vec<f64>,
    /// Ideal utility `v*`.
    pub objective_value: f64,
    pub status: LpStatus,
}

/// Epoch-level statistics of a stationary request policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    /// Ideal utility rate `v*`.
    pub v_star: f64,
    /// Ideal utilization `β`.
    pub beta: f64,
    /// Request probability `q = Pr[Req = 1]`.
    pub q: f64,
    /// Expected duration of a requested demand, `E[K | Req = 1]`.
    /// Zero (and `kappa_defined == false`) when `q == 0`.
    pub kappa: f64,
    pub kappa_defined: bool,
}

impl EpochStats {
    fn zero() -> Self {
        Self {
            v_star: 0.0,
            beta: 0.0,
            q: 0.0,
            kappa: 0.0,
            kappa_defined: false,
        }
    }

    /// Expected epoch length `1/q − 1 + κ`.
    pub fn expected_epoch_length(&self) -> Option<f64> {
        self.kappa_defined.then(|| 1.0 / self.q - 1.0 + self.kappa)
    }
}

/// A stationary randomized request rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestPolicy {
    /// `Pr[Req(θ) = 1 | θ]` per type.
    pub request_prob: Vec<f64>,
    /// `x_θ = p_θ · request_prob_θ`.
    pub x: Vec<f64>,
    pub stats: EpochStats,
}

impl RequestPolicy {
    /// Builds a policy from explicit request probabilities.
    pub fn from_request_probs(request_prob: Vec<f64>, type_space: &TypeSpace) -> Self {
        let x: Vec<f64> = request_prob
            .iter()
            .zip(type_space.types())
            .map(|(r, t)| r * t.probability)
            .collect();
        let stats = epoch_stats(&x, type_space);
        Self {
            request_prob,
            x,
            stats,
        }
    }

    /// Policy that never requests.
    pub fn never(type_space: &TypeSpace) -> Self {
        Self::from_request_probs(vec![0.0; type_space.len()], type_space)
    }

    /// Request probability for type `index`, clamped into `[0, 1]`.
    pub fn prob(&self, index: usize) -> f64 {
        self.request_prob[index].clamp(0.0, 1.0)
    }
}

/// Encodes the ideal-utility LP for `type_space` under utilization `cap`.
pub fn build_ideal_lp(type_space: &TypeSpace, cap: f64) -> Result<LpInstance, IdealError> {
    if !(cap > 0.0 && cap <= 1.0) {
        return Err(IdealError::CapOutOfRange(cap));
    }
    let types = type_space.types();
    let extra: Vec<f64> = types.iter().map(|t| (t.duration - 1) as f64).collect();
    let box_rows = types
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row: Vec<f64> = extra.iter().map(|e| t.probability * e).collect();
            row[i] += 1.0;
            row
        })
        .collect();
    Ok(LpInstance {
        objective: types.iter().map(|t| t.total_value()).collect(),
        share_row: types.iter().map(|t| t.duration as f64).collect(),
        cap,
        box_rows,
        box_rhs: types.iter().map(|t| t.probability).collect(),
    })
}

/// Solves the ideal-utility LP with the dense simplex.
pub fn solve_lp(lp: &LpInstance) -> Result<LpSolution, IdealError> {
    let (rows, rhs) = lp.inequality_rows();
    let res = simplex::maximize(&lp.objective, &rows, &rhs)?;
    let violation = lp.max_violation(&res.x);
    if violation > FEASIBILITY_TOL {
        return Err(IdealError::NumericalFailure(format!(
            "solution violates constraints by {violation:e}"
        )));
    }
    Ok(LpSolution {
        objective_value: res.objective,
        f: res.x,
        status: if res.degenerate {
            LpStatus::Degenerate
        } else {
            LpStatus::Optimal
        },
    })
}

/// Fraction of rounds the item is free, `1 − Σ (k_θ − 1) f_θ`.
fn availability(f: &[f64], type_space: &TypeSpace) -> f64 {
    1.0 - f
        .iter()
        .zip(type_space.types())
        .map(|(f, t)| (t.duration - 1) as f64 * f)
        .sum::<f64>()
}

/// Maps LP variables `f` to request masses `x` and probabilities.
pub fn f_to_x(solution: &LpSolution, type_space: &TypeSpace) -> Result<RequestPolicy, IdealError> {
    let denom = availability(&solution.f, type_space);
    if denom <= 1e-9 {
        return Err(IdealError::DegenerateDenominator(denom));
    }
    let x: Vec<f64> = solution.f.iter().map(|f| f / denom).collect();
    let request_prob = x
        .iter()
        .zip(type_space.types())
        .map(|(x, t)| {
            if t.probability > 0.0 {
                x / t.probability
            } else {
                0.0
            }
        })
        .collect();
    let stats = epoch_stats(&x, type_space);
    Ok(RequestPolicy {
        request_prob,
        x,
        stats,
    })
}

/// Inverse of [`f_to_x`]: `f_θ = x_θ / (1 + Σ (k_θ' − 1) x_θ')`.
pub fn x_to_f(x: &[f64], type_space: &TypeSpace) -> Vec<f64> {
    let denom = 1.0
        + x.iter()
            .zip(type_space.types())
            .map(|(x, t)| (t.duration - 1) as f64 * x)
            .sum::<f64>();
    x.iter().map(|x| x / denom).collect()
}

/// Epoch statistics for request masses `x`.
pub fn epoch_stats(x: &[f64], type_space: &TypeSpace) -> EpochStats {
    let q: f64 = x.iter().sum();
    if q <= 0.0 {
        return EpochStats::zero();
    }
    let types = type_space.types();
    let kappa = x
        .iter()
        .zip(types)
        .map(|(x, t)| t.duration as f64 * x)
        .sum::<f64>()
        / q;
    let mean_value = x
        .iter()
        .zip(types)
        .map(|(x, t)| t.total_value() * x)
        .sum::<f64>()
        / q;
    let epoch = 1.0 / q - 1.0 + kappa;
    EpochStats {
        v_star: mean_value / epoch,
        beta: kappa / epoch,
        q,
        kappa,
        kappa_defined: true,
    }
}

/// Solves for the optimal request policy under `cap`.
pub fn ideal_policy(type_space: &TypeSpace, cap: f64) -> Result<RequestPolicy, IdealError> {
    let lp = build_ideal_lp(type_space, cap)?;
    let solution = solve_lp(&lp)?;
    f_to_x(&solution, type_space)
}

/// Runs a single agent with no competition for `horizon` rounds and returns
/// `(average utility, average utilization)`.
///
/// Demands that run past the horizon are credited in full but only their
/// in-horizon rounds count toward utilization.
pub fn simulate_no_competition<R: Rng + ?Sized>(
    policy: &RequestPolicy,
    type_space: &TypeSpace,
    horizon: usize,
    rng: &mut R,
) -> (f64, f64) {
    let mut utility = 0.0;
    let mut held = 0usize;
    let mut t = 1;
    while t <= horizon {
        let idx = sample_type_index(type_space, rng);
        let p = policy.prob(idx);
        let request = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
        if request {
            let ty = type_space.get(idx);
            utility += ty.total_value();
            held += ty.duration.min(horizon - t + 1);
            t += ty.duration;
        } else {
            t += 1;
        }
    }
    (utility / horizon as f64, held as f64 / horizon as f64)
}

/// `n · v* · T`: welfare bound for symmetric agents with equal shares.
pub fn welfare_upper_bound(v_star: f64, n: usize, horizon: usize) -> f64 {
    n as f64 * v_star * horizon as f64
}
