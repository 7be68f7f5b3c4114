//! Dense primal simplex for `max c·x  s.t.  A x ≤ b, x ≥ 0` with `b ≥ 0`.
//!
//! The all-slack basis is feasible whenever `b ≥ 0`, so no phase one is
//! needed. Bland's rule picks both the entering and the leaving variable,
//! which rules out cycling on degenerate vertices.

use super::IdealError;

/// Reduced-cost threshold for optimality.
pub const OPTIMALITY_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Some basic variable sits at zero in the optimal basis.
    pub degenerate: bool,
    pub pivots: usize,
}

/// Solves the LP. `rows[i]` has one coefficient per structural variable.
pub fn maximize(
    objective: &[f64],
    rows: &[Vec<f64>],
    rhs: &[f64],
) -> Result<SimplexResult, IdealError> {
    let n = objective.len();
    let m = rows.len();
    debug_assert_eq!(rhs.len(), m);
    if rhs.iter().any(|&b| b < 0.0) {
        return Err(IdealError::NumericalFailure(
            "negative right-hand side; origin is infeasible".into(),
        ));
    }

    // Tableau columns: n structural, m slack, 1 rhs. Row m is the objective
    // row holding reduced costs (c_j - z_j).
    let width = n + m + 1;
    let mut tab = vec![vec![0.0; width]; m + 1];
    for (i, row) in rows.iter().enumerate() {
        tab[i][..n].copy_from_slice(row);
        tab[i][n + i] = 1.0;
        tab[i][width - 1] = rhs[i];
    }
    tab[m][..n].copy_from_slice(objective);
    let mut basis: Vec<usize> = (n..n + m).collect();

    let max_pivots = 50 * (n + m).max(1) * (n + m).max(1);
    let mut pivots = 0;
    while let Some(entering) = (0..n + m).find(|&j| tab[m][j] > OPTIMALITY_TOL) {
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = tab[i][entering];
            if a > PIVOT_TOL {
                let ratio = tab[i][width - 1] / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((best, best_ratio)) => {
                        if ratio < best_ratio - PIVOT_TOL
                            || (ratio <= best_ratio + PIVOT_TOL && basis[i] < basis[best])
                        {
                            Some((i, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
        }
        let Some((pivot_row, _)) = leaving else {
            return Err(IdealError::NumericalFailure(
                "objective is unbounded".into(),
            ));
        };

        pivot(&mut tab, pivot_row, entering);
        basis[pivot_row] = entering;
        pivots += 1;
        if pivots > max_pivots {
            return Err(IdealError::NumericalFailure(format!(
                "no convergence after {pivots} pivots"
            )));
        }
    }

    let mut x = vec![0.0; n];
    let mut degenerate = false;
    for (i, &var) in basis.iter().enumerate() {
        let value = tab[i][width - 1];
        if value.abs() <= PIVOT_TOL {
            degenerate = true;
        }
        if var < n {
            x[var] = value.max(0.0);
        }
    }
    let objective_value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(SimplexResult {
        x,
        objective: objective_value,
        degenerate,
        pivots,
    })
}

fn pivot(tab: &mut [Vec<f64>], row: usize, col: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    tab[row][col] = 1.0;
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let factor = r[col];
        if factor != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            r[col] = 0.0;
        }
    }
}
