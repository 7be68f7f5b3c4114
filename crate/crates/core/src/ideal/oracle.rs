//! Brute-force vertex enumeration for small ideal-utility LPs.
//!
//! Every vertex of `{f : A f ≤ b, f ≥ 0}` is the unique solution of some
//! `n` active constraints. Enumerating all `n`-subsets of the `2n + 1`
//! constraints, solving each square system by Gaussian elimination and
//! keeping the best feasible point gives the optimum without any pivoting
//! logic shared with the simplex.

use super::{IdealError, LpInstance, LpSolution, LpStatus};

/// Largest number of types the oracle accepts.
pub const MAX_ORACLE_TYPES: usize = 6;
const FEASIBILITY_TOL: f64 = 1e-10;
const SINGULAR_TOL: f64 = 1e-12;

pub fn vertex_enumeration_oracle(lp: &LpInstance) -> Result<LpSolution, IdealError> {
    let n = lp.num_vars();
    if n > MAX_ORACLE_TYPES {
        return Err(IdealError::TooManyTypes { types: n });
    }

    // Inequalities g·f ≤ h: structural rows, then -f_j ≤ 0.
    let (rows, rhs) = lp.inequality_rows();
    let mut g = rows;
    let mut h = rhs;
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = -1.0;
        g.push(row);
        h.push(0.0);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for subset in Combinations::new(g.len(), n) {
        let a: Vec<Vec<f64>> = subset.iter().map(|&i| g[i].clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&i| h[i]).collect();
        let Some(point) = solve_square(a, b) else {
            continue;
        };
        let feasible = g.iter().zip(&h).all(|(row, &rhs)| {
            let lhs: f64 = row.iter().zip(&point).map(|(a, x)| a * x).sum();
            lhs <= rhs + FEASIBILITY_TOL
        });
        if !feasible {
            continue;
        }
        let value: f64 = lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, point));
        }
    }

    match best {
        Some((objective_value, f)) => Ok(LpSolution {
            f: f.into_iter()
                .map(|v| if v.abs() < 1e-15 { 0.0 } else { v })
                .collect(),
            objective_value,
            status: LpStatus::Optimal,
        }),
        None => Err(IdealError::NumericalFailure(
            "no feasible vertex found".into(),
        )),
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < SINGULAR_TOL {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let factor = row[col] / pivot_row[col];
            if factor == 0.0 {
                continue;
            }
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= factor * p;
            }
            b[col + 1 + offset] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}
