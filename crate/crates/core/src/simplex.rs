//! Dense two-phase simplex with Bland's rule.
//!
//! Built for the tiny LPs this library solves (stationary-distribution
//! feasibility and CCE polytopes, a few dozen variables at most). All
//! variables are non-negative; constraints may be `=`, `<=`, or `>=`.
//! Phase one minimizes artificial infeasibility; a problem counts as
//! feasible when the residual infeasibility is below `feasibility_tol`.

use crate::error::{Error, Result};

/// Pivot threshold: entries smaller than this are treated as zero.
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rel: Rel,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, rel: Rel, rhs: f64) -> Constraint {
        Constraint { coeffs, rel, rhs }
    }
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    /// A feasible point maximizing the objective (zero objective for pure
    /// feasibility problems).
    Optimal { x: Vec<f64>, objective: f64 },
    /// Phase one could not drive infeasibility below tolerance.
    Infeasible { residual: f64 },
    Unbounded,
}

/// Maximize `objective . x` subject to the constraints and `x >= 0`.
pub fn solve(
    num_vars: usize,
    constraints: &[Constraint],
    objective: Option<&[f64]>,
    feasibility_tol: f64,
) -> Result<LpOutcome> {
    if let Some(obj) = objective {
        if obj.len() != num_vars {
            return Err(Error::DimensionMismatch {
                what: "objective",
                expected: num_vars,
                actual: obj.len(),
            });
        }
    }
    for c in constraints {
        if c.coeffs.len() != num_vars {
            return Err(Error::DimensionMismatch {
                what: "constraint",
                expected: num_vars,
                actual: c.coeffs.len(),
            });
        }
    }

    let m = constraints.len();
    // Column layout: structural vars, slack/surplus vars, artificial vars.
    let mut num_slack = 0;
    for c in constraints {
        if c.rel != Rel::Eq {
            num_slack += 1;
        }
    }
    let num_art = m; // one artificial per row keeps phase one uniform
    let total = num_vars + num_slack + num_art;

    // rows[i] = constraint row over all columns, rhs[i] >= 0.
    let mut rows = vec![vec![0.0; total]; m];
    let mut rhs = vec![0.0; m];
    let mut basis = vec![0usize; m];
    let mut slack_idx = 0;
    for (i, c) in constraints.iter().enumerate() {
        let flip = c.rhs < 0.0;
        let sign = if flip { -1.0 } else { 1.0 };
        for (j, &a) in c.coeffs.iter().enumerate() {
            rows[i][j] = sign * a;
        }
        rhs[i] = sign * c.rhs;
        let rel = match (c.rel, flip) {
            (Rel::Eq, _) => Rel::Eq,
            (Rel::Le, false) | (Rel::Ge, true) => Rel::Le,
            (Rel::Ge, false) | (Rel::Le, true) => Rel::Ge,
        };
        match rel {
            Rel::Le => {
                rows[i][num_vars + slack_idx] = 1.0;
                slack_idx += 1;
            }
            Rel::Ge => {
                rows[i][num_vars + slack_idx] = -1.0;
                slack_idx += 1;
            }
            Rel::Eq => {}
        }
        // Artificial variable starts basic in every row.
        rows[i][num_vars + num_slack + i] = 1.0;
        basis[i] = num_vars + num_slack + i;
    }

    let max_pivots = 200 * (total + m + 10);

    // Phase one: minimize the sum of artificials.
    let mut phase1_cost = vec![0.0; total];
    for j in (num_vars + num_slack)..total {
        phase1_cost[j] = 1.0;
    }
    run_simplex(
        &mut rows,
        &mut rhs,
        &mut basis,
        &phase1_cost,
        total,
        max_pivots,
    )?;
    let residual: f64 = basis
        .iter()
        .zip(rhs.iter())
        .filter(|(&b, _)| b >= num_vars + num_slack)
        .map(|(_, &v)| v)
        .sum();
    if residual > feasibility_tol {
        return Ok(LpOutcome::Infeasible { residual });
    }

    // Pivot remaining artificials out of the basis where possible; rows where
    // that fails are redundant and their artificial stays at value ~0.
    for i in 0..m {
        if basis[i] >= num_vars + num_slack {
            if let Some(j) = (0..num_vars + num_slack)
                .find(|&j| rows[i][j].abs() > PIVOT_TOL)
            {
                pivot(&mut rows, &mut rhs, &mut basis, i, j);
            }
        }
    }

    // Phase two is skipped for pure feasibility problems.
    let objective_vec: Vec<f64> = match objective {
        Some(obj) => {
            let mut cost = vec![0.0; total];
            // Maximize obj == minimize -obj.
            for (j, &o) in obj.iter().enumerate() {
                cost[j] = -o;
            }
            // Forbid artificials from re-entering.
            for c in cost.iter_mut().take(total).skip(num_vars + num_slack) {
                *c = f64::INFINITY;
            }
            cost
        }
        None => {
            let x = extract(&basis, &rhs, num_vars);
            return Ok(LpOutcome::Optimal { x, objective: 0.0 });
        }
    };

    match run_simplex(
        &mut rows,
        &mut rhs,
        &mut basis,
        &objective_vec,
        total,
        max_pivots,
    )? {
        true => {
            let x = extract(&basis, &rhs, num_vars);
            let objective = objective
                .unwrap()
                .iter()
                .zip(&x)
                .map(|(o, v)| o * v)
                .sum();
            Ok(LpOutcome::Optimal { x, objective })
        }
        false => Ok(LpOutcome::Unbounded),
    }
}

fn extract(basis: &[usize], rhs: &[f64], num_vars: usize) -> Vec<f64> {
    let mut x = vec![0.0; num_vars];
    for (i, &b) in basis.iter().enumerate() {
        if b < num_vars {
            x[b] = rhs[i].max(0.0);
        }
    }
    x
}

/// Minimizes `cost . x` over the current tableau with Bland's rule.
/// Returns Ok(false) when unbounded. Columns with infinite cost never enter.
fn run_simplex(
    rows: &mut [Vec<f64>],
    rhs: &mut [f64],
    basis: &mut [usize],
    cost: &[f64],
    total: usize,
    max_pivots: usize,
) -> Result<bool> {
    let m = rows.len();
    for pivots in 0..=max_pivots {
        // Reduced costs: c_j - c_B . B^-1 A_j, computed from the tableau.
        let mut entering = None;
        for j in 0..total {
            if cost[j].is_infinite() || basis.contains(&j) {
                continue;
            }
            let mut reduced = cost[j];
            for i in 0..m {
                let cb = cost[basis[i]];
                if cb != 0.0 && cb.is_finite() {
                    reduced -= cb * rows[i][j];
                }
            }
            if reduced < -PIVOT_TOL {
                entering = Some(j); // Bland: first (lowest-index) improving column
                break;
            }
        }
        let Some(enter) = entering else {
            return Ok(true);
        };
        // Ratio test; Bland tie-break on the smallest basic variable index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = rows[i][enter];
            if a > PIVOT_TOL {
                let ratio = rhs[i] / a;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - PIVOT_TOL
                            || (ratio <= lr + PIVOT_TOL && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((leave_row, _)) = leave else {
            return Ok(false);
        };
        pivot(rows, rhs, basis, leave_row, enter);
        if pivots == max_pivots {
            return Err(Error::LpFailure {
                detail: format!(
                    "pivot limit {max_pivots} reached, basis {:?}, rhs norm {:.3e}",
                    &basis[..m.min(8)],
                    rhs.iter().map(|v| v * v).sum::<f64>().sqrt()
                ),
            });
        }
    }
    unreachable!()
}

fn pivot(rows: &mut [Vec<f64>], rhs: &mut [f64], basis: &mut [usize], r: usize, c: usize) {
    let p = rows[r][c];
    for v in rows[r].iter_mut() {
        *v /= p;
    }
    rhs[r] /= p;
    let pivot_row = rows[r].clone();
    let pivot_rhs = rhs[r];
    for i in 0..rows.len() {
        if i == r {
            continue;
        }
        let f = rows[i][c];
        if f != 0.0 {
            for (v, pv) in rows[i].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            rhs[i] -= f * pivot_rhs;
        }
    }
    basis[r] = c;
}
