//! Dense-tableau primal simplex for problems of the form
//! `max c'x  s.t.  Ax <= b, x >= 0` with `b >= 0`.
//!
//! Every matching program emitted by the builder has this shape (pinned
//! trades are substituted into the right-hand sides first), so the all-slack
//! basis is always feasible and no phase-1 is needed.
//!
//! Pivoting is deterministic: Dantzig pricing with lowest-index tie-breaks,
//! falling back to Bland's rule after a run of degenerate pivots so the
//! heavily degenerate matching instances cannot cycle.

use thiserror::Error;

/// Numerical tolerance for pivot selection and feasibility inside the
/// tableau. Tighter than the market-level epsilon so solver noise stays
/// below what the verifier can see.
const PIVOT_TOL: f64 = 1e-9;

/// Consecutive non-improving pivots tolerated under Dantzig pricing before
/// switching to Bland's rule.
const STALL_LIMIT: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum SimplexError {
    #[error("LP is unbounded along variable {entering}")]
    Unbounded { entering: usize },
    #[error("simplex exceeded {0} iterations without converging")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

/// One `<=` row: sparse coefficients over the structural variables.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

pub fn maximize(num_vars: usize, objective: &[f64], rows: &[Row]) -> Result<SimplexSolution, SimplexError> {
    debug_assert_eq!(objective.len(), num_vars);
    let m = rows.len();
    let n = num_vars;
    let width = n + m + 1; // structural + slack + rhs

    if n == 0 {
        return Ok(SimplexSolution { objective: 0.0, values: vec![], iterations: 0 });
    }

    // Tableau rows 0..m are constraints, row m is the objective row holding
    // reduced costs (negated objective initially).
    let mut t = vec![vec![0.0f64; width]; m + 1];
    for (i, row) in rows.iter().enumerate() {
        debug_assert!(row.rhs >= -PIVOT_TOL, "rhs must be non-negative, got {}", row.rhs);
        for &(j, a) in &row.coeffs {
            t[i][j] += a;
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = row.rhs.max(0.0);
    }
    for j in 0..n {
        t[m][j] = -objective[j];
    }

    let mut basis: Vec<usize> = (n..n + m).collect();
    let iteration_limit = 200 * (m + n) + 2000;
    let mut iterations = 0;
    let mut stalled = 0usize;
    let mut last_objective = 0.0f64;

    loop {
        let bland = stalled >= STALL_LIMIT;

        // Entering variable: most negative reduced cost (Dantzig) or the
        // lowest-index negative one (Bland). Lowest index also breaks
        // Dantzig ties, which keeps runs reproducible.
        let mut entering: Option<usize> = None;
        if bland {
            for j in 0..n + m {
                if t[m][j] < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
        } else {
            let mut best = -PIVOT_TOL;
            for j in 0..n + m {
                if t[m][j] < best {
                    best = t[m][j];
                    entering = Some(j);
                }
            }
        }
        let Some(enter) = entering else {
            // Optimal.
            let mut values = vec![0.0; n];
            for (i, &b) in basis.iter().enumerate() {
                if b < n {
                    values[b] = t[i][width - 1];
                }
            }
            let objective = -t[m][width - 1];
            return Ok(SimplexSolution { objective, values, iterations });
        };

        // Leaving row: minimum ratio; ties by lowest basis index (Bland).
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = t[i][enter];
            if a > PIVOT_TOL {
                let ratio = t[i][width - 1] / a;
                let better = ratio < best_ratio - PIVOT_TOL
                    || (ratio < best_ratio + PIVOT_TOL
                        && leave.map_or(true, |l| basis[i] < basis[l]));
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Err(SimplexError::Unbounded { entering: enter });
        };

        // Pivot.
        let pivot = t[leave][enter];
        let inv = 1.0 / pivot;
        for v in t[leave].iter_mut() {
            *v *= inv;
        }
        for i in 0..=m {
            if i == leave {
                continue;
            }
            let factor = t[i][enter];
            if factor.abs() > 0.0 {
                // Split borrows: copy the pivot row values on the fly.
                let (pivot_row, target) = if i < leave {
                    let (a, b) = t.split_at_mut(leave);
                    (&b[0], &mut a[i])
                } else {
                    let (a, b) = t.split_at_mut(i);
                    (&a[leave], &mut b[0])
                };
                for (tv, pv) in target.iter_mut().zip(pivot_row.iter()) {
                    *tv -= factor * pv;
                }
            }
        }
        basis[leave] = enter;

        iterations += 1;
        if iterations > iteration_limit {
            return Err(SimplexError::IterationLimit(iteration_limit));
        }

        let objective = -t[m][width - 1];
        if objective > last_objective + PIVOT_TOL {
            stalled = 0;
            last_objective = objective;
        } else {
            stalled += 1;
        }
    }
}
