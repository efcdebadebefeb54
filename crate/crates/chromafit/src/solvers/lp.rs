//! Small dense linear programming: a textbook primal simplex with Bland's
//! rule (so it cannot cycle and runs deterministically) over problems of the
//! form `min g'x  s.t.  A x <= b` with free variables.
//!
//! This is sized for coefficient hypercube extraction: a few dozen rows, a
//! few dozen unknowns. Free variables are split into positive and negative
//! parts and a phase-1 subproblem manufactures a feasible start when the
//! origin is not one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;

/// Minimizes `g'x` over `A x <= b` starting from a feasible `x0`.
fn simplex_from(
    objective: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: &DVector<f64>,
) -> Result<DVector<f64>> {
    let p = a.nrows();
    let n = a.ncols();
    debug_assert_eq!(objective.len(), n);
    debug_assert_eq!(b.len(), p);

    // x = x0 + u - v, slack s: [A, -A, I] [u; v; s] = b - A x0, all vars >= 0.
    let total = 2 * n + p;
    let mut tableau = DMatrix::zeros(p, total + 1);
    for r in 0..p {
        for c in 0..n {
            tableau[(r, c)] = a[(r, c)];
            tableau[(r, n + c)] = -a[(r, c)];
        }
        tableau[(r, 2 * n + r)] = 1.0;
        let slack = b[r] - a.row(r).transpose().dot(x0);
        tableau[(r, total)] = slack.max(0.0);
    }
    let mut basis: Vec<usize> = (2 * n..total).collect();

    // Reduced-cost row for the objective g'u - g'v (slacks cost nothing).
    let mut cost = DVector::zeros(total);
    for c in 0..n {
        cost[c] = objective[c];
        cost[n + c] = -objective[c];
    }
    // Initial basis is all slacks with zero cost, so reduced costs = cost.
    let mut reduced = cost.clone();

    let max_pivots = 50 * (p + total);
    for _ in 0..max_pivots {
        // Bland: entering column = smallest index with negative reduced cost.
        let Some(enter) = (0..total).find(|&c| reduced[c] < -PIVOT_TOL) else {
            let mut x = x0.clone();
            for (r, &var) in basis.iter().enumerate() {
                let val = tableau[(r, total)];
                if var < n {
                    x[var] += val;
                } else if var < 2 * n {
                    x[var - n] -= val;
                }
            }
            return Ok(x);
        };

        // Ratio test; ties broken by smallest basic-variable index (Bland).
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for r in 0..p {
            let t = tableau[(r, enter)];
            if t > PIVOT_TOL {
                let ratio = tableau[(r, total)] / t;
                let better = match leave {
                    None => true,
                    Some(lr) => {
                        ratio < best - 1e-12
                            || (ratio < best + 1e-12 && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some(r);
                    best = ratio;
                }
            }
        }
        let Some(leave) = leave else {
            return Err(Error::Unbounded(format!(
                "objective decreases without bound along variable {enter}"
            )));
        };

        // Pivot.
        let pivot = tableau[(leave, enter)];
        for c in 0..=total {
            tableau[(leave, c)] /= pivot;
        }
        for r in 0..p {
            if r != leave {
                let factor = tableau[(r, enter)];
                if factor != 0.0 {
                    for c in 0..=total {
                        tableau[(r, c)] -= factor * tableau[(leave, c)];
                    }
                }
            }
        }
        let factor = reduced[enter];
        if factor != 0.0 {
            for c in 0..total {
                reduced[c] -= factor * tableau[(leave, c)];
            }
        }
        basis[leave] = enter;
    }
    Err(Error::NoConvergence {
        limit: max_pivots,
        context: "simplex pivot budget exhausted".into(),
    })
}

/// Finds any point with `A x <= b` (within tolerance), or reports the problem
/// infeasible. Phase-1: minimize the single violation bound `t` in
/// `A x - t <= b`.
pub fn feasible_point(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let p = a.nrows();
    let n = a.ncols();
    let origin = DVector::zeros(n);
    let worst = (0..p).map(|r| -b[r]).fold(f64::NEG_INFINITY, f64::max);
    if worst <= FEAS_TOL {
        return Ok(origin);
    }

    let mut ext = DMatrix::zeros(p, n + 1);
    ext.view_mut((0, 0), (p, n)).copy_from(a);
    for r in 0..p {
        ext[(r, n)] = -1.0;
    }
    let mut g = DVector::zeros(n + 1);
    g[n] = 1.0;
    let mut start = DVector::zeros(n + 1);
    start[n] = worst + 1.0;
    let solution = simplex_from(&g, &ext, b, &start)?;
    let t = solution[n];
    if t > FEAS_TOL {
        return Err(Error::Infeasible(format!(
            "constraints cannot be satisfied; best residual violation {t:.3e}"
        )));
    }
    Ok(solution.rows(0, n).into_owned())
}

/// Minimizes `g'x` subject to `A x <= b`, locating a feasible start
/// internally.
pub fn minimize(objective: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if objective.len() != a.ncols() || b.len() != a.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "lp: objective {} x constraints {}x{} x rhs {}",
            objective.len(),
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let x0 = feasible_point(a, b)?;
    simplex_from(objective, a, b, &x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

/// How far coefficient `dim` can travel over `{c : f_min <= B c <= f_max}`.
/// These per-dimension extremes bound the hypercube that seed sampling draws
/// from.
pub fn coefficient_extreme(
    basis: &DMatrix<f64>,
    f_min: f64,
    f_max: f64,
    dim: usize,
    sense: Sense,
) -> Result<f64> {
    if dim >= basis.ncols() {
        return Err(Error::InvalidArgument(format!(
            "coefficient index {dim} out of range for a {}-term basis",
            basis.ncols()
        )));
    }
    if f_min.is_nan() || f_max.is_nan() || f_min > f_max {
        return Err(Error::Infeasible(format!(
            "transmittance bounds are empty: f_min {f_min} > f_max {f_max}"
        )));
    }
    let (a, b) = stack_box_rows(basis, f_min, f_max);
    let mut g = DVector::zeros(basis.ncols());
    g[dim] = match sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let x = minimize(&g, &a, &b)?;
    Ok(x[dim])
}

/// `f_min <= B c <= f_max` as single-sided rows `[B; -B] c <= [f_max; -f_min]`.
pub(crate) fn stack_box_rows(basis: &DMatrix<f64>, f_min: f64, f_max: f64) -> (DMatrix<f64>, DVector<f64>) {
    let p = basis.nrows();
    let m = basis.ncols();
    let mut a = DMatrix::zeros(2 * p, m);
    let mut b = DVector::zeros(2 * p);
    for r in 0..p {
        for c in 0..m {
            a[(r, c)] = basis[(r, c)];
            a[(p + r, c)] = -basis[(r, c)];
        }
        b[r] = f_max;
        b[p + r] = -f_min;
    }
    (a, b)
}
