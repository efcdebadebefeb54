//! Convex quadratic programming for the constrained filter subproblem:
//!
//! ```text
//!     minimize   || V G c - w ||^2
//!     subject to lower <= G c <= upper   (componentwise)
//! ```
//!
//! solved with a primal active-set method on the normal equations. At this
//! scale (at most 31 unknowns and 62 bound rows) dense KKT solves are exact
//! arithmetic, the iteration is deterministic (smallest-index tie breaking),
//! and there is no external solver to drag in.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solvers::lp;

/// Double-sided linear constraints `lower <= G c <= upper`. A bound may be
/// infinite on one side (used for positivity-only constraints); rows with
/// `lower == upper` are held as equalities.
#[derive(Debug, Clone)]
pub struct BoxLinearConstraints {
    g: DMatrix<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxLinearConstraints {
    pub fn new(g: DMatrix<f64>, lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != g.nrows() || upper.len() != g.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "constraint matrix has {} rows but bounds have {} / {}",
                g.nrows(),
                lower.len(),
                upper.len()
            )));
        }
        for r in 0..g.nrows() {
            let (lo, up) = (lower[r], upper[r]);
            if lo.is_nan() || up.is_nan() || lo == f64::INFINITY || up == f64::NEG_INFINITY {
                return Err(Error::InvalidData(format!(
                    "row {r}: bounds [{lo}, {up}] are not usable"
                )));
            }
            if lo > up {
                return Err(Error::Infeasible(format!(
                    "row {r}: lower bound {lo} exceeds upper bound {up}"
                )));
            }
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite constraint entry".into()));
        }
        Ok(BoxLinearConstraints { g, lower, upper })
    }

    /// `f_min <= (G c)_r <= f_max` for every row, the transmittance box.
    pub fn uniform(g: DMatrix<f64>, f_min: f64, f_max: f64) -> Result<Self> {
        let rows = g.nrows();
        Self::new(
            g,
            DVector::from_element(rows, f_min),
            DVector::from_element(rows, f_max),
        )
    }

    /// `(G c)_r >= 0` everywhere: the positivity-only constraint.
    pub fn nonnegative(g: DMatrix<f64>) -> Result<Self> {
        let rows = g.nrows();
        Self::new(
            g,
            DVector::zeros(rows),
            DVector::from_element(rows, f64::INFINITY),
        )
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// One-sided form `A c <= b` over the finite bounds only.
    fn one_sided(&self) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.g.ncols();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for r in 0..self.g.nrows() {
            if self.upper[r].is_finite() {
                rows.push(self.g.row(r).into_owned());
                rhs.push(self.upper[r]);
            }
            if self.lower[r].is_finite() {
                rows.push(-self.g.row(r).into_owned());
                rhs.push(-self.lower[r]);
            }
        }
        let mut a = DMatrix::zeros(rows.len(), m);
        for (i, row) in rows.iter().enumerate() {
            a.row_mut(i).copy_from(row);
        }
        (a, DVector::from_vec(rhs))
    }

    fn violation(&self, c: &DVector<f64>) -> f64 {
        let gc = &self.g * c;
        let mut worst: f64 = 0.0;
        for r in 0..gc.len() {
            worst = worst.max(self.lower[r] - gc[r]).max(gc[r] - self.upper[r]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub coefficients: DVector<f64>,
    pub active: Vec<(usize, Bound)>,
    pub iterations: usize,
    /// Infinity norm of the stationarity residual `H c - g + N' lambda`.
    pub stationarity: f64,
    /// Worst bound violation of the returned point (signed, 0 when interior).
    pub max_violation: f64,
    /// Largest scaled `|lambda_r * slack_r|` over all rows.
    pub complementary_slackness: f64,
    /// Whether the normal equations needed a ridge to become definite.
    pub ridged: bool,
}

const FEAS_TOL: f64 = 1e-9;

/// Minimizes `||V G c - w||^2` subject to `cons`. `V` already carries any
/// per-iteration rescaling; `G` is both the objective folding and the
/// constraint matrix.
pub fn solve_qp(
    v: &DMatrix<f64>,
    w: &DVector<f64>,
    cons: &BoxLinearConstraints,
) -> Result<QpSolution> {
    if v.ncols() != cons.g.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "design matrix has {} columns but constraints have {} rows",
            v.ncols(),
            cons.g.nrows()
        )));
    }
    if v.nrows() != w.len() {
        return Err(Error::ShapeMismatch(format!(
            "design matrix has {} rows but target has {} entries",
            v.nrows(),
            w.len()
        )));
    }

    let a = v * &cons.g;
    let m = a.ncols();
    let p = cons.g.nrows();
    let mut h = a.transpose() * &a;
    let mut gvec = a.transpose() * w;

    // The minimizer is invariant to a common rescaling of H and g; pin the
    // Hessian magnitude at 1 so every tolerance below is meaningful whatever
    // the data scale.
    let scale = h.diagonal().amax();
    if scale > 0.0 {
        h /= scale;
        gvec /= scale;
    }

    let mut ridged = false;
    if h.clone().cholesky().is_none() {
        let lambda = (1e-10 * h.trace() / m as f64).max(1e-30);
        for i in 0..m {
            h[(i, i)] += lambda;
        }
        ridged = true;
    }

    let mut c = feasible_start(cons)?;
    debug_assert!(cons.violation(&c) <= FEAS_TOL * 10.0);

    // Rows pinned as equalities never leave the working set.
    let mut working: Vec<(usize, Bound)> = (0..p)
        .filter(|&r| cons.lower[r] == cons.upper[r])
        .map(|r| (r, Bound::Upper))
        .collect();
    let equalities = working.len();

    let grad_scale = 1.0 + gvec.amax();
    let multiplier_tol = 1e-9 * grad_scale;
    let max_iterations = 10 * (m + p);

    for iteration in 1..=max_iterations {
        let grad = &h * &c - &gvec;
        let (direction, multipliers) = equality_step(&h, &cons.g, &working, &grad)?;

        let step_scale = 1.0 + c.amax();
        if direction.amax() <= 1e-11 * step_scale {
            // Stationary on the working set; check multiplier signs.
            let mut drop_candidate: Option<usize> = None;
            for (idx, &(row, side)) in working.iter().enumerate() {
                if idx < equalities {
                    continue;
                }
                let mu = multipliers[idx];
                let wrong = match side {
                    Bound::Upper => mu < -multiplier_tol,
                    Bound::Lower => mu > multiplier_tol,
                };
                if wrong && drop_candidate.is_none_or(|d| working[d].0 > row) {
                    drop_candidate = Some(idx);
                }
            }
            match drop_candidate {
                Some(idx) => {
                    working.remove(idx);
                    continue;
                }
                None => {
                    return Ok(finish(c, working, iteration, &h, &gvec, cons, ridged));
                }
            }
        }

        // Longest feasible step along the direction, capped at the full step.
        // Rows scan in index order, so ties pick the smallest row.
        let gc = &cons.g * &c;
        let gd = &cons.g * &direction;
        let dir_tol = 1e-13 * (1.0 + direction.amax());
        let mut alpha = 1.0;
        let mut blocker: Option<(usize, Bound)> = None;
        for r in 0..p {
            if working.iter().any(|&(wr, _)| wr == r) {
                continue;
            }
            let t = gd[r];
            let candidate = if t > dir_tol && cons.upper[r].is_finite() {
                Some((((cons.upper[r] - gc[r]) / t).max(0.0), Bound::Upper))
            } else if t < -dir_tol && cons.lower[r].is_finite() {
                Some((((cons.lower[r] - gc[r]) / t).max(0.0), Bound::Lower))
            } else {
                None
            };
            if let Some((room, side)) = candidate {
                if room < alpha {
                    alpha = room;
                    blocker = Some((r, side));
                }
            }
        }
        c += direction * alpha;
        if let Some(block) = blocker {
            working.push(block);
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                iteration,
                context: "QP iterate diverged".into(),
            });
        }
    }

    Err(Error::NoConvergence {
        limit: max_iterations,
        context: format!(
            "active-set QP stalled; best objective {:.6e}",
            (&a * &c - w).norm_squared()
        ),
    })
}

/// Start from the least-squares fit to the bound midpoints; fall back to a
/// phase-1 LP when that misses the feasible region.
fn feasible_start(cons: &BoxLinearConstraints) -> Result<DVector<f64>> {
    let p = cons.g.nrows();
    let mut mid = DVector::zeros(p);
    for r in 0..p {
        let (lo, up) = (cons.lower[r], cons.upper[r]);
        mid[r] = match (lo.is_finite(), up.is_finite()) {
            (true, true) => 0.5 * (lo + up),
            (true, false) => lo + 1.0,
            (false, true) => up - 1.0,
            (false, false) => 0.0,
        };
    }
    let (candidate, _) = crate::lls::lstsq_ridged(
        &cons.g,
        &DMatrix::from_column_slice(p, 1, mid.as_slice()),
    );
    let candidate = DVector::from_column_slice(candidate.as_slice());
    if cons.violation(&candidate) <= FEAS_TOL {
        return Ok(candidate);
    }
    let (a, b) = cons.one_sided();
    lp::feasible_point(&a, &b)
}

/// Solves the equality-constrained subproblem on the current working set:
/// direction `d` minimizing the quadratic model with `G_W d = 0`, plus the
/// multipliers of the working constraints.
fn equality_step(
    h: &DMatrix<f64>,
    g: &DMatrix<f64>,
    working: &[(usize, Bound)],
    grad: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let m = h.nrows();
    let k = working.len();
    let size = m + k;
    let mut kkt = DMatrix::zeros(size, size);
    kkt.view_mut((0, 0), (m, m)).copy_from(h);
    for (idx, &(row, _)) in working.iter().enumerate() {
        for c in 0..m {
            kkt[(m + idx, c)] = g[(row, c)];
            kkt[(c, m + idx)] = g[(row, c)];
        }
    }
    let mut rhs = DVector::zeros(size);
    for i in 0..m {
        rhs[i] = -grad[i];
    }
    let lu = kkt.clone().full_piv_lu();
    let solution = match lu.solve(&rhs) {
        Some(s) => s,
        None => {
            // Degenerate working set: fall back to a least-squares step.
            let svd = kkt.svd(true, true);
            svd.solve(&rhs, 1e-12)
                .map_err(|e| Error::RankDeficient {
                    cond: f64::INFINITY,
                    context: format!("singular KKT system: {e}"),
                })?
        }
    };
    let direction = solution.rows(0, m).into_owned();
    let multipliers = solution.rows(m, k).into_owned();
    Ok((direction, multipliers))
}

fn finish(
    c: DVector<f64>,
    working: Vec<(usize, Bound)>,
    iterations: usize,
    h: &DMatrix<f64>,
    gvec: &DVector<f64>,
    cons: &BoxLinearConstraints,
    ridged: bool,
) -> QpSolution {
    // Recover multipliers from the final stationarity condition.
    let grad = h * &c - gvec;
    let k = working.len();
    let mut lambdas = DVector::zeros(k);
    if k > 0 {
        let mut normals = DMatrix::zeros(cons.g.ncols(), k);
        for (idx, &(row, _)) in working.iter().enumerate() {
            for i in 0..cons.g.ncols() {
                normals[(i, idx)] = cons.g[(row, i)];
            }
        }
        let (sol, _) = crate::lls::lstsq_ridged(
            &normals,
            &DMatrix::from_column_slice(grad.len(), 1, (-&grad).as_slice()),
        );
        lambdas = DVector::from_column_slice(sol.as_slice());
    }

    let mut stat = grad.clone();
    for (idx, &(row, _)) in working.iter().enumerate() {
        for i in 0..stat.len() {
            stat[i] += lambdas[idx] * cons.g[(row, i)];
        }
    }

    let gc = &cons.g * &c;
    let mut comp: f64 = 0.0;
    for (idx, &(row, side)) in working.iter().enumerate() {
        let slack = match side {
            Bound::Upper => cons.upper[row] - gc[row],
            Bound::Lower => gc[row] - cons.lower[row],
        };
        let lam = lambdas[idx].abs();
        comp = comp.max(lam * slack.abs() / (1.0 + lam));
    }

    QpSolution {
        max_violation: cons.violation(&c),
        coefficients: c,
        active: working,
        iterations,
        stationarity: stat.amax(),
        complementary_slackness: comp,
        ridged,
    }
}
